"""Pure-Python (numpy) versions of the compiled kernels in ``_kernels.pyx``.

Both backends make the same pivot and iteration decisions; results agree
to rounding.
"""
import numpy as np

OPTIMAL = 0
INFEASIBLE = 1
UNBOUNDED = 2
PIVOT_CAP = 3


def perron_pair(M, tol, max_iter):
    """Perron root and eigenvector of a nonnegative matrix by Noda iteration.

    Starts from the all-ones vector with the Collatz-Wielandt upper bound as
    shift; every step solves ``(lam I - M) z = x`` and lowers ``lam`` by
    ``min(x / z)``. Stops once the residual is below ``tol`` (scaled by the
    matrix norm) and the Collatz-Wielandt bounds over the non-negligible
    entries agree to ``tol * lam``, or once the shift stops moving.
    Returns ``(lam, x, iterations, converged)`` with ``x`` scaled to unit
    max-norm.
    """
    M = np.ascontiguousarray(M, dtype=np.float64)
    n = M.shape[0]
    x = np.ones(n)
    y = M @ x
    lam = float(np.max(y))
    scale = max(1.0, float(np.max(np.sum(np.abs(M), axis=1))))
    eye = np.eye(n)
    delta = np.inf
    for it in range(1, max_iter + 1):
        y = M @ x
        xmax = float(np.max(np.abs(x)))
        res = float(np.max(np.abs(y - lam * x)))
        if res <= tol * xmax * scale:
            big = x > 1e-12 * xmax
            ratio = y[big] / x[big]
            if np.ptp(ratio) <= tol * lam or delta <= 4e-16 * lam:
                return lam, x, it, True
        z = None
        for _ in range(8):
            try:
                z = np.linalg.solve(lam * eye - M, x)
                break
            except np.linalg.LinAlgError:
                # shift landed exactly on an eigenvalue; nudge it upward
                lam += 1e-12 * scale
        if z is None:
            return lam, x, it, False
        pos = z > 0.0
        if not np.any(pos):
            return lam, x, it, False
        delta = float(np.min(x[pos] / z[pos]))
        lam = lam - delta
        x = z / float(np.max(np.abs(z)))
    return lam, x, max_iter, False


def _pivot(T, r, c):
    T[r, :] /= T[r, c]
    col = T[:, c].copy()
    col[r] = 0.0
    T -= np.outer(col, T[r, :])


def _bland(T, basis, m, ncols, tol, cap):
    obj = T[m]
    for _ in range(cap):
        neg = np.nonzero(obj[:ncols] < -tol)[0]
        if neg.size == 0:
            return OPTIMAL
        c = int(neg[0])
        best_r = -1
        best = 0.0
        for i in range(m):
            a = T[i, c]
            if a > tol:
                ratio = T[i, -1] / a
                if best_r < 0:
                    best_r, best = i, ratio
                else:
                    tie = 1e-12 * max(1.0, abs(best))
                    if ratio < best - tie or (
                        abs(ratio - best) <= tie and basis[i] < basis[best_r]
                    ):
                        best_r, best = i, ratio
        if best_r < 0:
            return UNBOUNDED
        _pivot(T, best_r, c)
        basis[best_r] = c
    return PIVOT_CAP


def simplex_min_sum(A, b, tol, feas_tol, cap):
    """Two-phase primal simplex for ``min 1'x  s.t.  A x = b, x >= 0``.

    Bland's rule (lowest eligible index) picks entering and leaving
    variables. Returns ``(status, x, basis)``; ``basis`` lists the basic
    column per row, with ``-1`` for rows left on an artificial.
    """
    A = np.array(A, dtype=np.float64)
    b = np.array(b, dtype=np.float64)
    m, n = A.shape
    flip = b < 0
    A[flip] *= -1.0
    b[flip] *= -1.0

    T = np.zeros((m + 1, n + m + 1))
    T[:m, :n] = A
    T[:m, n:n + m] = np.eye(m)
    T[:m, -1] = b
    T[m, :n] = -A.sum(axis=0)
    T[m, -1] = -b.sum()
    basis = np.arange(n, n + m)

    status = _bland(T, basis, m, n, tol, cap)
    if status != OPTIMAL:
        return status, np.zeros(n), -np.ones(m, dtype=np.int64)
    if -T[m, -1] > feas_tol:
        return INFEASIBLE, np.zeros(n), -np.ones(m, dtype=np.int64)

    for i in range(m):
        if basis[i] >= n:
            nz = np.nonzero(np.abs(T[i, :n]) > tol)[0]
            if nz.size:
                _pivot(T, i, int(nz[0]))
                basis[i] = int(nz[0])

    T[m, :] = 0.0
    T[m, :n] = 1.0
    for i in range(m):
        if basis[i] < n:
            T[m, :] -= T[i, :]
    status = _bland(T, basis, m, n, tol, cap)
    x = np.zeros(n)
    out_basis = -np.ones(m, dtype=np.int64)
    for i in range(m):
        if basis[i] < n:
            x[basis[i]] = T[i, -1]
            out_basis[i] = basis[i]
    return status, x, out_basis
