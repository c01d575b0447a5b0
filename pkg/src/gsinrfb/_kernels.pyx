# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled hot kernels: Perron eigenpair (Noda iteration) and a dense
two-phase simplex. Mirrors ``_kernels_py`` decision for decision."""
import numpy as np
cimport numpy as cnp
from libc.math cimport fabs, INFINITY

cnp.import_array()

cdef enum:
    OPTIMAL = 0
    INFEASIBLE = 1
    UNBOUNDED = 2
    PIVOT_CAP = 3


cdef int _solve_inplace(double[:, ::1] a, double[::1] rhs, Py_ssize_t n) noexcept nogil:
    """Gaussian elimination with partial pivoting; answer left in ``rhs``.
    Returns 0 on success, 1 on an exactly zero pivot."""
    cdef Py_ssize_t i, j, k, p
    cdef double piv, f, tmp, best
    for k in range(n):
        p = k
        best = fabs(a[k, k])
        for i in range(k + 1, n):
            if fabs(a[i, k]) > best:
                best = fabs(a[i, k])
                p = i
        if best == 0.0:
            return 1
        if p != k:
            for j in range(n):
                tmp = a[k, j]
                a[k, j] = a[p, j]
                a[p, j] = tmp
            tmp = rhs[k]
            rhs[k] = rhs[p]
            rhs[p] = tmp
        piv = a[k, k]
        for i in range(k + 1, n):
            f = a[i, k] / piv
            if f != 0.0:
                for j in range(k, n):
                    a[i, j] -= f * a[k, j]
                rhs[i] -= f * rhs[k]
    for i in range(n - 1, -1, -1):
        tmp = rhs[i]
        for j in range(i + 1, n):
            tmp -= a[i, j] * rhs[j]
        rhs[i] = tmp / a[i, i]
    return 0


def perron_pair(M, double tol, int max_iter):
    cdef double[:, ::1] m = np.ascontiguousarray(M, dtype=np.float64)
    cdef Py_ssize_t n = m.shape[0]
    cdef Py_ssize_t i, j
    cdef int it, tries
    x_arr = np.ones(n)
    z_arr = np.empty(n)
    y_arr = np.empty(n)
    w_arr = np.empty((n, n))
    cdef double[::1] x = x_arr
    cdef double[::1] z = z_arr
    cdef double[::1] y = y_arr
    cdef double[:, ::1] w = w_arr
    cdef double lam, res, xmax, zmax, s, scale, delta, r, rlo, rhi
    cdef bint anypos, seen

    scale = 1.0
    lam = 0.0
    for i in range(n):
        s = 0.0
        for j in range(n):
            s += fabs(m[i, j])
        if s > scale:
            scale = s
        y[i] = 0.0
        for j in range(n):
            y[i] += m[i, j]
        if i == 0 or y[i] > lam:
            lam = y[i]

    delta = INFINITY
    for it in range(1, max_iter + 1):
        res = 0.0
        xmax = 0.0
        for i in range(n):
            s = 0.0
            for j in range(n):
                s += m[i, j] * x[j]
            y[i] = s
            r = fabs(s - lam * x[i])
            if r > res:
                res = r
            if fabs(x[i]) > xmax:
                xmax = fabs(x[i])
        if res <= tol * xmax * scale:
            # Collatz-Wielandt bounds over the non-negligible entries
            seen = False
            rlo = rhi = 0.0
            for i in range(n):
                if x[i] > 1e-12 * xmax:
                    r = y[i] / x[i]
                    if not seen or r < rlo:
                        rlo = r
                    if not seen or r > rhi:
                        rhi = r
                    seen = True
            if rhi - rlo <= tol * lam or delta <= 4e-16 * lam:
                return lam, x_arr, it, True
        for tries in range(8):
            for i in range(n):
                for j in range(n):
                    w[i, j] = -m[i, j]
                w[i, i] += lam
                z[i] = x[i]
            if _solve_inplace(w, z, n) == 0:
                break
            # shift landed exactly on an eigenvalue; nudge it upward
            lam += 1e-12 * scale
        else:
            return lam, x_arr, it, False
        anypos = False
        delta = 0.0
        zmax = 0.0
        for i in range(n):
            if z[i] > 0.0:
                r = x[i] / z[i]
                if not anypos or r < delta:
                    delta = r
                anypos = True
            if fabs(z[i]) > zmax:
                zmax = fabs(z[i])
        if not anypos:
            return lam, x_arr, it, False
        lam -= delta
        for i in range(n):
            x[i] = z[i] / zmax
    return lam, x_arr, max_iter, False


cdef void _pivot(double[:, ::1] T, Py_ssize_t r, Py_ssize_t c) noexcept nogil:
    cdef Py_ssize_t i, j
    cdef Py_ssize_t rows = T.shape[0]
    cdef Py_ssize_t cols = T.shape[1]
    cdef double piv = T[r, c]
    cdef double f
    for j in range(cols):
        T[r, j] /= piv
    for i in range(rows):
        if i == r:
            continue
        f = T[i, c]
        if f != 0.0:
            for j in range(cols):
                T[i, j] -= f * T[r, j]


cdef int _bland(double[:, ::1] T, cnp.int64_t[::1] basis, Py_ssize_t m,
                Py_ssize_t ncols, double tol, int cap) noexcept nogil:
    cdef Py_ssize_t last = T.shape[1] - 1
    cdef Py_ssize_t i, j, c, best_r
    cdef double a, ratio, best, tie
    cdef int it, tries
    for it in range(cap):
        c = -1
        for j in range(ncols):
            if T[m, j] < -tol:
                c = j
                break
        if c < 0:
            return OPTIMAL
        best_r = -1
        best = 0.0
        for i in range(m):
            a = T[i, c]
            if a > tol:
                ratio = T[i, last] / a
                if best_r < 0:
                    best_r = i
                    best = ratio
                else:
                    tie = 1e-12 * (fabs(best) if fabs(best) > 1.0 else 1.0)
                    if ratio < best - tie or (
                        fabs(ratio - best) <= tie and basis[i] < basis[best_r]
                    ):
                        best_r = i
                        best = ratio
        if best_r < 0:
            return UNBOUNDED
        _pivot(T, best_r, c)
        basis[best_r] = c
    return PIVOT_CAP


def simplex_min_sum(A, b, double tol, double feas_tol, int cap):
    a_in = np.array(A, dtype=np.float64)
    b_in = np.array(b, dtype=np.float64)
    cdef Py_ssize_t m = a_in.shape[0]
    cdef Py_ssize_t n = a_in.shape[1]
    cdef Py_ssize_t i, j
    cdef int status
    T_arr = np.zeros((m + 1, n + m + 1))
    basis_arr = np.arange(n, n + m, dtype=np.int64)
    cdef double[:, ::1] T = T_arr
    cdef cnp.int64_t[::1] basis = basis_arr
    cdef double[:, ::1] av = a_in
    cdef double[::1] bv = b_in
    cdef double sgn
    cdef Py_ssize_t last = n + m

    for i in range(m):
        sgn = -1.0 if bv[i] < 0.0 else 1.0
        for j in range(n):
            T[i, j] = sgn * av[i, j]
            T[m, j] -= T[i, j]
        T[i, n + i] = 1.0
        T[i, last] = sgn * bv[i]
        T[m, last] -= T[i, last]

    fail_x = np.zeros(n)
    fail_basis = -np.ones(m, dtype=np.int64)
    status = _bland(T, basis, m, n, tol, cap)
    if status != OPTIMAL:
        return status, fail_x, fail_basis
    if -T[m, last] > feas_tol:
        return INFEASIBLE, fail_x, fail_basis

    for i in range(m):
        if basis[i] >= n:
            for j in range(n):
                if fabs(T[i, j]) > tol:
                    _pivot(T, i, j)
                    basis[i] = j
                    break

    for j in range(last + 1):
        T[m, j] = 1.0 if j < n else 0.0
    for i in range(m):
        if basis[i] < n:
            for j in range(last + 1):
                T[m, j] -= T[i, j]
    status = _bland(T, basis, m, n, tol, cap)

    x = np.zeros(n)
    out_basis = -np.ones(m, dtype=np.int64)
    for i in range(m):
        if basis[i] < n:
            x[basis[i]] = T[i, last]
            out_basis[i] = basis[i]
    return status, x, out_basis
