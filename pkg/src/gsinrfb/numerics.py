"""Dense kernels the solvers are built on.

Hermitian generalized eigenproblems, the Perron eigenpair of a nonnegative
matrix, small linear solves and a two-phase simplex for ``min 1'p`` over an
equality system. The Perron and simplex inner loops come from the compiled
``_kernels`` extension when it is importable, otherwise from
``_kernels_py``; set ``GSINRFB_PURE_PYTHON=1`` to force the fallback.
"""
import os
import warnings
from dataclasses import dataclass

import numpy as np
import scipy.linalg as sla

from ._kernels_py import INFEASIBLE, OPTIMAL, UNBOUNDED
from .errors import (
    DimensionMismatch,
    Infeasible,
    NonConvergence,
    NotPositiveDefinite,
    Singular,
    Unbounded,
)

if os.environ.get("GSINRFB_PURE_PYTHON", "") not in ("", "0"):
    from . import _kernels_py as _kern

    BACKEND = "python"
else:
    try:
        from . import _kernels as _kern

        BACKEND = "compiled"
    except ImportError:
        from . import _kernels_py as _kern

        BACKEND = "python"

__all__ = [
    "BACKEND",
    "EigResult",
    "as_complex_matrix",
    "hermitian_generalized_eig",
    "dominant_nonneg_eigpair",
    "solve_linear",
    "lp_min_sum",
]

PD_FLOOR_REL = 1e-12
PERRON_TOL = 1e-10
PERRON_MAX_ITER = 10_000
PIVOT_REL = 1e-12
SIMPLEX_TOL = 1e-11
SIMPLEX_CAP = 10_000


@dataclass(frozen=True)
class EigResult:
    """Top generalized eigenpairs; ``values`` descending, one column of
    ``vectors`` per value."""

    values: np.ndarray
    vectors: np.ndarray


def as_complex_matrix(a, name="matrix"):
    """Return ``a`` as a finite 2-D complex128 array or raise ``ValueError``."""
    arr = np.asarray(a, dtype=np.complex128)
    if arr.ndim != 2:
        raise DimensionMismatch(f"{name} must be 2-D, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} has non-finite entries")
    return arr


def hermitian_generalized_eig(A, B, m):
    """Largest ``m`` eigenpairs of the Hermitian pencil ``(A, B)``.

    LAPACK's Cholesky-based driver reduces the pencil to a standard
    Hermitian problem, so the returned vectors are B-orthonormal. Equal
    eigenvalues keep the solver's order, reversed stably.

    Parameters
    ----------
    A : array_like, (n, n)
        Hermitian positive semidefinite.
    B : array_like, (n, n)
        Hermitian positive definite; its smallest eigenvalue must exceed
        ``1e-12 * trace(B) / n``.
    m : int
        Number of pairs, ``1 <= m <= n``.

    Returns
    -------
    EigResult
    """
    A = as_complex_matrix(A, "A")
    B = as_complex_matrix(B, "B")
    n = B.shape[0]
    if A.shape != (n, n) or B.shape != (n, n):
        raise DimensionMismatch(f"pencil shapes {A.shape} and {B.shape} differ or are not square")
    if not 1 <= m <= n:
        raise DimensionMismatch(f"m={m} outside 1..{n}")
    A = 0.5 * (A + A.conj().T)
    B = 0.5 * (B + B.conj().T)
    floor = PD_FLOOR_REL * float(np.real(np.trace(B))) / n
    if floor <= 0.0 or np.linalg.eigvalsh(B)[0] <= floor:
        raise NotPositiveDefinite("B is not positive definite above the floor")
    try:
        w, v = sla.eigh(A, B, check_finite=False)
    except np.linalg.LinAlgError as exc:
        raise NotPositiveDefinite("Cholesky factorization of B failed") from exc
    order = np.argsort(-w, kind="stable")[:m]
    return EigResult(values=w[order].copy(), vectors=v[:, order])


def dominant_nonneg_eigpair(M):
    """Spectral radius and nonnegative eigenvector of a nonnegative matrix.

    The vector is scaled so its last entry is 1 (max-normalized instead if
    that entry vanishes); entries in ``[-1e-12, 0)`` are clamped to zero.

    Raises
    ------
    NonConvergence
        If the iteration cap is hit before ``|Mv - lam v|_inf`` drops to
        ``1e-10 |v|_inf max(1, |M|_inf)``.
    """
    M = np.asarray(M, dtype=np.float64)
    if M.ndim != 2 or M.shape[0] != M.shape[1]:
        raise DimensionMismatch(f"square matrix expected, got {M.shape}")
    if np.any(M < 0) or not np.all(np.isfinite(M)):
        raise ValueError("matrix must be finite and entrywise nonnegative")
    lam, x, iters, ok = _kern.perron_pair(M, PERRON_TOL, PERRON_MAX_ITER)
    if not ok:
        raise NonConvergence(f"Perron iteration stalled after {iters} steps")
    x = np.asarray(x, dtype=np.float64).copy()
    x[(x < 0) & (x >= -1e-12)] = 0.0
    if x[-1] > 0:
        x /= x[-1]
    else:
        x /= np.max(np.abs(x))
    return float(lam), x


def solve_linear(A, b):
    """Solve ``A x = b`` by LU with partial pivoting.

    Raises ``Singular`` when a pivot falls below ``1e-12`` times the
    largest row norm of ``A``.
    """
    A = np.asarray(A, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    n = A.shape[0]
    if A.shape != (n, n) or b.shape != (n,):
        raise DimensionMismatch(f"shapes {A.shape} and {b.shape} are incompatible")
    row_norm = float(np.max(np.linalg.norm(A, axis=1))) if n else 0.0
    with warnings.catch_warnings():
        # exact zero pivots are reported as Singular below
        warnings.simplefilter("ignore", sla.LinAlgWarning)
        lu, piv = sla.lu_factor(A, check_finite=True)
    if row_norm == 0.0 or np.min(np.abs(np.diag(lu))) < PIVOT_REL * row_norm:
        raise Singular("matrix is numerically singular")
    return sla.lu_solve((lu, piv), b)


def lp_min_sum(Aeq, beq):
    """Minimize ``sum(p)`` subject to ``Aeq p = beq`` and ``p >= 0``.

    Rows are equilibrated before the simplex runs; the basic variables of
    the optimal basis are then re-solved directly for accuracy. Bland's
    rule makes the answer deterministic on ties (lowest index wins).

    Raises
    ------
    Infeasible
        When phase one cannot drive the artificials to zero.
    """
    A = np.asarray(Aeq, dtype=np.float64)
    b = np.asarray(beq, dtype=np.float64)
    if A.ndim != 2 or b.shape != (A.shape[0],):
        raise DimensionMismatch(f"shapes {A.shape} and {b.shape} are incompatible")
    k, n = A.shape
    if k > n:
        raise DimensionMismatch(f"more constraints ({k}) than variables ({n})")
    scale = np.max(np.abs(A), axis=1)
    scale[scale == 0.0] = 1.0
    As = A / scale[:, None]
    bs = b / scale
    bmax = float(np.max(np.abs(bs))) if k else 0.0
    status, x, basis = _kern.simplex_min_sum(
        As, bs, SIMPLEX_TOL, 1e-9 * max(bmax, 1e-300), SIMPLEX_CAP
    )
    if status == INFEASIBLE:
        raise Infeasible("equality system has no nonnegative solution")
    if status == UNBOUNDED:
        raise Unbounded("simplex reported an unbounded objective")
    if status != OPTIMAL:
        raise NonConvergence("simplex pivot cap reached")
    x = np.asarray(x, dtype=np.float64).copy()
    cols = [int(c) for c in basis if c >= 0]
    if cols:
        xb, *_ = np.linalg.lstsq(A[:, cols], b, rcond=None)
        if np.all(xb >= -1e-12 * max(1.0, float(np.max(np.abs(xb))))):
            x[:] = 0.0
            x[cols] = xb
    x[x < 0] = 0.0
    return x
