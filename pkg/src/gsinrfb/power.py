"""Power allocation for fixed beamformers, downlink or virtual uplink.

Group allocation gives every stream of user ``k`` the power ``t_k / L_k``;
per-stream allocation sets each stream independently. All ratios below are
average-SINR-to-target ratios computed from :class:`CouplingData`.
"""
from dataclasses import dataclass

import numpy as np

from .errors import Infeasible, Singular, ZeroGain
from .numerics import dominant_nonneg_eigpair, lp_min_sum, solve_linear

__all__ = [
    "BalancedSolution",
    "user_ratios",
    "group_pr_allocate",
    "group_pp_allocate",
    "stream_pp_allocate",
    "stream_pr_allocate",
    "even_totals",
    "NEG_CLAMP",
    "INNER_TOL",
    "INNER_MAX",
]

NEG_CLAMP = 1e-12
INNER_TOL = 1e-10
INNER_MAX = 500


@dataclass
class BalancedSolution:
    """Result of one power step.

    ``p`` is the per-stream power vector of the side that was solved,
    ``t`` its per-user totals and ``level`` the balanced level (the common
    ratio for exact solvers, the minimum ratio otherwise).
    """

    p: np.ndarray
    t: np.ndarray
    level: float
    ratios: np.ndarray
    side: str = "dl"

    @property
    def total(self):
        return float(np.sum(self.p))


def _gains(cp, side):
    if side == "dl":
        return cp.a_diag
    if side == "ul":
        return cp.b_diag
    raise ValueError(f"side must be 'dl' or 'ul', got {side!r}")


def user_ratios(cp, p, side="dl"):
    """Average SINR over target for each user at per-stream powers ``p``."""
    cfg = cp.cfg
    per_user = np.add.reduceat(_gains(cp, side) * np.asarray(p, dtype=float), list(cfg.offsets), axis=1)
    own = np.diag(per_user)
    leak = per_user.sum(axis=1) - own
    return own / (leak + np.asarray(cfg.L) * cfg.noise_power) / np.asarray(cfg.gamma)


def _solution(cp, p, side, level=None):
    cfg = cp.cfg
    t = np.array([p[cfg.streams(k)].sum() for k in range(cfg.K)])
    ratios = user_ratios(cp, p, side)
    return BalancedSolution(
        p=p, t=t, level=float(np.min(ratios)) if level is None else float(level), ratios=ratios, side=side
    )


def _group_terms(cp, side):
    if side == "dl":
        return cp.D, cp.Psi
    if side == "ul":
        return cp.D_ul, cp.Psi_ul
    raise ValueError(f"side must be 'dl' or 'ul', got {side!r}")


def _spread(cfg, t):
    return np.repeat(np.asarray(t, dtype=float) / np.asarray(cfg.L, dtype=float), cfg.L)


def even_totals(cfg):
    """Per-user totals proportional to stream counts (budget ``p_max``)."""
    L = np.asarray(cfg.L, dtype=float)
    return cfg.p_max * L / L.sum()


def group_pr_allocate(cp, side="dl", p_max=None):
    """Max-min balanced group powers under the sum budget ``p_max``.

    The balanced level is the reciprocal Perron root of the extended
    coupling matrix ``[[D Psi, D s], [1' D Psi / P, 1' D s / P]]``; its
    Perron vector, scaled to a unit last entry, carries the user totals.
    ``p_max`` overrides the configured budget.
    """
    cfg = cp.cfg
    D, Psi = _group_terms(cp, side)
    P = cfg.p_max if p_max is None else float(p_max)
    dpsi = D[:, None] * Psi
    ds = D * cp.sigma_vec
    K = cfg.K
    ups = np.empty((K + 1, K + 1))
    ups[:K, :K] = dpsi
    ups[:K, K] = ds
    ups[K, :K] = dpsi.sum(axis=0) / P
    ups[K, K] = ds.sum() / P
    lam, vec = dominant_nonneg_eigpair(ups)
    t = vec[:K].copy()
    t *= P / t.sum()  # exact budget despite rounding in the eigenvector
    return _solution(cp, _spread(cfg, t), side, level=1.0 / lam)


def group_pp_allocate(cp, side="dl"):
    """Minimum-power group allocation meeting every target exactly.

    Raises
    ------
    Infeasible
        If ``I - D Psi`` is singular or the solution has a negative entry.
    """
    cfg = cp.cfg
    D, Psi = _group_terms(cp, side)
    try:
        t = solve_linear(np.eye(cfg.K) - D[:, None] * Psi, D * cp.sigma_vec)
    except Singular as exc:
        raise Infeasible("coupling system is singular") from exc
    if np.any(t < -NEG_CLAMP) or not np.all(np.isfinite(t)):
        raise Infeasible("targets need negative group power")
    t[t < 0] = 0.0
    return _solution(cp, _spread(cfg, t), side)


def stream_pp_allocate(cp, side="dl"):
    """Minimum-power per-stream allocation by linear programming.

    Row ``k`` reads ``sum_own p g / gamma_k - sum_other p g = L_k sigma^2``
    with ``g`` the stream gains seen through user ``k``'s filters.
    """
    cfg = cp.cfg
    gains = _gains(cp, side)
    A = -gains.copy()
    for k in range(cfg.K):
        A[k, cfg.streams(k)] = gains[k, cfg.streams(k)] / cfg.gamma[k]
    p = lp_min_sum(A, cp.stream_noise)
    return _solution(cp, p, side)


def _level_gains(cp, side):
    cfg = cp.cfg
    gains = _gains(cp, side)
    w = np.empty(cfg.total_streams)
    for k in range(cfg.K):
        own = gains[k, cfg.streams(k)]
        tot = float(own.sum())
        if not tot > 0:
            raise ZeroGain(f"user {k} has zero equivalent channel gain")
        w[cfg.streams(k)] = own / tot
    # g[j, k]: gain of user j's split stream bundle through user k's filters
    g = np.add.reduceat(gains * w, list(cfg.offsets), axis=1).T
    return w, g


def _level_update(cfg, g, t, P):
    gamma = np.asarray(cfg.gamma)
    interf = g.T @ t - np.diag(g) * t
    G = (np.diag(g) / gamma) / (interf + np.asarray(cfg.L) * cfg.noise_power)
    if np.any(G <= 0):
        raise ZeroGain("a level gain vanished")
    inv = 1.0 / G
    return P * inv / inv.sum()


def stream_pr_allocate(cp, t_prev, side="dl", inner=False, p_max=None):
    """Per-stream balancing by the level-gain fixed point.

    Within user ``k`` power follows the streams' own gains. One update
    ``t_k = P / (G_k sum_j 1/G_j)`` is made from ``t_prev``; with
    ``inner=True`` the update is repeated until ``max|dt| < 1e-10 P`` or
    500 steps. ``p_max`` overrides the configured budget.
    """
    cfg = cp.cfg
    P = cfg.p_max if p_max is None else float(p_max)
    w, g = _level_gains(cp, side)
    t = np.asarray(t_prev, dtype=float)
    for _ in range(INNER_MAX if inner else 1):
        t_new = _level_update(cfg, g, t, P)
        done = np.max(np.abs(t_new - t)) < INNER_TOL * P
        t = t_new
        if done:
            break
    p = w * np.repeat(t, cfg.L)
    sol = _solution(cp, p, side)
    sol.t = t
    return sol
