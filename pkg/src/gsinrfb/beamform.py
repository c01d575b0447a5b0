"""Receive/transmit beamformers: the group max-SINR filter bank, the
independent per-stream max-SINR filter and block diagonalization."""
from typing import NamedTuple

import numpy as np

from .errors import DimensionInfeasible
from .model import dl_covariances, ul_covariances
from .numerics import hermitian_generalized_eig

__all__ = [
    "FilterBank",
    "gsinr_receive_dl",
    "gsinr_receive_ul",
    "khachan_stream_beamformer",
    "bd_transmit",
    "BD_RANK_REL",
]

BD_RANK_REL = 1e-10


class FilterBank(NamedTuple):
    """Filter columns plus the per-stream generalized eigenvalues (the
    stream SINRs of the pencil, descending)."""

    filters: np.ndarray
    sinrs: np.ndarray


def _filter_bank(r_s, r_n, n_streams):
    res = hermitian_generalized_eig(r_s, r_n, n_streams)
    v = res.vectors
    s = float(np.real(np.trace(v.conj().T @ v)))
    # B-orthonormal columns, then one scalar so that trace(V^H V) = L_k
    return FilterBank(v * np.sqrt(n_streams / s), res.values)


def gsinr_receive_dl(k, ch, bf, p, noise_power):
    """Downlink group max-SINR receive filters ``V_k`` (``N_k x L_k``).

    Columns are the top ``L_k`` generalized eigenvectors of
    ``(R_s, R_n)`` at user ``k``, scaled so that ``trace(V^H V) = L_k`` and
    ``V^H R_n V`` stays a scaled identity.
    """
    r_s, r_n = dl_covariances(k, ch, bf, p, noise_power)
    return _filter_bank(r_s, r_n, bf.U[k].shape[1])


def gsinr_receive_ul(k, ch, bf, q, noise_power):
    """Virtual-uplink counterpart of :func:`gsinr_receive_dl`, giving the
    transmit filters ``U_k`` (``M x L_k``)."""
    r_s, r_n = ul_covariances(k, ch, bf, q, noise_power)
    return _filter_bank(r_s, r_n, bf.V[k].shape[1])


def khachan_stream_beamformer(k, j, ch, bf, p, noise_power):
    """Max-SINR receive vector for stream ``j`` of user ``k`` when all other
    streams, the user's own included, count as interference.

    The signal covariance carries the stream power, so the returned
    eigenvalue is the stream SINR achieved by the unit-norm vector.

    Returns
    -------
    v : ndarray, (N_k,)
    sinr : float
    """
    p = np.asarray(p, dtype=float)
    off = np.concatenate(([0], np.cumsum([u.shape[1] for u in bf.U]))).astype(int)
    col = off[k] + j
    hk = ch.H[k].conj().T
    g = hk @ bf.U_all  # N_k x L
    weighted = g * np.sqrt(p)
    r_all = weighted @ weighted.conj().T
    r_s = np.outer(weighted[:, col], weighted[:, col].conj())
    r_n = r_all - r_s + noise_power * np.eye(hk.shape[0])
    res = hermitian_generalized_eig(r_s, 0.5 * (r_n + r_n.conj().T), 1)
    v = res.vectors[:, 0]
    return v / np.linalg.norm(v), float(res.values[0])


def bd_transmit(ch, cfg):
    """Block-diagonalization transmit filters.

    ``U_k`` spans the ``L_k`` strongest equivalent-channel directions inside
    the null space of the other users' stacked channels, so
    ``H_i^H U_k = 0`` for ``i != k`` and ``U_k^H U_k = I``.

    Raises
    ------
    DimensionInfeasible
        When ``M <= sum_{i != k} N_i`` for some ``k``, or the null space is
        thinner than ``L_k``.
    """
    U = []
    for k in range(cfg.K):
        others = [i for i in range(cfg.K) if i != k]
        n_other = sum(cfg.N[i] for i in others)
        if cfg.M <= n_other:
            raise DimensionInfeasible(
                f"user {k}: M={cfg.M} <= {n_other} interfering receive antennas"
            )
        if others:
            stacked = np.vstack([ch.H[i].conj().T for i in others])
            _, sv, vh = np.linalg.svd(stacked)
            rank = int(np.sum(sv > BD_RANK_REL * sv[0])) if sv.size and sv[0] > 0 else 0
            null = vh[rank:].conj().T
        else:
            null = np.eye(cfg.M, dtype=np.complex128)
        if null.shape[1] < cfg.L[k]:
            raise DimensionInfeasible(
                f"user {k}: null space has {null.shape[1]} dimensions for {cfg.L[k]} streams"
            )
        _, _, wh = np.linalg.svd(ch.H[k].conj().T @ null)
        U.append(null @ wh[: cfg.L[k]].conj().T)
    return U
