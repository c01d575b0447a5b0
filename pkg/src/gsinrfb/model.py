"""System configuration, channels, beamformer containers and the SINR /
coupling quantities every solver reads.

Conventions: ``H[k]`` is stored ``M x N_k``; user ``k`` sees ``H[k]^H``.
Per-stream vectors (powers, couplings) are flat of length ``L = sum(L_k)``
with user ``k`` occupying ``cfg.streams(k)``.
"""
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from .errors import ConfigError, DimensionMismatch, ZeroSignalGain

__all__ = [
    "SystemConfig",
    "ChannelSet",
    "BeamformerSet",
    "PowerAllocation",
    "CouplingData",
    "generate_channel",
    "fixed_channel",
    "dl_covariances",
    "ul_covariances",
    "avg_sinr_dl",
    "avg_sinr_ul",
    "stream_sinrs_dl",
    "build_coupling",
    "sum_rate",
    "explode_streams",
    "db_to_linear",
]


def db_to_linear(db):
    return 10.0 ** (np.asarray(db, dtype=float) / 10.0)


def _as_tuple(value, K, name, cast):
    if np.isscalar(value):
        return tuple(cast(value) for _ in range(K))
    out = tuple(cast(v) for v in value)
    if len(out) != K:
        raise ConfigError(f"expected {K} entries, got {len(out)}", field=name)
    return out


@dataclass(frozen=True)
class SystemConfig:
    """Static description of one downlink system.

    Scalars given for ``N``, ``L`` or ``gamma`` are broadcast to all users;
    ``L`` defaults to ``N``. ``gamma`` is linear, powers are in watts.
    """

    K: int
    M: int
    N: tuple
    L: tuple = None
    gamma: tuple = 1.0
    noise_power: float = 1.0
    p_max: float = 10.0
    epsilon: float = 1e-3
    max_iters: int = 50

    def __post_init__(self):
        if int(self.K) < 1 or int(self.M) < 1:
            raise ConfigError("K and M must be positive")
        K = int(self.K)
        object.__setattr__(self, "K", K)
        object.__setattr__(self, "M", int(self.M))
        N = _as_tuple(self.N, K, "N", int)
        L = N if self.L is None else _as_tuple(self.L, K, "L", int)
        gamma = _as_tuple(self.gamma, K, "gamma", float)
        object.__setattr__(self, "N", N)
        object.__setattr__(self, "L", L)
        object.__setattr__(self, "gamma", gamma)
        for k in range(K):
            if not 1 <= L[k] <= min(self.M, N[k]):
                raise ConfigError(
                    f"user {k}: need 1 <= L_k <= min(M, N_k), got L_k={L[k]}", field="L"
                )
            if not gamma[k] > 0:
                raise ConfigError(f"user {k}: SINR target must be positive", field="gamma")
        for name in ("noise_power", "p_max", "epsilon"):
            if not float(getattr(self, name)) > 0:
                raise ConfigError("must be positive", field=name)
            object.__setattr__(self, name, float(getattr(self, name)))
        if int(self.max_iters) < 1:
            raise ConfigError("must be at least 1", field="max_iters")
        object.__setattr__(self, "max_iters", int(self.max_iters))

    @property
    def total_streams(self):
        return sum(self.L)

    @cached_property
    def offsets(self):
        return tuple(int(o) for o in np.concatenate(([0], np.cumsum(self.L)[:-1])))

    def streams(self, k):
        """Slice of user ``k``'s streams in flat per-stream vectors."""
        return slice(self.offsets[k], self.offsets[k] + self.L[k])

    @cached_property
    def stream_owner(self):
        return np.repeat(np.arange(self.K), self.L)

    def replace(self, **changes):
        from dataclasses import replace

        return replace(self, **changes)


@dataclass(frozen=True)
class ChannelSet:
    """Per-user channel matrices ``H[k]`` of shape ``M x N_k`` (read-only)."""

    H: tuple

    def __post_init__(self):
        mats = []
        for h in self.H:
            a = np.array(h, dtype=np.complex128)
            if a.ndim != 2 or not np.all(np.isfinite(a)):
                raise DimensionMismatch("channel matrices must be finite 2-D arrays")
            a.flags.writeable = False
            mats.append(a)
        object.__setattr__(self, "H", tuple(mats))

    @property
    def K(self):
        return len(self.H)

    def check(self, cfg):
        if self.K != cfg.K:
            raise DimensionMismatch(f"{self.K} channels for {cfg.K} users")
        for k, h in enumerate(self.H):
            if h.shape != (cfg.M, cfg.N[k]):
                raise DimensionMismatch(f"H[{k}] has shape {h.shape}, want {(cfg.M, cfg.N[k])}")
        return self


def generate_channel(cfg, seed):
    """I.i.d. CN(0, 1) entries, one seeded generator per call."""
    rng = np.random.default_rng(seed)
    mats = []
    for k in range(cfg.K):
        shape = (cfg.M, cfg.N[k])
        mats.append((rng.standard_normal(shape) + 1j * rng.standard_normal(shape)) / np.sqrt(2.0))
    return ChannelSet(tuple(mats))


def fixed_channel(cfg, value):
    """Deterministic channel with every entry equal to ``value``."""
    return ChannelSet(tuple(np.full((cfg.M, n), value, dtype=np.complex128) for n in cfg.N))


@dataclass
class BeamformerSet:
    """Transmit filters ``U[k]`` (``M x L_k``) and receive filters ``V[k]``
    (``N_k x L_k``)."""

    U: list
    V: list

    @classmethod
    def identity(cls, cfg, v_offsets=None):
        """Identity-slice start: ``U_k`` takes columns ``offset_k ...`` of
        ``I_M`` (wrapping when ``L > M``), ``V_k`` the leading columns of
        ``I_{N_k}`` shifted by ``v_offsets[k]``."""
        U, V = [], []
        eye_m = np.eye(cfg.M, dtype=np.complex128)
        for k in range(cfg.K):
            cols = (cfg.offsets[k] + np.arange(cfg.L[k])) % cfg.M
            U.append(eye_m[:, cols].copy())
            shift = 0 if v_offsets is None else v_offsets[k]
            eye_n = np.eye(cfg.N[k], dtype=np.complex128)
            V.append(eye_n[:, (shift + np.arange(cfg.L[k])) % cfg.N[k]].copy())
        return cls(U, V)

    def with_U(self, U):
        return BeamformerSet(list(U), list(self.V))

    def with_V(self, V):
        return BeamformerSet(list(self.U), list(V))

    @property
    def U_all(self):
        return np.hstack(self.U)


@dataclass
class PowerAllocation:
    """Per-stream downlink powers ``p`` and virtual-uplink powers ``q``."""

    p: np.ndarray
    q: np.ndarray = None

    def group(self, cfg, side="dl"):
        vec = self.p if side == "dl" else self.q
        return [vec[cfg.streams(k)] for k in range(cfg.K)]

    def totals(self, cfg, side="dl"):
        return np.array([g.sum() for g in self.group(cfg, side)])


def _offsets_of(mats):
    sizes = [m.shape[1] for m in mats]
    return np.concatenate(([0], np.cumsum(sizes))).astype(int)


def _split_cov(g, own, noise_power):
    # signal from the ``own`` columns, the rest plus white noise as R_n
    other = np.ones(g.shape[1], dtype=bool)
    other[own] = False
    gs, gn = g[:, own], g[:, other]
    r_s = gs @ gs.conj().T
    r_n = gn @ gn.conj().T + noise_power * np.eye(g.shape[0])
    return 0.5 * (r_s + r_s.conj().T), 0.5 * (r_n + r_n.conj().T)


def dl_covariances(k, ch, bf, p, noise_power):
    """Signal and interference-plus-noise covariances at user ``k``
    (``N_k x N_k``)."""
    off = _offsets_of(bf.U)
    g = ch.H[k].conj().T @ (bf.U_all * np.sqrt(np.asarray(p, dtype=float)))
    return _split_cov(g, slice(off[k], off[k + 1]), noise_power)


def ul_covariances(k, ch, bf, q, noise_power):
    """Virtual-uplink covariances at the base station for user ``k``
    (``M x M``); the receiver noise is ``noise_power * I_M``."""
    off = _offsets_of(bf.V)
    z = np.hstack([ch.H[i] @ bf.V[i] for i in range(len(bf.V))])
    g = z * np.sqrt(np.asarray(q, dtype=float))
    return _split_cov(g, slice(off[k], off[k + 1]), noise_power)


def avg_sinr_dl(k, ch, bf, p, noise_power):
    """Average downlink SINR of user ``k`` in the trace-normalized form:
    own-stream gains over cross-user leakage plus ``L_k * noise_power``."""
    p = np.asarray(p, dtype=float)
    off = _offsets_of(bf.U)
    w = bf.V[k].conj().T @ ch.H[k].conj().T
    gains = np.sum(np.abs(w @ bf.U_all) ** 2, axis=0)
    own = slice(off[k], off[k + 1])
    num = float(np.dot(p[own], gains[own]))
    den = float(np.dot(p, gains)) - num + bf.V[k].shape[1] * noise_power
    return num / den


def avg_sinr_ul(k, ch, bf, q, noise_power):
    """Uplink counterpart of :func:`avg_sinr_dl` seen through ``U_k``."""
    q = np.asarray(q, dtype=float)
    off = _offsets_of(bf.V)
    z = np.hstack([ch.H[i] @ bf.V[i] for i in range(len(bf.V))])
    gains = np.sum(np.abs(bf.U[k].conj().T @ z) ** 2, axis=0)
    own = slice(off[k], off[k + 1])
    num = float(np.dot(q[own], gains[own]))
    den = float(np.dot(q, gains)) - num + bf.U[k].shape[1] * noise_power
    return num / den


def stream_sinrs_dl(k, ch, bf, p, noise_power):
    """Per-stream SINRs of user ``k`` with every other stream, own streams
    included, counted as interference."""
    p = np.asarray(p, dtype=float)
    off = _offsets_of(bf.U)
    vk = bf.V[k]
    cross = np.abs(vk.conj().T @ ch.H[k].conj().T @ bf.U_all) ** 2  # (L_k, L)
    out = np.empty(vk.shape[1])
    for j in range(vk.shape[1]):
        col = off[k] + j
        sig = p[col] * cross[j, col]
        interf = float(np.dot(p, cross[j])) - sig
        out[j] = sig / (interf + noise_power * float(np.vdot(vk[:, j], vk[:, j]).real))
    return out


def sum_rate(ch, bf, p, noise_power):
    """Sum over users and streams of ``log2(1 + SINR)`` (unit SNR gap)."""
    return float(
        sum(np.sum(np.log2(1.0 + stream_sinrs_dl(k, ch, bf, p, noise_power))) for k in range(len(bf.V)))
    )


@dataclass
class CouplingData:
    """Stream-level couplings for fixed beamformers.

    ``a_diag[k, s]`` is ``[A_{j k}]_{ll}`` for stream ``s = (j, l)``: the
    gain of downlink stream ``s`` through user ``k``'s receive filters.
    ``b_diag[k, s]`` is ``[B_{j k}]_{ll}``: uplink stream ``s`` seen
    through the base-station filters ``U_k``. The group quantities ``D``,
    ``Psi`` (downlink) and ``D_ul``, ``Psi_ul`` (uplink, built from the
    B-matrices) follow from their per-user sums.
    """

    cfg: SystemConfig
    dl_gain: list = field(repr=False)
    ul_gain: list = field(repr=False)
    a_diag: np.ndarray = None
    b_diag: np.ndarray = None
    D: np.ndarray = None
    Psi: np.ndarray = None
    D_ul: np.ndarray = None
    Psi_ul: np.ndarray = None
    sigma_vec: np.ndarray = None
    stream_noise: np.ndarray = None

    def A(self, j, k):
        """``A_{jk} = U_j^H H_k V_k V_k^H H_k^H U_j`` (``L_j x L_j``)."""
        w = self.dl_gain[k][:, self.cfg.streams(j)]
        return w.conj().T @ w

    def B(self, j, k):
        """``B_{jk} = V_j^H H_j^H U_k U_k^H H_j V_j`` (``L_j x L_j``)."""
        y = self.ul_gain[k][:, self.cfg.streams(j)]
        return y.conj().T @ y


def _user_sums(cfg, diag):
    # out[k, j] = sum over user j's streams of diag[k, :]
    return np.add.reduceat(diag, list(cfg.offsets), axis=1)


def build_coupling(ch, bf, cfg):
    """Couplings ``A``/``B`` (diagonals), ``D``, ``Psi`` and noise terms.

    ``sigma_vec`` holds the group-form noise ``noise_power`` per user and
    ``stream_noise`` the per-stream form ``L_k * noise_power``.

    Raises
    ------
    ZeroSignalGain
        If some ``||V_k^H H_k^H U_k||_F`` vanishes.
    """
    U_all = bf.U_all
    z = np.hstack([ch.H[i] @ bf.V[i] for i in range(cfg.K)])  # M x L
    dl_gain = [bf.V[k].conj().T @ ch.H[k].conj().T @ U_all for k in range(cfg.K)]
    ul_gain = [bf.U[k].conj().T @ z for k in range(cfg.K)]
    a_diag = np.vstack([np.sum(np.abs(w) ** 2, axis=0) for w in dl_gain])
    b_diag = np.vstack([np.sum(np.abs(y) ** 2, axis=0) for y in ul_gain])
    L = np.asarray(cfg.L, dtype=float)
    gamma = np.asarray(cfg.gamma, dtype=float)

    fro_dl = _user_sums(cfg, a_diag)  # [k, j] = ||V_k^H H_k^H U_j||_F^2
    fro_ul = _user_sums(cfg, b_diag)  # [k, j] = ||U_k^H H_j V_j||_F^2
    own = np.diag(fro_dl).copy()
    if np.any(own <= 1e-28):
        raise ZeroSignalGain(f"users {np.nonzero(own <= 1e-28)[0].tolist()} have zero signal gain")
    scale = np.outer(L, L)
    Psi = fro_dl / scale
    np.fill_diagonal(Psi, 0.0)
    Psi_ul = fro_ul / scale
    np.fill_diagonal(Psi_ul, 0.0)
    return CouplingData(
        cfg=cfg,
        dl_gain=dl_gain,
        ul_gain=ul_gain,
        a_diag=a_diag,
        b_diag=b_diag,
        D=L**2 * gamma / own,
        Psi=Psi,
        D_ul=L**2 * gamma / np.diag(fro_ul),
        Psi_ul=Psi_ul,
        sigma_vec=np.full(cfg.K, cfg.noise_power),
        stream_noise=L * cfg.noise_power,
    )


def explode_streams(cfg, ch):
    """Recast every stream as a single-stream virtual user.

    Stream ``j`` of user ``k`` becomes a user with user ``k``'s channel and
    antennas, one stream and target ``gamma_k``. Returns the new config,
    channel set and the receive-identity shifts that keep the initial
    receive filters equal to the original identity slices.
    """
    users = [(k, j) for k in range(cfg.K) for j in range(cfg.L[k])]
    new_cfg = cfg.replace(
        K=len(users),
        N=tuple(cfg.N[k] for k, _ in users),
        L=tuple(1 for _ in users),
        gamma=tuple(cfg.gamma[k] for k, _ in users),
    )
    new_ch = ChannelSet(tuple(ch.H[k] for k, _ in users))
    return new_cfg, new_ch, [j for _, j in users]
