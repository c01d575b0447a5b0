import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from gsinrfb.beamform import (
    bd_transmit,
    gsinr_receive_dl,
    gsinr_receive_ul,
    khachan_stream_beamformer,
)
from gsinrfb.errors import DimensionInfeasible
from gsinrfb.model import (
    BeamformerSet,
    ChannelSet,
    SystemConfig,
    avg_sinr_dl,
    dl_covariances,
    generate_channel,
    stream_sinrs_dl,
    ul_covariances,
)


def random_instance(seed, K=2, M=4, N=3, L=2):
    cfg = SystemConfig(K=K, M=M, N=N, L=L)
    rng = np.random.default_rng(seed)
    ch = generate_channel(cfg, seed)
    U = [np.linalg.qr(rng.standard_normal((M, l)) + 1j * rng.standard_normal((M, l)))[0] for l in cfg.L]
    bf = BeamformerSet(U, BeamformerSet.identity(cfg).V)
    p = rng.random(cfg.total_streams) * 5 + 0.1
    return cfg, ch, bf, p


class TestGsinrDownlink:
    def test_identity_pencil(self):
        cfg = SystemConfig(K=1, M=2, N=2)
        ch = ChannelSet((np.eye(2),))
        fb = gsinr_receive_dl(0, ch, BeamformerSet.identity(cfg), np.ones(2), 1.0)
        np.testing.assert_allclose(fb.sinrs, [1.0, 1.0])
        assert np.trace(fb.filters.conj().T @ fb.filters).real == pytest.approx(2.0)

    def test_scalar_channel(self):
        cfg = SystemConfig(K=1, M=1, N=1)
        ch = ChannelSet((np.array([[2.0 - 1.0j]]),))
        fb = gsinr_receive_dl(0, ch, BeamformerSet.identity(cfg), np.array([3.0]), 0.5)
        assert abs(fb.filters[0, 0]) == pytest.approx(1.0)
        assert fb.sinrs[0] == pytest.approx(3.0 * 5.0 / 0.5)

    @pytest.mark.parametrize("seed", range(8))
    def test_mean_eigenvalue_is_average_sinr(self, seed):
        cfg, ch, bf, p = random_instance(seed)
        for k in range(cfg.K):
            fb = gsinr_receive_dl(k, ch, bf, p, 0.3)
            new = bf.with_V([fb.filters if i == k else v for i, v in enumerate(bf.V)])
            assert np.mean(fb.sinrs) == pytest.approx(avg_sinr_dl(k, ch, new, p, 0.3), rel=1e-8)

    @settings(max_examples=40, deadline=None)
    @given(st.integers(0, 10_000), st.integers(1, 3))
    def test_normalization(self, seed, L):
        cfg, ch, bf, p = random_instance(seed, N=3, L=L)
        for k in range(cfg.K):
            V = gsinr_receive_dl(k, ch, bf, p, 0.2).filters
            _, r_n = dl_covariances(k, ch, bf, p, 0.2)
            assert np.trace(V.conj().T @ V).real == pytest.approx(L, abs=1e-9)
            W = V.conj().T @ r_n @ V
            off = W - np.diag(np.diag(W))
            assert np.max(np.abs(off), initial=0.0) <= 1e-8 * np.mean(np.diag(W).real)

    def test_per_stream_eigenvalues_are_whitened_sinrs(self):
        cfg, ch, bf, p = random_instance(2)
        fb = gsinr_receive_dl(0, ch, bf, p, 1.0)
        r_s, r_n = dl_covariances(0, ch, bf, p, 1.0)
        for j in range(cfg.L[0]):
            v = fb.filters[:, j]
            ratio = (v.conj() @ r_s @ v).real / (v.conj() @ r_n @ v).real
            assert ratio == pytest.approx(fb.sinrs[j], rel=1e-9)


class TestGsinrUplink:
    def test_identity_case(self):
        cfg = SystemConfig(K=1, M=2, N=2)
        ch = ChannelSet((np.eye(2),))
        fb = gsinr_receive_ul(0, ch, BeamformerSet.identity(cfg), np.ones(2), 1.0)
        np.testing.assert_allclose(fb.sinrs, [1.0, 1.0])

    def test_silent_interferers_reduce_to_plain_eig(self):
        cfg, ch, bf, q = random_instance(5)
        q[cfg.streams(1)] = 0.0
        fb = gsinr_receive_ul(0, ch, bf, q, 2.0)
        r_s, _ = ul_covariances(0, ch, bf, q, 2.0)
        top = np.sort(np.linalg.eigvalsh(r_s))[::-1][: cfg.L[0]] / 2.0
        np.testing.assert_allclose(fb.sinrs, top, rtol=1e-9)

    @pytest.mark.parametrize("seed", range(5))
    def test_residual_and_normalization(self, seed):
        cfg, ch, bf, q = random_instance(seed, K=3, M=6, N=2, L=2)
        for k in range(cfg.K):
            fb = gsinr_receive_ul(k, ch, bf, q, 0.5)
            r_s, r_n = ul_covariances(k, ch, bf, q, 0.5)
            U = fb.filters
            res = r_s @ U - r_n @ U * fb.sinrs
            assert np.max(np.abs(res)) <= 1e-10 * (np.linalg.norm(r_s) + np.linalg.norm(r_n)) * max(1, fb.sinrs[0])
            assert np.trace(U.conj().T @ U).real == pytest.approx(cfg.L[k], abs=1e-9)
            W = U.conj().T @ r_n @ U
            np.testing.assert_allclose(W, np.eye(cfg.L[k]) * W[0, 0].real, atol=1e-8 * abs(W[0, 0]))


class TestKhachan:
    def test_single_stream_matches_gsinr(self):
        cfg, ch, bf, p = random_instance(1, L=1)
        v, lam = khachan_stream_beamformer(0, 0, ch, bf, p, 1.0)
        fb = gsinr_receive_dl(0, ch, bf, p, 1.0)
        g = fb.filters[:, 0] / np.linalg.norm(fb.filters[:, 0])
        assert abs(np.vdot(v, g)) == pytest.approx(1.0, abs=1e-10)
        assert lam == pytest.approx(fb.sinrs[0], rel=1e-10)

    def test_eigenvalue_sum_dominated_by_gsinr(self):
        cfg = SystemConfig(K=1, M=2, N=2)
        ch = ChannelSet((np.array([[2.0, 0.5], [0.3, 1.0]]),))
        bf = BeamformerSet.identity(cfg)
        p = np.array([1.0, 2.0])
        fb = gsinr_receive_dl(0, ch, bf, p, 1.0)
        lams = [khachan_stream_beamformer(0, j, ch, bf, p, 1.0)[1] for j in range(2)]
        assert sum(lams) <= fb.sinrs.sum() * (1 + 1e-12)

    @pytest.mark.parametrize("seed", range(6))
    def test_eigenvalue_is_achieved_sinr(self, seed):
        cfg, ch, bf, p = random_instance(seed)
        for k in range(cfg.K):
            for j in range(cfg.L[k]):
                v, lam = khachan_stream_beamformer(k, j, ch, bf, p, 0.4)
                assert np.linalg.norm(v) == pytest.approx(1.0)
                V = bf.V[k].copy()
                V[:, j] = v
                new = bf.with_V([V if i == k else x for i, x in enumerate(bf.V)])
                assert stream_sinrs_dl(k, ch, new, p, 0.4)[j] == pytest.approx(lam, rel=1e-8)


class TestBlockDiagonalization:
    def test_single_user_full_space(self):
        cfg = SystemConfig(K=1, M=4, N=2)
        U = bd_transmit(generate_channel(cfg, 0), cfg)
        np.testing.assert_allclose(U[0].conj().T @ U[0], np.eye(2), atol=1e-10)

    @pytest.mark.parametrize("seed", range(5))
    def test_two_users_nulling(self, seed):
        cfg = SystemConfig(K=2, M=4, N=2)
        ch = generate_channel(cfg, seed)
        U = bd_transmit(ch, cfg)
        assert np.max(np.abs(ch.H[1].conj().T @ U[0])) <= 1e-10
        assert np.max(np.abs(ch.H[0].conj().T @ U[1])) <= 1e-10
        for u in U:
            np.testing.assert_allclose(u.conj().T @ u, np.eye(2), atol=1e-10)

    def test_picks_strongest_directions(self):
        cfg = SystemConfig(K=2, M=5, N=(2, 1), L=(1, 1))
        ch = generate_channel(cfg, 3)
        U = bd_transmit(ch, cfg)
        g = np.linalg.norm(ch.H[0].conj().T @ U[0])
        # any unit vector in the null space of H_2^H gains at most g
        rng = np.random.default_rng(0)
        _, _, vh = np.linalg.svd(ch.H[1].conj().T)
        null = vh[1:].conj().T
        for _ in range(50):
            x = null @ (rng.standard_normal(4) + 1j * rng.standard_normal(4))
            x /= np.linalg.norm(x)
            assert np.linalg.norm(ch.H[0].conj().T @ x) <= g + 1e-12

    def test_dimension_infeasible(self):
        cfg = SystemConfig(K=3, M=8, N=4)
        with pytest.raises(DimensionInfeasible):
            bd_transmit(generate_channel(cfg, 0), cfg)

    def test_too_many_streams_for_null_space(self):
        cfg = SystemConfig(K=2, M=5, N=(3, 3))
        with pytest.raises(DimensionInfeasible):
            bd_transmit(generate_channel(cfg, 0), cfg)
