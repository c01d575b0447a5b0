import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from gsinrfb.errors import Infeasible
from gsinrfb.model import (
    BeamformerSet,
    ChannelSet,
    SystemConfig,
    avg_sinr_dl,
    build_coupling,
    generate_channel,
)
from gsinrfb.power import (
    even_totals,
    group_pp_allocate,
    group_pr_allocate,
    stream_pp_allocate,
    stream_pr_allocate,
    user_ratios,
)
from oracles import lp_vertex_min


def random_coupling(seed, K=2, M=6, N=2, L=None, gamma=1.0, p_max=10.0):
    cfg = SystemConfig(K=K, M=M, N=N, L=L, gamma=gamma, p_max=p_max)
    rng = np.random.default_rng(seed + 1000)
    ch = generate_channel(cfg, seed)

    def unit(r, c):
        q, _ = np.linalg.qr(rng.standard_normal((r, c)) + 1j * rng.standard_normal((r, c)))
        return q

    bf = BeamformerSet([unit(M, l) for l in cfg.L], [unit(n, l) for n, l in zip(cfg.N, cfg.L)])
    return cfg, ch, bf, build_coupling(ch, bf, cfg)


def scaled_identity_coupling(diag, p_max=10.0, gamma=1.0):
    cfg = SystemConfig(K=1, M=len(diag), N=len(diag), gamma=gamma, p_max=p_max)
    H = np.diag(np.sqrt(np.asarray(diag, dtype=float)))
    ch = ChannelSet((H,))
    bf = BeamformerSet.identity(cfg)
    return cfg, ch, bf, build_coupling(ch, bf, cfg)


def symmetric_coupling(p_max=10.0):
    cfg = SystemConfig(K=2, M=4, N=2, p_max=p_max)
    H0 = np.zeros((4, 2), dtype=complex)
    H0[:2] = np.array([[1.0, 0.2], [0.3, 0.9]])
    H1 = np.zeros((4, 2), dtype=complex)
    H1[2:] = H0[:2]
    H0[2:] += 0.1
    H1[:2] += 0.1
    ch = ChannelSet((H0, H1))
    bf = BeamformerSet([np.eye(4)[:, :2], np.eye(4)[:, 2:]], [np.eye(2), np.eye(2)])
    return cfg, ch, bf, build_coupling(ch, bf, cfg)


def _group_ratio_grid(cp, t):
    # independent of D and Psi: per-user sums of stream gains at p = t / L
    cfg = cp.cfg
    L = np.asarray(cfg.L, dtype=float)
    G = np.add.reduceat(cp.a_diag, list(cfg.offsets), axis=1) / L[None, :]
    sig = G * t[..., None, :]
    own = np.einsum("...kk->...k", sig)
    return own / (sig.sum(axis=-1) - own + L * cfg.noise_power) / np.asarray(cfg.gamma)


class TestGroupPr:
    def test_hand_example(self):
        cfg, ch, bf, cp = scaled_identity_coupling([2.0, 2.0])
        assert cp.D[0] == pytest.approx(1.0)
        sol = group_pr_allocate(cp)
        assert sol.level == pytest.approx(10.0)
        np.testing.assert_allclose(sol.p, [5.0, 5.0])
        assert avg_sinr_dl(0, ch, bf, sol.p, 1.0) == pytest.approx(10.0)

    def test_symmetric_users(self):
        _, _, _, cp = symmetric_coupling()
        sol = group_pr_allocate(cp)
        np.testing.assert_allclose(sol.t, [5.0, 5.0], rtol=1e-9)
        assert sol.ratios[0] == pytest.approx(sol.ratios[1], rel=1e-9)

    @pytest.mark.parametrize("seed", range(3))
    def test_grid_search_finds_nothing_better(self, seed):
        cfg, _, _, cp = random_coupling(seed, K=3, M=6, N=2)
        sol = group_pr_allocate(cp)
        assert np.ptp(sol.ratios) <= 1e-6 * sol.level
        assert sol.t.sum() == pytest.approx(cfg.p_max, rel=1e-8)
        n = 1000
        i, j = np.meshgrid(np.arange(n + 1), np.arange(n + 1), indexing="ij")
        keep = i + j <= n
        t = np.stack([i[keep], j[keep], n - i[keep] - j[keep]], axis=-1) * cfg.p_max / n
        best = np.max(np.min(_group_ratio_grid(cp, t), axis=-1))
        assert best <= sol.level * (1 + 1e-9)

    @settings(max_examples=30, deadline=None)
    @given(st.integers(0, 10_000), st.integers(1, 4))
    def test_duality_and_budget(self, seed, K):
        _, _, _, cp = random_coupling(seed, K=K, M=2 * K + 1, N=2)
        dl = group_pr_allocate(cp, "dl")
        ul = group_pr_allocate(cp, "ul")
        assert dl.level == pytest.approx(ul.level, rel=1e-8)
        assert dl.total == pytest.approx(cp.cfg.p_max, rel=1e-8)
        assert np.ptp(dl.ratios) <= 1e-6 * dl.level

    def test_budget_override(self):
        _, _, _, cp = scaled_identity_coupling([2.0, 2.0])
        assert group_pr_allocate(cp, p_max=20.0).level == pytest.approx(20.0)


class TestGroupPp:
    def test_hand_example(self):
        _, ch, bf, cp = scaled_identity_coupling([2.0, 2.0])
        sol = group_pp_allocate(cp)
        np.testing.assert_allclose(sol.p, [0.5, 0.5])
        assert avg_sinr_dl(0, ch, bf, sol.p, 1.0) == pytest.approx(1.0)

    def test_decoupled_users(self):
        cfg = SystemConfig(K=2, M=4, N=2)
        H0 = np.zeros((4, 2))
        H0[:2] = [[1.0, 0.5], [0.0, 2.0]]
        H1 = np.zeros((4, 2))
        H1[2:] = [[0.7, 0.0], [0.1, 0.4]]
        bf = BeamformerSet([np.eye(4)[:, :2], np.eye(4)[:, 2:]], [np.eye(2), np.eye(2)])
        cp = build_coupling(ChannelSet((H0, H1)), bf, cfg)
        assert np.all(cp.Psi == 0)
        np.testing.assert_allclose(group_pp_allocate(cp).t, cp.D * cfg.noise_power)

    @pytest.mark.parametrize("seed", range(5))
    def test_targets_met(self, seed):
        cfg, ch, bf, cp = random_coupling(seed, gamma=0.2)
        sol = group_pp_allocate(cp)
        for k in range(cfg.K):
            assert avg_sinr_dl(k, ch, bf, sol.p, 1.0) == pytest.approx(0.2, rel=1e-8)
        sol_ul = group_pp_allocate(cp, "ul")
        np.testing.assert_allclose(sol_ul.ratios, 1.0, rtol=1e-8)

    def test_infeasible_targets(self):
        _, _, _, cp = random_coupling(0, K=3, M=4, N=2, gamma=1e3)
        K = cp.cfg.K
        t = np.linalg.solve(np.eye(K) - cp.D[:, None] * cp.Psi, cp.D * cp.sigma_vec)
        assert np.any(t < 0)
        with pytest.raises(Infeasible):
            group_pp_allocate(cp)


class TestStreamPp:
    def test_single_constraint_corner(self):
        _, _, _, cp = scaled_identity_coupling([2.0, 1.0])
        sol = stream_pp_allocate(cp)
        np.testing.assert_allclose(sol.p, [1.0, 0.0], atol=1e-12)
        assert sol.total == pytest.approx(1.0)

    @pytest.mark.parametrize("seed", range(6))
    def test_no_more_power_than_group(self, seed):
        cfg, _, _, cp = random_coupling(seed, gamma=0.2)
        grp = group_pp_allocate(cp)
        sol = stream_pp_allocate(cp)
        assert sol.total <= grp.total * (1 + 1e-9)
        np.testing.assert_allclose(sol.ratios, 1.0, rtol=1e-8)

    @pytest.mark.parametrize("side", ["dl", "ul"])
    @pytest.mark.parametrize("seed", range(4))
    def test_vertex_oracle(self, seed, side):
        cfg, _, _, cp = random_coupling(seed, gamma=0.5)
        gains = cp.a_diag if side == "dl" else cp.b_diag
        A = -gains.copy()
        for k in range(cfg.K):
            A[k, cfg.streams(k)] = gains[k, cfg.streams(k)] / cfg.gamma[k]
        best = lp_vertex_min(A, cp.stream_noise)
        sol = stream_pp_allocate(cp, side)
        assert sol.total == pytest.approx(best, rel=1e-8)
        assert np.max(np.abs(A @ sol.p - cp.stream_noise)) <= 1e-9 * max(1.0, sol.total)


class TestStreamPr:
    def test_single_user_takes_budget(self):
        cfg, _, _, cp = scaled_identity_coupling([3.0, 1.0])
        sol = stream_pr_allocate(cp, even_totals(cfg))
        np.testing.assert_allclose(sol.t, [cfg.p_max])
        # split follows the own-stream gains
        np.testing.assert_allclose(sol.p, [7.5, 2.5])

    def test_symmetric_fixed_point(self):
        cfg, _, _, cp = symmetric_coupling()
        sol = stream_pr_allocate(cp, np.array([3.0, 7.0]), inner=True)
        np.testing.assert_allclose(sol.t, [5.0, 5.0], rtol=1e-9)

    @settings(max_examples=30, deadline=None)
    @given(st.integers(0, 10_000))
    def test_fixed_point_balances(self, seed):
        cfg, _, _, cp = random_coupling(seed)
        t0 = even_totals(cfg)
        one = stream_pr_allocate(cp, t0)
        assert one.t.sum() == pytest.approx(cfg.p_max, rel=1e-12)
        assert np.all(one.t > 0)
        sol = stream_pr_allocate(cp, t0, inner=True)
        again = stream_pr_allocate(cp, sol.t)
        assert np.max(np.abs(again.t - sol.t)) < 1e-9 * cfg.p_max
        r = user_ratios(cp, sol.p)
        assert np.ptp(r) <= 1e-6 * np.mean(r)

    def test_uplink_side(self):
        cfg, _, _, cp = random_coupling(3)
        sol = stream_pr_allocate(cp, even_totals(cfg), side="ul", inner=True)
        assert np.ptp(sol.ratios) <= 1e-6 * np.mean(sol.ratios)
        assert sol.side == "ul"
