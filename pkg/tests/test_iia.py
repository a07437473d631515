import math

import numpy as np
import pytest

from bscluster.errors import ConvergenceError, DegenerateChannelError
from bscluster.longterm import CoalitionStructure, ergodic_rate_nats
from bscluster.netgen import ChannelRealization, Scenario
from bscluster.precoding import (
    iia_orthogonalize,
    iia_precoders,
    iia_relaxed_solve,
    instantaneous_rates,
    null_space_basis,
)

from conftest import make_network

SC = Scenario(num_cells=4)  # M=8, N=2, K=2, d=1, P=100


def rayleigh(rng, C, sc=SC, K=None):
    K = sc.mss_per_cell if K is None else K
    shape = (C, K, C, sc.ms_antennas, sc.bs_antennas)
    return (rng.standard_normal(shape) + 1j * rng.standard_normal(shape)) / math.sqrt(2)


def solve(H, seed=0, sc=SC):
    return iia_orthogonalize(iia_relaxed_solve(H, sc, seed), H, sc)


def test_singleton_converges_in_one_iteration():
    H = rayleigh(np.random.default_rng(0), 1)
    r = iia_relaxed_solve(H, SC, 0)
    assert r.iterations == 1 and r.leakage == 0.0
    sol = iia_orthogonalize(r, H, SC)
    assert np.max(sol.residuals(H)) <= 1e-8  # intracell zero forcing


def test_four_cell_convergence_rate():
    rng = np.random.default_rng(1)
    ok = 0
    for seed in range(40):
        H = rayleigh(rng, 4)
        try:
            sol = solve(H, seed)
        except ConvergenceError:
            continue
        ok += sol.leakage < 1e-8 * SC.tx_power
    assert ok >= 38


def test_five_cells_do_not_align():
    H = rayleigh(np.random.default_rng(2), 5)
    with pytest.raises(ConvergenceError) as err:
        iia_relaxed_solve(H, SC, 0, max_iters=300)
    assert err.value.leakage > 1e-6 and err.value.iterations == 300


@pytest.mark.parametrize("C", [1, 2, 3, 4])
def test_structural_properties(C):
    rng = np.random.default_rng(C)
    for seed in range(5):
        H = rayleigh(rng, C)
        sol = solve(H, seed)
        assert np.max(sol.residuals(H)) <= 1e-8
        UhU = np.einsum("iknd,ikne->ikde", sol.U.conj(), sol.U)
        VhV = np.einsum("ikmd,ikme->ikde", sol.V.conj(), sol.V)
        np.testing.assert_allclose(UhU, np.broadcast_to(np.eye(1), UhU.shape), atol=1e-10)
        np.testing.assert_allclose(VhV, np.broadcast_to(SC.tx_power / 2 * np.eye(1), VhV.shape), atol=1e-10)
        # stacked matrices kept for inspection
        assert sol.A[0].shape == (8, (C - 1) * 2)
        assert sol.B[0][0].shape == (8, 1 + (C - 1) * 2)
        assert sol.D[0][0][0].shape == (2, (C - 1) * 2)
        G = sol.effective_channels(H)
        for i in range(C):
            for k in range(2):
                assert abs(G[i, k, i, k, 0, 0]) >= 1e-6 * math.sqrt(SC.tx_power / 2)


def test_two_streams_per_ms():
    sc = Scenario(num_cells=2, mss_per_cell=1, bs_antennas=6, ms_antennas=4, streams_per_ms=2)
    H = rayleigh(np.random.default_rng(5), 2, sc)
    sol = solve(H, 0, sc)
    assert np.max(sol.residuals(H)) <= 1e-8
    np.testing.assert_allclose(np.linalg.norm(sol.U, axis=2), 1.0, atol=1e-12)
    VhV = sol.V[0, 0].conj().T @ sol.V[0, 0]
    np.testing.assert_allclose(VhV, sc.tx_power / 2 * np.eye(2), atol=1e-10)


def test_null_space_basis():
    rng = np.random.default_rng(0)
    X = rng.standard_normal((5, 2)) + 1j * rng.standard_normal((5, 2))
    Nb = null_space_basis(X, 3)
    np.testing.assert_allclose(Nb.conj().T @ X, 0, atol=1e-12)
    np.testing.assert_allclose(Nb.conj().T @ Nb, np.eye(3), atol=1e-12)
    with pytest.raises(DegenerateChannelError):
        null_space_basis(X, 4)
    assert null_space_basis(np.zeros((3, 0)), 2).shape == (3, 2)


def test_dead_direct_link_is_degenerate():
    H = rayleigh(np.random.default_rng(3), 2)
    H[1, 0, 1] = 0.0
    with pytest.raises(DegenerateChannelError):
        solve(H)


def test_effective_channel_statistics():
    # desired f = u^H H_iki v and intercoalition g = u^H H_ikj v_j are CN(0, gamma P / (K d))
    sc = Scenario(num_cells=4, tx_snr_db=20.0)
    gains = np.ones((4, 2, 4))
    gains[:, :, 2:] *= 0.3
    gains[2:, :, :] = 1.0
    net = make_network(gains, sc, 1000)
    S = CoalitionStructure([[0, 1], [2, 3]])
    rng = np.random.default_rng(4)
    f, g = [], []
    for draw in range(2000):
        z = rng.standard_normal((4, 2, 4, 2, 8)) + 1j * rng.standard_normal((4, 2, 4, 2, 8))
        H = np.sqrt(gains / 2)[..., None, None] * z
        U, V = iia_precoders(S, ChannelRealization(H), sc, net, rng_seed=draw)
        f.append(U[0, 0].conj().T @ H[0, 0, 0] @ V[0, 0])
        g.append(U[0, 0].conj().T @ H[0, 0, 2] @ V[2, 1])
    target = sc.tx_power / 2
    for samples, gamma in ((np.ravel(f), 1.0), (np.ravel(g), 0.3)):
        se = math.sqrt(gamma * target / len(samples))
        assert abs(samples.mean()) <= 4 * se
        assert np.var(samples) == pytest.approx(gamma * target, rel=0.08)


def test_isolated_coalition_rate_matches_closed_form():
    rng = np.random.default_rng(6)
    rates = []
    for seed in range(3000):
        H = rayleigh(rng, 3)
        sol = solve(H, seed)
        r = instantaneous_rates(None, ChannelRealization(H), sol.U[..., :], sol.V, retrain=False)
        desired = np.einsum("ikikdd->ikd", sol.effective_channels(H))
        np.testing.assert_allclose(r, np.log2(1 + np.abs(desired) ** 2), rtol=1e-9)
        rates.append(r.mean())
    closed = ergodic_rate_nats(SC.tx_power / 2) / math.log(2)
    assert np.mean(rates) == pytest.approx(closed, rel=0.03)
