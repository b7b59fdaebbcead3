import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from lursync.graph import TorusSpec, UncertainGraph, ring_graph, spectra
from lursync.margin import critical_cod
from lursync.prl import InputError, LureSystem, check_reduced_sync_condition, sector_check
from lursync.simulator import (
    ChuaParams,
    NetworkSimConfig,
    Nonlinearity,
    _trial_inputs,
    build_chua_network_system,
    chua_continuous,
    chua_nonlinearity,
    sample_link_weights,
    simulate,
    step_network,
    sync_error,
)

ZERO = Nonlinearity("zero")


def scalar(a, D=1.0):
    return LureSystem([[a]], [[1.0]], [[1.0]], [[D]])


class TestChua:
    def test_values(self):
        assert chua_nonlinearity(0.0) == 0.0
        assert chua_nonlinearity(2.0) == pytest.approx(0.9, abs=1e-15)

    def test_continuity_at_one(self):
        p = ChuaParams()
        outer = (p.epsilon - p.m0 + p.m1) * 1.0 + (p.m0 - p.m1)
        assert outer == pytest.approx(p.epsilon, abs=1e-15)
        assert chua_nonlinearity(1.0) == pytest.approx(p.epsilon)
        assert chua_nonlinearity(1.0 + 1e-12) == pytest.approx(p.epsilon, abs=1e-11)

    @settings(max_examples=50, deadline=None)
    @given(st.floats(-50, 50))
    def test_odd(self, y):
        assert chua_nonlinearity(-y) == -chua_nonlinearity(y)

    def test_continuous_matrices(self):
        A, B, C = chua_continuous()
        np.testing.assert_array_equal(A, [[0, 7.5, 0], [1, -1, 1], [0, -15, 0]])
        np.testing.assert_array_equal(B, [[7.5], [0], [0]])
        np.testing.assert_array_equal(C, [[1, 0, 0]])

    def test_discretisation(self):
        T = 0.01
        A, B, _ = chua_continuous()
        sys, nl = build_chua_network_system(ChuaParams(), T)
        second = T * B + T * T / 2 * A @ B
        err2 = np.abs(sys.B - second).max()
        assert err2 < 5e-5
        assert err2 < np.abs(sys.B - T * B).max() / 10
        assert nl.kind == "chua"

    def test_default_sector_admits_diode(self):
        p = ChuaParams()
        sys, nl = build_chua_network_system(p)
        assert sys.D[0, 0] == pytest.approx(0.99 / 0.6)
        assert sector_check(nl, sys.D, np.linspace(-6, 6, 301), sys.D1)


class TestNoise:
    @pytest.mark.parametrize("model", ["gaussian", "shifted-bernoulli"])
    @pytest.mark.parametrize("mu,var", [(1.0, 0.5), (0.7, 2.0)])
    def test_moments(self, model, mu, var):
        n = 100_000
        w = sample_link_weights(np.random.default_rng(0), [mu], [var], model, n)[:, 0]
        xi = w - mu
        if model == "gaussian":
            m4 = 3 * var * var
        else:
            p = mu * mu / (mu * mu + var)
            m4 = (1 - p) * mu**4 + p * (mu * (1 - p) / p) ** 4
        assert abs(xi.mean()) < 3 * math.sqrt(var / n)
        assert abs(xi.var() - var) < 3 * math.sqrt((m4 - var * var) / n)

    def test_bernoulli_support(self):
        w = sample_link_weights(np.random.default_rng(1), [2.0], [2.0], "shifted-bernoulli", 1000)
        # p = mu^2 / (mu^2 + var) = 2/3, so the nonzero value is mu / p = 3
        assert set(np.unique(w)) == {0.0, 3.0}

    def test_torus_noise_is_shared(self):
        cfg = NetworkSimConfig(scalar(0.5), ZERO, TorusSpec(5, 2, 1), 0.1, horizon=20, trials=1,
                               torus_mu=1.0, torus_sigma_sq=0.3)
        ei, ej, mu, var = cfg.edge_arrays()
        _, w, _ = _trial_inputs(cfg, 0, ei, mu, var)
        assert w.shape == (20, 10)
        assert np.all(w == w[:, :1])
        assert w.std() > 0


class TestStep:
    def test_no_edges_identity(self):
        cfg = NetworkSimConfig(scalar(1.0), ZERO, UncertainGraph(3), 0.5)
        x = np.array([1.0, -2.0, 0.5])
        np.testing.assert_array_equal(step_network(x, cfg, np.random.default_rng(0)), x)

    def test_two_agents_contract(self):
        a, mu, g = 0.9, 1.5, 0.2
        cfg = NetworkSimConfig(scalar(a), ZERO, UncertainGraph(2, [(0, 1, mu)]), g)
        rng = np.random.default_rng(0)
        x = np.array([1.0, -1.0])
        for _ in range(5):
            nxt = step_network(x, cfg, rng)
            assert (nxt[0] - nxt[1]) == pytest.approx((a - 2 * mu * g) * (x[0] - x[1]), rel=1e-14)
            x = nxt

    def test_matches_kernel(self):
        sys, nl = build_chua_network_system()
        g = ring_graph(4, 1.0, 0.5)
        cfg = NetworkSimConfig(sys, nl, g, 0.1, horizon=30, trials=1, init_center=[0.5, 0.1, -0.2], init_spread=0.3)
        ei, ej, mu, var = cfg.edge_arrays()
        x0, w, _ = _trial_inputs(cfg, 0, ei, mu, var)
        x = x0
        for t in range(30):
            x = step_network(x, cfg, weights=w[t])
        trace = simulate(cfg)
        assert sync_error(x) == pytest.approx(trace.per_trial[0, -1], rel=1e-10)

    def test_additive_noise_needs_rng(self):
        cfg = NetworkSimConfig(scalar(0.5), ZERO, UncertainGraph(2, [(0, 1, 1.0)]), 0.1, additive_noise=0.1)
        with pytest.raises(InputError):
            step_network(np.zeros(2), cfg, weights=[1.0])


class TestSyncError:
    def test_identical(self):
        assert sync_error(np.tile([1.0, 2.0, 3.0], (4, 1))) == 0.0

    def test_two_scalars(self):
        assert sync_error([1.0, 3.0], N=2, n=1) == pytest.approx(2.0)

    @pytest.mark.parametrize("seed", range(5))
    def test_double_sum(self, seed):
        rng = np.random.default_rng(seed)
        N, n = rng.integers(2, 8), rng.integers(1, 4)
        x = rng.standard_normal((N, n))
        pair = sum(np.sum((x[i] - x[j]) ** 2) for i in range(N) for j in range(N)) / (2 * N)
        assert sync_error(x.ravel(), N, n) == pytest.approx(pair, abs=1e-10)


class TestSimulate:
    def test_decoupled_rate(self):
        cfg = NetworkSimConfig(scalar(0.5), ZERO, UncertainGraph(3), 0.1, horizon=200, trials=10, seed=4)
        tr = simulate(cfg)
        assert tr.beta_hat == pytest.approx(0.25, rel=0.05)
        assert tr.verdict == "sync" and tr.r2 >= 0.9

    def test_zero_spread(self):
        cfg = NetworkSimConfig(scalar(0.9), ZERO, ring_graph(4), 0.1, horizon=50, trials=3,
                               init_center=[1.0], init_spread=0.0)
        tr = simulate(cfg)
        assert not tr.err.any() and tr.verdict == "sync"

    def test_growth_is_desync(self):
        cfg = NetworkSimConfig(scalar(1.05), ZERO, UncertainGraph(3), 0.1, horizon=200, trials=5)
        assert simulate(cfg).verdict == "desync"

    def test_divergence_is_desync(self):
        cfg = NetworkSimConfig(scalar(3.0), ZERO, UncertainGraph(2), 0.1, horizon=400, trials=6)
        tr = simulate(cfg)
        assert tr.diverged_count == 6 and tr.verdict == "desync"

    def test_deterministic_feasible_decays(self):
        g = ring_graph(5, 1.0, 0.0)
        sys = scalar(0.9)
        assert check_reduced_sync_condition(sys, 0.1, spectra(g)).feasible
        tr = simulate(NetworkSimConfig(sys, Nonlinearity("linear", (0.5,)), g, 0.1, horizon=100, trials=4))
        assert tr.beta_hat < 1

    def test_threads_do_not_change_results(self):
        sys, nl = build_chua_network_system()
        g = ring_graph(4, 1.0, 3.0)
        base = dict(horizon=300, trials=13, seed=99, init_center=[0.5, 0.1, -0.2], init_spread=1e-3,
                    noise="shifted-bernoulli")
        a = simulate(NetworkSimConfig(sys, nl, g, 0.1, **base), threads=1)
        b = simulate(NetworkSimConfig(sys, nl, g, 0.1, **base), threads=4)
        assert a.per_trial.tobytes() == b.per_trial.tobytes()
        assert a.to_csv() == b.to_csv()

    def test_additive_floor(self):
        cfg = NetworkSimConfig(scalar(0.9), ZERO, ring_graph(4), 0.1, additive_noise=1e-4,
                               horizon=400, trials=20, init_spread=1.0)
        tr = simulate(cfg)
        assert tr.err[-1] > 0 and tr.verdict == "sync" and tr.beta_hat < 1

    def test_below_critical_syncs(self):
        g = UncertainGraph(3, [(0, 1, 1.0), (1, 2, 1.0)], [(0, 2, 1.0, 0.0)])
        sys = scalar(0.9)
        gc = critical_cod(sys, 0.1, spectra(g))
        cfg = NetworkSimConfig(sys, Nonlinearity("linear", (0.5,)), g.with_cod(0.8 * gc), 0.1,
                               horizon=300, trials=50, seed=2)
        assert simulate(cfg).verdict == "sync"

    def test_csv(self):
        tr = simulate(NetworkSimConfig(scalar(0.5), ZERO, UncertainGraph(2), 0.1, horizon=3, trials=1))
        lines = tr.to_csv().splitlines()
        assert lines[0] == "t,err" and len(lines) == 5 and lines[1].startswith("0,")


class TestConfigValidation:
    def test_bad_noise(self):
        with pytest.raises(InputError):
            NetworkSimConfig(scalar(0.5), ZERO, ring_graph(3), 0.1, noise="uniform")

    def test_bad_counts(self):
        with pytest.raises(InputError):
            NetworkSimConfig(scalar(0.5), ZERO, ring_graph(3), 0.1, horizon=0)

    def test_bad_nonlinearity(self):
        with pytest.raises(InputError):
            Nonlinearity("chua", (0.3,))
        with pytest.raises(InputError):
            Nonlinearity("sine", ())
