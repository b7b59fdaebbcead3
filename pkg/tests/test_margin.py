import math

import numpy as np
import pytest
from hypothesis import assume, given, settings, strategies as st

from lursync.graph import TorusSpec, UncertainGraph, ring_graph, spectra
from lursync.margin import (
    DeterministicallyInfeasible,
    MarginError,
    ScalarTorusParams,
    critical_cod,
    optimal_k,
    scalar_torus_feasible,
    scalar_torus_margin,
    small_gain_for_graph,
    small_gain_margin,
    sweep_csv,
    torus_sweep,
)
from lursync.prl import LureSystem, check_full_sync_condition, full_sync_problem

from instances import random_connected_graph, random_lure_system

SWEEP = ScalarTorusParams(a=1.05, delta=8.0, g=0.01, mu=1.0, sigma_sq=0.01)


def scalar(a, D=1.0):
    return LureSystem([[a]], [[1.0]], [[1.0]], [[D]])


class TestScalarTorus:
    def test_complete_ring(self):
        spec = TorusSpec(50, 25, 1)
        assert SWEEP.alpha_sq(50.0) == pytest.approx(0.183125, abs=1e-15)
        assert SWEEP.bound == 0.765625
        assert scalar_torus_feasible(SWEEP, spec)
        tm = scalar_torus_margin(SWEEP, spec)
        # 1 - 0.0025 / 0.585, exact rational evaluation
        assert tm.rho_SM == pytest.approx(1 - 0.0025 / 0.585, abs=1e-14)
        assert tm.rho_SM == pytest.approx(0.995726495726, abs=1e-12)

    def test_small_ring_infeasible(self):
        spec = TorusSpec(4, 1, 1)
        assert SWEEP.alpha_sq(2.0) == pytest.approx(0.819029, abs=1e-12)
        assert not scalar_torus_feasible(SWEEP, spec)

    def test_large_delta_limit(self):
        p = ScalarTorusParams(a=0.5, delta=1e12, g=0.1, mu=1.0, sigma_sq=0.0)
        spec = TorusSpec(6, 1, 1)
        lam2, lamN = 1.0, 4.0
        assert scalar_torus_feasible(p, spec) == (1 > max(p.alpha_sq(lam2), p.alpha_sq(lamN)))

    def test_zero_variance_gives_one(self):
        tm = scalar_torus_margin(SWEEP.__class__(1.05, 8.0, 0.01, 1.0, 0.0), TorusSpec(50, 25, 1))
        assert tm.deterministic_feasible and tm.rho_SM == 1.0

    def test_deterministically_infeasible(self):
        tm = scalar_torus_margin(SWEEP, TorusSpec(50, 1, 1))
        assert not tm.deterministic_feasible and not tm.feasible
        assert math.isnan(tm.rho_SM)

    def test_tie_goes_to_lambda2(self):
        tm = scalar_torus_margin(SWEEP, TorusSpec(50, 25, 1))
        assert tm.alpha_sq_2 == pytest.approx(tm.alpha_sq_N, abs=1e-13) and tm.lambda_sup == tm.lambda_2

    def test_invalid_params(self):
        with pytest.raises(MarginError):
            ScalarTorusParams(1.0, 1.0, 0.1, 1.0, 0.0)
        with pytest.raises(MarginError):
            ScalarTorusParams(1.0, 2.0, 0.1, 0.0, 0.0)

    @settings(max_examples=300, deadline=None)
    @given(
        st.floats(0.0, 2.0), st.floats(1.01, 50.0), st.floats(0.0, 0.5), st.floats(0.1, 2.0),
        st.floats(0.0, 0.2), st.integers(2, 40), st.integers(1, 20), st.integers(1, 6),
    )
    def test_margin_properties(self, a, delta, g, mu, s2, N, k, d):
        assume(k <= N // 2)
        p = ScalarTorusParams(a, delta, g, mu, s2)
        spec = TorusSpec(N, k, d)
        tm = scalar_torus_margin(p, spec)
        if tm.deterministic_feasible:
            assert tm.rho_SM <= 1.0
            if s2 == 0.0:
                assert tm.rho_SM == 1.0
        gap = p.bound - max(tm.alpha_sq_2, tm.alpha_sq_N)
        if abs(gap) > 1e-9:
            assert tm.feasible == (gap > 0) == scalar_torus_feasible(p, spec)


class TestSweep:
    def test_single_cell(self):
        rows = torus_sweep(SWEEP, 50, [12], [3])
        tm = scalar_torus_margin(SWEEP, TorusSpec(50, 12, 3))
        assert rows == [(3, 12, tm.rho_SM, True)]
        assert sweep_csv(rows) == f"d,k,rho_sm,feasible\n3,12,{tm.rho_SM:.12g},true\n"

    def test_row_major_and_deterministic(self):
        a = torus_sweep(SWEEP, 50, range(1, 26), range(1, 11))
        b = torus_sweep(SWEEP, 50, range(1, 26), range(1, 11), threads=4)
        assert [(r[0], r[1]) for r in a] == [(d, k) for d in range(1, 11) for k in range(1, 26)]
        assert sweep_csv(a) == sweep_csv(b)
        assert sweep_csv(a).encode() == sweep_csv(torus_sweep(SWEEP, 50, range(1, 26), range(1, 11))).encode()

    def test_optimal_k_nonincreasing(self):
        best = optimal_k(torus_sweep(SWEEP, 50, range(1, 26), range(1, 11)))
        ks = [0 if best[d] is None else best[d] for d in range(1, 11)]
        assert all(x >= y for x, y in zip(ks, ks[1:]))
        assert best[1] is not None and best[1] > 1

    def test_optimal_k_ties(self):
        rows = [(1, 1, 0.5, True), (1, 2, 0.5, True), (1, 3, math.nan, False), (2, 1, math.nan, False)]
        assert optimal_k(rows) == {1: 1, 2: None}


class TestCriticalCod:
    K3 = UncertainGraph(3, [(0, 1, 1.0), (1, 2, 1.0)], [(0, 2, 1.0, 0.0)])

    def test_k3_closed_form(self):
        gc = critical_cod(scalar(0.9), 0.1, spectra(self.K3))
        assert gc == pytest.approx(6.0, abs=2e-3)
        assert gc <= 6.0

    def test_deterministically_infeasible(self):
        with pytest.raises(DeterministicallyInfeasible, match="deterministically infeasible"):
            critical_cod(scalar(0.5), 0.2, spectra(self.K3))

    def test_unbounded(self):
        # a tiny gain on a contracting system keeps the noise channel negligible
        gc = critical_cod(scalar(0.5), 1e-9, spectra(self.K3), cap=2.0**4)
        assert gc == math.inf


class TestSmallGain:
    def test_zero_variance_holds(self):
        g = ring_graph(4, 1.0, 0.0)
        cert, sg = small_gain_for_graph(g, scalar(0.9), 0.1, 0.0)
        assert cert.feasible and sg.holds and sg.rho > 0

    def test_single_link_scalar(self):
        # two scalar agents, one link: the loop is scalar so M = 2 g / sqrt(s w)
        a, g, s2, mu = 0.9, 0.1, 0.3, 1.0
        graph = UncertainGraph(2, [], [(0, 1, mu, s2)])
        sys = scalar(a)
        cert, sg = small_gain_for_graph(graph, sys, g, s2)
        P = cert.P[0, 0]
        s_hat = 1 / P - 1 / 2
        f0 = a - 0.5 - 2 * mu * g
        w = P - 1 / 2 - f0 * f0 / s_hat
        assert sg.rho == pytest.approx(2 * g / math.sqrt(s_hat * w), rel=1e-9)
        assert sg.sigma_critical_sq == pytest.approx(1 / sg.rho**2)

    def test_feasible_riccati_implies_holds(self):
        n = 0
        for seed in range(25):
            rng = np.random.default_rng(4000 + seed)
            g = random_connected_graph(rng, int(rng.integers(3, 6)))
            sp = spectra(g)
            sys, G = random_lure_system(rng, sp.lambdaN)
            s2 = float(rng.uniform(0, 0.5))
            cert, sg = small_gain_for_graph(g, sys, G, s2)
            if sg is not None:
                n += 1
                assert sg.holds
        assert n >= 8

    def test_monotone_in_variance(self):
        rng = np.random.default_rng(8)
        g = random_connected_graph(rng, 4)
        sp = spectra(g)
        sys, G = random_lure_system(rng, sp.lambdaN)
        _, ref = small_gain_for_graph(g, sys, G, 0.1)
        cert = check_full_sync_condition(g.with_variances(0.1), sys, G)
        assert ref is not None
        pr = full_sync_problem(g.with_variances(0.1), sys, G)
        ladder = np.linspace(0, 3 * ref.sigma_critical_sq, 9)
        holds = [small_gain_margin(cert.P, pr, s).holds for s in ladder]
        assert holds == sorted(holds, reverse=True) and holds[0] and not holds[-1]

    def test_names_failing_block(self):
        g = ring_graph(3, 1.0, 0.1)
        pr = full_sync_problem(g, scalar(0.9), 0.1)
        with pytest.raises(MarginError, match="S_hat"):
            small_gain_margin(10 * np.eye(2), pr, 0.1)
