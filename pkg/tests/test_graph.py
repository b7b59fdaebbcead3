import itertools

import numpy as np
import pytest

from lursync.graph import (
    DisconnectedGraphError,
    GraphError,
    TorusSpec,
    UncertainGraph,
    complete_graph,
    edge_vector,
    laplacian,
    ring_eigenvalues,
    ring_graph,
    ring_laplacian,
    spectra,
    split_laplacians,
    sync_complement,
    torus_distinct_eigenvalues,
    torus_eigenvalues,
    torus_extreme_eigs,
    torus_graph,
    torus_laplacian,
)
from lursync.linalg import sym_eig


def test_k3_laplacian():
    g = complete_graph(3)
    np.testing.assert_array_equal(laplacian(g), [[2, -1, -1], [-1, 2, -1], [-1, -1, 2]])


def test_single_edge():
    g = UncertainGraph(2, [(0, 1, 5.0)])
    np.testing.assert_array_equal(laplacian(g), [[5, -5], [-5, 5]])


def test_path_eigenvalues():
    g = UncertainGraph(3, [(0, 1, 1.0), (1, 2, 1.0)])
    np.testing.assert_allclose(sym_eig(laplacian(g)).eigenvalues, [0, 1, 3], atol=1e-12)


def test_laplacian_rows_sum_to_zero_and_psd():
    rng = np.random.default_rng(0)
    edges = [(i, j, rng.uniform(0.1, 2)) for i, j in itertools.combinations(range(6), 2) if rng.random() < 0.6]
    L = laplacian(UncertainGraph(6, edges))
    np.testing.assert_allclose(L.sum(axis=1), 0, atol=1e-12)
    assert sym_eig(L).eigenvalues[0] > -1e-12


class TestValidation:
    def test_self_loop(self):
        with pytest.raises(GraphError, match="self-loop"):
            UncertainGraph(3, [(1, 1, 1.0)])

    def test_out_of_range(self):
        with pytest.raises(GraphError, match="outside"):
            UncertainGraph(3, [(0, 3, 1.0)])

    def test_duplicate_across_kinds(self):
        with pytest.raises(GraphError, match="duplicate"):
            UncertainGraph(3, [(0, 1, 1.0)], [(1, 0, 1.0, 0.1)])

    def test_nonpositive_mean(self):
        with pytest.raises(GraphError, match="positive mean"):
            UncertainGraph(3, [(0, 1, 0.0)])

    def test_negative_variance(self):
        with pytest.raises(GraphError, match="nonnegative variance"):
            UncertainGraph(3, [], [(0, 1, 1.0, -0.1)])


class TestSplit:
    def test_all_deterministic(self):
        _, Lu = split_laplacians(complete_graph(4, uncertain=False))
        assert not Lu.any()

    def test_all_uncertain(self):
        g = ring_graph(5, 1.0, 0.2)
        Ld, _ = split_laplacians(g)
        assert not Ld.any()
        sp = spectra(g)
        assert sp.lambda2_d == 0.0 and sp.tau == 1.0

    def test_triangle_one_uncertain(self):
        g = UncertainGraph(3, [(0, 1, 1.0), (1, 2, 1.0)], [(0, 2, 1.0, 0.3)])
        Ld, Lu = split_laplacians(g)
        np.testing.assert_array_equal(Ld, [[1, -1, 0], [-1, 2, -1], [0, -1, 1]])
        np.testing.assert_array_equal(Lu, [[1, 0, -1], [0, 0, 0], [-1, 0, 1]])
        np.testing.assert_array_equal(Ld + Lu, laplacian(g))


class TestEdgeVector:
    def test_orientation(self):
        np.testing.assert_array_equal(edge_vector(1, 0, 3), [-1, 1, 0])

    def test_rank_one(self):
        ell = edge_vector(0, 2, 4)
        np.testing.assert_allclose(sym_eig(np.outer(ell, ell)).eigenvalues, [0, 0, 0, 2], atol=1e-12)

    def test_invalid(self):
        with pytest.raises(GraphError):
            edge_vector(2, 2, 3)


class TestSyncComplement:
    def test_two_nodes(self):
        U = sync_complement(2)
        assert U.shape == (2, 1)
        np.testing.assert_allclose(np.abs(U[:, 0]), [2**-0.5, 2**-0.5])
        assert U[0, 0] * U[1, 0] < 0

    @pytest.mark.parametrize("N", [3, 5, 9])
    def test_post_conditions(self, N):
        U = sync_complement(N)
        assert U.shape == (N, N - 1)
        np.testing.assert_allclose(U.T @ U, np.eye(N - 1), atol=1e-12)
        np.testing.assert_allclose(U.T @ np.ones(N), 0, atol=1e-12)
        full = np.column_stack([np.ones(N) / np.sqrt(N), U])
        np.testing.assert_allclose(full @ full.T, np.eye(N), atol=1e-12)


class TestSpectra:
    def test_k3(self):
        sp = spectra(complete_graph(3, uncertain=False))
        assert sp.lambda2 == pytest.approx(3) and sp.lambdaN == pytest.approx(3)
        assert sp.gamma_bar == 0.0

    def test_single_uncertain_link_tau(self):
        # path 0-1-2-3 deterministic, plus uncertain chord (0, 2) with mean 0.7
        det = [(0, 1, 1.0), (1, 2, 1.0), (2, 3, 1.0)]
        g = UncertainGraph(4, det, [(0, 2, 0.7, 0.35)])
        sp = spectra(g)
        lam2_d = sym_eig(laplacian(UncertainGraph(4, det))).eigenvalues[1]
        assert sp.tau == pytest.approx(2 * 0.7 / (2 * 0.7 + lam2_d), rel=1e-12)
        assert sp.gamma_bar == pytest.approx(0.5)

    def test_ring4(self):
        sp = spectra(ring_graph(4))
        assert sp.lambda2 == pytest.approx(2) and sp.lambdaN == pytest.approx(4)

    def test_disconnected(self):
        g = UncertainGraph(4, [(0, 1, 1.0), (2, 3, 1.0)])
        with pytest.raises(DisconnectedGraphError, match="cannot synchronize a disconnected network"):
            spectra(g)

    def test_cod_helpers(self):
        g = ring_graph(4, 2.0, 0.0).with_cod(0.5)
        assert all(v == pytest.approx(1.0) for *_, v in g.unc_edges)
        assert spectra(g.scaled(3.0)).gamma_bar == pytest.approx(0.5)


class TestTorus:
    def test_ring4(self):
        np.testing.assert_allclose(torus_eigenvalues(TorusSpec(4, 1, 1)), [0, 2, 2, 4], atol=1e-12)

    def test_spec_bounds(self):
        with pytest.raises(GraphError):
            TorusSpec(4, 3, 1)
        with pytest.raises(GraphError):
            TorusSpec(4, 0, 1)

    def test_ring_eigenvalues_numeric(self):
        for N, k in [(5, 2), (6, 3), (7, 1), (8, 4)]:
            np.testing.assert_allclose(
                np.sort(ring_eigenvalues(N, k)), sym_eig(ring_laplacian(N, k)).eigenvalues, atol=1e-10
            )

    def test_complete_ring(self):
        assert torus_extreme_eigs(TorusSpec(50, 25, 1)) == pytest.approx((50.0, 50.0))

    def test_extremes(self):
        assert torus_extreme_eigs(TorusSpec(4, 1, 3)) == pytest.approx((2.0, 12.0))
        for N, k, d in [(5, 1, 2), (6, 2, 3), (7, 3, 1)]:
            ev = torus_eigenvalues(TorusSpec(N, k, d))
            lam1 = np.sort(ring_eigenvalues(N, k))
            assert torus_extreme_eigs(TorusSpec(N, k, d)) == pytest.approx((lam1[1], d * lam1[-1]))
            assert (ev[1], ev[-1]) == pytest.approx((lam1[1], d * lam1[-1]))

    def test_n3_d2(self):
        L, _ = torus_laplacian(TorusSpec(3, 1, 2))
        sums = sorted(a + b for a in (0, 3, 3) for b in (0, 3, 3))
        np.testing.assert_allclose(sym_eig(L).eigenvalues, sums, atol=1e-10)

    def test_materialised_graph_matches(self):
        spec = TorusSpec(4, 2, 2)
        L, ev = torus_laplacian(spec)
        np.testing.assert_allclose(laplacian(torus_graph(spec)), L, atol=0)
        np.testing.assert_allclose(sym_eig(L).eigenvalues, ev, atol=1e-10)

    def test_distinct(self):
        np.testing.assert_allclose(torus_distinct_eigenvalues(TorusSpec(4, 1, 2)), [2, 4, 6, 8])

    def test_materialisation_cap(self):
        with pytest.raises(GraphError, match="eigenvalue-only"):
            torus_laplacian(TorusSpec(50, 1, 3))
