import numpy as np
import pytest

from admmnet.graph import (
    GraphError,
    build_graph,
    compute_algebra,
    connected_random_geometric,
    is_connected,
    load_graph,
    random_geometric,
    save_graph,
)


def adjacency(g):
    W = np.zeros((g.n, g.n))
    for (i, j) in g.edges:
        W[i, j] = W[j, i] = 1.0
    return W


class TestBuildGraph:
    def test_two_node_path(self):
        g = build_graph(2, [(0, 1)])
        assert g.neighbors[0] == (1,)
        assert g.neighbors[1] == (0,)
        assert g.L == 2

    def test_triangle_degrees(self):
        g = build_graph(3, [(0, 1), (1, 2), (0, 2)])
        assert all(len(nb) == 2 for nb in g.neighbors)
        assert g.L == 6

    def test_self_loop_rejected(self):
        with pytest.raises(GraphError):
            build_graph(3, [(0, 0)])

    def test_duplicate_rejected_after_normalization(self):
        with pytest.raises(GraphError):
            build_graph(3, [(0, 1), (1, 0)])

    def test_out_of_range_rejected(self):
        with pytest.raises(GraphError):
            build_graph(2, [(0, 5)])

    def test_directed_edges_lexicographic(self):
        g = build_graph(3, [(0, 2), (0, 1)])
        assert g.directed_edges == ((0, 1), (0, 2), (1, 0), (2, 0))


class TestRandomGeometric:
    def test_full_radius_connects_two_nodes(self):
        g = random_geometric(2, np.sqrt(2.0), seed=3)
        assert is_connected(g)

    def test_deterministic_for_fixed_seed(self):
        g1 = random_geometric(20, 0.5, seed=7)
        g2 = random_geometric(20, 0.5, seed=7)
        assert g1.edges == g2.edges
        assert np.array_equal(g1.positions, g2.positions)

    def test_tiny_radius_reports_disconnected(self):
        g = random_geometric(20, 0.01, seed=7)
        assert not is_connected(g)

    def test_connected_helper(self):
        g = connected_random_geometric(15, 0.4, seed=0)
        assert is_connected(g)


class TestConnectivity:
    def test_triangle_connected(self):
        assert is_connected(build_graph(3, [(0, 1), (1, 2), (0, 2)]))

    def test_isolated_nodes(self):
        assert not is_connected(build_graph(2, []))

    def test_two_components(self):
        assert not is_connected(build_graph(4, [(0, 1), (2, 3)]))

    def test_single_node(self):
        assert is_connected(build_graph(1, []))


class TestAlgebra:
    def test_two_node_path_spectra(self):
        # by hand: E_o rows (+1,-1)/(-1,+1), L_o = [[1,-1],[-1,1]] -> eigs {0,2}
        # E_u rows (1,1)/(1,1), L_u = [[1,1],[1,1]] -> eigs {0,2}
        alg = compute_algebra(build_graph(2, [(0, 1)]))
        assert alg.gamma_o == pytest.approx(2.0, abs=1e-12)
        assert alg.Gamma_u == pytest.approx(2.0, abs=1e-12)

    def test_triangle_gamma(self):
        alg = compute_algebra(build_graph(3, [(0, 1), (1, 2), (0, 2)]))
        assert alg.gamma_o == pytest.approx(3.0, abs=1e-9)

    def test_disconnected_rejected(self):
        with pytest.raises(GraphError):
            compute_algebra(build_graph(4, [(0, 1), (2, 3)]))

    @pytest.mark.parametrize("seed", range(6))
    def test_degree_identity_and_oracle_spectra(self, seed):
        # oracle route: adjacency-based Laplacians, independent of incidence
        g = connected_random_geometric(4 + 7 * seed, 0.6, seed=seed)
        alg = compute_algebra(g)
        W = adjacency(g)
        Dm = np.diag(W.sum(axis=1))
        np.testing.assert_allclose(alg.D, 0.5 * (alg.L_o + alg.L_u), atol=1e-12)
        np.testing.assert_allclose(alg.L_o, Dm - W, atol=1e-12)
        np.testing.assert_allclose(alg.L_u, Dm + W, atol=1e-12)
        evals_o = np.linalg.eigvalsh(Dm - W)
        assert alg.gamma_o == pytest.approx(evals_o[1], abs=1e-9)
        assert alg.Gamma_u == pytest.approx(np.linalg.eigvalsh(Dm + W)[-1], abs=1e-9)

    @pytest.mark.parametrize("seed", range(4))
    def test_psd_and_row_patterns(self, seed):
        g = connected_random_geometric(12, 0.5, seed=seed)
        alg = compute_algebra(g)
        for M in (alg.E_o.T @ alg.E_o, alg.E_u.T @ alg.E_u):
            assert np.linalg.eigvalsh(M).min() >= -1e-10
        for A in (alg.A_s, alg.A_d):
            assert ((A == 1).sum(axis=1) == 1).all()
            assert ((A != 0).sum(axis=1) == 1).all()

    def test_gamma_ordering(self):
        for seed in range(5):
            alg = compute_algebra(connected_random_geometric(10, 0.6, seed=seed))
            assert alg.Gamma_u >= alg.gamma_o > 0

    def test_expand_block(self):
        alg = compute_algebra(build_graph(2, [(0, 1)]))
        L3 = alg.expand(alg.L_u, 3)
        assert L3.shape == (6, 6)
        np.testing.assert_allclose(L3[:3, 3:], np.eye(3))


class TestSerialization:
    def test_roundtrip(self, tmp_path):
        g = connected_random_geometric(9, 0.6, seed=2)
        path = tmp_path / "g.txt"
        save_graph(g, path)
        g2 = load_graph(path)
        assert g2.n == g.n and g2.edges == g.edges

    def test_missing_header(self, tmp_path):
        path = tmp_path / "bad.txt"
        path.write_text("0 1\n")
        with pytest.raises(GraphError):
            load_graph(path)
