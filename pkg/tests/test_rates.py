import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from admmnet.engine import QuadraticCost, admm_run
from admmnet.graph import GraphAlgebra, build_graph, compute_algebra, connected_random_geometric
from admmnet.rates import (
    CostRegularity,
    best_mu_for_c,
    contraction_delta,
    hnorm_verify,
    optimal_c_delta,
    predicted_iters,
    quadratic_regularity,
    rate_certificate,
    reference_ustar,
    rlinear_verify,
)

K3 = build_graph(3, [(0, 1), (1, 2), (0, 2)])


class FakeAlgebra:
    """Bare spectral constants, for formula-only tests."""

    def __init__(self, gamma_o, Gamma_u):
        self.gamma_o = gamma_o
        self.Gamma_u = Gamma_u


def quad_scenario(graph, p, seed):
    rng = np.random.default_rng(seed)
    costs = []
    for _ in range(graph.n):
        A = rng.standard_normal((p, p))
        Q = A @ A.T + np.eye(p)
        costs.append(QuadraticCost.from_offset(Q, rng.standard_normal(p)))
    return costs


class TestContractionDelta:
    def test_direct_substitution(self):
        # min{ (2-1)*1/(2*1), 2*1*1*1/(1*1*1 + 2*1) } = min{1/2, 2/3}
        reg = CostRegularity(1.0, 1.0)
        alg = FakeAlgebra(1.0, 1.0)
        assert contraction_delta(reg, alg, c=1.0, mu=2.0) == pytest.approx(0.5)

    def test_mu_to_one_kills_graph_branch(self):
        reg = CostRegularity(1.0, 2.0)
        alg = FakeAlgebra(0.5, 3.0)
        assert contraction_delta(reg, alg, c=1.0, mu=1.0 + 1e-9) < 1e-9

    def test_rejects_bad_mu(self):
        with pytest.raises(ValueError):
            contraction_delta(CostRegularity(1.0, 1.0), FakeAlgebra(1.0, 1.0), 1.0, 1.0)

    @given(
        m=st.floats(1e-3, 1e3),
        cond=st.floats(1.0, 1e4),
        g=st.floats(1e-3, 1e3),
        gap=st.floats(1.0, 1e4),
        c=st.floats(1e-4, 1e4),
        mu=st.floats(1.0 + 1e-9, 1e6),
    )
    @settings(max_examples=500, deadline=None)
    def test_delta_below_one(self, m, cond, g, gap, c, mu):
        reg = CostRegularity(m, m * cond)
        alg = FakeAlgebra(g, g * gap)
        assert 0.0 <= contraction_delta(reg, alg, c, mu) < 1.0

    def test_best_mu_maximizes(self):
        reg = CostRegularity(0.7, 2.5)
        alg = FakeAlgebra(0.9, 6.2)
        for c in (0.05, 0.5, 3.0):
            mu = best_mu_for_c(reg, alg, c)
            assert mu > 1.0
            d = contraction_delta(reg, alg, c, mu)
            for other in np.geomspace(1.0 + 1e-6, 1e4, 60):
                assert d >= contraction_delta(reg, alg, c, float(other)) - 1e-12


class TestOptimalCDelta:
    def test_unit_condition_numbers(self):
        # kappa = 1, g/G = 1: delta = sqrt(1/4 + 1) - 1/2
        _, delta = optimal_c_delta(CostRegularity(1.0, 1.0), FakeAlgebra(1.0, 1.0))
        assert delta == pytest.approx(math.sqrt(1.25) - 0.5, abs=1e-12)

    def test_consistency_with_general_formula(self):
        # at (c*, mu*) both branches of the general delta meet at delta*
        rng = np.random.default_rng(0)
        for _ in range(200):
            m = rng.uniform(0.05, 5.0)
            M = m * rng.uniform(1.0, 50.0)
            g = rng.uniform(0.05, 5.0)
            G = g * rng.uniform(1.0, 50.0)
            cert = rate_certificate(CostRegularity(m, M), FakeAlgebra(g, G))
            d = contraction_delta(CostRegularity(m, M), FakeAlgebra(g, G),
                                  cert.c_star, cert.mu)
            assert d == pytest.approx(cert.delta, abs=1e-10)

    def test_graph_dominated_regime(self):
        # Gamma/gamma = 1e4 >> (M/m)^2 = 1: delta ~ gamma/Gamma within 20%
        _, delta = optimal_c_delta(CostRegularity(1.0, 1.0), FakeAlgebra(1.0, 1e4))
        assert delta == pytest.approx(1e-4, rel=0.2)

    def test_cost_dominated_regime(self):
        # (M/m)^2 = 1e4 >> Gamma/gamma = 1: delta ~ (m/M) sqrt(g/G)
        _, delta = optimal_c_delta(CostRegularity(1.0, 100.0), FakeAlgebra(1.0, 1.0))
        assert delta == pytest.approx(0.01, rel=0.2)

    def test_cstar_mu_matches_best_mu(self):
        reg = CostRegularity(0.5, 4.0)
        alg = FakeAlgebra(0.8, 7.0)
        cert = rate_certificate(reg, alg)
        assert best_mu_for_c(reg, alg, cert.c_star) == pytest.approx(cert.mu, rel=1e-9)


class TestQuadraticRegularity:
    def test_extreme_eigenvalues(self):
        rng = np.random.default_rng(7)
        Qs = []
        for _ in range(4):
            A = rng.standard_normal((3, 3))
            Qs.append(A @ A.T + 0.1 * np.eye(3))
        reg = quadratic_regularity(Qs)
        evs = [np.linalg.eigvalsh(Q) for Q in Qs]
        assert reg.m_f == pytest.approx(min(e[0] for e in evs))
        assert reg.M_f == pytest.approx(max(e[-1] for e in evs))

    def test_rejects_nonpositive(self):
        with pytest.raises(ValueError):
            CostRegularity(0.0, 1.0)
        with pytest.raises(ValueError):
            CostRegularity(2.0, 1.0)


class TestHNorm:
    def test_h_matrix_positive_semidefinite(self):
        alg = compute_algebra(connected_random_geometric(12, 0.5, seed=3))
        c, p = 0.7, 2
        Lu = GraphAlgebra.expand(alg.L_u, p)
        H = np.block([
            [0.5 * c * Lu, np.zeros((Lu.shape[0], alg.graph.L * p))],
            [np.zeros((alg.graph.L * p, Lu.shape[0])), np.eye(alg.graph.L * p) / c],
        ])
        assert np.linalg.eigvalsh(H).min() >= -1e-10

    def test_trivial_when_started_at_optimum(self):
        # optimum at zero: the zero-initialized run never moves
        costs = [QuadraticCost.from_offset(np.eye(2), np.zeros(2)) for _ in range(3)]
        alg = compute_algebra(K3)
        tr = admm_run(K3, costs, c=1.0, iters=30, track_edge_multipliers=True)
        rep = hnorm_verify(tr, alg, 1.0, (np.zeros((3, 2)), np.zeros((6, 2))))
        assert rep.ok
        assert rep.max_ratio == 0.0

    def test_k3_quadratics_500_steps(self):
        costs = quad_scenario(K3, 2, seed=5)
        alg = compute_algebra(K3)
        ustar = reference_ustar(K3, costs, c=1.3, iters=50_000)
        tr = admm_run(K3, costs, c=1.3, iters=500, track_edge_multipliers=True)
        rep = hnorm_verify(tr, alg, 1.3, ustar)
        assert rep.ok, str(rep)

    def test_requires_edge_history(self):
        costs = quad_scenario(K3, 1, seed=1)
        alg = compute_algebra(K3)
        tr = admm_run(K3, costs, c=1.0, iters=10)
        with pytest.raises(ValueError):
            hnorm_verify(tr, alg, 1.0, (np.zeros((3, 1)), np.zeros((6, 1))))


class TestRLinear:
    @pytest.mark.parametrize("n,p,seed", [(5, 1, 0), (10, 4, 1), (20, 2, 2)])
    def test_bound_and_contraction(self, n, p, seed):
        g = connected_random_geometric(n, 0.7, seed=seed)
        alg = compute_algebra(g)
        costs = quad_scenario(g, p, seed + 100)
        reg = quadratic_regularity([f.Q for f in costs])
        c = 1.0
        ustar = reference_ustar(g, costs, c, iters=15_000)
        tr = admm_run(g, costs, c=c, iters=150, track_edge_multipliers=True)
        rep = rlinear_verify(tr, reg, alg, c, ustar)
        assert rep.bound_ok
        assert rep.contraction_ok
        # the fitted primal decay should be at least as fast as predicted
        assert rep.empirical_rate <= rep.predicted_rate + 1e-9

    def test_contraction_at_tuned_c(self):
        g = connected_random_geometric(8, 0.7, seed=9)
        alg = compute_algebra(g)
        costs = quad_scenario(g, 2, seed=42)
        reg = quadratic_regularity([f.Q for f in costs])
        cert = rate_certificate(reg, alg)
        ustar = reference_ustar(g, costs, cert.c_star, iters=20_000)
        tr = admm_run(g, costs, c=cert.c_star, iters=200, track_edge_multipliers=True)
        rep = rlinear_verify(tr, reg, alg, cert.c_star, ustar, mu=cert.mu)
        assert rep.delta == pytest.approx(cert.delta, abs=1e-12)
        assert rep.contraction_ok

    def test_predicted_budget_reached(self):
        from admmnet.rates import hnorm_trace

        g = connected_random_geometric(6, 0.8, seed=4)
        alg = compute_algebra(g)
        costs = quad_scenario(g, 1, seed=8)
        reg = quadratic_regularity([f.Q for f in costs])
        c = 1.0
        mu = best_mu_for_c(reg, alg, c)
        delta = contraction_delta(reg, alg, c, mu)
        ustar = reference_ustar(g, costs, c, iters=40_000)
        tr = admm_run(g, costs, c=c, iters=400, track_edge_multipliers=True)
        ht = hnorm_trace(tr, alg, c, ustar)
        budget = predicted_iters(delta, ht.dist_sq[0], 1e-10, reg.m_f)
        budget = int(budget * 1.05) + 1
        assert budget <= 400, "test scenario too slow for the budget check"
        assert np.sqrt(ht.primal_dist_sq[budget]) <= 1e-10

    def test_declines_without_strong_convexity(self):
        with pytest.raises(ValueError):
            CostRegularity(m_f=0.0, M_f=1.0)
