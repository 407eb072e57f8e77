from fractions import Fraction

import numpy as np
import pytest

from propgraph import graph as G
from propgraph.diagnostics import (contraction_factor, diameter_ratio, dirichlet_energy, feature_diameter,
                                   last_token_collapse, oversmoothing_curve, runway_profile, sink_report,
                                   underreaching_check)
from propgraph.models import ModelConfig, forward, init_model


class TestEnergy:
    def test_constant(self):
        assert dirichlet_energy(np.ones((5, 3)), G.cycle(5)) == 0

    def test_p2(self):
        assert dirichlet_energy(np.array([0.0, 1.0]), G.path(2)) == 1.0

    @pytest.mark.parametrize("c", [0.5, 2.0, -3.0])
    def test_homogeneous(self, c):
        h = np.random.default_rng(0).standard_normal((6, 2))
        g = G.grid(2, 3)
        assert dirichlet_energy(c * h, g) == pytest.approx(c * c * dirichlet_energy(h, g))

    def test_matches_laplacian_form(self):
        # E = (2/N) tr(H^T L H) with L the combinatorial Laplacian
        g = G.barbell(3)
        h = np.random.default_rng(1).standard_normal((6, 3))
        lap = np.diag(g.degrees()) - g.adjacency()
        assert dirichlet_energy(h, g) == pytest.approx(2 * np.trace(h.T @ lap @ h) / 6)


class TestOversmoothing:
    def test_averaging_power_oracle(self):
        g = G.path(3)
        cfg = ModelConfig(arch="mean_gnn", layers=40, dim=2, linear_mode=True, identity_weights=True)
        x = np.random.default_rng(2).standard_normal((3, 2))
        tr = forward(init_model(cfg), g, x)
        p = np.array([[1 / 2, 1 / 2, 0], [1 / 3, 1 / 3, 1 / 3], [0, 1 / 2, 1 / 2]])
        for l in (1, 7, 40):
            assert np.allclose(tr.features[l], np.linalg.matrix_power(p, l) @ x, atol=1e-12)
        curve = oversmoothing_curve(tr)
        diam = curve.extra["diameter"]
        assert all(b < a for a, b in zip(diam, diam[1:]))
        assert curve.values[-1] < 1e-6 * curve.values[0]

    def test_single_node(self):
        g = G.build_graph(1, [])
        tr = forward(init_model(ModelConfig(arch="mean_gnn", layers=3)), g, np.ones((1, 4)))
        assert oversmoothing_curve(tr).values == (0.0, 0.0, 0.0, 0.0)

    def test_pure_attention_diameter_nonincreasing(self):
        cfg = ModelConfig(arch="transformer", layers=6, identity_weights=True, linear_mode=True)
        tr = forward(init_model(cfg), None, np.random.default_rng(3).standard_normal((7, 4)))
        diam = [feature_diameter(h) for h in tr.features]
        assert all(b <= a + 1e-12 for a, b in zip(diam, diam[1:]))


class TestContraction:
    def test_uniform(self):
        assert contraction_factor(np.full((4, 4), 0.25)) == 0

    def test_identity(self):
        assert contraction_factor(np.eye(3)) == 1

    def test_two_by_two(self):
        s = np.array([[0.9, 0.1], [0.1, 0.9]])
        assert contraction_factor(s) == pytest.approx(0.8)
        assert diameter_ratio(s, np.array([[0.0], [1.0]])) == pytest.approx(0.8)

    @pytest.mark.parametrize("seed", range(10))
    def test_bound_holds_on_random_maps(self, seed):
        rng = np.random.default_rng(seed)
        s = rng.random((6, 6)) + 0.05
        s /= s.sum(axis=1, keepdims=True)
        v = rng.standard_normal((6, 3))
        assert diameter_ratio(s, v) <= contraction_factor(s) + 1e-12

    def test_rejects_non_stochastic(self):
        with pytest.raises(ValueError):
            contraction_factor(np.array([[0.5, 0.2], [0.5, 0.5]]))


class TestSink:
    def test_uniform_causal_n4(self):
        cfg = ModelConfig(arch="transformer", causal=True, layers=1, uniform_attention=True)
        rep = sink_report(forward(init_model(cfg), None, np.ones((4, 4))))
        exact = Fraction(1) + Fraction(1, 2) + Fraction(1, 3) + Fraction(1, 4)
        assert rep.sink_score == pytest.approx(float(exact / 4), abs=1e-15)
        assert rep.sink_score == pytest.approx(25 / 48, abs=1e-15)

    def test_full_uniform_is_flat(self):
        cfg = ModelConfig(arch="transformer", layers=2, uniform_attention=True)
        rep = sink_report(forward(init_model(cfg), None, np.ones((5, 4))))
        assert np.allclose(rep.mean_mass, 0.2) and not rep.flagged

    def test_placeholder_reported_separately(self):
        cfg = ModelConfig(arch="transformer", causal=True, sink_token=True, uniform_attention=True)
        rep = sink_report(forward(init_model(cfg), None, np.ones((3, 4))))
        assert rep.roles[0] == "sink"
        assert rep.placeholder_mass == rep.sink_score
        assert rep.first_token_mass == pytest.approx(rep.mean_mass[1])

    def test_requires_attention(self):
        tr = forward(init_model(ModelConfig(arch="gin")), G.path(3), np.ones((3, 4)))
        with pytest.raises(ValueError):
            sink_report(tr)


def dag_paths(n, L, src):
    """Paths out of ``src`` through L causal layers, by explicit enumeration."""
    frontier = {src: 1}
    for _ in range(L):
        nxt = {}
        for i, c in frontier.items():
            for j in range(i, n):
                nxt[j] = nxt.get(j, 0) + c
        frontier = nxt
    return sum(frontier.values())


class TestRunway:
    def test_n5(self):
        p = runway_profile(G.causal(5), 1)
        assert p.receptive_size == (1, 2, 3, 4, 5)
        assert p.downstream_readers == (4, 3, 2, 1, 0)

    @pytest.mark.parametrize("L", [1, 2, 4])
    def test_first_position_reaches_all(self, L):
        assert runway_profile(G.causal(6), L).reach[0] == 6

    def test_path_counts_n3_L2(self):
        p = runway_profile(G.causal(3), 2)
        for i in range(3):
            assert p.path_counts[i] == tuple(dag_paths(3, l, i) for l in (1, 2))
        assert p.path_counts[0] == (3, 6)

    def test_requires_causal(self):
        with pytest.raises(G.GraphError):
            runway_profile(G.path(3), 1)


class TestUnderreaching:
    @pytest.mark.parametrize("arch", ["mean_gnn", "gin", "gat"])
    def test_p4_two_layers(self, arch):
        m = init_model(ModelConfig(arch=arch, layers=2, linear_mode=arch != "gat"))
        assert underreaching_check(m, G.path(4)) == []

    def test_complete_is_vacuous(self):
        m = init_model(ModelConfig(arch="mean_gnn", layers=1))
        assert underreaching_check(m, G.complete(4)) == []

    def test_p4_endpoints_reached_at_three(self):
        from propgraph.models import empirical_jacobian
        m = init_model(ModelConfig(arch="mean_gnn", layers=3, linear_mode=True))
        x = np.random.default_rng(0).standard_normal((4, 4))
        assert empirical_jacobian(m, G.path(4), x, 0, 3, 3, 0).max_abs > 1e-6
        assert empirical_jacobian(m, G.path(4), x, 0, 2, 3, 0).max_abs <= 1e-12


class TestLastToken:
    @pytest.mark.parametrize("n", [1, 2, 4, 8])
    def test_closed_form(self, n):
        cfg = ModelConfig(arch="transformer", causal=True, layers=1, linear_mode=True, uniform_attention=True)
        series = last_token_collapse(cfg, [n], seed=0)
        a, b = np.random.default_rng([0, 1]).standard_normal((2, cfg.dim))
        c = np.linalg.norm((a - b) @ init_model(cfg).weights[0]["V0"])
        assert series.values[0] == pytest.approx(c / n, rel=1e-9)

    def test_residual_dominates(self):
        base = dict(arch="transformer", causal=True, layers=1, linear_mode=True, uniform_attention=True)
        lengths = [2, 4, 8, 16]
        plain = last_token_collapse(ModelConfig(**base), lengths).values
        res = last_token_collapse(ModelConfig(**base, residual=True), lengths).values
        assert all(r >= p for r, p in zip(res, plain))

    def test_requires_causal(self):
        with pytest.raises(ValueError):
            last_token_collapse(ModelConfig(arch="transformer"), [2])
