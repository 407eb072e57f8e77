import json

import numpy as np
import pytest

from propgraph import graph as G
from propgraph.models import (ConfigError, ModelConfig, empirical_jacobian, forward, init_model,
                              lipschitz_constants, masked_softmax, sensitivity_matrix)
from propgraph.rewiring import schedule_fc_last


def X(n, d, seed=0):
    return np.random.default_rng(seed).standard_normal((n, d))


class TestConfig:
    @pytest.mark.parametrize("kw", [
        dict(arch="cnn"),
        dict(arch="mean_gnn", layers=0),
        dict(arch="mean_gnn", causal=True),
        dict(arch="transformer", dim=5, heads=2),
        dict(arch="transformer", pause_tokens=1),
        dict(arch="gin", differential_lambda=0.3),
        dict(arch="mean_gnn", gin_epsilon=0.1),
        dict(arch="transformer", linear_mode=True, layernorm=True),
        dict(arch="mean_gnn", weight_scale=-1),
    ])
    def test_invalid(self, kw):
        with pytest.raises(ConfigError):
            ModelConfig(**kw)

    def test_json_roundtrip(self, tmp_path):
        cfg = ModelConfig(arch="transformer", causal=True, heads=2, differential_lambda=0.5)
        p = tmp_path / "cfg.json"
        p.write_text(json.dumps(cfg.to_dict()))
        assert ModelConfig.from_json(str(p)) == cfg

    def test_unknown_key(self):
        with pytest.raises(ConfigError, match="unknown"):
            ModelConfig.from_dict({"arch": "gin", "depth": 3})


class TestInit:
    @pytest.mark.parametrize("arch", ["mean_gnn", "gin", "gat", "transformer"])
    def test_deterministic(self, arch):
        a, b = init_model(ModelConfig(arch=arch)), init_model(ModelConfig(arch=arch))
        for la, lb in zip(a.weights, b.weights):
            assert la.keys() == lb.keys()
            assert all(np.array_equal(la[k], lb[k]) for k in la)

    def test_seed_changes_weights(self):
        a = init_model(ModelConfig(arch="gin", seed=0)).weights[0]["W"]
        b = init_model(ModelConfig(arch="gin", seed=1)).weights[0]["W"]
        assert not np.array_equal(a, b)

    def test_pause_zero_is_plain_model(self):
        x = X(5, 4)
        a = forward(init_model(ModelConfig(arch="transformer", causal=True)), None, x)
        b = forward(init_model(ModelConfig(arch="transformer", causal=True, pause_tokens=0)), None, x)
        assert np.array_equal(a.features[-1], b.features[-1])

    def test_gin_eps0_is_self_plus_neighbor_sum(self):
        g = G.path(3)
        cfg = ModelConfig(arch="gin", layers=1, dim=2, linear_mode=True, identity_weights=True)
        x = X(3, 2)
        out = forward(init_model(cfg), g, x).features[-1]
        assert np.allclose(out, (np.eye(3) + g.adjacency()) @ x)


class TestForward:
    def test_uniform_causal_is_prefix_mean(self):
        cfg = ModelConfig(arch="transformer", causal=True, layers=1, dim=3, linear_mode=True,
                          uniform_attention=True)
        m = init_model(cfg)
        x = X(6, 3)
        out = forward(m, None, x).features[-1]
        v = x @ m.weights[0]["V0"]
        assert np.allclose(out, np.cumsum(v, axis=0) / np.arange(1, 7)[:, None], atol=1e-12)

    def test_differential_lambda0_matches_standard(self):
        base = dict(arch="transformer", causal=True, layers=2, dim=4, heads=2)
        x = X(5, 4)
        a = forward(init_model(ModelConfig(**base)), None, x)
        b = forward(init_model(ModelConfig(**base, differential_lambda=0.0)), None, x)
        assert all(np.array_equal(p, q) for p, q in zip(a.features, b.features))

    def test_gat_singleton_neighbor(self):
        g = G.build_graph(3, [(0, 1), (1, 2)]).with_self_loops()
        leaf = G.build_graph(3, [(0, 1), (1, 2)])
        att = forward(init_model(ModelConfig(arch="gat", layers=1)), leaf, X(3, 4)).attention[0][0]
        assert att[0, 1] == 1.0 and att[2, 1] == 1.0
        att2 = forward(init_model(ModelConfig(arch="gat", layers=1)), g, X(3, 4)).attention[0][0]
        assert np.allclose(att2.sum(axis=1), 1)

    def test_first_token_ignores_context(self):
        cfg = ModelConfig(arch="transformer", causal=True, layers=3, dim=4, mlp=True, residual=True)
        m = init_model(cfg)
        x = X(6, 4)
        y = x.copy()
        y[1:] = X(5, 4, seed=9)
        assert np.array_equal(forward(m, None, x).features[-1][0], forward(m, None, y).features[-1][0])

    @pytest.mark.parametrize("arch", ["mean_gnn", "gin", "gat"])
    def test_permutation_equivariance(self, arch):
        g = G.barbell(3)
        perm = np.random.default_rng(1).permutation(g.n)
        inv = np.argsort(perm)
        h = G.build_graph(g.n, [(int(inv[u]), int(inv[v])) for u, v in g.edges])
        m = init_model(ModelConfig(arch=arch, layers=2))
        x = X(g.n, 4)
        out_g = forward(m, g, x).features[-1]
        out_h = forward(m, h, x[perm]).features[-1]
        assert np.allclose(out_h, out_g[perm], atol=1e-12)

    def test_sink_and_pause_layout(self):
        cfg = ModelConfig(arch="transformer", causal=True, sink_token=True, pause_tokens=2)
        tr = forward(init_model(cfg), None, X(3, 4))
        assert tr.roles == ["sink", "token", "token", "token", "pause", "pause"]
        assert tr.features[-1].shape == (6, 4)

    def test_graph_size_mismatch(self):
        with pytest.raises(ConfigError):
            forward(init_model(ModelConfig(arch="mean_gnn")), G.path(3), X(4, 4))

    def test_schedule(self):
        g = G.path(4)
        m = init_model(ModelConfig(arch="mean_gnn", layers=2, linear_mode=True))
        tr = forward(m, schedule_fc_last(g, 2), X(4, 4))
        assert tr.graphs[1].num_edges == 6

    def test_masked_softmax_rows(self):
        s = masked_softmax(np.zeros((3, 3)), G.causal(3).adjacency() > 0)
        assert np.allclose(s, [[1, 0, 0], [.5, .5, 0], [1 / 3, 1 / 3, 1 / 3]])


class TestJacobian:
    def test_identity_at_zero_span(self):
        m = init_model(ModelConfig(arch="mean_gnn"))
        jb = empirical_jacobian(m, G.path(3), X(3, 4), 1, 1, 2, 2)
        assert np.array_equal(jb.block, np.eye(4))

    @pytest.mark.parametrize("layers", [1, 2, 3])
    def test_mean_gnn_matches_hand_assembled(self, layers):
        g = G.path(3)
        m = init_model(ModelConfig(arch="mean_gnn", layers=layers, dim=3, linear_mode=True))
        p = np.array([[1 / 2, 1 / 2, 0], [1 / 3, 1 / 3, 1 / 3], [0, 1 / 2, 1 / 2]])
        w = np.eye(3)
        for lw in m.weights:
            w = w @ lw["W"]
        pl = np.linalg.matrix_power(p, layers)
        for u in range(3):
            for v in range(3):
                blk = empirical_jacobian(m, g, X(3, 3), 0, layers, u, v).block
                assert np.allclose(blk, pl[u, v] * w.T, atol=1e-6)

    def test_far_pairs_vanish(self):
        g = G.path(4)
        m = init_model(ModelConfig(arch="mean_gnn", layers=2, linear_mode=True))
        assert empirical_jacobian(m, g, X(4, 4), 0, 2, 3, 0).max_abs <= 1e-12

    def test_sensitivity_matches_blocks(self):
        g = G.grid(2, 2)
        m = init_model(ModelConfig(arch="gin", layers=2))
        x = X(4, 4)
        s = sensitivity_matrix(m, g, x, 0, 2)
        for u in range(4):
            for v in range(4):
                assert s[u, v] == pytest.approx(empirical_jacobian(m, g, x, 0, 2, u, v).spectral_norm, abs=1e-12)


class TestLipschitz:
    def test_zero_weights(self):
        spec, _ = lipschitz_constants(init_model(ModelConfig(arch="mean_gnn", weight_scale=0)))
        assert spec.alpha == 0

    def test_mean_beta_at_most_one(self):
        m = init_model(ModelConfig(arch="mean_gnn", identity_weights=True))
        spec, certified = lipschitz_constants(m, G.barbell(4))
        assert spec.beta <= 1 and spec.alpha == 1 and certified
        assert spec.beta == pytest.approx(1 / 4)

    def test_scaling_doubles_w(self):
        a, _ = lipschitz_constants(init_model(ModelConfig(arch="gin", weight_scale=1.0)))
        b, _ = lipschitz_constants(init_model(ModelConfig(arch="gin", weight_scale=2.0)))
        assert b.w == 2 * a.w and b.alpha == pytest.approx(2 * a.alpha)

    def test_attention_is_estimate(self):
        _, certified = lipschitz_constants(init_model(ModelConfig(arch="gat")))
        assert not certified
