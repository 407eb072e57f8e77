import numpy as np
import pytest

from propgraph import graph as G
from propgraph.acceptance import random_connected_graphs
from propgraph.curvature import forman_curvature_map
from propgraph.graph import GraphError


def oracle(g, u, v):
    succ = [set(s) for s in g.successors()]
    return 4 - len(succ[u]) - len(succ[v]) + 3 * len(succ[u] & succ[v])


def test_triangle():
    cm = forman_curvature_map(G.complete(3))
    assert set(cm.scores.values()) == {3}


def test_single_edge():
    assert forman_curvature_map(G.path(2)).scores == {(0, 1): 2}


@pytest.mark.parametrize("m", [4, 5, 6])
def test_barbell_bridge_is_unique_minimum(m):
    cm = forman_curvature_map(G.barbell(m))
    bridge = (m - 1, m)
    assert cm.min_edge == bridge
    assert cm.scores[bridge] == 4 - 2 * m
    assert sum(1 for c in cm.scores.values() if c == cm.min_value) == 1


def test_barbell4_value():
    assert forman_curvature_map(G.barbell(4)).min_value == -4


def test_tie_break_is_lexicographic():
    cm = forman_curvature_map(G.cycle(5))
    assert cm.min_edge == (0, 1)


@pytest.mark.parametrize("g", random_connected_graphs(10, 3, 10, seed=8), ids=lambda g: f"n{g.n}")
def test_matches_formula(g):
    cm = forman_curvature_map(g)
    assert all(cm.scores[e] == oracle(g, *e) for e in g.edges)


@pytest.mark.parametrize("seed", range(5))
def test_relabel_invariance(seed):
    g = random_connected_graphs(1, 6, 10, seed=seed)[0]
    perm = np.random.default_rng(seed).permutation(g.n)
    h = G.build_graph(g.n, [(int(perm[u]), int(perm[v])) for u, v in g.edges])
    a, b = forman_curvature_map(g), forman_curvature_map(h)
    for u, v in g.edges:
        pu, pv = sorted((int(perm[u]), int(perm[v])))
        assert a.scores[(u, v)] == b.scores[(pu, pv)]


def test_rejects_directed():
    with pytest.raises(GraphError):
        forman_curvature_map(G.causal(3))


def test_csv_has_provenance_header():
    text = forman_curvature_map(G.path(3)).to_csv()
    assert text.splitlines()[:2] == ["# forman_curvature_map method=augmented_forman", "u,v,curvature"]
