import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from propgraph import graph as G
from propgraph.bounds import (BoundSpec, cumulative_bound, dominates, layerwise_bound, power_bound,
                              width_bound)

P3 = G.path(3)
UNIT = BoundSpec(alpha=1, beta=1, c_sigma=1, c_alpha=1, c_beta=1, w=1, d=1)


def spec(**kw):
    return BoundSpec(**{**UNIT.to_dict(), **kw})


class TestPower:
    def test_p3_endpoints(self):
        assert power_bound(P3, UNIT, 2).values[0, 2] == 1

    def test_p3_half(self):
        assert power_bound(P3, spec(alpha=0.5, beta=0.5), 2).values[0, 2] == 0.0625

    @pytest.mark.parametrize("g", [P3, G.barbell(3), G.grid(2, 3)])
    def test_alpha_zero(self, g):
        assert not power_bound(g, spec(alpha=0), 3).values.any()

    def test_regime_flags(self):
        b = power_bound(G.path(4), UNIT, 2)
        assert b.regime[0, 2] and not b.regime[0, 1] and not b.regime[0, 3]


class TestCumulative:
    def test_adjacent_r1(self):
        assert cumulative_bound(P3, UNIT, 1).values[0, 1] == 2

    def test_identity_at_r0(self):
        assert cumulative_bound(P3, UNIT, 0).values[1, 1] == 1

    def test_p3_endpoints_r1(self):
        assert cumulative_bound(P3, UNIT, 1).values[0, 2] == 0

    @pytest.mark.parametrize("r", range(5))
    def test_zero_iff_beyond_reach(self, r):
        g = G.path(6)
        b = cumulative_bound(g, UNIT, r).values
        d = g.distance_matrix()
        assert ((b == 0) == (d > r)).all()


class TestLayerwise:
    def test_p3_endpoints(self):
        assert layerwise_bound(P3, UNIT, 1, 1).values[0, 2] == 2

    @pytest.mark.parametrize("r2", [1, 2, 3])
    def test_r0_coincides_with_cumulative(self, r2):
        g = G.barbell(3)
        s = spec(alpha=0.7, beta=0.4)
        assert np.array_equal(layerwise_bound(g, s, 0, r2).values, cumulative_bound(g, s, r2).values)

    def test_zero_spec(self):
        assert not layerwise_bound(P3, spec(alpha=0, beta=0), 1, 2).values.any()


class TestWidth:
    def test_unit_is_i_plus_a(self):
        assert np.array_equal(width_bound(P3, UNIT, 1).values, np.eye(3) + P3.adjacency())

    @pytest.mark.parametrize("r1", [1, 2, 3])
    def test_doubling_d(self, r1):
        a = width_bound(P3, spec(d=1.5), r1).values
        b = width_bound(P3, spec(d=3.0), r1).values
        assert np.allclose(b, a * 2 ** r1)

    def test_cbeta_zero_is_diagonal(self):
        b = width_bound(P3, spec(c_beta=0, c_alpha=0.5, w=2), 2).values
        assert np.array_equal(b, 0.5 * 4 * np.eye(3))


@given(st.floats(0.05, 2), st.floats(0.05, 2), st.integers(1, 5))
@settings(max_examples=40, deadline=None)
def test_monotone_in_alpha_beta(alpha, beta, r):
    g = G.cycle(5)
    lo = cumulative_bound(g, spec(alpha=alpha, beta=beta), r).values
    hi = cumulative_bound(g, spec(alpha=alpha * 1.5, beta=beta), r).values
    assert (hi >= lo).all()


def test_negative_spec_rejected():
    with pytest.raises(ValueError):
        spec(alpha=-1)


def test_dominates_with_slack():
    b = power_bound(P3, UNIT, 2)
    emp = b.values.copy()
    emp[0, 2] += 5e-9
    assert dominates(b, emp).all()
    emp[0, 2] += 1e-6
    assert not dominates(b, emp)[0, 2]


def test_csv_header():
    first = cumulative_bound(P3, UNIT, 1).to_csv().splitlines()[0]
    assert first.startswith("#") and "bound_cumulative" in first
