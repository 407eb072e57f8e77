"""Topological upper bounds on node-to-node Jacobian sensitivity.

All bounds use the raw 0/1 adjacency of the graph passed in.  Pass
``g.with_self_loops()`` when the model's aggregation includes the node
itself, so the walk counts cover the model's actual computation graph.
"""

from __future__ import annotations

from dataclasses import dataclass, field, fields

import numpy as np

from .graph import Graph, adjacency_powers

KINDS = ("bound_power", "bound_cumulative", "bound_layerwise", "bound_width", "empirical")


@dataclass(frozen=True)
class BoundSpec:
    alpha: float = 1.0
    beta: float = 1.0
    c_sigma: float = 1.0
    c_alpha: float = 1.0
    c_beta: float = 1.0
    w: float = 1.0
    d: float = 1.0

    def __post_init__(self):
        for f in fields(self):
            val = getattr(self, f.name)
            if not np.isfinite(val) or val < 0:
                raise ValueError(f"BoundSpec.{f.name} must be a finite nonnegative real (got {val})")

    def to_dict(self) -> dict:
        return {f.name: getattr(self, f.name) for f in fields(self)}


@dataclass(frozen=True)
class SensitivityMatrix:
    values: np.ndarray
    kind: str
    layer_span: tuple[int, int]
    regime: np.ndarray | None = None  # entries inside the bound's stated validity regime
    notes: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown sensitivity kind {self.kind!r}")

    def to_dict(self) -> dict:
        d = {
            "kind": self.kind,
            "layer_span": list(self.layer_span),
            "values": self.values.tolist(),
            "notes": self.notes,
        }
        if self.regime is not None:
            d["regime"] = self.regime.astype(int).tolist()
        return d

    def to_csv(self) -> str:
        r0, r1 = self.layer_span
        lines = [f"# {self.kind} layer_span={r0}..{r1}",
                 ",".join(["target\\source"] + [str(j) for j in range(self.values.shape[1])])]
        for i, row in enumerate(self.values):
            lines.append(",".join([str(i)] + [repr(float(x)) for x in row]))
        return "\n".join(lines) + "\n"


def _walk_sum(powers: list[np.ndarray], lo: int, hi: int) -> np.ndarray:
    # exact integer sum, converted once
    total = powers[lo].astype(object)
    for p in powers[lo + 1:hi + 1]:
        total = total + p.astype(object)
    return np.array(total, dtype=float)


def power_bound(g: Graph, spec: BoundSpec, r_plus_1: int) -> SensitivityMatrix:
    """``(alpha beta)^(r+1) (A^(r+1))_is``; regime flags pairs exactly r+1 hops apart."""
    if r_plus_1 < 1:
        raise ValueError("r_plus_1 must be >= 1")
    powers = adjacency_powers(g, r_plus_1)
    vals = (spec.alpha * spec.beta) ** r_plus_1 * powers[r_plus_1].astype(float)
    regime = g.distance_matrix() == r_plus_1
    return SensitivityMatrix(vals, "bound_power", (0, r_plus_1), regime,
                             {"regime": "dist(s, i) == r+1"})


def cumulative_bound(g: Graph, spec: BoundSpec, r: int) -> SensitivityMatrix:
    """``(2 alpha beta)^r sum_{l=0..r} (A^l)_uv`` for any pair."""
    if r < 0:
        raise ValueError("r must be >= 0")
    powers = adjacency_powers(g, r)
    vals = (2.0 * spec.alpha * spec.beta) ** r * _walk_sum(powers, 0, r)
    return SensitivityMatrix(vals, "bound_cumulative", (0, r))


def layerwise_bound(g: Graph, spec: BoundSpec, r: int, L: int) -> SensitivityMatrix:
    """Sensitivity of layer ``r+L`` to layer ``r``: ``(2 alpha beta)^L sum_{l=r..r+L} (A^l)_uv``."""
    if L <= 0 or r < 0:
        raise ValueError("need L > 0 and r >= 0")
    powers = adjacency_powers(g, r + L)
    vals = (2.0 * spec.alpha * spec.beta) ** L * _walk_sum(powers, r, r + L)
    return SensitivityMatrix(vals, "bound_layerwise", (r, r + L))


def width_bound(g: Graph, spec: BoundSpec, r_plus_1: int) -> SensitivityMatrix:
    """``(c_sigma w d)^(r+1) (c_alpha I + c_beta A)``, evaluated literally with ``A`` at the first power."""
    if r_plus_1 < 1:
        raise ValueError("r_plus_1 must be >= 1")
    a = g.adjacency().astype(float)
    vals = (spec.c_sigma * spec.w * spec.d) ** r_plus_1 * (spec.c_alpha * np.eye(g.n) + spec.c_beta * a)
    return SensitivityMatrix(vals, "bound_width", (0, r_plus_1), None, {"convention": "literal, A to the first power"})


def dominates(bound: SensitivityMatrix, empirical: np.ndarray, slack: float = 1e-8) -> np.ndarray:
    """Entrywise ``empirical <= bound + slack``."""
    return empirical <= bound.values + slack
