"""Greedy bottleneck-reducing rewiring, expander overlays and FC-last schedules."""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .curvature import forman_curvature_map
from .graph import Graph, GraphError, build_graph, complete, graph_from_dict, random_regular
from .spectral import (DisconnectedGraphError, effective_resistance_matrix, laplacian_spectrum)

OBJECTIVES = ("spectral_gap", "curvature", "resistance")
IMPROVE_TOL = 1e-12


class RewireError(ValueError):
    pass


@dataclass(frozen=True)
class RewireStep:
    action: str            # "add" | "remove"
    edge: tuple[int, int]
    before: float
    after: float


@dataclass
class RewirePlan:
    base: Graph
    objective: str
    budget: int
    variant: str = ""
    steps: list[RewireStep] = field(default_factory=list)

    def apply(self, g: Graph | None = None) -> Graph:
        """Replay the steps on ``g`` (default: the base graph), validating each edit."""
        g = self.base if g is None else g
        for s in self.steps:
            if s.action == "add":
                g = g.edit(add=[s.edge])
            elif s.action == "remove":
                g = g.edit(remove=[s.edge])
                if not g.is_connected():
                    raise RewireError(f"removing {s.edge} disconnects the graph")
            else:
                raise RewireError(f"unknown action {s.action!r}")
        return g

    def objective_series(self) -> list[float]:
        if not self.steps:
            return []
        return [self.steps[0].before] + [s.after for s in self.steps]

    def to_dict(self) -> dict:
        return {
            "base": self.base.to_dict(),
            "objective": self.objective,
            "variant": self.variant,
            "budget": self.budget,
            "steps": [{"action": s.action, "edge": list(s.edge), "before": s.before, "after": s.after}
                      for s in self.steps],
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)

    @classmethod
    def from_dict(cls, data: dict) -> "RewirePlan":
        base = graph_from_dict(data["base"])
        steps = [RewireStep(s["action"], (int(s["edge"][0]), int(s["edge"][1])),
                            float(s["before"]), float(s["after"])) for s in data["steps"]]
        return cls(base, data["objective"], int(data["budget"]), data.get("variant", ""), steps)


def objective_value(g: Graph, objective: str, variant: str = "total") -> float:
    """Raw objective value; resistance is minimized, the other two maximized."""
    if objective == "spectral_gap":
        return laplacian_spectrum(g, "normalized").spectral_gap
    if objective == "curvature":
        return float(forman_curvature_map(g).min_value)
    if objective == "resistance":
        r = effective_resistance_matrix(g)
        return r.max_pair() if variant == "max" else r.total()
    raise RewireError(f"unknown objective {objective!r}; choose from {OBJECTIVES}")


def _gain(objective: str, before: float, after: float) -> float:
    # resistance is minimized, the others maximized
    return before - after if objective == "resistance" else after - before


def rewire_greedy(g: Graph, objective: str, budget: int, variant: str = "total",
                  allow_delete: bool = False) -> RewirePlan:
    """Greedy edits, each the single best strict improvement of the objective.

    Candidates are all non-edges (plus existing edges when ``allow_delete``
    is set for the resistance objective; removals that disconnect are
    skipped).  Every candidate is evaluated exactly.  Ties go to the
    lexicographically smallest ``(action, u, v)`` with additions first.
    """
    if objective not in OBJECTIVES:
        raise RewireError(f"unknown objective {objective!r}; choose from {OBJECTIVES}")
    if g.directed:
        raise RewireError("rewiring requires an undirected graph")
    if allow_delete and objective != "resistance":
        raise RewireError("edge deletion is only supported for the resistance objective")
    if variant not in ("total", "max"):
        raise RewireError("variant must be 'total' or 'max'")
    if budget < 0:
        raise RewireError("budget must be >= 0")
    if not g.non_edges():
        raise RewireError("graph is complete: no candidate edges")
    if not g.is_connected():
        raise DisconnectedGraphError("rewiring requires a connected graph")
    var = variant if objective == "resistance" else ""
    plan = RewirePlan(g, objective, budget, var)
    cur = g
    value = objective_value(cur, objective, variant)
    for _ in range(budget):
        best = None
        cands = [("add", e) for e in cur.non_edges()]
        if allow_delete:
            cands += [("remove", e) for e in cur.edges]
        for action, e in cands:
            nxt = cur.edit(add=[e]) if action == "add" else cur.edit(remove=[e])
            if action == "remove" and not nxt.is_connected():
                continue
            val = objective_value(nxt, objective, variant)
            gain = _gain(objective, value, val)
            if gain <= IMPROVE_TOL:
                continue
            if best is None or gain > best[0] + IMPROVE_TOL:
                best = (gain, action, e, val, nxt)
        if best is None:
            break
        _, action, e, val, nxt = best
        plan.steps.append(RewireStep(action, e, value, val))
        cur, value = nxt, val
    return plan


@dataclass(frozen=True)
class ExpanderCertificate:
    normalized_gap: float
    gap_floor: float
    attempts: int
    seed: int

    def to_dict(self) -> dict:
        return {"normalized_gap": self.normalized_gap, "gap_floor": self.gap_floor,
                "attempts": self.attempts, "seed": self.seed}


def expander_overlay(n: int, d: int, seed: int = 0, gap_floor: float = 0.2,
                     max_retries: int = 100) -> tuple[Graph, ExpanderCertificate]:
    """Seeded random d-regular graph whose normalized spectral gap clears ``gap_floor``."""
    if d < 3:
        raise GraphError("expander_overlay needs d >= 3")
    if (n * d) % 2:
        raise GraphError("expander_overlay needs n*d even")
    for attempt in range(max_retries):
        sub_seed = int(np.random.default_rng([seed, attempt]).integers(2**31))
        g = random_regular(n, d, seed=sub_seed)
        try:
            gap = laplacian_spectrum(g, "normalized").spectral_gap
        except DisconnectedGraphError:
            gap = 0.0
        if gap >= gap_floor:
            return g, ExpanderCertificate(gap, gap_floor, attempt + 1, sub_seed)
    raise RewireError(f"no {d}-regular graph with gap >= {gap_floor} in {max_retries} attempts")


@dataclass(frozen=True)
class LayerTopologySchedule:
    layers: tuple[Graph, ...]

    def __post_init__(self):
        if not self.layers:
            raise GraphError("schedule needs at least one layer")
        if len({g.n for g in self.layers}) != 1:
            raise GraphError("all scheduled graphs must share the node count")

    @property
    def n(self) -> int:
        return self.layers[0].n

    def describe(self) -> list[str]:
        return [g.name or f"graph(n={g.n})" for g in self.layers]


def schedule_fc_last(g: Graph, L: int) -> LayerTopologySchedule:
    """``g`` for layers 1..L-1 and the complete graph on the same nodes at layer L."""
    if L < 1:
        raise GraphError("L must be >= 1")
    fc = complete(g.n)
    if g.directed:
        fc = build_graph(g.n, [(i, j) for i in range(g.n) for j in range(g.n) if i != j],
                         directed=True, name=f"complete({g.n})")
    return LayerTopologySchedule(tuple([g] * (L - 1) + [fc]))


def schedule_receptive_field(schedule: LayerTopologySchedule, node: int,
                             include_self: bool = True) -> frozenset[int]:
    """Nodes whose inputs reach ``node`` after running every scheduled layer."""
    reach = {node}
    for g in reversed(schedule.layers):
        pred = g.predecessors()
        nxt = set(reach) if include_self else set()
        for x in reach:
            nxt.update(pred[x])
        reach = nxt
    return frozenset(reach)
