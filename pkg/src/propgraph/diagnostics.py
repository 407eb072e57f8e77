"""Pathology metrics over graphs and layer traces."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .graph import Graph, GraphError, adjacency_powers, causal, receptive_field
from .models import Model, ModelConfig, LayerTrace, empirical_jacobian, forward, init_model


@dataclass(frozen=True)
class TraceSeries:
    metric: str
    x: tuple
    values: tuple[float, ...]
    extra: dict = field(default_factory=dict)
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        if len(self.x) != len(self.values):
            raise ValueError("x and values differ in length")
        if not all(np.isfinite(v) for v in self.values):
            raise ValueError(f"{self.metric}: non-finite values")

    def to_csv(self, xname: str = "x") -> str:
        params = " ".join(f"{k}={v}" for k, v in sorted(self.metadata.items()))
        cols = [xname, "value", *self.extra]
        lines = [f"# {self.metric} {params}".rstrip(), ",".join(cols)]
        for i, (x, v) in enumerate(zip(self.x, self.values)):
            row = [str(x), repr(float(v))] + [repr(float(self.extra[k][i])) for k in self.extra]
            lines.append(",".join(row))
        return "\n".join(lines) + "\n"

    def to_dict(self) -> dict:
        return {"metric": self.metric, "x": list(self.x), "values": list(self.values),
                "extra": {k: list(v) for k, v in self.extra.items()}, "metadata": self.metadata}


def dirichlet_energy(H: np.ndarray, g: Graph) -> float:
    """``(1/N) sum_i sum_{j in N(i)} ||H_i - H_j||^2`` over the undirected support of ``g``."""
    H = np.asarray(H, dtype=float)
    if H.ndim == 1:
        H = H[:, None]
    if H.shape[0] != g.n:
        raise ValueError(f"features have {H.shape[0]} rows, graph has {g.n} nodes")
    if g.n == 0:
        return 0.0
    es = g.undirected_support().edges
    if not es:
        return 0.0
    u, v = np.array(es).T
    diff = H[u] - H[v]
    # each undirected edge appears once per endpoint's neighborhood
    return float(2.0 * np.sum(diff * diff) / g.n)


def feature_diameter(H: np.ndarray) -> float:
    H = np.asarray(H, dtype=float)
    if H.ndim == 1:
        H = H[:, None]
    if H.shape[0] < 2:
        return 0.0
    d = H[:, None, :] - H[None, :, :]
    return float(np.sqrt((d * d).sum(axis=2)).max())


def oversmoothing_curve(trace: LayerTrace, g: Graph | None = None) -> TraceSeries:
    """Dirichlet energy per layer, with feature diameter as an extra column."""
    g = trace.graphs[0] if g is None else g
    energy = [dirichlet_energy(h, g) for h in trace.features]
    diam = [feature_diameter(h) for h in trace.features]
    meta = {"arch": trace.config.arch, "cfg": trace.config.config_hash(), "graph": g.name or f"n={g.n}",
            "support": "undirected support of directed graph" if g.directed else "undirected"}
    return TraceSeries("dirichlet_energy", tuple(range(len(energy))), tuple(energy),
                       {"diameter": tuple(diam)}, meta)


def contraction_factor(attention_map: np.ndarray, tol: float = 1e-9) -> float:
    """Dobrushin-style upper bound ``1 - n * min(S)`` (clipped to [0, 1]) on diameter contraction."""
    s = np.asarray(attention_map, dtype=float)
    if s.ndim != 2 or s.shape[0] == 0:
        raise ValueError("attention map must be a nonempty matrix")
    if s.min() < -tol or not np.allclose(s.sum(axis=1), 1.0, rtol=0.0, atol=tol):
        raise ValueError("attention map is not row-stochastic")
    n = s.shape[1]
    return float(min(1.0, max(0.0, 1.0 - n * s.min())))


def diameter_ratio(attention_map: np.ndarray, features: np.ndarray) -> float:
    """``diam(S V) / diam(V)`` (0 when the input diameter is 0)."""
    before = feature_diameter(features)
    if before == 0.0:
        return 0.0
    return feature_diameter(np.asarray(attention_map) @ features) / before


# attention sinks -----------------------------------------------------


@dataclass(frozen=True)
class SinkReport:
    masses: np.ndarray        # (layers, heads, n) mean incoming mass over rows that see j
    baseline: np.ndarray      # (n,) uniform-attention expectation for the same rows
    value_norms: np.ndarray   # (layers, heads, n)
    roles: tuple[str, ...]
    threshold: float

    @property
    def mean_mass(self) -> np.ndarray:
        return self.masses.mean(axis=(0, 1))

    @property
    def sink_score(self) -> float:
        """Mean incoming mass on position 1."""
        return float(self.mean_mass[0])

    @property
    def sink_ratio(self) -> float:
        return self.sink_score / float(self.baseline[0])

    @property
    def flagged(self) -> bool:
        return self.sink_ratio > self.threshold

    @property
    def placeholder_mass(self) -> float | None:
        return float(self.mean_mass[0]) if self.roles and self.roles[0] == "sink" else None

    @property
    def first_token_mass(self) -> float:
        return float(self.mean_mass[self.roles.index("token")])

    def to_dict(self) -> dict:
        return {
            "roles": list(self.roles),
            "mean_mass": self.mean_mass.tolist(),
            "baseline": self.baseline.tolist(),
            "sink_score": self.sink_score,
            "sink_ratio": self.sink_ratio,
            "threshold": self.threshold,
            "flagged": self.flagged,
            "placeholder_mass": self.placeholder_mass,
            "first_token_mass": self.first_token_mass,
            "masses": self.masses.tolist(),
            "value_norms": self.value_norms.tolist(),
        }


def sink_report(trace: LayerTrace, threshold: float = 3.0) -> SinkReport:
    if not any(a is not None for a in trace.attention):
        raise ValueError("trace carries no attention maps")
    masses, norms = [], []
    baseline = None
    for l, att in enumerate(trace.attention):
        vis = trace.graphs[l].adjacency() > 0          # vis[i, j]: row i can see j
        count = vis.sum(axis=0)
        inv_len = 1.0 / np.maximum(vis.sum(axis=1), 1)
        base = (vis * inv_len[:, None]).sum(axis=0) / np.maximum(count, 1)
        baseline = base if baseline is None else baseline
        masses.append((att * vis[None]).sum(axis=1) / np.maximum(count, 1)[None, :])
        norms.append(np.linalg.norm(trace.values[l], axis=2))
    return SinkReport(np.stack(masses), baseline, np.stack(norms), tuple(trace.roles), threshold)


# causal geometry -----------------------------------------------------


@dataclass(frozen=True)
class RunwayProfile:
    n: int
    layers: int
    receptive_size: tuple[int, ...]
    downstream_readers: tuple[int, ...]
    reach: tuple[int, ...]                       # positions influenced after `layers` layers
    path_counts: tuple[tuple[int, ...], ...]     # [position][l-1] paths out of it through l layers

    def to_csv(self) -> str:
        head = ["position", "receptive_size", "downstream_readers", "reach"]
        head += [f"paths_L{l}" for l in range(1, self.layers + 1)]
        lines = [f"# runway_profile n={self.n} layers={self.layers}", ",".join(head)]
        for i in range(self.n):
            row = [i + 1, self.receptive_size[i], self.downstream_readers[i], self.reach[i],
                   *self.path_counts[i]]
            lines.append(",".join(str(x) for x in row))
        return "\n".join(lines) + "\n"

    def to_dict(self) -> dict:
        return {"n": self.n, "layers": self.layers, "receptive_size": list(self.receptive_size),
                "downstream_readers": list(self.downstream_readers), "reach": list(self.reach),
                "path_counts": [list(p) for p in self.path_counts]}


def runway_profile(g: Graph, L: int) -> RunwayProfile:
    """Receptive-field size, reader count and unrolled-DAG path counts per position."""
    if L < 1:
        raise ValueError("L must be >= 1")
    if not g.directed or g.edges != causal(g.n).edges:
        raise GraphError("runway_profile requires a causal graph")
    n = g.n
    powers = adjacency_powers(g, L)
    recv = tuple(len(receptive_field(g, i, 1)) for i in range(n))
    readers = tuple(n - 1 - i for i in range(n))
    reach = tuple(int((powers[L][:, i] > 0).sum()) for i in range(n))
    paths = tuple(tuple(int(powers[l][:, i].sum()) for l in range(1, L + 1)) for i in range(n))
    return RunwayProfile(n, L, recv, readers, reach, paths)


# under-reaching ------------------------------------------------------


@dataclass(frozen=True)
class Violation:
    u: int
    v: int
    distance: int  # -1 when v cannot reach u at all
    value: float


def underreaching_check(model: Model, g: Graph | None, L: int | None = None,
                        X: np.ndarray | None = None, seed: int = 0) -> list[Violation]:
    """Jacobian blocks of pairs farther apart than ``L`` must vanish."""
    L = model.cfg.layers if L is None else L
    if not 1 <= L <= model.cfg.layers:
        raise ValueError("L must be between 1 and the model depth")
    if X is None:
        n = g.n if g is not None else 1
        X = np.random.default_rng(seed).standard_normal((n, model.cfg.dim))
    trace = forward(model, g, X)
    graph = trace.graphs[0]
    dist = graph.distance_matrix()  # dist[u, v]: hops from v to u
    tol = 1e-12 if model.cfg.linear_mode else 1e-9
    out = []
    for u in range(graph.n):
        for v in range(graph.n):
            if dist[u, v] >= 0 and dist[u, v] <= L:
                continue
            jb = empirical_jacobian(model, g, X, 0, L, u, v, trace=trace)
            if jb.max_abs > tol:
                out.append(Violation(u, v, int(dist[u, v]), jb.max_abs))
    return out


# last-token collapse -------------------------------------------------


def last_token_collapse(cfg: ModelConfig, lengths, seed: int = 0) -> TraceSeries:
    """``||h_last(seq_a) - h_last(seq_b)||`` for sequences differing only in the final token.

    ``h_last`` is the final row of the sequence (after any appended pause
    tokens), i.e. the position that would predict the next token.
    """
    if cfg.arch != "transformer" or not cfg.causal:
        raise ValueError("last_token_collapse requires a causal transformer config")
    model = init_model(cfg)
    ab = np.random.default_rng([seed, 1]).standard_normal((2, cfg.dim))
    diffs = []
    for n in lengths:
        if n < 1:
            raise ValueError("sequence lengths must be >= 1")
        ctx = np.random.default_rng([seed, 2, n]).standard_normal((n - 1, cfg.dim))
        ha = forward(model, None, np.vstack([ctx, ab[:1]])).features[-1][-1]
        hb = forward(model, None, np.vstack([ctx, ab[1:]])).features[-1][-1]
        diffs.append(float(np.linalg.norm(ha - hb)))
    meta = {"cfg": cfg.config_hash(), "seed": seed, "layers": cfg.layers,
            "residual": cfg.residual, "uniform": cfg.uniform_attention}
    return TraceSeries("last_token_collapse", tuple(int(n) for n in lengths), tuple(diffs), {}, meta)


def distinct_token_pair(cfg: ModelConfig, seed: int = 0) -> np.ndarray:
    """The two final-token embeddings used by :func:`last_token_collapse`."""
    return np.random.default_rng([seed, 1]).standard_normal((2, cfg.dim))
