"""Small deterministic message-passing reference models.

Four architectures share one layer loop:

* ``mean_gnn``    ``H' = s(P H W)`` with ``P = D^-1 (A + I)`` (mean over self and in-neighbors)
* ``gin``         ``H' = s(((1 + eps) I + A) H W)`` with ``A_ii = 0``
* ``gat``         ``H' = s(S (H W))``, ``S`` a masked softmax of pairwise MLP scores over ``A``
* ``transformer`` ``softmax(Q K^T / sqrt(d_k) + M) V`` per head, optional residual,
  layernorm, MLP, differential attention, pause and sink tokens

``s`` is ``tanh`` unless ``linear_mode`` is set.  No model is trained:
weights are drawn once from generators keyed on ``(seed, tensor name)``.
"""

from __future__ import annotations

import hashlib
import json
import zlib
from dataclasses import asdict, dataclass, field, fields
from typing import Sequence

import numpy as np

from .bounds import BoundSpec
from .graph import Graph, causal, full_attention

ARCHS = ("mean_gnn", "gat", "gin", "transformer")
FD_STEP = 1e-5
LN_EPS = 1e-5
GAT_HIDDEN = 8


class ConfigError(ValueError):
    """Invalid model configuration or flag combination."""


@dataclass(frozen=True)
class ModelConfig:
    arch: str
    layers: int = 2
    dim: int = 4
    seed: int = 0
    heads: int = 1
    causal: bool = False
    residual: bool = False
    layernorm: bool = False
    mlp: bool = False
    gin_epsilon: float = 0.0
    differential_lambda: float | None = None
    pause_tokens: int = 0
    pause_placement: str = "append"
    sink_token: bool = False
    linear_mode: bool = False
    uniform_attention: bool = False
    identity_weights: bool = False
    weight_scale: float = 1.0

    def __post_init__(self):
        if self.arch not in ARCHS:
            raise ConfigError(f"arch must be one of {ARCHS}, got {self.arch!r}")
        if self.layers < 1 or self.dim < 1 or self.heads < 1:
            raise ConfigError("layers, dim and heads must be >= 1")
        if self.weight_scale < 0:
            raise ConfigError("weight_scale must be >= 0")
        tf = self.arch == "transformer"
        attn = self.arch in ("transformer", "gat")
        if self.dim % self.heads:
            raise ConfigError("dim must be divisible by heads")
        if self.heads > 1 and not attn:
            raise ConfigError("heads > 1 only for attention architectures")
        for flag in ("causal", "layernorm", "mlp", "residual", "sink_token", "uniform_attention"):
            if getattr(self, flag) and not tf:
                raise ConfigError(f"{flag} is only valid for arch=transformer")
        if self.differential_lambda is not None:
            if not tf:
                raise ConfigError("differential_lambda is only valid for arch=transformer")
            if self.differential_lambda < 0:
                raise ConfigError("differential_lambda must be >= 0")
        if self.gin_epsilon != 0.0 and self.arch != "gin":
            raise ConfigError("gin_epsilon is only valid for arch=gin")
        if self.pause_tokens < 0:
            raise ConfigError("pause_tokens must be >= 0")
        if (self.pause_tokens or self.sink_token) and not (tf and self.causal):
            raise ConfigError("pause/sink tokens require a causal transformer")
        if self.pause_placement not in ("prepend", "append"):
            raise ConfigError("pause_placement must be 'prepend' or 'append'")
        if self.linear_mode and self.layernorm:
            raise ConfigError("linear_mode excludes layernorm")
        if self.identity_weights and self.arch == "gat":
            raise ConfigError("identity_weights is not defined for gat")

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: dict) -> "ModelConfig":
        known = {f.name for f in fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        return cls(**data)

    @classmethod
    def from_json(cls, path: str) -> "ModelConfig":
        with open(path, encoding="utf-8") as fh:
            try:
                return cls.from_dict(json.load(fh))
            except json.JSONDecodeError as exc:
                raise ConfigError(f"invalid config JSON: {exc}") from None

    def config_hash(self) -> str:
        blob = json.dumps(self.to_dict(), sort_keys=True).encode()
        return hashlib.sha256(blob).hexdigest()[:16]


def _rng(seed: int, tag: str) -> np.random.Generator:
    return np.random.default_rng([seed, zlib.crc32(tag.encode())])


def _draw(seed: int, tag: str, shape: tuple[int, ...], scale: float) -> np.ndarray:
    """Gaussian matrix rescaled to spectral norm ``scale``."""
    g = _rng(seed, tag).standard_normal(shape)
    if g.size == 0 or scale == 0.0:
        return np.zeros(shape) if scale == 0.0 else g
    norm = np.linalg.norm(g, 2) if g.ndim == 2 else np.linalg.norm(g)
    return g * (scale / norm)


def _frozen(a: np.ndarray) -> np.ndarray:
    a = np.array(a, dtype=float)
    a.setflags(write=False)
    return a


class Model:
    """Immutable weights for one :class:`ModelConfig`."""

    def __init__(self, cfg: ModelConfig):
        self.cfg = cfg
        self.weights: list[dict[str, np.ndarray]] = []
        d, s, seed = cfg.dim, cfg.weight_scale, cfg.seed
        for l in range(cfg.layers):
            w: dict[str, np.ndarray] = {}
            if cfg.arch in ("mean_gnn", "gin"):
                w["W"] = np.eye(d) * s if cfg.identity_weights else _draw(seed, f"L{l}/W", (d, d), s)
            elif cfg.arch == "gat":
                dh = d // cfg.heads
                for h in range(cfg.heads):
                    w[f"W{h}"] = _draw(seed, f"L{l}/H{h}/W", (d, dh), s)
                    w[f"S1_{h}"] = _draw(seed, f"L{l}/H{h}/S1", (2 * dh, GAT_HIDDEN), s)
                    w[f"S2_{h}"] = _draw(seed, f"L{l}/H{h}/S2", (GAT_HIDDEN,), s)
            else:
                dh = d // cfg.heads
                for h in range(cfg.heads):
                    qk_scale = 0.0 if cfg.uniform_attention else s
                    w[f"Q{h}"] = _draw(seed, f"L{l}/H{h}/Q", (d, dh), qk_scale)
                    w[f"K{h}"] = _draw(seed, f"L{l}/H{h}/K", (d, dh), qk_scale)
                    if cfg.identity_weights:
                        w[f"V{h}"] = np.eye(d)[:, h * dh:(h + 1) * dh] * s
                    else:
                        w[f"V{h}"] = _draw(seed, f"L{l}/H{h}/V", (d, dh), s)
                    if cfg.differential_lambda is not None:
                        w[f"Q2_{h}"] = _draw(seed, f"L{l}/H{h}/Q2", (d, dh), qk_scale)
                        w[f"K2_{h}"] = _draw(seed, f"L{l}/H{h}/K2", (d, dh), qk_scale)
                if cfg.mlp:
                    w["M1"] = _draw(seed, f"L{l}/M1", (d, d), s)
                    w["M2"] = _draw(seed, f"L{l}/M2", (d, d), s)
            self.weights.append({k: _frozen(v) for k, v in w.items()})
        self.pause_embeddings = _frozen(_rng(seed, "pause").standard_normal((cfg.pause_tokens, d)))
        self.sink_embedding = _frozen(_rng(seed, "sink").standard_normal((1 if cfg.sink_token else 0, d)))

    # token layout ------------------------------------------------------

    def roles(self, n: int) -> list[str]:
        cfg = self.cfg
        out = ["sink"] * int(cfg.sink_token)
        if cfg.pause_placement == "prepend":
            out += ["pause"] * cfg.pause_tokens
        out += ["token"] * n
        if cfg.pause_placement == "append":
            out += ["pause"] * cfg.pause_tokens
        return out

    def prepare_inputs(self, X: np.ndarray) -> np.ndarray:
        cfg = self.cfg
        parts = [self.sink_embedding]
        if cfg.pause_placement == "prepend":
            parts.append(self.pause_embeddings)
        parts.append(X)
        if cfg.pause_placement == "append":
            parts.append(self.pause_embeddings)
        return np.concatenate(parts, axis=0)

    def token_graph(self, n_total: int) -> Graph:
        return causal(n_total) if self.cfg.causal else full_attention(n_total)

    # layers ------------------------------------------------------------

    def _act(self, x: np.ndarray) -> np.ndarray:
        return x if self.cfg.linear_mode else np.tanh(x)

    def layer(self, l: int, H: np.ndarray, g: Graph) -> tuple[np.ndarray, np.ndarray | None]:
        """Apply layer ``l``; returns new features and the (heads, n, n) attention maps, if any."""
        cfg, w = self.cfg, self.weights[l]
        if cfg.arch == "mean_gnn":
            a = g.adjacency().astype(float)
            np.fill_diagonal(a, 1.0)
            p = a / a.sum(axis=1, keepdims=True)
            return self._act(p @ H @ w["W"]), None
        if cfg.arch == "gin":
            a = g.adjacency().astype(float)
            np.fill_diagonal(a, 0.0)
            agg = (1.0 + cfg.gin_epsilon) * H + a @ H
            return self._act(agg @ w["W"]), None
        if cfg.arch == "gat":
            mask = g.adjacency() > 0
            outs, maps = [], []
            for h in range(cfg.heads):
                z = H @ w[f"W{h}"]
                dh = z.shape[1]
                s1 = w[f"S1_{h}"]
                pre = (z @ s1[:dh])[:, None, :] + (z @ s1[dh:])[None, :, :]
                logits = np.tanh(pre) @ w[f"S2_{h}"]
                att = masked_softmax(logits, mask)
                maps.append(att)
                outs.append(att @ z)
            return self._act(np.concatenate(outs, axis=1)), np.stack(maps)
        return self._attention_layer(l, H, g)

    def _attention_layer(self, l: int, H: np.ndarray, g: Graph) -> tuple[np.ndarray, np.ndarray]:
        cfg, w = self.cfg, self.weights[l]
        mask = g.adjacency() > 0
        dh = cfg.dim // cfg.heads
        lam = cfg.differential_lambda
        outs, maps = [], []
        for h in range(cfg.heads):
            q = H @ w[f"Q{h}"]
            k = H @ w[f"K{h}"]
            v = H @ w[f"V{h}"]
            att = masked_softmax(q @ k.T / np.sqrt(dh), mask)
            if lam is not None:
                q2 = H @ w[f"Q2_{h}"]
                k2 = H @ w[f"K2_{h}"]
                att = att - lam * masked_softmax(q2 @ k2.T / np.sqrt(dh), mask)
            maps.append(att)
            outs.append(att @ v)
        out = np.concatenate(outs, axis=1)
        if cfg.residual:
            out = out + H
        if cfg.layernorm:
            out = layer_norm(out)
        if cfg.mlp:
            m = np.tanh(out @ w["M1"]) @ w["M2"] if not cfg.linear_mode else out @ w["M1"] @ w["M2"]
            out = out + m if cfg.residual else m
            if cfg.layernorm:
                out = layer_norm(out)
        return out, np.stack(maps)

    def value_vectors(self, l: int, H: np.ndarray) -> np.ndarray:
        """Per-head value vectors ``(heads, n, d_head)`` at layer ``l`` (attention archs)."""
        w = self.weights[l]
        key = "V" if self.cfg.arch == "transformer" else "W"
        return np.stack([H @ w[f"{key}{h}"] for h in range(self.cfg.heads)])

    def run_layers(self, H: np.ndarray, graphs: Sequence[Graph], start: int, stop: int) -> np.ndarray:
        for l in range(start, stop):
            H, _ = self.layer(l, H, graphs[l])
        return H


def masked_softmax(logits: np.ndarray, mask: np.ndarray) -> np.ndarray:
    """Row softmax over ``mask`` entries; masked entries are exactly 0, empty rows all 0."""
    x = np.where(mask, logits, -np.inf)
    row_max = x.max(axis=1, keepdims=True)
    row_max = np.where(np.isfinite(row_max), row_max, 0.0)
    e = np.where(mask, np.exp(x - row_max), 0.0)
    denom = e.sum(axis=1, keepdims=True)
    return np.divide(e, denom, out=np.zeros_like(e), where=denom > 0)


def layer_norm(x: np.ndarray) -> np.ndarray:
    mu = x.mean(axis=1, keepdims=True)
    var = x.var(axis=1, keepdims=True)
    return (x - mu) / np.sqrt(var + LN_EPS)


def init_model(cfg: ModelConfig) -> Model:
    return Model(cfg)


@dataclass
class LayerTrace:
    features: list[np.ndarray]
    attention: list[np.ndarray | None]
    values: list[np.ndarray | None]
    roles: list[str]
    graphs: list[Graph]
    config: ModelConfig
    notes: dict = field(default_factory=dict)

    @property
    def depth(self) -> int:
        return len(self.features) - 1

    def to_dict(self) -> dict:
        return {
            "config": self.config.to_dict(),
            "roles": self.roles,
            "features": [h.tolist() for h in self.features],
            "attention": [None if a is None else a.tolist() for a in self.attention],
        }


def _layer_graphs(model: Model, g, n_total: int) -> list[Graph]:
    """One graph per layer: a Graph is repeated, a schedule is used as-is."""
    L = model.cfg.layers
    if model.cfg.arch == "transformer":
        if g is None or model.cfg.pause_tokens or model.cfg.sink_token:
            base = model.token_graph(n_total)
        else:
            base = g
        return [base] * L
    if g is None:
        raise ConfigError(f"arch={model.cfg.arch} needs a graph")
    layers = getattr(g, "layers", None)
    if layers is not None:
        if len(layers) != L:
            raise ConfigError(f"schedule has {len(layers)} layers, model has {L}")
        return list(layers)
    return [g] * L


def forward(model: Model, g, X: np.ndarray) -> LayerTrace:
    """Run every layer and record features and attention maps.

    ``g`` is a :class:`Graph` or a per-layer schedule (anything with a
    ``layers`` sequence of graphs).  For transformers ``g`` may be ``None``:
    the causal or full token graph is built after inserting sink/pause rows.
    """
    X = np.asarray(X, dtype=float)
    cfg = model.cfg
    if X.ndim != 2 or X.shape[1] != cfg.dim:
        raise ConfigError(f"inputs must be (n, {cfg.dim}), got {X.shape}")
    n = X.shape[0]
    H = model.prepare_inputs(X) if cfg.arch == "transformer" else X.copy()
    if g is not None and getattr(g, "layers", None) is None and g.n != n:
        raise ConfigError(f"graph has {g.n} nodes but inputs have {n} rows")
    graphs = _layer_graphs(model, g, H.shape[0])
    for gr in graphs:
        if gr.n != H.shape[0]:
            raise ConfigError(f"graph has {gr.n} nodes but the model sees {H.shape[0]} rows")
    roles = model.roles(n) if cfg.arch == "transformer" else ["node"] * n
    feats, maps, vals = [H], [], []
    attn_arch = cfg.arch in ("gat", "transformer")
    for l in range(cfg.layers):
        vals.append(model.value_vectors(l, H) if attn_arch else None)
        H, att = model.layer(l, H, graphs[l])
        if not np.all(np.isfinite(H)):
            raise FloatingPointError(f"non-finite features at layer {l + 1}")
        feats.append(H)
        maps.append(att)
    return LayerTrace(feats, maps, vals, roles, graphs, cfg)


@dataclass(frozen=True)
class JacobianBlock:
    block: np.ndarray  # block[a, b] = d h_u[a] / d h_v[b]
    max_abs: float
    spectral_norm: float


def empirical_jacobian(model: Model, g, X: np.ndarray, r: int, r_plus_L: int, u: int, v: int,
                       step: float = FD_STEP, trace: LayerTrace | None = None) -> JacobianBlock:
    """Central finite differences of ``h_u^(r+L)`` w.r.t. ``h_v^(r)``, re-running layers r..r+L."""
    cfg = model.cfg
    if not 0 <= r <= r_plus_L <= cfg.layers:
        raise ValueError(f"need 0 <= r <= r+L <= {cfg.layers}")
    if trace is None:
        trace = forward(model, g, X)
    H = trace.features[r]
    n, d = H.shape
    if not (0 <= u < n and 0 <= v < n):
        raise ValueError("node index out of range")
    if r == r_plus_L:
        blk = np.eye(d) if u == v else np.zeros((d, d))
    else:
        blk = np.empty((d, d))
        for b in range(d):
            hp = H.copy()
            hm = H.copy()
            hp[v, b] += step
            hm[v, b] -= step
            op = model.run_layers(hp, trace.graphs, r, r_plus_L)[u]
            om = model.run_layers(hm, trace.graphs, r, r_plus_L)[u]
            if not (np.all(np.isfinite(op)) and np.all(np.isfinite(om))):
                raise FloatingPointError("non-finite values in finite-difference forward pass")
            blk[:, b] = (op - om) / (2.0 * step)
    return JacobianBlock(blk, float(np.abs(blk).max()), float(np.linalg.norm(blk, 2)))


def sensitivity_matrix(model: Model, g, X: np.ndarray, r: int, r_plus_L: int,
                       measure: str = "spectral_norm", step: float = FD_STEP) -> np.ndarray:
    """``S[u, v]`` = size of the ``d h_u^(r+L) / d h_v^(r)`` block for every pair.

    Same central differences as :func:`empirical_jacobian`, but each
    perturbation of node ``v`` is reused for every target ``u``.
    """
    if measure not in ("spectral_norm", "max_abs"):
        raise ValueError("measure must be 'spectral_norm' or 'max_abs'")
    trace = forward(model, g, X)
    H = trace.features[r]
    n, d = H.shape
    if r == r_plus_L:
        return np.eye(n)
    jac = np.empty((n, n, d, d))  # [u, v, a, b]
    for v in range(n):
        for b in range(d):
            hp = H.copy()
            hm = H.copy()
            hp[v, b] += step
            hm[v, b] -= step
            diff = model.run_layers(hp, trace.graphs, r, r_plus_L) - model.run_layers(hm, trace.graphs, r, r_plus_L)
            if not np.all(np.isfinite(diff)):
                raise FloatingPointError("non-finite values in finite-difference forward pass")
            jac[:, v, :, b] = diff / (2.0 * step)
    if measure == "max_abs":
        return np.abs(jac).max(axis=(2, 3))
    return np.linalg.norm(jac, ord=2, axis=(2, 3))


def lipschitz_constants(model: Model, g: Graph | None = None) -> tuple[BoundSpec, bool]:
    """Bound constants from the weights; the flag says whether they are certified.

    ``alpha`` is the largest per-layer update gain ``c_sigma * ||W||_2``.
    ``beta`` is the largest single aggregation coefficient: ``1/min(deg+1)``
    for mean aggregation on ``g`` (1 without a graph) and ``max(|1+eps|, 1)``
    for GIN.  Attention architectures get weight-norm estimates only.
    """
    cfg = model.cfg
    mats = [m for layer in model.weights for m in layer.values() if m.ndim == 2]
    w = max((float(np.abs(m).max()) for m in mats if m.size), default=0.0)
    c_sigma = 1.0
    if cfg.arch in ("mean_gnn", "gin"):
        alpha = max(float(np.linalg.norm(layer["W"], 2)) for layer in model.weights)
        if cfg.arch == "mean_gnn":
            if g is None:
                beta = 1.0
            else:
                a = g.adjacency()
                np.fill_diagonal(a, 1)
                beta = 1.0 / float(a.sum(axis=1).min())
        else:
            beta = max(abs(1.0 + cfg.gin_epsilon), 1.0)
        certified = True
    else:
        key = "V" if cfg.arch == "transformer" else "W"
        alpha = max(float(np.linalg.norm(np.concatenate(
            [layer[f"{key}{h}"] for h in range(cfg.heads)], axis=1), 2)) for layer in model.weights)
        beta = 1.0
        certified = False
    spec = BoundSpec(alpha=alpha, beta=beta, c_sigma=c_sigma, c_alpha=alpha, c_beta=beta,
                     w=w, d=float(cfg.dim))
    return spec, certified
