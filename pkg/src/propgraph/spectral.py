"""Laplacian spectra, exact Cheeger constants, effective resistance and commute times."""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from . import kernels
from .graph import Graph

ZERO_TOL = 1e-9
CHEEGER_MAX_NODES = 20


class SpectralError(ValueError):
    """Input graph is outside the domain of a spectral quantity."""


class DirectedGraphError(SpectralError):
    pass


class DisconnectedGraphError(SpectralError):
    pass


class TooLargeError(SpectralError):
    pass


def _require_undirected_connected(g: Graph, what: str) -> None:
    if g.directed:
        raise DirectedGraphError(f"{what} requires an undirected graph")
    if any(u == v for u, v in g.edges):
        raise SpectralError(f"{what} requires a graph without self-loops")
    if g.n < 2:
        raise SpectralError(f"{what} requires at least 2 nodes")
    if not g.is_connected():
        raise DisconnectedGraphError(f"{what}: graph is disconnected")


@dataclass(frozen=True)
class SpectralSummary:
    laplacian_kind: str
    eigenvalues: tuple[float, ...]
    spectral_gap: float
    cheeger_exact: Fraction | None = None

    @property
    def cheeger_bounds(self) -> tuple[float, float] | None:
        """``(h^2/2, 2h)`` when the exact Cheeger constant is known."""
        if self.cheeger_exact is None:
            return None
        h = float(self.cheeger_exact)
        return (h * h / 2.0, 2.0 * h)

    def cheeger_holds(self, tol: float = ZERO_TOL) -> bool | None:
        b = self.cheeger_bounds
        if b is None:
            return None
        return b[0] - tol <= self.spectral_gap <= b[1] + tol

    def to_dict(self) -> dict:
        d = {
            "laplacian_kind": self.laplacian_kind,
            "eigenvalues": list(self.eigenvalues),
            "spectral_gap": self.spectral_gap,
            "cheeger_exact": None,
            "cheeger_bounds": None,
            "cheeger_inequality": None,
        }
        if self.cheeger_exact is not None:
            d["cheeger_exact"] = {
                "value": float(self.cheeger_exact),
                "fraction": f"{self.cheeger_exact.numerator}/{self.cheeger_exact.denominator}",
            }
            d["cheeger_bounds"] = list(self.cheeger_bounds)
            d["cheeger_inequality"] = "PASS" if self.cheeger_holds() else "FAIL"
        return d


def laplacian(g: Graph, kind: str = "normalized") -> np.ndarray:
    a = g.without_self_loops().adjacency().astype(float)
    deg = a.sum(axis=1)
    if kind == "combinatorial":
        return np.diag(deg) - a
    if kind == "normalized":
        with np.errstate(divide="ignore"):
            inv = np.where(deg > 0, 1.0 / np.sqrt(deg), 0.0)
        return np.eye(g.n) - inv[:, None] * a * inv[None, :]
    raise ValueError(f"unknown laplacian kind {kind!r}")


def laplacian_spectrum(g: Graph, kind: str = "normalized", cheeger: bool = False) -> SpectralSummary:
    """Dense symmetric eigensolve; the gap is the smallest eigenvalue above tolerance."""
    _require_undirected_connected(g, "laplacian_spectrum")
    ev = np.linalg.eigvalsh(laplacian(g, kind))
    tol = ZERO_TOL * max(1.0, float(abs(ev).max()))
    nonzero = ev[ev > tol]
    gap = float(nonzero[0])
    h = cheeger_constant_exact(g) if cheeger else None
    return SpectralSummary(kind, tuple(float(x) for x in ev), gap, h)


def spectral_gap(g: Graph, kind: str = "normalized") -> float:
    return laplacian_spectrum(g, kind).spectral_gap


@dataclass(frozen=True)
class CheegerCut:
    value: Fraction
    subset: frozenset[int]
    cut_edges: int
    volume: int


def cheeger_cut(g: Graph) -> CheegerCut:
    """Minimum-conductance cut ``cut(S)/min(vol S, vol S^c)`` by exhaustive search."""
    _require_undirected_connected(g, "cheeger_constant_exact")
    if g.n > CHEEGER_MAX_NODES:
        raise TooLargeError(
            f"exact Cheeger constant enumerates 2^(n-1) cuts; refusing n={g.n} > {CHEEGER_MAX_NODES}")
    a = g.adjacency()
    masks = np.array([sum(1 << int(j) for j in np.flatnonzero(a[i])) for i in range(g.n)],
                     dtype=np.int64)
    cut, vol, mask = kernels.cheeger_search(masks, g.degrees())
    subset = frozenset(i for i in range(g.n) if mask >> i & 1)
    return CheegerCut(Fraction(cut, vol), subset, cut, vol)


def cheeger_constant_exact(g: Graph) -> Fraction:
    return cheeger_cut(g).value


# resistance ----------------------------------------------------------


@dataclass(frozen=True)
class ResistanceMatrix:
    values: np.ndarray
    edge_count: int

    def __getitem__(self, uv: tuple[int, int]) -> float:
        return float(self.values[uv])

    def total(self) -> float:
        """Sum over unordered pairs."""
        return float(np.triu(self.values, 1).sum())

    def max_pair(self) -> float:
        return float(self.values.max())

    def to_dict(self) -> dict:
        return {"edge_count": self.edge_count, "values": self.values.tolist()}


def laplacian_pinv(g: Graph) -> np.ndarray:
    """Pseudoinverse of the combinatorial Laplacian via ``(L + J/n)^-1 - J/n``."""
    n = g.n
    j = np.full((n, n), 1.0 / n)
    return np.linalg.inv(laplacian(g, "combinatorial") + j) - j


def effective_resistance_matrix(g: Graph) -> ResistanceMatrix:
    _require_undirected_connected(g, "effective_resistance_matrix")
    lp = laplacian_pinv(g)
    d = np.diag(lp)
    r = d[:, None] + d[None, :] - 2.0 * lp
    r = 0.5 * (r + r.T)
    np.fill_diagonal(r, 0.0)
    np.maximum(r, 0.0, out=r)
    return ResistanceMatrix(r, g.num_edges)


def commute_time(g: Graph, u: int, v: int) -> float:
    """``2 m R_uv`` for an unweighted graph with ``m`` edges."""
    if u == v:
        _require_undirected_connected(g, "commute_time")
        return 0.0
    res = effective_resistance_matrix(g)
    return 2.0 * res.edge_count * res[u, v]


def hitting_times_to(g: Graph, target: int) -> np.ndarray:
    """Expected simple-random-walk steps from every node to ``target``.

    Solves ``h(t) = 0``, ``h(x) = 1 + mean_{y ~ x} h(y)`` directly.
    """
    _require_undirected_connected(g, "hitting_times_to")
    a = g.adjacency().astype(float)
    p = a / a.sum(axis=1, keepdims=True)
    keep = [i for i in range(g.n) if i != target]
    m = np.eye(len(keep)) - p[np.ix_(keep, keep)]
    h = np.zeros(g.n)
    h[keep] = np.linalg.solve(m, np.ones(len(keep)))
    return h


def commute_time_exact_markov(g: Graph, u: int, v: int) -> float:
    """``E[u -> v] + E[v -> u]`` from the hitting-time linear systems."""
    if u == v:
        return 0.0
    return float(hitting_times_to(g, v)[u] + hitting_times_to(g, u)[v])


@dataclass(frozen=True)
class MonteCarloCommute:
    mean: float
    stderr: float
    walks: int


def commute_time_monte_carlo(g: Graph, u: int, v: int, walks: int = 100_000,
                             seed: int = 0) -> MonteCarloCommute:
    """Empirical mean round-trip length over ``walks`` seeded random walks."""
    _require_undirected_connected(g, "commute_time_monte_carlo")
    succ = g.successors()
    indptr = np.cumsum([0] + [len(s) for s in succ]).astype(np.int64)
    indices = np.array([y for s in succ for y in s], dtype=np.int64)
    lengths = kernels.round_trip_walks(indptr, indices, u, v, walks, np.random.default_rng(seed))
    x = lengths.astype(float)
    return MonteCarloCommute(float(x.mean()), float(x.std(ddof=1) / np.sqrt(walks)), walks)
