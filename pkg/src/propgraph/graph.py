"""Graph representation, canonical generators and walk counting.

Edges are stored as ``(u, v)`` index pairs.  For directed graphs an edge
``(u, v)`` is the arc ``u -> v``; the adjacency matrix uses the
message-passing orientation ``A[v, u] = 1`` so that row ``i`` lists the
nodes that feed node ``i`` and ``(A^m)[i, s]`` counts length-``m`` walks
from ``s`` to ``i``.
"""

from __future__ import annotations

import json
from collections import deque
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from . import kernels


class GraphError(ValueError):
    """Invalid graph construction or generator parameters."""


class WalkCountOverflow(OverflowError):
    """Walk counts no longer fit the 64-bit integer representation."""


@dataclass(frozen=True)
class Graph:
    n: int
    edges: tuple[tuple[int, int], ...]
    directed: bool = False
    self_loops: bool = False
    name: str = field(default="", compare=False)

    @property
    def num_edges(self) -> int:
        return len(self.edges)

    def adjacency(self) -> np.ndarray:
        """0/1 int64 adjacency, ``A[i, j] = 1`` iff ``j`` feeds ``i``."""
        a = np.zeros((self.n, self.n), dtype=np.int64)
        for u, v in self.edges:
            a[v, u] = 1
            if not self.directed:
                a[u, v] = 1
        return a

    def has_edge(self, u: int, v: int) -> bool:
        if not self.directed and u > v:
            u, v = v, u
        return (u, v) in self._edge_set

    @property
    def _edge_set(self) -> frozenset:
        # cached lazily on the frozen instance
        try:
            return self.__dict__["_es"]
        except KeyError:
            es = frozenset(self.edges)
            object.__setattr__(self, "_es", es)
            return es

    def degrees(self) -> np.ndarray:
        """Undirected degree (self-loops not counted)."""
        if self.directed:
            raise GraphError("degree is defined here for undirected graphs only")
        deg = np.zeros(self.n, dtype=np.int64)
        for u, v in self.edges:
            if u != v:
                deg[u] += 1
                deg[v] += 1
        return deg

    def in_neighbors(self, i: int) -> list[int]:
        a = self.adjacency()
        return [int(j) for j in np.flatnonzero(a[i])]

    def successors(self) -> list[list[int]]:
        """Out-adjacency lists (both directions for undirected graphs)."""
        out: list[list[int]] = [[] for _ in range(self.n)]
        for u, v in self.edges:
            out[u].append(v)
            if not self.directed and u != v:
                out[v].append(u)
        return [sorted(set(x)) for x in out]

    def predecessors(self) -> list[list[int]]:
        inn: list[list[int]] = [[] for _ in range(self.n)]
        for u, v in self.edges:
            inn[v].append(u)
            if not self.directed and u != v:
                inn[u].append(v)
        return [sorted(set(x)) for x in inn]

    def distances_from(self, source: int) -> np.ndarray:
        """BFS hop distances along arcs out of ``source``; -1 if unreachable."""
        _check_node(self, source)
        succ = self.successors()
        dist = np.full(self.n, -1, dtype=np.int64)
        dist[source] = 0
        queue = deque([source])
        while queue:
            x = queue.popleft()
            for y in succ[x]:
                if dist[y] < 0:
                    dist[y] = dist[x] + 1
                    queue.append(y)
        return dist

    def distance_matrix(self) -> np.ndarray:
        """``D[i, s]`` = hops from ``s`` to ``i`` (-1 when unreachable)."""
        return np.stack([self.distances_from(s) for s in range(self.n)], axis=1)

    def is_connected(self) -> bool:
        if self.n == 0:
            return False
        if self.directed:
            und = Graph(self.n, tuple(sorted({(min(u, v), max(u, v)) for u, v in self.edges})),
                        directed=False, self_loops=True)
            return bool((und.distances_from(0) >= 0).all())
        return bool((self.distances_from(0) >= 0).all())

    def with_self_loops(self) -> "Graph":
        """Same graph with every self-loop present (aggregation includes self)."""
        loops = {(i, i) for i in range(self.n)}
        return Graph(self.n, tuple(sorted(set(self.edges) | loops)), self.directed, True,
                     name=self.name + "+self" if self.name else "")

    def without_self_loops(self) -> "Graph":
        return Graph(self.n, tuple(e for e in self.edges if e[0] != e[1]), self.directed, False,
                     name=self.name)

    def undirected_support(self) -> "Graph":
        """Undirected simple graph on the same node set (loops dropped)."""
        es = sorted({(min(u, v), max(u, v)) for u, v in self.edges if u != v})
        return Graph(self.n, tuple(es), directed=False, self_loops=False, name=self.name)

    def non_edges(self) -> list[tuple[int, int]]:
        if self.directed:
            raise GraphError("non_edges is defined for undirected graphs")
        return [(u, v) for u in range(self.n) for v in range(u + 1, self.n)
                if not self.has_edge(u, v)]

    def edit(self, add: Iterable[tuple[int, int]] = (), remove: Iterable[tuple[int, int]] = ()) -> "Graph":
        """Return a new graph with edges added/removed; errors on invalid edits."""
        es = set(self.edges)
        for e in remove:
            e = self._norm(e)
            if e not in es:
                raise GraphError(f"cannot remove absent edge {e}")
            es.remove(e)
        for e in add:
            e = self._norm(e)
            if e in es:
                raise GraphError(f"cannot add existing edge {e}")
            es.add(e)
        return build_graph(self.n, sorted(es), directed=self.directed,
                           self_loops=self.self_loops, name=self.name)

    def _norm(self, e: tuple[int, int]) -> tuple[int, int]:
        u, v = int(e[0]), int(e[1])
        if not self.directed and u > v:
            u, v = v, u
        return (u, v)

    # serialization -----------------------------------------------------

    def to_edgelist(self) -> str:
        kind = "directed" if self.directed else "undirected"
        lines = [f"n {self.n} {kind}"]
        lines += [f"{u} {v}" for u, v in self.edges]
        return "\n".join(lines) + "\n"

    def to_dict(self) -> dict:
        return {
            "n": self.n,
            "directed": self.directed,
            "self_loops": self.self_loops,
            "edges": [list(e) for e in self.edges],
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)


def _check_node(g: Graph, node: int) -> None:
    if not 0 <= node < g.n:
        raise GraphError(f"node {node} out of range for n={g.n}")


def build_graph(n: int, edges: Iterable[Sequence[int]], directed: bool = False,
                self_loops: bool = False, name: str = "") -> Graph:
    """Validate and normalize an edge list into a :class:`Graph`.

    Undirected edges are normalized to ``(min, max)``.  Duplicates (after
    normalization), out-of-range endpoints and loops on a graph that does
    not allow them all raise :class:`GraphError`.
    """
    if n < 0:
        raise GraphError("node count must be nonnegative")
    seen: set[tuple[int, int]] = set()
    for e in edges:
        if len(e) != 2:
            raise GraphError(f"edge {e!r} is not a pair")
        u, v = int(e[0]), int(e[1])
        if not (0 <= u < n and 0 <= v < n):
            raise GraphError(f"edge ({u}, {v}) out of range for n={n}")
        if u == v and not self_loops:
            raise GraphError(f"self-loop ({u}, {v}) not allowed")
        if not directed and u > v:
            u, v = v, u
        if (u, v) in seen:
            raise GraphError(f"duplicate edge ({u}, {v})")
        seen.add((u, v))
    return Graph(n, tuple(sorted(seen)), directed, self_loops, name)


# generators ------------------------------------------------------------

def path(n: int) -> Graph:
    if n < 1:
        raise GraphError("path needs n >= 1")
    return build_graph(n, [(i, i + 1) for i in range(n - 1)], name=f"path({n})")


def cycle(n: int) -> Graph:
    if n < 3:
        raise GraphError("cycle needs n >= 3")
    return build_graph(n, [(i, (i + 1) % n) for i in range(n)], name=f"cycle({n})")


def complete(n: int) -> Graph:
    if n < 1:
        raise GraphError("complete needs n >= 1")
    return build_graph(n, [(i, j) for i in range(n) for j in range(i + 1, n)],
                       name=f"complete({n})")


def barbell(m: int) -> Graph:
    """Two ``K_m`` cliques joined by the single bridge ``(m-1, m)``."""
    if m < 3:
        raise GraphError("barbell needs m >= 3")
    es = [(i, j) for i in range(m) for j in range(i + 1, m)]
    es += [(m + i, m + j) for i in range(m) for j in range(i + 1, m)]
    es.append((m - 1, m))
    return build_graph(2 * m, es, name=f"barbell({m})")


def grid(rows: int, cols: int) -> Graph:
    if rows < 1 or cols < 1:
        raise GraphError("grid needs positive dimensions")
    es = []
    for r in range(rows):
        for c in range(cols):
            k = r * cols + c
            if c + 1 < cols:
                es.append((k, k + 1))
            if r + 1 < rows:
                es.append((k, k + cols))
    return build_graph(rows * cols, es, name=f"grid({rows},{cols})")


def causal(n: int) -> Graph:
    """Decoder-mask graph: arc ``j -> i`` iff ``j <= i`` (self-loops included)."""
    if n < 1:
        raise GraphError("causal needs n >= 1")
    return build_graph(n, [(j, i) for i in range(n) for j in range(i + 1)],
                       directed=True, self_loops=True, name=f"causal({n})")


def full_attention(n: int) -> Graph:
    """Unmasked attention graph: every token reads every token, itself included."""
    if n < 1:
        raise GraphError("full_attention needs n >= 1")
    return build_graph(n, [(j, i) for i in range(n) for j in range(n)],
                       directed=True, self_loops=True, name=f"full({n})")


def random_regular(n: int, d: int, seed: int = 0, max_tries: int = 10_000) -> Graph:
    """Seeded pairing-model d-regular simple graph.

    Stubs are shuffled and paired; pairings containing a self-loop or a
    repeated edge are rejected wholesale and redrawn.
    """
    if d < 1 or d >= n:
        raise GraphError(f"random_regular needs 1 <= d < n (got n={n}, d={d})")
    if (n * d) % 2:
        raise GraphError("random_regular needs n*d even")
    rng = np.random.default_rng(seed)
    stubs = np.repeat(np.arange(n), d)
    for _ in range(max_tries):
        perm = rng.permutation(stubs)
        pairs = perm.reshape(-1, 2)
        if np.any(pairs[:, 0] == pairs[:, 1]):
            continue
        es = {(int(min(a, b)), int(max(a, b))) for a, b in pairs}
        if len(es) != len(pairs):
            continue
        return build_graph(n, sorted(es), name=f"random_regular({n},{d},seed={seed})")
    raise GraphError(f"no simple {d}-regular graph on {n} nodes after {max_tries} pairings")


_FAMILIES = {
    "path": (path, ("n",)),
    "cycle": (cycle, ("n",)),
    "complete": (complete, ("n",)),
    "barbell": (barbell, ("m",)),
    "grid": (grid, ("rows", "cols")),
    "causal": (causal, ("n",)),
    "random_regular": (random_regular, ("n", "d", "seed")),
}

FAMILIES = tuple(_FAMILIES)


def generate(family: str, **params) -> Graph:
    """Dispatch to a named generator, e.g. ``generate("barbell", m=4)``."""
    try:
        fn, names = _FAMILIES[family]
    except KeyError:
        raise GraphError(f"unknown family {family!r}; choose from {', '.join(FAMILIES)}") from None
    missing = [p for p in names if p not in params and not (p == "seed")]
    if missing:
        raise GraphError(f"{family} needs parameter(s): {', '.join(missing)}")
    kwargs = {p: int(params[p]) for p in names if p in params}
    return fn(**kwargs)


# walks and reachability ----------------------------------------------


@dataclass(frozen=True)
class AdjacencyPower:
    power: int
    matrix: np.ndarray  # int64 walk counts, entry (i, s) = walks s -> i


def adjacency_power(g: Graph, m: int) -> AdjacencyPower:
    """Exact walk counts ``A^m``; raises :class:`WalkCountOverflow` instead of wrapping."""
    if m < 0:
        raise GraphError("power must be >= 0")
    return AdjacencyPower(m, _matrix_power(g.adjacency(), m))


def adjacency_powers(g: Graph, max_power: int) -> list[np.ndarray]:
    """``[A^0, A^1, ..., A^max_power]`` computed incrementally."""
    a = g.adjacency()
    out = [np.eye(g.n, dtype=np.int64)]
    for _ in range(max_power):
        out.append(checked_matmul(out[-1], a))
    return out


def checked_matmul(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    try:
        return kernels.checked_matmul(np.ascontiguousarray(a, dtype=np.int64),
                                      np.ascontiguousarray(b, dtype=np.int64))
    except OverflowError as exc:
        raise WalkCountOverflow(str(exc)) from None


def _matrix_power(a: np.ndarray, m: int) -> np.ndarray:
    result = np.eye(a.shape[0], dtype=np.int64)
    base = a
    while m:
        if m & 1:
            result = checked_matmul(result, base)
        m >>= 1
        if m:
            base = checked_matmul(base, base)
    return result


def receptive_field(g: Graph, node: int, hops: int) -> frozenset[int]:
    """Nodes with a directed path of length <= ``hops`` into ``node``."""
    _check_node(g, node)
    if hops < 0:
        raise GraphError("hops must be >= 0")
    pred = g.predecessors()
    seen = {node}
    frontier = [node]
    for _ in range(hops):
        nxt = []
        for x in frontier:
            for y in pred[x]:
                if y not in seen:
                    seen.add(y)
                    nxt.append(y)
        if not nxt:
            break
        frontier = nxt
    return frozenset(seen)


def is_center(g: Graph, node: int) -> bool:
    """True when every node is reachable from ``node`` along arcs."""
    return bool((g.distances_from(node) >= 0).all())


# edge-list / JSON I/O --------------------------------------------------

def parse_edgelist(text: str, name: str = "") -> Graph:
    """Parse the ``n <count> <directed|undirected>`` edge-list format."""
    header = None
    edges = []
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        parts = line.split()
        if header is None:
            if len(parts) != 3 or parts[0] != "n" or parts[2] not in ("directed", "undirected"):
                raise GraphError(f"line {lineno}: expected 'n <count> <directed|undirected>'")
            try:
                header = (int(parts[1]), parts[2] == "directed")
            except ValueError:
                raise GraphError(f"line {lineno}: bad node count {parts[1]!r}") from None
            continue
        if len(parts) != 2:
            raise GraphError(f"line {lineno}: expected 'u v'")
        try:
            edges.append((int(parts[0]), int(parts[1])))
        except ValueError:
            raise GraphError(f"line {lineno}: non-integer endpoint") from None
    if header is None:
        raise GraphError("empty edge-list: missing header")
    n, directed = header
    loops = any(u == v for u, v in edges)
    return build_graph(n, edges, directed=directed, self_loops=loops, name=name)


def graph_from_dict(data: dict, name: str = "") -> Graph:
    try:
        return build_graph(int(data["n"]), [tuple(e) for e in data["edges"]],
                           directed=bool(data.get("directed", False)),
                           self_loops=bool(data.get("self_loops", False)), name=name)
    except (KeyError, TypeError) as exc:
        raise GraphError(f"malformed graph JSON: {exc}") from None


def load_graph(path: str) -> Graph:
    with open(path, encoding="utf-8") as fh:
        text = fh.read()
    stripped = text.lstrip()
    if stripped.startswith("{"):
        try:
            data = json.loads(text)
        except json.JSONDecodeError as exc:
            raise GraphError(f"invalid JSON graph: {exc}") from None
        return graph_from_dict(data, name=path)
    return parse_edgelist(text, name=path)
