"""Compare the compiled and pure-Python kernel backends.

    python3 benchmarks/bench_kernels.py [--repeat 3]

Each row times one kernel on both backends and checks that the results
are identical before reporting the speedup.
"""

import argparse
import time

import numpy as np

from propgraph import graph as G
from propgraph.acceptance import random_connected_graphs
from propgraph.kernels import get_backend


def _masks(g):
    a = g.adjacency()
    return np.array([sum(1 << int(j) for j in np.flatnonzero(a[i])) for i in range(g.n)], dtype=np.int64), g.degrees()


def _csr(g):
    succ = g.successors()
    indptr = np.cumsum([0] + [len(s) for s in succ]).astype(np.int64)
    return indptr, np.array([y for s in succ for y in s], dtype=np.int64)


def cases():
    for n in (16, 20):
        g = random_connected_graphs(1, n, n, seed=n)[0]
        masks, deg = _masks(g)
        yield f"cheeger_search n={n}", lambda k, m=masks, d=deg: k.cheeger_search(m, d)
    indptr, indices = _csr(G.barbell(4))
    yield ("round_trip_walks barbell(4) 1e5",
           lambda k: k.round_trip_walks(indptr, indices, 0, 7, 100_000, np.random.default_rng(0)))
    a = G.random_regular(60, 6, seed=0).adjacency().astype(np.int64)
    yield "checked_matmul 60x60", lambda k: k.checked_matmul(a, a)


def best_of(fn, repeat):
    times, out = [], None
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn()
        times.append(time.perf_counter() - t0)
    return min(times), out


def main():
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--repeat", type=int, default=3)
    args = p.parse_args()
    py = get_backend("python")
    try:
        cy = get_backend("cython")
    except ImportError:
        raise SystemExit("compiled extension not built; run `pip install -e . --no-build-isolation`")
    print(f"{'kernel':<34}{'python s':>12}{'cython s':>12}{'speedup':>10}")
    for name, fn in cases():
        tp, rp = best_of(lambda: fn(py), args.repeat)
        tc, rc = best_of(lambda: fn(cy), args.repeat)
        same = np.array_equal(np.asarray(rp, dtype=object), np.asarray(rc, dtype=object))
        if not same:
            raise SystemExit(f"{name}: backends disagree")
        print(f"{name:<34}{tp:>12.4f}{tc:>12.4f}{tp / tc:>9.1f}x")


if __name__ == "__main__":
    main()
