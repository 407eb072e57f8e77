"""Pure-Python reference versions of the compiled kernels.

Each function consumes inputs (and random numbers) in exactly the same
order as its counterpart in ``_kernels.pyx`` so both backends return
identical results.
"""

import numpy as np

RNG_BLOCK = 65536
INT64_MAX = (1 << 63) - 1
INT64_MIN = -(1 << 63)


def cheeger_search(nbr_masks, degrees):
    """Exhaustive minimum-conductance cut over all ``2^(n-1) - 1`` bipartitions.

    Node ``n - 1`` is pinned to the complement so every cut is visited once.
    Subsets are walked in Gray-code order, updating the cut size and volume
    incrementally. Returns ``(cut, vol, mask)`` of the first minimizer.
    """
    n = len(degrees)
    masks = [int(x) for x in nbr_masks]
    deg = [int(x) for x in degrees]
    total = sum(deg)
    mask = 0
    cut = 0
    vol = 0
    best_cut, best_vol, best_mask = -1, 1, 0
    for k in range(1, 1 << (n - 1)):
        b = (k & -k).bit_length() - 1
        bit = 1 << b
        if mask & bit:
            mask ^= bit
            cut -= deg[b] - 2 * (masks[b] & mask).bit_count()
            vol -= deg[b]
        else:
            cut += deg[b] - 2 * (masks[b] & mask).bit_count()
            vol += deg[b]
            mask |= bit
        den = vol if vol < total - vol else total - vol
        if best_cut < 0 or cut * best_vol < best_cut * den:
            best_cut, best_vol, best_mask = cut, den, mask
    return best_cut, best_vol, best_mask


def round_trip_walks(indptr, indices, u, v, n_walks, rng, max_steps=10**9):
    """Simple random walks ``u -> v -> u``; returns the step count of each trip."""
    indptr = [int(x) for x in indptr]
    indices = [int(x) for x in indices]
    out = np.empty(n_walks, dtype=np.int64)
    buf = rng.random(RNG_BLOCK).tolist()
    pos = 0
    for w in range(n_walks):
        steps = 0
        for start, target in ((u, v), (v, u)):
            cur = start
            while cur != target:
                if pos == RNG_BLOCK:
                    buf = rng.random(RNG_BLOCK).tolist()
                    pos = 0
                r = buf[pos]
                pos += 1
                lo = indptr[cur]
                deg = indptr[cur + 1] - lo
                k = int(r * deg)
                if k >= deg:
                    k = deg - 1
                cur = indices[lo + k]
                steps += 1
                if steps > max_steps:
                    raise RuntimeError("random walk exceeded max_steps")
        out[w] = steps
    return out


def checked_matmul(a, b):
    """Exact int64 matrix product; raises OverflowError rather than wrapping."""
    n, k = a.shape
    k2, m = b.shape
    if k != k2:
        raise ValueError("shape mismatch")
    res = a.astype(object).dot(b.astype(object)) if n and m else np.zeros((n, m), dtype=object)
    out = np.zeros((n, m), dtype=np.int64)
    for i in range(n):
        for j in range(m):
            x = int(res[i, j])
            if x > INT64_MAX or x < INT64_MIN:
                raise OverflowError(f"walk count overflow at entry ({i}, {j})")
            out[i, j] = x
    return out
