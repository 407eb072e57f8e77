# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled hot loops. Mirrors ``_fallback`` operation-for-operation."""

import numpy as np
cimport numpy as cnp
from libc.stdint cimport int64_t, uint64_t

cnp.import_array()

DEF RNG_BLOCK = 65536

cdef extern from *:
    """
    static inline int pg_mul_overflow(long long a, long long b, long long *r) {
        return __builtin_mul_overflow(a, b, r);
    }
    static inline int pg_add_overflow(long long a, long long b, long long *r) {
        return __builtin_add_overflow(a, b, r);
    }
    static inline int pg_popcount(unsigned long long x) {
        return __builtin_popcountll(x);
    }
    static inline int pg_ctz(unsigned long long x) {
        return __builtin_ctzll(x);
    }
    """
    int pg_mul_overflow(long long a, long long b, long long *r) nogil
    int pg_add_overflow(long long a, long long b, long long *r) nogil
    int pg_popcount(unsigned long long x) nogil
    int pg_ctz(unsigned long long x) nogil


def cheeger_search(nbr_masks, degrees):
    cdef cnp.int64_t[::1] masks = np.ascontiguousarray(nbr_masks, dtype=np.int64)
    cdef cnp.int64_t[::1] deg = np.ascontiguousarray(degrees, dtype=np.int64)
    cdef Py_ssize_t n = deg.shape[0]
    cdef long long total = 0
    cdef Py_ssize_t i
    for i in range(n):
        total += deg[i]
    cdef uint64_t k, bit, mask = 0, last = (<uint64_t>1) << (n - 1)
    cdef int b
    cdef long long cut = 0, vol = 0, den
    cdef long long best_cut = -1, best_vol = 1
    cdef uint64_t best_mask = 0
    with nogil:
        k = 1
        while k < last:
            b = pg_ctz(k)
            bit = (<uint64_t>1) << b
            if mask & bit:
                mask ^= bit
                cut -= deg[b] - 2 * pg_popcount(<uint64_t>masks[b] & mask)
                vol -= deg[b]
            else:
                cut += deg[b] - 2 * pg_popcount(<uint64_t>masks[b] & mask)
                vol += deg[b]
                mask |= bit
            den = vol if vol < total - vol else total - vol
            if best_cut < 0 or cut * best_vol < best_cut * den:
                best_cut = cut
                best_vol = den
                best_mask = mask
            k += 1
    return int(best_cut), int(best_vol), int(best_mask)


def round_trip_walks(indptr, indices, Py_ssize_t u, Py_ssize_t v, Py_ssize_t n_walks, rng,
                     long long max_steps=10**9):
    cdef cnp.int64_t[::1] ptr = np.ascontiguousarray(indptr, dtype=np.int64)
    cdef cnp.int64_t[::1] idx = np.ascontiguousarray(indices, dtype=np.int64)
    out_arr = np.empty(n_walks, dtype=np.int64)
    cdef cnp.int64_t[::1] out = out_arr
    cdef double[::1] buf = rng.random(RNG_BLOCK)
    cdef Py_ssize_t pos = 0, w, leg, cur, start, target, lo, deg, kk
    cdef long long steps
    cdef double r
    for w in range(n_walks):
        steps = 0
        for leg in range(2):
            if leg == 0:
                start = u
                target = v
            else:
                start = v
                target = u
            cur = start
            while cur != target:
                if pos == RNG_BLOCK:
                    buf = rng.random(RNG_BLOCK)
                    pos = 0
                r = buf[pos]
                pos += 1
                lo = ptr[cur]
                deg = ptr[cur + 1] - lo
                kk = <Py_ssize_t>(r * deg)
                if kk >= deg:
                    kk = deg - 1
                cur = idx[lo + kk]
                steps += 1
                if steps > max_steps:
                    raise RuntimeError("random walk exceeded max_steps")
        out[w] = steps
    return out_arr


def checked_matmul(a, b):
    cdef cnp.int64_t[:, ::1] x = np.ascontiguousarray(a, dtype=np.int64)
    cdef cnp.int64_t[:, ::1] y = np.ascontiguousarray(b, dtype=np.int64)
    cdef Py_ssize_t n = x.shape[0], kdim = x.shape[1], m = y.shape[1]
    if y.shape[0] != kdim:
        raise ValueError("shape mismatch")
    res = np.zeros((n, m), dtype=np.int64)
    cdef cnp.int64_t[:, ::1] out = res
    cdef Py_ssize_t i, j, t
    cdef long long acc, prod
    cdef int bad = 0
    cdef Py_ssize_t bi = 0, bj = 0
    with nogil:
        for i in range(n):
            for j in range(m):
                acc = 0
                for t in range(kdim):
                    if x[i, t] == 0 or y[t, j] == 0:
                        continue
                    if pg_mul_overflow(x[i, t], y[t, j], &prod) or pg_add_overflow(acc, prod, &acc):
                        bad = 1
                        bi = i
                        bj = j
                        break
                if bad:
                    break
                out[i, j] = acc
            if bad:
                break
    if bad:
        raise OverflowError(f"walk count overflow at entry ({bi}, {bj})")
    return res
