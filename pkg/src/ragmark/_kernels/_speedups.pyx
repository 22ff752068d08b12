# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled hot kernels.

Each function mirrors its twin in _pure.py: integer kernels agree
exactly, float kernels perform the same operations in the same order so
results match to the last bit. The package falls back to _pure.py when
this module is absent or RAGMARK_PURE_PYTHON=1.
"""

from libc.math cimport erfc, pow as cpow
from libc.stdint cimport int64_t, uint64_t

import array

BACKEND = "compiled"

cdef double _INV_SQRT2 = 0.7071067811865476

cdef uint64_t _GOLDEN = 0x9E3779B97F4A7C15ULL
cdef uint64_t _MIX1 = 0xBF58476D1CE4E5B9ULL
cdef uint64_t _MIX2 = 0x94D049BB133111EBULL
cdef uint64_t _SIGN_SALT = 0xD1B54A32D192ED03ULL


def as_grid(values):
    """Quadrature grids as the container this backend iterates fastest."""
    return array.array("d", (float(v) for v in values))


cdef inline uint64_t _mix64(uint64_t x) nogil:
    # splitmix64 finalizer over a 64-bit lane
    x = x + _GOLDEN
    x = (x ^ (x >> 30)) * _MIX1
    x = (x ^ (x >> 27)) * _MIX2
    return x ^ (x >> 31)


def trigram_accumulate(text: str, int dim, seed) -> list:
    """Signed bucket counts for the character trigrams of ``text``.

    ``text`` arrives already padded by the caller. Each window of three
    code points is hashed with a seeded splitmix64 chain; the bucket is
    ``hash % dim``, the sign comes from a second salted hash. Returns
    integer counts so downstream float conversion is exact.
    """
    cdef uint64_t seed64 = <uint64_t>(<object>seed & 0xFFFFFFFFFFFFFFFF)
    cdef Py_ssize_t n = len(text)
    cdef Py_ssize_t i
    cdef uint64_t h
    cdef Py_ssize_t bucket
    codes_buf = array.array("Q", [ord(c) for c in text])
    counts_buf = array.array("q", bytes(8 * dim))
    cdef uint64_t[::1] codes = codes_buf
    cdef int64_t[::1] view = counts_buf
    with nogil:
        for i in range(n - 2):
            h = _mix64(seed64 ^ codes[i])
            h = _mix64(h ^ codes[i + 1])
            h = _mix64(h ^ codes[i + 2])
            bucket = <Py_ssize_t>(h % <uint64_t>dim)
            if _mix64(h ^ _SIGN_SALT) & 1:
                view[bucket] += 1
            else:
                view[bucket] -= 1
    return counts_buf.tolist()


def gestalt_total(str a, str b) -> int:
    """Total characters claimed by recursive longest-common-block search.

    Finds the longest matching block (earliest in ``a``, then earliest in
    ``b`` on ties), recurses on the unmatched flanks, and sums the block
    lengths. No junk or popularity heuristics.
    """
    cdef dict b2j = {}
    cdef Py_ssize_t j, i, k
    cdef Py_ssize_t alo, ahi, blo, bhi
    cdef Py_ssize_t besti, bestj, bestsize
    cdef Py_ssize_t total = 0
    for j in range(len(b)):
        b2j.setdefault(b[j], []).append(j)
    cdef list stack = [(0, len(a), 0, len(b))]
    cdef dict j2len, newj2len
    while stack:
        alo, ahi, blo, bhi = stack.pop()
        if alo >= ahi or blo >= bhi:
            continue
        besti = alo
        bestj = blo
        bestsize = 0
        j2len = {}
        for i in range(alo, ahi):
            newj2len = {}
            for j in b2j.get(a[i], ()):
                if j < blo:
                    continue
                if j >= bhi:
                    break
                k = j2len.get(j - 1, 0) + 1
                newj2len[j] = k
                if k > bestsize:
                    besti = i - k + 1
                    bestj = j - k + 1
                    bestsize = k
            j2len = newj2len
        if bestsize:
            total += bestsize
            stack.append((alo, besti, blo, bestj))
            stack.append((besti + bestsize, ahi, bestj + bestsize, bhi))
    return total


def range_cdf_inner(double w, int km1, z, weighted_phi, big_phi) -> float:
    """Quadrature sum for the range distribution's inner integral.

    Evaluates sum_i weighted_phi[i] * (big_phi[i] - Phi(z[i] - w))**km1
    where Phi is the standard normal CDF, weighted_phi already folds the
    quadrature weight into the density, and big_phi[i] = Phi(z[i]).
    """
    if w <= 0.0:
        return 0.0
    cdef double[::1] zv = z
    cdef double[::1] wv = weighted_phi
    cdef double[::1] bv = big_phi
    cdef Py_ssize_t n = zv.shape[0]
    cdef Py_ssize_t i
    cdef double acc = 0.0
    cdef double km1d = <double>km1
    cdef double shifted, diff
    with nogil:
        for i in range(n):
            # Phi(z - w) = 0.5 * erfc((w - z) / sqrt(2)); cpow keeps the
            # result bit-identical to the pure backend's ** operator
            shifted = 0.5 * erfc((w - zv[i]) * _INV_SQRT2)
            diff = bv[i] - shifted
            if diff <= 0.0:
                continue
            acc += wv[i] * cpow(diff, km1d)
    return acc
