"""Pure-Python hot kernels.

The compiled module (_speedups.pyx) mirrors each function here; the
package selects between them at import time in ragmark._kernels. Keep
the two in lockstep: integer kernels must agree exactly, float kernels
to machine precision (same operations in the same order).
"""

from __future__ import annotations

import math

BACKEND = "python"


def as_grid(values) -> list[float]:
    """Quadrature grids as the container this backend iterates fastest."""
    return [float(v) for v in values]


_M64 = (1 << 64) - 1
_GOLDEN = 0x9E3779B97F4A7C15
_MIX1 = 0xBF58476D1CE4E5B9
_MIX2 = 0x94D049BB133111EB
_SIGN_SALT = 0xD1B54A32D192ED03


def _mix64(x: int) -> int:
    # splitmix64 finalizer over a 64-bit lane
    x = (x + _GOLDEN) & _M64
    x = ((x ^ (x >> 30)) * _MIX1) & _M64
    x = ((x ^ (x >> 27)) * _MIX2) & _M64
    return (x ^ (x >> 31)) & _M64


def trigram_accumulate(text: str, dim: int, seed: int) -> list[int]:
    """Signed bucket counts for the character trigrams of ``text``.

    ``text`` arrives already padded by the caller. Each window of three
    code points is hashed with a seeded splitmix64 chain; the bucket is
    ``hash % dim``, the sign comes from a second salted hash. Returns
    integer counts so downstream float conversion is exact.
    """
    seed &= _M64
    counts = [0] * dim
    codes = [ord(ch) for ch in text]
    for i in range(len(codes) - 2):
        h = _mix64(seed ^ codes[i])
        h = _mix64(h ^ codes[i + 1])
        h = _mix64(h ^ codes[i + 2])
        bucket = h % dim
        if _mix64(h ^ _SIGN_SALT) & 1:
            counts[bucket] += 1
        else:
            counts[bucket] -= 1
    return counts


def gestalt_total(a: str, b: str) -> int:
    """Total characters claimed by recursive longest-common-block search.

    Finds the longest matching block (earliest in ``a``, then earliest in
    ``b`` on ties), recurses on the unmatched flanks, and sums the block
    lengths. No junk or popularity heuristics.
    """
    b2j: dict[str, list[int]] = {}
    for j, ch in enumerate(b):
        b2j.setdefault(ch, []).append(j)
    total = 0
    stack = [(0, len(a), 0, len(b))]
    while stack:
        alo, ahi, blo, bhi = stack.pop()
        if alo >= ahi or blo >= bhi:
            continue
        besti = alo
        bestj = blo
        bestsize = 0
        j2len: dict[int, int] = {}
        for i in range(alo, ahi):
            newj2len: dict[int, int] = {}
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


def range_cdf_inner(w: float, km1: int, z: list[float], weighted_phi: list[float],
                    big_phi: list[float]) -> float:
    """Quadrature sum for the range distribution's inner integral.

    Evaluates sum_i weighted_phi[i] * (big_phi[i] - Phi(z[i] - w))**km1
    where Phi is the standard normal CDF, weighted_phi already folds the
    quadrature weight into the density, and big_phi[i] = Phi(z[i]).
    """
    if w <= 0.0:
        return 0.0
    acc = 0.0
    inv_sqrt2 = 0.7071067811865476
    for i in range(len(z)):
        # Phi(z - w) = 0.5 * erfc((w - z) / sqrt(2))
        shifted = 0.5 * math.erfc((w - z[i]) * inv_sqrt2)
        diff = big_phi[i] - shifted
        if diff <= 0.0:
            continue
        acc += weighted_phi[i] * diff ** km1
    return acc
