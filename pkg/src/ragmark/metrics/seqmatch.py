"""Gestalt string similarity (Ratcliff-Obershelp).

Recursively locates the longest common block (earliest in the first
string, then earliest in the second on ties), recurses on both flanks,
and scores 2*M / (len(a) + len(b)) where M is the total matched
character count. No junk or popularity heuristics are applied.

Variant note: the pair is put in canonical (lexicographic) order
before matching. The tie-breaks above make the matched total depend on
operand order for rare pairs, so without this the ratio would not be
symmetric; with it, symmetry holds by construction.
"""

from __future__ import annotations

from ragmark._kernels import gestalt_total


def seq_matcher_ratio(candidate: str, reference: str) -> float:
    if not candidate and not reference:
        return 1.0
    a, b = (candidate, reference) if candidate <= reference else (reference, candidate)
    matched = gestalt_total(a, b)
    return 2.0 * matched / (len(candidate) + len(reference))
