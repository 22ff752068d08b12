"""Unigram alignment metric with exact and stem matching stages.

Alignment semantics: the exact stage matches as many identical words
as possible (per-word min of the two counts); the stem stage then
matches leftovers whose Porter stems agree. Among all alignments that
realize those stage-maximal cardinalities, the scorer picks one that
minimizes the number of contiguous matched chunks. The search is an
exact branch-and-bound seeded with a greedy solution; a deterministic
node budget guards against adversarial inputs (the greedy alignment is
used if the budget is exhausted, which cannot happen on sentence-scale
natural text).

Scoring: P = m/|cand|, R = m/|ref|, F_mean = 10PR/(R+9P),
Penalty = 0.5*(chunks/m)^3, score = F_mean*(1 - Penalty); 0 when m = 0.
The metric is asymmetric (P and R weight the sides differently).
"""

from __future__ import annotations

from collections import Counter

from ragmark.metrics.porter import stem
from ragmark.splitters import tokenize

_NODE_BUDGET = 300_000


def _words(text: str) -> list[str]:
    return [t.text.lower() for t in tokenize(text)]


class _AlignmentSearch:
    def __init__(self, cand: list[str], ref: list[str]) -> None:
        self.cand = cand
        self.ref = ref
        self.cand_stems = [stem(w) for w in cand]
        self.ref_stems = [stem(w) for w in ref]

        c_counts = Counter(cand)
        r_counts = Counter(ref)
        self.exact_rem = {
            w: min(c_counts[w], r_counts[w])
            for w in c_counts
            if w in r_counts and min(c_counts[w], r_counts[w]) > 0
        }
        left_c = Counter()
        left_r = Counter()
        for w, k in c_counts.items():
            left_c[stem(w)] += k - self.exact_rem.get(w, 0)
        for w, k in r_counts.items():
            left_r[stem(w)] += k - self.exact_rem.get(w, 0)
        self.stem_rem = {
            s: min(left_c[s], left_r[s])
            for s in left_c
            if s in left_r and min(left_c[s], left_r[s]) > 0
        }
        self.m = sum(self.exact_rem.values()) + sum(self.stem_rem.values())

        self.ref_by_word: dict[str, list[int]] = {}
        for j, w in enumerate(ref):
            self.ref_by_word.setdefault(w, []).append(j)
        self.ref_by_stem: dict[str, list[int]] = {}
        for j, s in enumerate(self.ref_stems):
            self.ref_by_stem.setdefault(s, []).append(j)
        self.cand_words_by_stem: dict[str, set[str]] = {}
        for w in c_counts:
            self.cand_words_by_stem.setdefault(stem(w), set()).add(w)
        self.ref_words_by_stem: dict[str, set[str]] = {}
        for w in r_counts:
            self.ref_words_by_stem.setdefault(stem(w), set()).add(w)

        # mutable search state
        self.suffix_count = dict(c_counts)
        self.unused_ref = dict(r_counts)
        self.used = [False] * len(ref)
        self.rem_total = self.m
        self.best_chunks = self.m + 1
        self.nodes = 0
        self.exhausted = False

    def _feasible(self) -> bool:
        for w, need in self.exact_rem.items():
            if need == 0:
                continue
            if self.suffix_count.get(w, 0) < need or self.unused_ref.get(w, 0) < need:
                return False
        for s, need in self.stem_rem.items():
            if need == 0:
                continue
            cap_c = 0
            for w in self.cand_words_by_stem.get(s, ()):
                cap_c += max(0, self.suffix_count.get(w, 0) - self.exact_rem.get(w, 0))
                if cap_c >= need:
                    break
            if cap_c < need:
                return False
            cap_r = 0
            for w in self.ref_words_by_stem.get(s, ()):
                cap_r += max(0, self.unused_ref.get(w, 0) - self.exact_rem.get(w, 0))
                if cap_r >= need:
                    break
            if cap_r < need:
                return False
        return True

    def _options(self, ci: int, prev_ci: int, prev_rj: int) -> list[int]:
        """Candidate ref positions for cand token ci, continuation first."""
        u = self.cand[ci]
        su = self.cand_stems[ci]
        opts: list[int] = []
        can_exact = self.exact_rem.get(u, 0) > 0
        can_stem = self.stem_rem.get(su, 0) > 0
        cont = prev_rj + 1 if prev_ci == ci - 1 and prev_rj >= 0 else -1
        if can_exact:
            for rj in self.ref_by_word.get(u, ()):
                if not self.used[rj]:
                    opts.append(rj)
        if can_stem:
            for rj in self.ref_by_stem.get(su, ()):
                if not self.used[rj] and self.ref[rj] != u:
                    opts.append(rj)
        opts.sort()
        if 0 <= cont < len(self.ref) and cont in opts:
            opts.remove(cont)
            opts.insert(0, cont)
        return opts

    def _apply(self, ci: int, rj: int) -> str:
        u = self.cand[ci]
        if self.ref[rj] == u:
            kind = "exact"
            self.exact_rem[u] -= 1
        else:
            kind = "stem"
            self.stem_rem[self.cand_stems[ci]] -= 1
        self.used[rj] = True
        self.unused_ref[self.ref[rj]] -= 1
        self.rem_total -= 1
        return kind

    def _undo(self, ci: int, rj: int, kind: str) -> None:
        u = self.cand[ci]
        if kind == "exact":
            self.exact_rem[u] += 1
        else:
            self.stem_rem[self.cand_stems[ci]] += 1
        self.used[rj] = False
        self.unused_ref[self.ref[rj]] += 1
        self.rem_total += 1

    def _greedy(self) -> int:
        """First feasible assignment, preferring contiguity. Always completes."""
        saved = (dict(self.exact_rem), dict(self.stem_rem), dict(self.suffix_count),
                 dict(self.unused_ref), list(self.used), self.rem_total)
        chunks = 0
        prev_ci = -2
        prev_rj = -2
        for ci in range(len(self.cand)):
            u = self.cand[ci]
            self.suffix_count[u] -= 1
            chosen = -1
            kind = ""
            for rj in self._options(ci, prev_ci, prev_rj):
                kind = self._apply(ci, rj)
                if self._feasible():
                    chosen = rj
                    break
                self._undo(ci, rj, kind)
            if chosen >= 0:
                chunks += 0 if (prev_ci == ci - 1 and prev_rj == chosen - 1) else 1
                prev_ci, prev_rj = ci, chosen
        (self.exact_rem, self.stem_rem, self.suffix_count,
         self.unused_ref, self.used, self.rem_total) = saved
        return chunks

    def _search(self, ci: int, prev_ci: int, prev_rj: int, chunks: int) -> None:
        self.nodes += 1
        if self.nodes > _NODE_BUDGET:
            self.exhausted = True
            return
        if self.exhausted or chunks >= self.best_chunks:
            return
        if self.rem_total == 0:
            self.best_chunks = chunks
            return
        if ci >= len(self.cand):
            return
        u = self.cand[ci]
        self.suffix_count[u] -= 1
        for rj in self._options(ci, prev_ci, prev_rj):
            new_chunks = chunks + (
                0 if (prev_ci == ci - 1 and prev_rj == rj - 1) else 1
            )
            if new_chunks >= self.best_chunks:
                continue
            kind = self._apply(ci, rj)
            if self._feasible():
                self._search(ci + 1, ci, rj, new_chunks)
            self._undo(ci, rj, kind)
            if self.exhausted:
                break
        if not self.exhausted and self._feasible():
            self._search(ci + 1, prev_ci, prev_rj, chunks)
        self.suffix_count[u] += 1

    def run(self) -> tuple[int, int]:
        """Returns (m, chunks) for an optimal (or budget-greedy) alignment."""
        if self.m == 0:
            return 0, 0
        self.best_chunks = self._greedy()
        self._search(0, -2, -2, 0)
        return self.m, self.best_chunks


def align(candidate_words: list[str], reference_words: list[str]) -> tuple[int, int]:
    """(matched unigrams, contiguous chunk count) for the best alignment."""
    return _AlignmentSearch(candidate_words, reference_words).run()


def meteor(candidate: str, reference: str) -> float:
    cand = _words(candidate)
    ref = _words(reference)
    if not cand or not ref:
        return 0.0
    m, chunks = align(cand, ref)
    if m == 0:
        return 0.0
    precision = m / len(cand)
    recall = m / len(ref)
    f_mean = 10.0 * precision * recall / (recall + 9.0 * precision)
    penalty = 0.5 * (chunks / m) ** 3
    return f_mean * (1.0 - penalty)
