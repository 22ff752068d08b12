"""Porter stemming for the alignment stage of the unigram metric.

Implements the classic five-step suffix-stripping algorithm, including
the author's published departures from the original paper: "bli" maps
to "ble" (instead of "abli" to "able"), "logi" maps to "log", and words
of length <= 2 are returned unchanged. Outputs are locked by a golden
word list in the test suite.
"""

from __future__ import annotations

_VOWELS = "aeiou"


def _is_consonant(word: str, i: int) -> bool:
    ch = word[i]
    if ch in _VOWELS:
        return False
    if ch == "y":
        return i == 0 or not _is_consonant(word, i - 1)
    return True


def _measure(word: str, end: int) -> int:
    """Count of vowel-consonant sequences in word[:end] (the classic m)."""
    m = 0
    i = 0
    # skip leading consonants
    while i < end and _is_consonant(word, i):
        i += 1
    while i < end:
        # inside a vowel run
        while i < end and not _is_consonant(word, i):
            i += 1
        if i >= end:
            break
        m += 1
        while i < end and _is_consonant(word, i):
            i += 1
    return m


def _has_vowel(word: str, end: int) -> bool:
    return any(not _is_consonant(word, i) for i in range(end))


def _ends_double_consonant(word: str) -> bool:
    return (
        len(word) >= 2
        and word[-1] == word[-2]
        and _is_consonant(word, len(word) - 1)
    )


def _ends_cvc(word: str) -> bool:
    # consonant-vowel-consonant where the final consonant is not w, x, y
    if len(word) < 3:
        return False
    n = len(word)
    return (
        _is_consonant(word, n - 3)
        and not _is_consonant(word, n - 2)
        and _is_consonant(word, n - 1)
        and word[-1] not in "wxy"
    )


def _replace(word: str, suffix: str, repl: str, min_measure: int) -> str | None:
    """word with suffix swapped for repl if the stem measure allows it."""
    if not word.endswith(suffix):
        return None
    stem_len = len(word) - len(suffix)
    if _measure(word, stem_len) > min_measure - 1:
        return word[:stem_len] + repl
    return word


def _step1a(word: str) -> str:
    if word.endswith("sses"):
        return word[:-2]
    if word.endswith("ies"):
        return word[:-2]
    if word.endswith("ss"):
        return word
    if word.endswith("s"):
        return word[:-1]
    return word


def _step1b(word: str) -> str:
    if word.endswith("eed"):
        if _measure(word, len(word) - 3) > 0:
            return word[:-1]
        return word
    hit = False
    if word.endswith("ed") and _has_vowel(word, len(word) - 2):
        word = word[:-2]
        hit = True
    elif word.endswith("ing") and _has_vowel(word, len(word) - 3):
        word = word[:-3]
        hit = True
    if hit:
        if word.endswith(("at", "bl", "iz")):
            return word + "e"
        if _ends_double_consonant(word) and word[-1] not in "lsz":
            return word[:-1]
        if _measure(word, len(word)) == 1 and _ends_cvc(word):
            return word + "e"
    return word


def _step1c(word: str) -> str:
    if word.endswith("y") and _has_vowel(word, len(word) - 1):
        return word[:-1] + "i"
    return word


# (suffix, replacement) pairs; within each step longer suffixes are
# listed before their own proper suffixes so the longest match wins.
_STEP2 = (
    ("ational", "ate"), ("tional", "tion"), ("enci", "ence"), ("anci", "ance"),
    ("izer", "ize"), ("bli", "ble"), ("alli", "al"), ("entli", "ent"),
    ("eli", "e"), ("ousli", "ous"), ("ization", "ize"), ("ation", "ate"),
    ("ator", "ate"), ("alism", "al"), ("iveness", "ive"), ("fulness", "ful"),
    ("ousness", "ous"), ("aliti", "al"), ("iviti", "ive"), ("biliti", "ble"),
    ("logi", "log"),
)

_STEP3 = (
    ("icate", "ic"), ("ative", ""), ("alize", "al"), ("iciti", "ic"),
    ("ical", "ic"), ("ful", ""), ("ness", ""),
)

_STEP4 = (
    "al", "ance", "ence", "er", "ic", "able", "ible", "ant", "ement",
    "ment", "ent", "ion", "ou", "ism", "ate", "iti", "ous", "ive", "ize",
)


def _longest_suffix_sub(word: str, rules, min_measure: int) -> str:
    best = ""
    repl = ""
    for suffix, replacement in rules:
        if len(suffix) > len(best) and word.endswith(suffix):
            best = suffix
            repl = replacement
    if not best:
        return word
    swapped = _replace(word, best, repl, min_measure)
    return swapped if swapped is not None else word


def _step4(word: str) -> str:
    best = ""
    for suffix in _STEP4:
        if len(suffix) > len(best) and word.endswith(suffix):
            best = suffix
    if not best:
        return word
    stem_len = len(word) - len(best)
    if _measure(word, stem_len) <= 1:
        return word
    if best == "ion" and (stem_len == 0 or word[stem_len - 1] not in "st"):
        return word
    return word[:stem_len]


def _step5(word: str) -> str:
    if word.endswith("e"):
        m = _measure(word, len(word) - 1)
        if m > 1 or (m == 1 and not _ends_cvc(word[:-1])):
            word = word[:-1]
    if word.endswith("ll") and _measure(word, len(word)) > 1:
        word = word[:-1]
    return word


def stem(word: str) -> str:
    """Stem one word, lowercasing first. Words of length <= 2 pass through."""
    word = word.lower()
    if len(word) <= 2:
        return word
    word = _step1a(word)
    word = _step1b(word)
    word = _step1c(word)
    word = _longest_suffix_sub(word, _STEP2, 1)
    word = _longest_suffix_sub(word, _STEP3, 1)
    word = _step4(word)
    word = _step5(word)
    return word
