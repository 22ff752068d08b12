"""Document splitting: recursive character chunks and token windows.

Both splitters emit offset-addressed chunks whose text always equals
the document slice at those offsets, so downstream joins never depend
on re-reading source files.
"""

from __future__ import annotations

import enum
import json
import re
from bisect import bisect_left, bisect_right
from dataclasses import dataclass
from pathlib import Path

from ragmark.errors import ConfigMismatch, EmptyDocument, InvalidChunking, SchemaError

_TOKEN_RE = re.compile(r"[^\W_]+|\S")

DEFAULT_SEPARATORS: tuple[str, ...] = ("\n\n", "\n", " ", "")


class SplittingMethod(enum.Enum):
    RECURSIVE_CHARACTER = "RCS"
    TOKEN_TEXT = "TTS"

    @property
    def token(self) -> str:
        """Serialized form used in files and reports."""
        return self.value

    @property
    def display(self) -> str:
        """Spelled-out name used in comparison tables."""
        if self is SplittingMethod.RECURSIVE_CHARACTER:
            return "Recursive Character Splitter"
        return "Token Text Splitter"

    @classmethod
    def parse(cls, raw: str) -> "SplittingMethod":
        norm = raw.strip().upper()
        for member in cls:
            if norm == member.value:
                return member
        raise InvalidChunking(f"unknown splitting method {raw!r}; expected RCS or TTS")


@dataclass(frozen=True)
class SplitterConfig:
    method: SplittingMethod
    chunk_size: int
    overlap: int
    separators: tuple[str, ...] = DEFAULT_SEPARATORS

    def __post_init__(self) -> None:
        if self.chunk_size <= 0:
            raise InvalidChunking(f"chunk_size must be positive, got {self.chunk_size}")
        if self.overlap < 0:
            raise InvalidChunking(f"overlap must be non-negative, got {self.overlap}")
        if self.overlap >= self.chunk_size:
            raise InvalidChunking(
                f"overlap ({self.overlap}) must be smaller than chunk_size "
                f"({self.chunk_size})"
            )
        if self.method is SplittingMethod.RECURSIVE_CHARACTER:
            if not self.separators or self.separators[-1] != "":
                raise InvalidChunking(
                    'separators must end with "" (character-level fallback)'
                )


@dataclass(frozen=True)
class Token:
    text: str
    char_start: int
    char_end: int


@dataclass(frozen=True)
class Chunk:
    doc_id: str
    chunk_index: int
    char_start: int
    char_end: int
    text: str
    method: SplittingMethod


def tokenize(text: str) -> list[Token]:
    """Rule-based word tokenization with exact offsets.

    Maximal runs of Unicode alphanumerics form word tokens; every other
    non-whitespace character (including underscore) is its own token.
    Whitespace separates tokens and is never emitted.
    """
    return [
        Token(text=m.group(), char_start=m.start(), char_end=m.end())
        for m in _TOKEN_RE.finditer(text)
    ]


def _pieces(text: str, lo: int, hi: int, separators: tuple[str, ...],
            chunk_size: int, out: list[tuple[int, int]]) -> None:
    """Tile text[lo:hi] with spans of length <= chunk_size.

    Splits on separators[0], keeping each separator attached to the
    piece that precedes it; any piece still longer than chunk_size is
    re-split with the next separator. The "" fallback yields single
    characters, so the recursion always bottoms out.
    """
    sep = separators[0]
    if sep == "":
        out.extend((i, i + 1) for i in range(lo, hi))
        return
    step = len(sep)
    start = lo
    while start < hi:
        found = text.find(sep, start, hi)
        end = hi if found < 0 else found + step
        if end - start <= chunk_size:
            out.append((start, end))
        else:
            _pieces(text, start, end, separators[1:], chunk_size, out)
        start = end


def split_recursive(doc, cfg: SplitterConfig) -> list[Chunk]:
    """Separator-hierarchy splitting with boundary-snapped overlap.

    The separator hierarchy tiles the text into pieces no longer than
    chunk_size; piece starts become the candidate cut positions. Each
    chunk ends at the last cut that fits within chunk_size and extends
    past the previous chunk, falling back to a bare character cut when
    an oversized piece leaves no such cut. The next chunk starts at the
    first cut inside the trailing overlap window, again dropping to a
    character position at the "" fallback level when the window holds
    no cut, so consecutive chunks always share an overlap region
    whenever overlap > 0. Chunks tile the whole document.
    """
    if cfg.method is not SplittingMethod.RECURSIVE_CHARACTER:
        raise ConfigMismatch(f"split_recursive got method {cfg.method.token}")
    text = doc.text
    if not text:
        raise EmptyDocument(f"document {doc.id!r} has no text to split")
    pieces: list[tuple[int, int]] = []
    _pieces(text, 0, len(text), cfg.separators, cfg.chunk_size, pieces)
    cuts = [p[0] for p in pieces[1:]] + [len(text)]

    chunks: list[Chunk] = []
    s = 0
    prev_end = 0
    while True:
        limit = s + cfg.chunk_size
        i = bisect_right(cuts, limit) - 1
        end = cuts[i] if i >= 0 and cuts[i] > prev_end else limit
        chunks.append(
            Chunk(
                doc_id=doc.id,
                chunk_index=len(chunks),
                char_start=s,
                char_end=end,
                text=text[s:end],
                method=cfg.method,
            )
        )
        if end >= len(text):
            return chunks
        if cfg.overlap == 0:
            ns = end
        else:
            lo = max(end - cfg.overlap, s + 1)
            j = bisect_left(cuts, lo)
            ns = cuts[j] if j < len(cuts) and cuts[j] < end else lo
        prev_end = end
        s = ns


def split_tokens(doc, cfg: SplitterConfig) -> list[Chunk]:
    """Sliding token windows of chunk_size tokens with token overlap.

    Windows advance by stride = chunk_size - overlap tokens; the final
    window may be short; windows fully contained in their predecessor
    are suppressed. Offsets span first token start to last token end.
    """
    if cfg.method is not SplittingMethod.TOKEN_TEXT:
        raise ConfigMismatch(f"split_tokens got method {cfg.method.token}")
    tokens = tokenize(doc.text)
    if not tokens:
        raise EmptyDocument(f"document {doc.id!r} has no tokens to split")
    n = len(tokens)
    stride = cfg.chunk_size - cfg.overlap
    chunks: list[Chunk] = []
    prev_end = 0
    for w_start in range(0, n, stride):
        w_end = min(w_start + cfg.chunk_size, n)
        if w_end <= prev_end:
            break
        start = tokens[w_start].char_start
        end = tokens[w_end - 1].char_end
        chunks.append(
            Chunk(
                doc_id=doc.id,
                chunk_index=len(chunks),
                char_start=start,
                char_end=end,
                text=doc.text[start:end],
                method=cfg.method,
            )
        )
        prev_end = w_end
        if w_end == n:
            break
    return chunks


def split_document(doc, cfg: SplitterConfig) -> list[Chunk]:
    """Dispatch to the splitter matching cfg.method."""
    if cfg.method is SplittingMethod.RECURSIVE_CHARACTER:
        return split_recursive(doc, cfg)
    return split_tokens(doc, cfg)


_CHUNK_FIELDS = ("doc_id", "chunk_index", "char_start", "char_end", "method", "text")


def write_chunks(chunks: list[Chunk], path: str | Path) -> None:
    """Write chunks as JSONL, one object per line, fixed key order."""
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for c in chunks:
            obj = {
                "doc_id": c.doc_id,
                "chunk_index": c.chunk_index,
                "char_start": c.char_start,
                "char_end": c.char_end,
                "method": c.method.token,
                "text": c.text,
            }
            fh.write(json.dumps(obj, ensure_ascii=False) + "\n")


def read_chunks(path: str | Path) -> list[Chunk]:
    """Read a chunk JSONL file, validating the schema line by line."""
    chunks: list[Chunk] = []
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                obj = json.loads(line)
            except ValueError as exc:
                raise SchemaError(f"{path}:{lineno}: not valid JSON: {exc}") from exc
            if not isinstance(obj, dict) or set(obj) != set(_CHUNK_FIELDS):
                raise SchemaError(
                    f"{path}:{lineno}: expected exactly keys {_CHUNK_FIELDS}"
                )
            chunks.append(
                Chunk(
                    doc_id=obj["doc_id"],
                    chunk_index=int(obj["chunk_index"]),
                    char_start=int(obj["char_start"]),
                    char_end=int(obj["char_end"]),
                    text=obj["text"],
                    method=SplittingMethod.parse(obj["method"]),
                )
            )
    return chunks
