"""Corpus loading: typed documents, text normalization, manifest handling.

A corpus is described by a JSON manifest (list of objects with "id",
"doc_type", "path", "title"). Document text is plain UTF-8; any PDF or
HTML extraction happens before this package sees the data.
"""

from __future__ import annotations

import enum
import json
import re
from dataclasses import dataclass
from pathlib import Path

from ragmark.errors import EmptyDocument, InvalidManifest

_BLANK_RUN = re.compile(r"\n{3,}")


class DocumentType(enum.Enum):
    ARTICLE = "article"
    TEXTBOOK = "textbook"
    NOVEL = "novel"

    @property
    def label(self) -> str:
        """Capitalized form used in report tables."""
        return self.value.capitalize()

    @classmethod
    def parse(cls, raw: str) -> "DocumentType":
        try:
            return cls(raw.strip().lower())
        except ValueError:
            allowed = ", ".join(m.value for m in cls)
            raise InvalidManifest(
                f"unknown doc_type {raw!r}; expected one of: {allowed}"
            ) from None


@dataclass(frozen=True)
class Document:
    id: str
    doc_type: DocumentType
    title: str
    text: str
    source_path: str


@dataclass(frozen=True)
class ManifestEntry:
    id: str
    doc_type: DocumentType
    path: Path
    title: str


@dataclass(frozen=True)
class CorpusManifest:
    entries: tuple[ManifestEntry, ...]


def normalize_text(raw: str) -> str:
    """Normalize line endings and blank-line runs.

    CRLF becomes LF, trailing whitespace is stripped from every line,
    and runs of three or more consecutive newlines collapse to exactly
    two. Everything else is preserved, so character offsets computed on
    normalized text are stable across platforms. Idempotent.
    """
    text = raw.replace("\r\n", "\n")
    text = "\n".join(line.rstrip() for line in text.split("\n"))
    return _BLANK_RUN.sub("\n\n", text)


def load_document(path: str | Path, doc_type: DocumentType, doc_id: str,
                  title: str | None = None) -> Document:
    """Read one UTF-8 text file into a normalized Document.

    A UTF-8 BOM is tolerated and stripped. Raises FileNotFoundError for
    a missing file, UnicodeDecodeError for non-UTF-8 content, and
    EmptyDocument when nothing but whitespace survives normalization.
    """
    p = Path(path)
    raw = p.read_bytes().decode("utf-8-sig")
    text = normalize_text(raw)
    if not text.strip():
        raise EmptyDocument(f"document {doc_id!r} at {p} is empty after normalization")
    return Document(
        id=doc_id,
        doc_type=doc_type,
        title=title if title is not None else p.stem,
        text=text,
        source_path=str(path),
    )


def load_manifest(path: str | Path) -> CorpusManifest:
    """Parse and validate a corpus manifest file.

    Relative document paths are resolved against the manifest's own
    directory. Validation covers the JSON shape, required string
    fields, the doc_type vocabulary, id uniqueness, and that every
    referenced file exists.
    """
    p = Path(path)
    try:
        data = json.loads(p.read_text(encoding="utf-8"))
    except FileNotFoundError:
        raise InvalidManifest(f"manifest file not found: {p}") from None
    except (OSError, ValueError) as exc:
        raise InvalidManifest(f"cannot parse manifest {p}: {exc}") from exc
    if not isinstance(data, list):
        raise InvalidManifest(f"manifest {p} must be a JSON array")
    entries: list[ManifestEntry] = []
    seen: set[str] = set()
    for pos, obj in enumerate(data):
        if not isinstance(obj, dict):
            raise InvalidManifest(f"manifest entry {pos} is not an object")
        for field in ("id", "doc_type", "path", "title"):
            if not isinstance(obj.get(field), str) or not obj[field]:
                raise InvalidManifest(
                    f"manifest entry {pos} needs a non-empty string {field!r}"
                )
        if obj["id"] in seen:
            raise InvalidManifest(f"duplicate document id {obj['id']!r}")
        seen.add(obj["id"])
        doc_path = Path(obj["path"])
        if not doc_path.is_absolute():
            doc_path = p.parent / doc_path
        if not doc_path.is_file():
            raise InvalidManifest(
                f"manifest entry {obj['id']!r}: no such file {doc_path}"
            )
        entries.append(
            ManifestEntry(
                id=obj["id"],
                doc_type=DocumentType.parse(obj["doc_type"]),
                path=doc_path,
                title=obj["title"],
            )
        )
    return CorpusManifest(entries=tuple(entries))


def load_corpus(manifest: CorpusManifest | str | Path) -> list[Document]:
    """Load every document referenced by a manifest, in manifest order."""
    if not isinstance(manifest, CorpusManifest):
        manifest = load_manifest(manifest)
    return [
        load_document(e.path, e.doc_type, e.id, e.title) for e in manifest.entries
    ]


def corpus_summary(manifest: CorpusManifest) -> dict[DocumentType, int]:
    """Document count per type; every type appears, including zeros."""
    counts = {t: 0 for t in DocumentType}
    for entry in manifest.entries:
        counts[entry.doc_type] += 1
    return counts
