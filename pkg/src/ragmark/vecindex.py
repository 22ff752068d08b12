"""Exact in-memory cosine retrieval over chunk embeddings.

Brute-force search: every query scores every entry, so results are
exact and trivially deterministic. At the corpus sizes this harness
targets (tens of thousands of chunks) that is faster to trust than an
approximate structure is to validate.
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from ragmark.errors import (
    DimensionMismatch,
    DuplicateRef,
    EmptyInput,
    SchemaError,
    ZeroVector,
)
from ragmark.embeddings import EmbeddingVector

_INDEX_MAGIC = b"RGIX"
_INDEX_HEADER = struct.Struct("<4sIQ")  # magic, dim, count


@dataclass(frozen=True, order=True)
class ChunkRef:
    doc_id: str
    chunk_index: int
    method: str

    def serialize(self) -> str:
        return f"{self.doc_id}:{self.chunk_index}:{self.method}"

    @classmethod
    def parse(cls, raw: str) -> "ChunkRef":
        try:
            doc_id, idx, method = raw.rsplit(":", 2)
            return cls(doc_id=doc_id, chunk_index=int(idx), method=method)
        except ValueError as exc:
            raise SchemaError(f"bad chunk ref {raw!r}") from exc


@dataclass(frozen=True)
class SearchHit:
    ref: ChunkRef
    score: float


class VectorIndex:
    """Immutable store of unit-normalized vectors keyed by chunk ref."""

    def __init__(self, refs: tuple[ChunkRef, ...], matrix: np.ndarray,
                 dim: int, model_id: str) -> None:
        self._refs = refs
        self._matrix = matrix  # rows are unit vectors
        self.dim = dim
        self.model_id = model_id
        matrix.flags.writeable = False

    def __len__(self) -> int:
        return len(self._refs)

    @property
    def refs(self) -> tuple[ChunkRef, ...]:
        return self._refs


def build(items: list[tuple[ChunkRef, EmbeddingVector]]) -> VectorIndex:
    """Build an index from (ref, vector) pairs.

    Refs must be unique and vectors homogeneous in dim and model_id;
    rows are normalized once here so queries are a single matmul.
    """
    if not items:
        raise EmptyInput("cannot build an index from zero items")
    dim = items[0][1].dim
    model_id = items[0][1].model_id
    seen: set[ChunkRef] = set()
    rows = np.empty((len(items), dim), dtype=np.float64)
    refs: list[ChunkRef] = []
    for pos, (ref, vec) in enumerate(items):
        if vec.dim != dim or vec.model_id != model_id:
            raise DimensionMismatch(
                f"item {pos} has (dim {vec.dim}, model {vec.model_id!r}); "
                f"index is (dim {dim}, model {model_id!r})"
            )
        if ref in seen:
            raise DuplicateRef(f"duplicate chunk ref {ref.serialize()}")
        seen.add(ref)
        norm = float(np.linalg.norm(vec.values))
        if norm == 0.0:
            raise ZeroVector(f"zero vector for ref {ref.serialize()}")
        rows[pos] = vec.values / norm
        refs.append(ref)
    return VectorIndex(refs=tuple(refs), matrix=rows, dim=dim, model_id=model_id)


def query(index: VectorIndex, q: EmbeddingVector, k: int) -> list[SearchHit]:
    """Top-k by cosine, ties broken by ascending chunk ref."""
    if k < 1:
        raise EmptyInput(f"k must be >= 1, got {k}")
    if q.dim != index.dim or q.model_id != index.model_id:
        raise DimensionMismatch(
            f"query (dim {q.dim}, model {q.model_id!r}) does not match index "
            f"(dim {index.dim}, model {index.model_id!r})"
        )
    norm = float(np.linalg.norm(q.values))
    if norm == 0.0:
        raise ZeroVector("cannot query with a zero vector")
    scores = index._matrix @ (q.values / norm)
    np.clip(scores, -1.0, 1.0, out=scores)
    order = sorted(range(len(index)), key=lambda i: (-scores[i], index.refs[i]))
    return [
        SearchHit(ref=index.refs[i], score=float(scores[i]))
        for i in order[: min(k, len(index))]
    ]


def save(index: VectorIndex, path: str | Path) -> None:
    """Write the binary matrix plus a JSON sidecar of refs.

    Layout: 16-byte header (magic "RGIX", u32 dim, u64 count), then
    count records of dim little-endian float64 values. The sidecar at
    <path>.refs.json maps record positions to chunk refs and carries
    the model_id.
    """
    path = Path(path)
    with open(path, "wb") as fh:
        fh.write(_INDEX_HEADER.pack(_INDEX_MAGIC, index.dim, len(index)))
        fh.write(np.ascontiguousarray(index._matrix, dtype="<f8").tobytes())
    sidecar = {
        "model_id": index.model_id,
        "refs": [[r.doc_id, r.chunk_index, r.method] for r in index.refs],
    }
    Path(f"{path}.refs.json").write_text(
        json.dumps(sidecar, ensure_ascii=False, sort_keys=True) + "\n",
        encoding="utf-8",
    )


def load(path: str | Path) -> VectorIndex:
    path = Path(path)
    blob = path.read_bytes()
    if len(blob) < _INDEX_HEADER.size:
        raise SchemaError(f"{path}: truncated index header")
    magic, dim, count = _INDEX_HEADER.unpack_from(blob)
    if magic != _INDEX_MAGIC:
        raise SchemaError(f"{path}: not an index file (bad magic)")
    payload = blob[_INDEX_HEADER.size:]
    expected = 8 * dim * count
    if len(payload) != expected:
        raise SchemaError(
            f"{path}: payload is {len(payload)} bytes, expected {expected}"
        )
    matrix = np.frombuffer(payload, dtype="<f8").reshape(count, dim).copy()
    try:
        sidecar = json.loads(Path(f"{path}.refs.json").read_text(encoding="utf-8"))
        refs = tuple(
            ChunkRef(doc_id=d, chunk_index=int(i), method=m)
            for d, i, m in sidecar["refs"]
        )
        model_id = sidecar["model_id"]
    except (OSError, ValueError, KeyError, TypeError) as exc:
        raise SchemaError(f"{path}: bad or missing refs sidecar: {exc}") from exc
    if len(refs) != count:
        raise SchemaError(
            f"{path}: sidecar lists {len(refs)} refs, header says {count}"
        )
    return VectorIndex(refs=refs, matrix=matrix, dim=int(dim), model_id=model_id)
