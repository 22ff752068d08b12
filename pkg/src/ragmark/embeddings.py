"""Embedding providers: deterministic offline mock and remote HTTP client.

The mock feature-hashes character trigrams, so it is fast, seedable,
and locale-independent; it backs every offline test and the bundled
demo. The remote client speaks the common POST /v1/embeddings protocol
and caches responses on disk as float32, returning the cached precision
even on the first call so cache hits and misses are bit-identical.
"""

from __future__ import annotations

import enum
import hashlib
import logging
import os
import struct
import time
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from ragmark.errors import (
    AuthMissing,
    DimensionMismatch,
    EmptyInput,
    InvalidConfig,
    ProviderError,
    Unsupported,
    ZeroVector,
)
from ragmark.splitters import Token, tokenize
from ragmark._kernels import trigram_accumulate

log = logging.getLogger(__name__)

_CACHE_MAGIC = b"RGMK"
_CACHE_HEADER = struct.Struct("<4sIQ")  # magic, dim, reserved
_RETRY_DELAYS = (0.5, 1.0, 2.0)


class ProviderKind(enum.Enum):
    REMOTE_OPENAI_COMPATIBLE = "remote"
    DETERMINISTIC_MOCK = "mock"


@dataclass(frozen=True)
class ProviderConfig:
    kind: ProviderKind
    model_id: str
    base_url: str = ""
    api_key_env: str = "RAGMARK_API_KEY"
    timeout: float = 30.0
    max_in_flight: int = 4
    mock_dim: int = 64
    mock_seed: int = 0
    cache_dir: str | None = None

    def __post_init__(self) -> None:
        if not self.model_id:
            raise InvalidConfig("provider model_id must be non-empty")
        if self.kind is ProviderKind.REMOTE_OPENAI_COMPATIBLE and not self.base_url:
            raise InvalidConfig("remote provider needs a non-empty base_url")
        if self.max_in_flight < 1:
            raise InvalidConfig("max_in_flight must be positive")


@dataclass(frozen=True)
class EmbeddingVector:
    values: np.ndarray
    dim: int
    model_id: str

    def __post_init__(self) -> None:
        arr = np.asarray(self.values, dtype=np.float64)
        if arr.ndim != 1 or arr.shape[0] != self.dim:
            raise DimensionMismatch(
                f"vector has shape {arr.shape}, declared dim {self.dim}"
            )
        if not np.all(np.isfinite(arr)):
            raise InvalidConfig("embedding contains non-finite values")
        arr.flags.writeable = False
        object.__setattr__(self, "values", arr)


@dataclass(frozen=True)
class TokenEmbeddings:
    tokens: tuple[Token, ...]
    vectors: tuple[EmbeddingVector, ...]


def mock_embedding(text: str, dim: int, seed: int,
                   model_id: str | None = None) -> EmbeddingVector:
    """Deterministic hash embedding of character trigrams.

    The lowercased text is padded with sentinel characters so even
    one-character inputs produce a trigram; each trigram lands in a
    seeded hash bucket with a hashed sign; the signed integer counts
    (exact in float64) are then L2-normalized. In the rare event that
    every bucket cancels to zero, a single deterministic bucket is set
    instead of returning a zero vector.
    """
    if not text:
        raise EmptyInput("cannot embed empty text")
    if dim < 8:
        raise InvalidConfig(f"mock embedding dim must be >= 8, got {dim}")
    padded = "\x02" + text.lower() + "\x03"
    counts = trigram_accumulate(padded, dim, seed)
    values = np.asarray(counts, dtype=np.float64)
    if not values.any():
        rescue = hashlib.sha256(padded.encode("utf-8")).digest()
        values = values.copy()
        values[int.from_bytes(rescue[:8], "little") % dim] = 1.0
    values = values / np.linalg.norm(values)
    if model_id is None:
        model_id = f"mock:d{dim}:s{seed}"
    return EmbeddingVector(values=values, dim=dim, model_id=model_id)


def cosine(u: EmbeddingVector, v: EmbeddingVector) -> float:
    """Cosine similarity, clamped to [-1, 1] against rounding."""
    if u.dim != v.dim or u.model_id != v.model_id:
        raise DimensionMismatch(
            f"cannot compare ({u.model_id}, dim {u.dim}) with "
            f"({v.model_id}, dim {v.dim})"
        )
    nu = float(np.linalg.norm(u.values))
    nv = float(np.linalg.norm(v.values))
    if nu == 0.0 or nv == 0.0:
        raise ZeroVector("cosine undefined for zero vectors")
    value = float(np.dot(u.values, v.values)) / (nu * nv)
    return max(-1.0, min(1.0, value))


def token_window_text(tokens: list[Token], i: int) -> str:
    """Context string embedded for token i: +-2 neighbors, center marked."""
    lo = max(0, i - 2)
    hi = min(len(tokens), i + 3)
    parts = [
        f"|{t.text}|" if j == i else t.text
        for j, t in enumerate(tokens[lo:hi], start=lo)
    ]
    return " ".join(parts)


class EmbeddingProvider:
    """Common interface; concrete providers override the _embed hook."""

    model_id: str
    supports_token_embeddings: bool = False

    def embed_text(self, text: str) -> EmbeddingVector:
        raise NotImplementedError

    def embed_tokens(self, text: str) -> TokenEmbeddings:
        raise Unsupported(
            f"provider {self.model_id!r} does not expose token-level embeddings"
        )


class MockEmbeddingProvider(EmbeddingProvider):
    """Offline provider; pure computation, no disk cache needed."""

    supports_token_embeddings = True

    def __init__(self, dim: int = 64, seed: int = 0, model_id: str | None = None):
        if dim < 8:
            raise InvalidConfig(f"mock embedding dim must be >= 8, got {dim}")
        self.dim = dim
        self.seed = seed
        self.model_id = model_id or f"mock:d{dim}:s{seed}"

    def embed_text(self, text: str) -> EmbeddingVector:
        return mock_embedding(text, self.dim, self.seed, self.model_id)

    def embed_tokens(self, text: str) -> TokenEmbeddings:
        tokens = tokenize(text)
        if not tokens:
            raise EmptyInput("no tokens to embed")
        vectors = tuple(
            mock_embedding(token_window_text(tokens, i), self.dim, self.seed,
                           self.model_id)
            for i in range(len(tokens))
        )
        return TokenEmbeddings(tokens=tuple(tokens), vectors=vectors)


def default_cache_dir() -> Path:
    env = os.environ.get("RAGMARK_CACHE_DIR")
    if env:
        return Path(env)
    return Path.home() / ".cache" / "ragmark"


class EmbeddingCache:
    """Content-addressed on-disk store of float32 vectors.

    One file per key: 16-byte header (magic "RGMK", little-endian u32
    dim, u64 reserved) followed by the float32 little-endian values.
    Corrupt or truncated files are treated as misses and rewritten.
    Writes go through a temp file plus rename, so concurrent writers of
    the same key settle on a complete file.
    """

    def __init__(self, root: Path) -> None:
        self.root = root

    def _path(self, model_id: str, text: str) -> Path:
        digest = hashlib.sha256(
            model_id.encode("utf-8") + b"\x00" + text.encode("utf-8")
        ).hexdigest()
        return self.root / f"{digest}.rgmk"

    def get(self, model_id: str, text: str) -> np.ndarray | None:
        path = self._path(model_id, text)
        try:
            blob = path.read_bytes()
        except OSError:
            return None
        if len(blob) < _CACHE_HEADER.size:
            return None
        magic, dim, _ = _CACHE_HEADER.unpack_from(blob)
        payload = blob[_CACHE_HEADER.size:]
        if magic != _CACHE_MAGIC or len(payload) != 4 * dim:
            log.warning("discarding corrupt cache entry %s", path.name)
            return None
        return np.frombuffer(payload, dtype="<f4").astype(np.float64)

    def put(self, model_id: str, text: str, values: np.ndarray) -> np.ndarray:
        """Store values at float32; returns what a later get() will see."""
        quantized = np.asarray(values, dtype="<f4")
        path = self._path(model_id, text)
        self.root.mkdir(parents=True, exist_ok=True)
        tmp = path.with_suffix(f".tmp{os.getpid()}")
        tmp.write_bytes(
            _CACHE_HEADER.pack(_CACHE_MAGIC, quantized.shape[0], 0)
            + quantized.tobytes()
        )
        os.replace(tmp, path)
        return quantized.astype(np.float64)


class RemoteEmbeddingProvider(EmbeddingProvider):
    """Client for POST {base_url}/v1/embeddings.

    Retries 429 and 5xx responses up to three times with 0.5/1/2 s
    backoff; other HTTP errors surface immediately. The response dim is
    pinned on first success and later disagreements raise.
    """

    supports_token_embeddings = False

    def __init__(self, config: ProviderConfig, cache: EmbeddingCache | None = None,
                 session=None):
        if config.kind is not ProviderKind.REMOTE_OPENAI_COMPATIBLE:
            raise InvalidConfig("RemoteEmbeddingProvider needs a remote config")
        self.config = config
        self.model_id = config.model_id
        self.dim: int | None = None
        if cache is None:
            root = Path(config.cache_dir) if config.cache_dir else default_cache_dir()
            cache = EmbeddingCache(root)
        self.cache = cache
        if session is None:
            import requests

            session = requests.Session()
        self.session = session

    def _auth_header(self) -> dict[str, str]:
        key = os.environ.get(self.config.api_key_env, "")
        if not key:
            raise AuthMissing(
                f"environment variable {self.config.api_key_env} is not set"
            )
        return {"Authorization": f"Bearer {key}"}

    def _post(self, payload: dict) -> dict:
        url = self.config.base_url.rstrip("/") + "/v1/embeddings"
        headers = self._auth_header()
        last_status = None
        last_body = ""
        for attempt, delay in enumerate((*_RETRY_DELAYS, None)):
            resp = self.session.post(
                url, json=payload, headers=headers, timeout=self.config.timeout
            )
            if resp.status_code == 200:
                return resp.json()
            last_status = resp.status_code
            last_body = resp.text[:200]
            retryable = resp.status_code == 429 or resp.status_code >= 500
            if not retryable or delay is None:
                break
            log.warning(
                "embedding request got HTTP %s, retry %d in %.1fs",
                resp.status_code, attempt + 1, delay,
            )
            time.sleep(delay)
        raise ProviderError(
            f"embeddings endpoint returned HTTP {last_status}: {last_body}"
        )

    def embed_text(self, text: str) -> EmbeddingVector:
        if not text:
            raise EmptyInput("cannot embed empty text")
        cached = self.cache.get(self.model_id, text)
        if cached is not None:
            return self._vector(cached)
        data = self._post({"model": self.model_id, "input": [text]})
        try:
            raw = data["data"][0]["embedding"]
        except (KeyError, IndexError, TypeError) as exc:
            raise ProviderError(f"malformed embeddings response: {exc}") from exc
        values = self.cache.put(self.model_id, text, np.asarray(raw, dtype=np.float64))
        return self._vector(values)

    def _vector(self, values: np.ndarray) -> EmbeddingVector:
        if self.dim is None:
            self.dim = int(values.shape[0])
        elif values.shape[0] != self.dim:
            raise DimensionMismatch(
                f"endpoint returned dim {values.shape[0]}, pinned {self.dim}"
            )
        return EmbeddingVector(values=values, dim=self.dim, model_id=self.model_id)


def make_provider(config: ProviderConfig,
                  cache: EmbeddingCache | None = None) -> EmbeddingProvider:
    if config.kind is ProviderKind.DETERMINISTIC_MOCK:
        return MockEmbeddingProvider(
            dim=config.mock_dim, seed=config.mock_seed, model_id=config.model_id
        )
    return RemoteEmbeddingProvider(config, cache=cache)
