"""Raw text embeddings behind a uniform provider interface.

Three providers share the same surface: a remote HTTP model server, a
read-only file cache, and a deterministic signed 3-gram hash embedder
used for tests and offline demos. Cache records are content-addressed
by (provider_kind, model_id, dim, text) so switching models can never
serve stale vectors.
"""

from __future__ import annotations

import hashlib
import json
import os
import time
from collections import Counter
from dataclasses import dataclass
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from .domain import EmbeddingVector

__all__ = [
    "EmbeddingProviderConfig",
    "EmbeddingRecord",
    "EmbedError",
    "CacheMissError",
    "RemoteEmbedError",
    "hash_embed",
    "HashEmbedder",
    "RemoteEmbedder",
    "FileCacheEmbedder",
    "CachingEmbedder",
    "EmbeddingCache",
    "make_provider",
    "record_key",
]

DEFAULT_DIM = 768
_N_SHARDS = 16


class EmbedError(RuntimeError):
    pass


class CacheMissError(EmbedError):
    pass


class RemoteEmbedError(EmbedError):
    """Remote provider failed after exhausting its retry budget."""


@dataclass(frozen=True)
class EmbeddingRecord:
    """One cached vector addressed by its content digest."""

    key: bytes  # 16-byte digest of (provider_kind, model_id, dim, text)
    vector: np.ndarray

    def __post_init__(self):
        if len(self.key) != 16:
            raise ValueError(f"record key must be 16 bytes, got {len(self.key)}")


@dataclass(frozen=True)
class EmbeddingProviderConfig:
    provider_kind: str  # remote | file_cache | hash
    model_id: str = "hash-3gram-v1"
    dim: int = DEFAULT_DIM
    endpoint: Optional[str] = None
    cache_dir: Optional[str] = None
    seed: int = 0
    timeout: float = 30.0
    max_retries: int = 3
    backoff: float = 0.5

    def __post_init__(self):
        if self.dim <= 0:
            raise ValueError(f"embedding dim must be positive, got {self.dim}")
        if self.provider_kind == "remote" and not self.endpoint:
            raise ValueError("remote provider requires an endpoint")
        if self.provider_kind == "file_cache" and not self.cache_dir:
            raise ValueError("file_cache provider requires a cache_dir")


def record_key(provider_kind: str, model_id: str, dim: int, text: str) -> bytes:
    """16-byte content digest identifying one cached vector."""
    h = hashlib.blake2b(digest_size=16)
    h.update(f"{provider_kind}\x00{model_id}\x00{dim}\x00".encode("utf-8"))
    h.update(text.encode("utf-8"))
    return h.digest()


def _token_grams(text: str) -> Counter:
    """Character 3-grams per whitespace token, with boundary markers so a
    text concatenated with itself scales the multiset uniformly."""
    counts: Counter = Counter()
    for tok in text.split():
        padded = "\x02" + tok + "\x03"
        for i in range(len(padded) - 2):
            counts[padded[i : i + 3]] += 1
    return counts


def hash_embed(text: str, dim: int, seed: int = 0) -> EmbeddingVector:
    """Signed 3-gram hashing into ``dim`` buckets, L2-normalized.

    Deterministic under (seed, text); shared substrings produce cosine
    structure, which end-to-end tests rely on.
    """
    if dim <= 0:
        raise ValueError(f"dim must be positive, got {dim}")
    salt = (seed & 0xFFFFFFFFFFFFFFFF).to_bytes(8, "little")
    vec = np.zeros(dim, dtype=np.float64)
    for gram, n in _token_grams(text).items():
        d = hashlib.blake2b(gram.encode("utf-8"), digest_size=8, salt=salt).digest()
        v = int.from_bytes(d, "little")
        sign = 1.0 if (v >> 63) & 1 == 0 else -1.0
        vec[v % dim] += sign * n
    norm = np.linalg.norm(vec)
    if norm == 0.0:
        d = hashlib.blake2b(text.encode("utf-8"), digest_size=8, salt=salt).digest()
        vec[int.from_bytes(d, "little") % dim] = 1.0
        norm = 1.0
    return EmbeddingVector(values=(vec / norm).astype(np.float32))


def _require_nonempty(text: str) -> None:
    if not text or not text.strip():
        raise EmbedError("cannot embed empty text")


class HashEmbedder:
    def __init__(self, dim: int = DEFAULT_DIM, seed: int = 0, model_id: str = "hash-3gram-v1"):
        self.config = EmbeddingProviderConfig(provider_kind="hash", model_id=model_id, dim=dim, seed=seed)

    def embed_text(self, text: str) -> EmbeddingVector:
        _require_nonempty(text)
        return hash_embed(text, self.config.dim, self.config.seed)

    def embed_batch(self, texts: Sequence[str]) -> list[EmbeddingVector]:
        return [self.embed_text(t) for t in texts]


class RemoteEmbedder:
    """POST {model, texts[]} -> {embeddings[][]} with retry/backoff.

    A partial response (wrong count or wrong dim) fails the whole batch;
    callers retry idempotently against the cache.
    """

    def __init__(self, config: EmbeddingProviderConfig, sleep=time.sleep):
        if config.provider_kind != "remote":
            raise ValueError("RemoteEmbedder requires a remote config")
        self.config = config
        self.call_count = 0
        self._sleep = sleep

    def embed_text(self, text: str) -> EmbeddingVector:
        return self.embed_batch([text])[0]

    def embed_batch(self, texts: Sequence[str]) -> list[EmbeddingVector]:
        import httpx

        for t in texts:
            _require_nonempty(t)
        if not texts:
            return []
        payload = {"model": self.config.model_id, "texts": list(texts)}
        last_error: Exception | None = None
        for attempt in range(self.config.max_retries + 1):
            try:
                self.call_count += 1
                resp = httpx.post(self.config.endpoint, json=payload, timeout=self.config.timeout)
                resp.raise_for_status()
                rows = resp.json()["embeddings"]
                if len(rows) != len(texts):
                    raise RemoteEmbedError(
                        f"remote returned {len(rows)} embeddings for {len(texts)} texts"
                    )
                return [self._validate(np.asarray(r, dtype=np.float32)) for r in rows]
            except RemoteEmbedError:
                raise
            except Exception as exc:  # noqa: BLE001 - network errors are retriable
                last_error = exc
                if attempt < self.config.max_retries:
                    self._sleep(self.config.backoff * (2**attempt))
        raise RemoteEmbedError(f"remote embedding failed after {self.config.max_retries + 1} attempts: {last_error}")

    def _validate(self, arr: np.ndarray) -> EmbeddingVector:
        if arr.shape != (self.config.dim,):
            raise RemoteEmbedError(f"remote returned dim {arr.shape} != {self.config.dim}")
        return EmbeddingVector(values=arr)


class EmbeddingCache:
    """Sharded binary cache: per shard, repeated records of a 16-byte key
    digest followed by dim little-endian float32 values. Writes go
    through a temp file and an atomic rename."""

    def __init__(self, cache_dir: str | os.PathLike, provider_kind: str, model_id: str, dim: int,
                 create: bool = False):
        self.dir = Path(cache_dir)
        self.provider_kind = provider_kind
        self.model_id = model_id
        self.dim = dim
        manifest_path = self.dir / "manifest.json"
        if manifest_path.exists():
            manifest = json.loads(manifest_path.read_text("utf-8"))
            for key in ("provider_kind", "model_id", "dim"):
                ours = getattr(self, key)
                if manifest.get(key) != ours:
                    raise EmbedError(
                        f"cache manifest mismatch for {key}: {manifest.get(key)!r} != {ours!r}"
                    )
        elif create:
            self.dir.mkdir(parents=True, exist_ok=True)
            payload = {"provider_kind": provider_kind, "model_id": model_id, "dim": dim}
            digest = hashlib.blake2b(
                json.dumps(payload, sort_keys=True).encode("utf-8"), digest_size=8
            ).hexdigest()
            payload["config_digest"] = digest
            _atomic_write_bytes(manifest_path, json.dumps(payload, indent=2).encode("utf-8"))
        else:
            raise EmbedError(f"no embedding cache manifest at {manifest_path}")
        self._records: dict[bytes, np.ndarray] = {}
        self._load()

    @classmethod
    def open(cls, cache_dir: str | os.PathLike) -> "EmbeddingCache":
        manifest_path = Path(cache_dir) / "manifest.json"
        if not manifest_path.exists():
            raise EmbedError(f"no embedding cache manifest at {manifest_path}")
        m = json.loads(manifest_path.read_text("utf-8"))
        return cls(cache_dir, m["provider_kind"], m["model_id"], int(m["dim"]))

    def _shard_path(self, key: bytes) -> Path:
        return self.dir / f"shard_{key[0] % _N_SHARDS:02x}.bin"

    def _load(self) -> None:
        rec_size = 16 + 4 * self.dim
        for shard in sorted(self.dir.glob("shard_*.bin")):
            raw = shard.read_bytes()
            if len(raw) % rec_size != 0:
                raise EmbedError(f"corrupt cache shard {shard} (size {len(raw)})")
            for off in range(0, len(raw), rec_size):
                key = raw[off : off + 16]
                vec = np.frombuffer(raw[off + 16 : off + rec_size], dtype="<f4").copy()
                self._records[key] = vec

    def get(self, text: str) -> Optional[np.ndarray]:
        return self._records.get(record_key(self.provider_kind, self.model_id, self.dim, text))

    def get_record(self, text: str) -> Optional[EmbeddingRecord]:
        key = record_key(self.provider_kind, self.model_id, self.dim, text)
        vec = self._records.get(key)
        return None if vec is None else EmbeddingRecord(key=key, vector=vec)

    def put_many(self, items: Sequence[tuple[str, np.ndarray]]) -> None:
        by_shard: dict[Path, list[bytes]] = {}
        for text, vec in items:
            key = record_key(self.provider_kind, self.model_id, self.dim, text)
            if key in self._records:
                continue
            arr = np.ascontiguousarray(vec, dtype="<f4")
            if arr.shape != (self.dim,):
                raise EmbedError(f"cache put with dim {arr.shape} != {self.dim}")
            self._records[key] = arr.copy()
            by_shard.setdefault(self._shard_path(key), []).append(key + arr.tobytes())
        for shard, blobs in by_shard.items():
            existing = shard.read_bytes() if shard.exists() else b""
            _atomic_write_bytes(shard, existing + b"".join(blobs))

    def __len__(self) -> int:
        return len(self._records)


class FileCacheEmbedder:
    """Serves vectors only from a populated cache; a miss is an explicit
    error, never silent zeros."""

    def __init__(self, cache_dir: str | os.PathLike):
        self.cache = EmbeddingCache.open(cache_dir)
        self.config = EmbeddingProviderConfig(
            provider_kind="file_cache",
            model_id=self.cache.model_id,
            dim=self.cache.dim,
            cache_dir=str(cache_dir),
        )

    def embed_text(self, text: str) -> EmbeddingVector:
        _require_nonempty(text)
        vec = self.cache.get(text)
        if vec is None:
            raise CacheMissError(f"embedding cache miss for text of {len(text)} chars: {text[:60]!r}")
        return EmbeddingVector(values=vec)

    def embed_batch(self, texts: Sequence[str]) -> list[EmbeddingVector]:
        return [self.embed_text(t) for t in texts]


class CachingEmbedder:
    """Write-through cache wrapper around another provider."""

    def __init__(self, inner, cache_dir: str | os.PathLike):
        self.inner = inner
        self.config = inner.config
        self.cache = EmbeddingCache(
            cache_dir, inner.config.provider_kind, inner.config.model_id, inner.config.dim, create=True
        )

    def embed_text(self, text: str) -> EmbeddingVector:
        return self.embed_batch([text])[0]

    def embed_batch(self, texts: Sequence[str]) -> list[EmbeddingVector]:
        for t in texts:
            _require_nonempty(t)
        out: list[Optional[EmbeddingVector]] = []
        misses: list[int] = []
        for i, t in enumerate(texts):
            vec = self.cache.get(t)
            if vec is None:
                misses.append(i)
                out.append(None)
            else:
                out.append(EmbeddingVector(values=vec))
        if misses:
            fresh = self.inner.embed_batch([texts[i] for i in misses])
            self.cache.put_many([(texts[i], v.values) for i, v in zip(misses, fresh)])
            for i, v in zip(misses, fresh):
                out[i] = v
        return out  # type: ignore[return-value]


def make_provider(config: EmbeddingProviderConfig):
    if config.provider_kind == "hash":
        return HashEmbedder(dim=config.dim, seed=config.seed, model_id=config.model_id)
    if config.provider_kind == "remote":
        return RemoteEmbedder(config)
    if config.provider_kind == "file_cache":
        return FileCacheEmbedder(config.cache_dir)
    raise ValueError(f"unknown provider kind {config.provider_kind!r}")


def _atomic_write_bytes(path: Path, data: bytes) -> None:
    tmp = path.with_name(path.name + f".tmp{os.getpid()}")
    tmp.write_bytes(data)
    os.replace(tmp, path)
