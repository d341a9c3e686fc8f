"""Text embedding: a deterministic offline embedder plus an HTTP provider.

The offline mode is a hashed bag-of-words: tokens are lowercased runs of
alphanumerics, each token is bucketed by FNV-1a (64-bit) modulo the
configured dimension, and the count vector is L2-normalized. It is cheap,
dependency-free and fully deterministic, which makes retrieval pipelines
testable without any network access. The HTTP mode posts to an OpenAI-style
embeddings endpoint configured through environment variables.

All vectors are float64 end to end, in memory and on disk, so cache hits and
index round-trips reproduce scores bit-exactly.
"""

from __future__ import annotations

import os
import re
import struct
import threading
from dataclasses import dataclass
from hashlib import sha256
from typing import Callable, Mapping

import numpy as np

from .errors import ConfigurationError, ContractError, ProviderError, StorageFormatError

OFFLINE_MODE = "offline_hashed_bow"
HTTP_MODE = "http"
DEFAULT_DIMENSION = 256

ENV_EMBED_ENDPOINT = "TOOLSHED_EMBED_ENDPOINT"
ENV_EMBED_KEY = "TOOLSHED_EMBED_KEY"
ENV_EMBED_MODEL = "TOOLSHED_EMBED_MODEL"

_TOKEN = re.compile(r"[a-z0-9]+")

_FNV_OFFSET = 0xCBF29CE484222325
_FNV_PRIME = 0x100000001B3
_FNV_MASK = 0xFFFFFFFFFFFFFFFF

_CACHE_MAGIC = b"TSEC"
_CACHE_VERSION = 1


def _fnv1a_64(data: bytes) -> int:
    value = _FNV_OFFSET
    for byte in data:
        value ^= byte
        value = (value * _FNV_PRIME) & _FNV_MASK
    return value


def tokenize(text: str) -> list[str]:
    """Lowercased alphanumeric runs; everything else is a separator."""
    return _TOKEN.findall(text.lower())


def hashed_bow_embed(text: str, dimension: int = DEFAULT_DIMENSION) -> np.ndarray:
    """Embed text as an L2-normalized hashed bag-of-words vector.

    Texts with no tokens embed to the zero vector, which the cosine kernel
    treats as similar to nothing.
    """
    if dimension <= 0:
        raise ContractError(f"dimension must be positive, got {dimension}")
    vector = np.zeros(dimension, dtype=np.float64)
    for token in tokenize(text):
        vector[_fnv1a_64(token.encode("utf-8")) % dimension] += 1.0
    norm = float(np.linalg.norm(vector))
    if norm > 0.0:
        vector /= norm
    return vector


def cosine_similarity(a: np.ndarray, b: np.ndarray) -> float:
    """Cosine similarity in [-1, 1]; zero-norm inputs score 0.0."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape:
        raise ContractError(f"dimension mismatch: {a.shape} vs {b.shape}")
    norm_a = float(np.linalg.norm(a))
    norm_b = float(np.linalg.norm(b))
    if norm_a == 0.0 or norm_b == 0.0:
        return 0.0
    return float(np.clip(np.dot(a, b) / (norm_a * norm_b), -1.0, 1.0))


@dataclass(frozen=True)
class ProviderConfig:
    """How text becomes vectors: offline hashing or a remote endpoint."""

    mode: str = OFFLINE_MODE
    dimension: int = DEFAULT_DIMENSION
    endpoint: str | None = None
    model: str | None = None
    api_key: str | None = None
    cache_path: str | None = None

    def __post_init__(self) -> None:
        if self.mode not in (OFFLINE_MODE, HTTP_MODE):
            raise ConfigurationError(f"unknown embedding mode {self.mode!r}")
        if self.dimension <= 0:
            raise ConfigurationError(f"dimension must be positive, got {self.dimension}")
        if self.mode == HTTP_MODE and (not self.endpoint or not self.model):
            raise ConfigurationError("http mode requires both endpoint and model")

    @classmethod
    def from_env(
        cls,
        dimension: int = DEFAULT_DIMENSION,
        cache_path: str | None = None,
        environ: Mapping[str, str] | None = None,
    ) -> "ProviderConfig":
        """HTTP config when the environment is fully set, offline otherwise."""
        env = os.environ if environ is None else environ
        endpoint = env.get(ENV_EMBED_ENDPOINT, "")
        model = env.get(ENV_EMBED_MODEL, "")
        if endpoint and model:
            return cls(
                mode=HTTP_MODE,
                dimension=dimension,
                endpoint=endpoint,
                model=model,
                api_key=env.get(ENV_EMBED_KEY),
                cache_path=cache_path,
            )
        return cls(mode=OFFLINE_MODE, dimension=dimension, cache_path=cache_path)


class _VectorCache:
    """Exact-text vector cache with an optional append-only disk file.

    File layout (little-endian): magic ``TSEC``, u16 version, then per entry
    a 32-byte SHA-256 of the text, u32 text byte length, u32 dimension and
    ``dimension`` float64 values. Lookups key on (hash, length); writes are
    serialized by a lock, reads come from the in-memory mirror.
    """

    _HEADER = struct.Struct("<4sH")
    _ENTRY_HEAD = struct.Struct("<32sII")

    def __init__(self, path: str | None = None) -> None:
        self._path = path
        self._lock = threading.Lock()
        self._entries: dict[tuple[bytes, int], np.ndarray] = {}
        if path and os.path.exists(path):
            self._load(path)

    @staticmethod
    def _key(text: str) -> tuple[bytes, int]:
        data = text.encode("utf-8")
        return sha256(data).digest(), len(data)

    def _load(self, path: str) -> None:
        with open(path, "rb") as handle:
            blob = handle.read()
        if len(blob) < self._HEADER.size:
            raise StorageFormatError("cache file too short for header", offset=0)
        magic, version = self._HEADER.unpack_from(blob, 0)
        if magic != _CACHE_MAGIC:
            raise StorageFormatError(f"bad cache magic {magic!r}", offset=0)
        if version != _CACHE_VERSION:
            raise StorageFormatError(f"unsupported cache version {version}", offset=4)
        offset = self._HEADER.size
        while offset < len(blob):
            if offset + self._ENTRY_HEAD.size > len(blob):
                raise StorageFormatError("truncated cache entry header", offset=offset)
            digest, text_len, dimension = self._ENTRY_HEAD.unpack_from(blob, offset)
            offset += self._ENTRY_HEAD.size
            vector_bytes = dimension * 8
            if offset + vector_bytes > len(blob):
                raise StorageFormatError("truncated cache entry vector", offset=offset)
            vector = np.frombuffer(blob, dtype="<f8", count=dimension, offset=offset).astype(
                np.float64
            )
            offset += vector_bytes
            self._entries[(digest, text_len)] = vector

    def get(self, text: str) -> np.ndarray | None:
        vector = self._entries.get(self._key(text))
        return None if vector is None else vector.copy()

    def put(self, text: str, vector: np.ndarray) -> None:
        key = self._key(text)
        with self._lock:
            if key in self._entries:
                return
            self._entries[key] = vector.copy()
            if self._path:
                fresh = not os.path.exists(self._path)
                with open(self._path, "ab") as handle:
                    if fresh:
                        handle.write(self._HEADER.pack(_CACHE_MAGIC, _CACHE_VERSION))
                    handle.write(self._ENTRY_HEAD.pack(key[0], key[1], vector.size))
                    handle.write(vector.astype("<f8").tobytes())


class EmbeddingProvider:
    """Turns text into vectors under one configuration, with caching."""

    def __init__(
        self,
        config: ProviderConfig | None = None,
        transport: Callable[[str, dict, dict], dict] | None = None,
        max_attempts: int = 3,
        timeout: float = 60.0,
    ) -> None:
        self.config = config or ProviderConfig()
        self._transport = transport or self._http_post
        self._max_attempts = max(1, max_attempts)
        self._timeout = timeout
        self._cache = _VectorCache(self.config.cache_path)
        self.request_count = 0  # provider requests actually made (cache misses)

    @property
    def dimension(self) -> int:
        return self.config.dimension

    def identity(self) -> str:
        """Stable string naming this provider, used in index fingerprints."""
        if self.config.mode == OFFLINE_MODE:
            return f"{OFFLINE_MODE}:d={self.config.dimension}"
        return f"{HTTP_MODE}:{self.config.model}:d={self.config.dimension}"

    def _http_post(self, url: str, headers: dict, payload: dict) -> dict:
        import requests

        response = requests.post(url, headers=headers, json=payload, timeout=self._timeout)
        response.raise_for_status()
        return response.json()

    def _fetch_remote(self, text: str) -> np.ndarray:
        headers = {"Content-Type": "application/json"}
        if self.config.api_key:
            headers["Authorization"] = f"Bearer {self.config.api_key}"
        payload = {"model": self.config.model, "input": text}
        last_error: Exception | None = None
        for attempt in range(1, self._max_attempts + 1):
            try:
                body = self._transport(self.config.endpoint, headers, payload)
            except Exception as exc:
                last_error = exc
                continue
            try:
                values = body["data"][0]["embedding"]
            except (KeyError, IndexError, TypeError) as exc:
                raise ProviderError(
                    f"embedding response missing expected fields: {exc}",
                    attempts=attempt,
                    retryable=False,
                ) from exc
            vector = np.asarray(values, dtype=np.float64)
            if vector.ndim != 1 or vector.size != self.config.dimension:
                raise ConfigurationError(
                    f"provider returned {vector.size} values but config.dimension is "
                    f"{self.config.dimension}"
                )
            if not np.all(np.isfinite(vector)):
                raise ProviderError(
                    "provider returned non-finite values", attempts=attempt, retryable=False
                )
            return vector
        raise ProviderError(
            f"embedding request failed after {self._max_attempts} attempt(s): {last_error}",
            attempts=self._max_attempts,
            retryable=True,
        ) from last_error

    def embed_text(self, text: str) -> np.ndarray:
        """Embed one text, consulting the cache first."""
        if self.config.mode == HTTP_MODE and not text:
            raise ContractError("cannot embed empty text through a remote provider")
        cached = self._cache.get(text)
        if cached is not None:
            return cached
        self.request_count += 1
        if self.config.mode == OFFLINE_MODE:
            vector = hashed_bow_embed(text, self.config.dimension)
        else:
            vector = self._fetch_remote(text)
        self._cache.put(text, vector)
        return vector

    def embed_many(self, texts: list[str]) -> np.ndarray:
        """Embed a batch into an (n, dimension) matrix."""
        if not texts:
            return np.zeros((0, self.config.dimension), dtype=np.float64)
        return np.stack([self.embed_text(text) for text in texts])
