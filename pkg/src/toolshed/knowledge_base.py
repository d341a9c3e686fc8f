"""Immutable brute-force cosine index over enhanced tool documents.

At the scales this package targets (up to a few thousand tools) exact
brute-force scoring is faster and simpler than any approximate structure, and
it makes ranking behaviour fully reproducible: scores are computed per entry
in float64, and ties are broken by ascending tool name so that insertion
order never leaks into results.
"""

from __future__ import annotations

import json
import os
import random
import struct
from dataclasses import dataclass
from hashlib import sha256
from typing import Callable, Iterable, Sequence

import numpy as np

from .documents import EnhancedToolDocument
from .embeddings import EmbeddingProvider
from .errors import ContractError, DuplicateToolError, StorageFormatError

MAGIC = b"TSKB"
FORMAT_VERSION = 1

_FILE_HEADER = struct.Struct("<4sHII")  # magic, version, dimension, entry count
_BLOCK_LEN = struct.Struct("<I")


@dataclass(frozen=True)
class RankedResult:
    """One retrieval hit: tool name, cosine score and 1-based rank."""

    tool_name: str
    score: float
    rank: int


@dataclass(frozen=True)
class IndexEntry:
    """A document together with its embedding vector."""

    document: EnhancedToolDocument
    vector: np.ndarray

    @property
    def tool_name(self) -> str:
        return self.document.tool_name


class ToolshedIndex:
    """Read-only collection of (document, vector) entries.

    Instances are built once via :func:`build_index`, :func:`subset_index`
    or :func:`load_index` and never mutated afterwards; "adding" a tool means
    rebuilding, which keeps the fingerprint honest.
    """

    def __init__(
        self,
        entries: Sequence[IndexEntry],
        dimension: int,
        embedder_identity: str,
        parent_fingerprint: str | None = None,
    ) -> None:
        seen: set[str] = set()
        for entry in entries:
            if entry.tool_name in seen:
                raise DuplicateToolError(entry.tool_name)
            seen.add(entry.tool_name)
        for entry in entries:
            if entry.vector.shape != (dimension,):
                raise ContractError(
                    f"entry {entry.tool_name!r} has vector shape {entry.vector.shape}, "
                    f"expected ({dimension},)"
                )
        self._entries = tuple(entries)
        self._dimension = dimension
        self._embedder_identity = embedder_identity
        self._parent_fingerprint = parent_fingerprint
        self._matrix = (
            np.stack([entry.vector for entry in entries])
            if entries
            else np.zeros((0, dimension), dtype=np.float64)
        )
        self._norms = np.linalg.norm(self._matrix, axis=1) if len(entries) else np.zeros(0)
        self._fingerprint = self._compute_fingerprint()

    def _compute_fingerprint(self) -> str:
        digest = sha256()
        digest.update(self._embedder_identity.encode("utf-8"))
        digest.update(str(self._dimension).encode("utf-8"))
        for entry in sorted(self._entries, key=lambda e: e.tool_name):
            digest.update(entry.tool_name.encode("utf-8"))
            digest.update(b"\x00")
            digest.update(entry.document.embeddable_text.encode("utf-8"))
            digest.update(b"\x00")
        return digest.hexdigest()

    def __len__(self) -> int:
        return len(self._entries)

    @property
    def entries(self) -> tuple[IndexEntry, ...]:
        return self._entries

    @property
    def dimension(self) -> int:
        return self._dimension

    @property
    def fingerprint(self) -> str:
        return self._fingerprint

    @property
    def parent_fingerprint(self) -> str | None:
        return self._parent_fingerprint

    @property
    def embedder_identity(self) -> str:
        return self._embedder_identity

    def tool_names(self) -> list[str]:
        return [entry.tool_name for entry in self._entries]

    def __contains__(self, tool_name: str) -> bool:
        return any(entry.tool_name == tool_name for entry in self._entries)


def build_index(
    documents: Sequence[EnhancedToolDocument],
    provider: EmbeddingProvider,
) -> ToolshedIndex:
    """Embed every document and assemble an index.

    Duplicate tool names are a build error: two entries answering to the same
    name would make retrieval results ambiguous.
    """
    seen: set[str] = set()
    for document in documents:
        if document.tool_name in seen:
            raise DuplicateToolError(document.tool_name)
        seen.add(document.tool_name)
    entries = [
        IndexEntry(document=doc, vector=provider.embed_text(doc.embeddable_text))
        for doc in documents
    ]
    return ToolshedIndex(entries, provider.dimension, provider.identity())


def query_top_k(
    index: ToolshedIndex,
    query_vector: np.ndarray,
    k: int,
    metadata_filter: Callable[[dict], bool] | None = None,
) -> list[RankedResult]:
    """Return the top-k entries by cosine similarity.

    Ordering is total and deterministic: score descending, then tool name
    ascending. An optional metadata predicate restricts which entries compete
    before the cutoff is applied. Fewer than k entries may be returned when
    the (filtered) index is smaller than k.
    """
    if k <= 0:
        raise ContractError(f"k must be positive, got {k}")
    query = np.asarray(query_vector, dtype=np.float64)
    if query.shape != (index.dimension,):
        raise ContractError(
            f"query vector shape {query.shape} does not match index dimension {index.dimension}"
        )
    if len(index) == 0:
        return []
    query_norm = float(np.linalg.norm(query))
    if query_norm == 0.0:
        scores = np.zeros(len(index), dtype=np.float64)
    else:
        denom = index._norms * query_norm
        raw = index._matrix @ query
        scores = np.divide(raw, denom, out=np.zeros_like(raw), where=denom > 0.0)
        scores = np.clip(scores, -1.0, 1.0)
    candidates = [
        (float(scores[i]), entry.tool_name)
        for i, entry in enumerate(index.entries)
        if metadata_filter is None or metadata_filter(dict(entry.document.metadata))
    ]
    candidates.sort(key=lambda item: (-item[0], item[1]))
    return [
        RankedResult(tool_name=name, score=score, rank=position)
        for position, (score, name) in enumerate(candidates[:k], start=1)
    ]


def subset_index(
    index: ToolshedIndex,
    size: int,
    must_keep: Iterable[str] = (),
    seed: int = 0,
) -> ToolshedIndex:
    """Sample a smaller index: forced keeps plus seeded random distractors.

    The non-kept entries are shuffled once with ``random.Random(seed)`` and
    the required count is taken from the front, so for a fixed seed the
    distractor sets of growing subset sizes are nested. Entry order follows
    the original index. Vectors are reused, never re-embedded.
    """
    keep = set(must_keep)
    names = set(index.tool_names())
    missing = sorted(keep - names)
    if missing:
        raise ContractError(f"must_keep names not present in index: {missing}")
    if not len(keep) <= size <= len(index):
        raise ContractError(
            f"subset size {size} must lie between |must_keep|={len(keep)} and index size {len(index)}"
        )
    others = [entry for entry in index.entries if entry.tool_name not in keep]
    rng = random.Random(seed)
    rng.shuffle(others)
    chosen = keep | {entry.tool_name for entry in others[: size - len(keep)]}
    entries = [entry for entry in index.entries if entry.tool_name in chosen]
    return ToolshedIndex(
        entries,
        index.dimension,
        index.embedder_identity,
        parent_fingerprint=index.fingerprint,
    )


def _pack_block(data: bytes) -> bytes:
    return _BLOCK_LEN.pack(len(data)) + data


def save_index(index: ToolshedIndex, path: str) -> None:
    """Write the index to a single binary file.

    Layout (little-endian): magic ``TSKB``, u16 format version, u32
    dimension, u32 entry count, a length-prefixed JSON info block
    (fingerprint, lineage, embedder identity), then per entry a
    length-prefixed metadata JSON block (document metadata plus the
    humanized name), the length-prefixed document text, and ``dimension``
    float64 vector values.
    """
    parts = [_FILE_HEADER.pack(MAGIC, FORMAT_VERSION, index.dimension, len(index))]
    info = {
        "fingerprint": index.fingerprint,
        "parent_fingerprint": index.parent_fingerprint,
        "embedder_identity": index.embedder_identity,
    }
    parts.append(_pack_block(json.dumps(info, sort_keys=True).encode("utf-8")))
    for entry in index.entries:
        meta = {
            "metadata": dict(entry.document.metadata),
            "humanized_name": entry.document.humanized_name,
        }
        parts.append(_pack_block(json.dumps(meta, sort_keys=True).encode("utf-8")))
        parts.append(_pack_block(entry.document.embeddable_text.encode("utf-8")))
        parts.append(entry.vector.astype("<f8").tobytes())
    blob = b"".join(parts)
    tmp_path = f"{path}.tmp"
    with open(tmp_path, "wb") as handle:
        handle.write(blob)
    os.replace(tmp_path, path)


def _read_block(blob: bytes, offset: int) -> tuple[bytes, int]:
    if offset + _BLOCK_LEN.size > len(blob):
        raise StorageFormatError("truncated block length", offset=offset)
    (length,) = _BLOCK_LEN.unpack_from(blob, offset)
    offset += _BLOCK_LEN.size
    if offset + length > len(blob):
        raise StorageFormatError("truncated block payload", offset=offset)
    return blob[offset : offset + length], offset + length


def load_index(path: str) -> ToolshedIndex:
    """Read an index written by :func:`save_index`.

    Corruption, truncation, bad magic or an unsupported version raise
    :class:`StorageFormatError` carrying the byte offset of the failure.
    """
    with open(path, "rb") as handle:
        blob = handle.read()
    if len(blob) < _FILE_HEADER.size:
        raise StorageFormatError("file too short for header", offset=0)
    magic, version, dimension, count = _FILE_HEADER.unpack_from(blob, 0)
    if magic != MAGIC:
        raise StorageFormatError(f"bad magic {magic!r}, expected {MAGIC!r}", offset=0)
    if version != FORMAT_VERSION:
        raise StorageFormatError(
            f"unsupported format version {version} (supported: {FORMAT_VERSION})", offset=4
        )
    offset = _FILE_HEADER.size
    info_raw, offset = _read_block(blob, offset)
    try:
        info = json.loads(info_raw.decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise StorageFormatError(f"unreadable info block: {exc}", offset=offset) from exc
    entries = []
    for _ in range(count):
        meta_raw, offset = _read_block(blob, offset)
        try:
            meta = json.loads(meta_raw.decode("utf-8"))
            metadata = meta["metadata"]
            humanized = meta["humanized_name"]
        except (UnicodeDecodeError, json.JSONDecodeError, KeyError, TypeError) as exc:
            raise StorageFormatError(f"unreadable entry metadata: {exc}", offset=offset) from exc
        text_raw, offset = _read_block(blob, offset)
        vector_bytes = dimension * 8
        if offset + vector_bytes > len(blob):
            raise StorageFormatError("truncated entry vector", offset=offset)
        vector = np.frombuffer(blob, dtype="<f8", count=dimension, offset=offset).astype(
            np.float64
        )
        offset += vector_bytes
        entries.append(
            IndexEntry(
                document=EnhancedToolDocument(
                    embeddable_text=text_raw.decode("utf-8"),
                    humanized_name=humanized,
                    metadata=metadata,
                ),
                vector=vector,
            )
        )
    if offset != len(blob):
        raise StorageFormatError("trailing bytes after final entry", offset=offset)
    loaded = ToolshedIndex(
        entries,
        dimension,
        embedder_identity=str(info.get("embedder_identity", "")),
        parent_fingerprint=info.get("parent_fingerprint"),
    )
    stored = info.get("fingerprint")
    if stored is not None and stored != loaded.fingerprint:
        raise StorageFormatError(
            f"fingerprint mismatch: file says {stored}, recomputed {loaded.fingerprint}",
            offset=_FILE_HEADER.size,
        )
    return loaded
