"""Character encoding, padding, and the flatten/unflatten batch pipeline.

Documents are encoded byte-by-byte into integer codes, concatenated, and cut
into fixed-length chunks so the taggers never waste work on per-sample
padding. ``chunk_map`` records where every document landed so predictions can
be mapped back exactly.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .labels import LABEL_DTYPE, PAD

PAD_CODE = 0
# Bytes >= 128 share the DEL slot, which never occurs in generated corpora.
UNK_CODE = 127
# NUL bytes are legal document content (a generated delimiter); they cannot
# map to 0 because that code is reserved for padding, so they take the spare
# top slot instead.
NUL_CODE = 128
VOCAB_SIZE = 129

_BYTE_TO_CODE = np.arange(256, dtype=np.int32)
_BYTE_TO_CODE[128:] = UNK_CODE
_BYTE_TO_CODE[0] = NUL_CODE


def encode_chars(text: bytes) -> np.ndarray:
    """Map a byte string to integer codes in [1, 128]."""
    raw = np.frombuffer(text, dtype=np.uint8)
    return _BYTE_TO_CODE[raw]


@dataclass(frozen=True)
class ChunkSegment:
    """One contiguous slice of a source document inside an encoded batch."""

    source_id: str
    source_start: int
    length: int
    row: int
    col: int


@dataclass
class EncodedBatch:
    """Fixed-width code matrix plus the map back to source documents."""

    codes: np.ndarray                  # [n_rows, max_length] int32
    chunk_map: list[ChunkSegment]
    max_length: int
    labels: np.ndarray | None = None   # [n_rows, max_length] label ids

    @property
    def n_rows(self) -> int:
        return self.codes.shape[0]

    def valid_lengths(self) -> np.ndarray:
        """Per-row count of non-padding codes (padding is always a suffix)."""
        return (self.codes != PAD_CODE).sum(axis=1).astype(np.int64)


def _assemble(docs, max_length: int, rows_needed: int, placements) -> EncodedBatch:
    """Shared batch builder: ``placements`` yields (doc_idx, start, length, row, col)."""
    has_labels = all(getattr(d, "labels", None) is not None for d in docs)
    codes = np.zeros((rows_needed, max_length), dtype=np.int32)
    labels = np.zeros((rows_needed, max_length), dtype=LABEL_DTYPE) if has_labels else None
    chunk_map = []
    encoded = [encode_chars(d.text) for d in docs]
    for doc_idx, start, length, row, col in placements:
        doc = docs[doc_idx]
        chunk_map.append(
            ChunkSegment(doc.source_id, start, length, row, col)
        )
        if length:
            codes[row, col:col + length] = encoded[doc_idx][start:start + length]
            if labels is not None:
                labels[row, col:col + length] = doc.labels[start:start + length]
    return EncodedBatch(codes=codes, chunk_map=chunk_map, max_length=max_length, labels=labels)


def flatten(docs, max_length: int) -> EncodedBatch:
    """Concatenate all documents and cut into chunks of exactly ``max_length``.

    Only the final chunk carries padding; total non-pad codes equal the total
    input bytes.
    """
    if max_length < 1:
        raise ValueError("max_length must be >= 1")
    docs = list(docs)
    total = sum(len(d.text) for d in docs)
    rows = -(-total // max_length)
    placements = []
    cursor = 0
    for i, doc in enumerate(docs):
        start = 0
        remaining = len(doc.text)
        if remaining == 0:
            row, col = divmod(cursor, max_length)
            placements.append((i, 0, 0, min(row, max(rows - 1, 0)), col))
            continue
        while remaining > 0:
            row, col = divmod(cursor, max_length)
            take = min(remaining, max_length - col)
            placements.append((i, start, take, row, col))
            start += take
            remaining -= take
            cursor += take
    return _assemble(docs, max_length, rows, placements)


def pad_per_sample(docs, max_length: int) -> EncodedBatch:
    """One row per document, zero-padded to ``max_length``.

    Documents longer than ``max_length`` are segmented into additional rows
    rather than truncated; empty documents still occupy one all-pad row.
    """
    if max_length < 1:
        raise ValueError("max_length must be >= 1")
    docs = list(docs)
    placements = []
    row = 0
    for i, doc in enumerate(docs):
        n = len(doc.text)
        if n == 0:
            placements.append((i, 0, 0, row, 0))
            row += 1
            continue
        start = 0
        while start < n:
            take = min(max_length, n - start)
            placements.append((i, start, take, row, 0))
            start += take
            row += 1
    return _assemble(docs, max_length, row, placements)


def unflatten(predictions: np.ndarray, batch: EncodedBatch) -> list[np.ndarray]:
    """Map per-chunk predictions back to per-document arrays, PAD stripped.

    ``predictions`` must be [n_rows, max_length]; returns one array per
    source document in first-seen order, with length equal to the original
    text.
    """
    predictions = np.asarray(predictions)
    if predictions.shape[:2] != batch.codes.shape:
        raise ValueError(
            f"prediction shape {predictions.shape} does not match batch "
            f"{batch.codes.shape}"
        )
    order: list[str] = []
    sizes: dict[str, int] = {}
    for seg in batch.chunk_map:
        if seg.source_id not in sizes:
            order.append(seg.source_id)
            sizes[seg.source_id] = 0
        sizes[seg.source_id] = max(sizes[seg.source_id], seg.source_start + seg.length)
    out = {
        sid: np.zeros((sizes[sid],) + predictions.shape[2:], dtype=predictions.dtype)
        for sid in order
    }
    for seg in batch.chunk_map:
        if seg.length:
            out[seg.source_id][seg.source_start:seg.source_start + seg.length] = \
                predictions[seg.row, seg.col:seg.col + seg.length]
    return [out[sid] for sid in order]


def padded_char_overhead(docs, max_length: int) -> float:
    """Ratio of per-sample-padded codes to flattened codes for a corpus."""
    docs = list(docs)
    flat = flatten(docs, max_length).codes.size
    padded = pad_per_sample(docs, max_length).codes.size
    return padded / flat if flat else float("inf")
