"""Column-wise entity prediction.

A column is predicted by subsampling k rows, joining them with a five-byte
\\x01 separator, running a character tagger over the joined sample, and
taking the mode of the character labels with separator and PAD positions
masked out. Ties prefer non-background entities and break by a seeded
uniform draw, so resamples are reproducible.
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from .labels import BACKGROUND, PAD, label_name
from .rng import derive_rng

SEPARATOR = b"\x01" * 5
_ESC = 0x02
_SEP_BYTE = 0x01


class ColumnError(ValueError):
    pass


def escape_cell(raw: bytes) -> bytes:
    """Hide separator bytes inside a cell: 0x01 -> 0x02 0x01."""
    return raw.replace(b"\x01", b"\x02\x01")


def unescape_cell(raw: bytes) -> bytes:
    return raw.replace(b"\x02\x01", b"\x01")


@dataclass
class ColumnSample:
    column_id: str
    rows: list[bytes]
    k: int
    joined: bytes

    def separator_mask(self) -> np.ndarray:
        """True at separator bytes of ``joined``."""
        mask = np.zeros(len(self.joined), dtype=bool)
        pos = 0
        for i, row in enumerate(self.rows):
            esc = escape_cell(row)
            pos += len(esc)
            if i < len(self.rows) - 1:
                mask[pos:pos + len(SEPARATOR)] = True
                pos += len(SEPARATOR)
        return mask


def join_rows(rows: list[bytes]) -> bytes:
    return SEPARATOR.join(escape_cell(r) for r in rows)


def split_joined(joined: bytes) -> list[bytes]:
    return [unescape_cell(part) for part in joined.split(SEPARATOR)]


def build_column_samples(
    columns: list[tuple[str, list[str]]],
    k: int,
    resamples: int,
    rng_seed: int = 0,
) -> list[ColumnSample]:
    """Per column, ``resamples`` independent size-k subsamples.

    Subsampling is without replacement while the column has at least k rows,
    with replacement otherwise. Each (column, resample) pair draws its own
    seeded stream.
    """
    if k < 1:
        raise ColumnError("aggregate size k must be >= 1")
    if resamples < 1:
        raise ColumnError("resamples must be >= 1")
    out = []
    for column_id, values in columns:
        if not values:
            raise ColumnError(f"column {column_id!r} is empty")
        raw = [v.encode("utf-8") if isinstance(v, str) else bytes(v) for v in values]
        for r in range(resamples):
            rng = derive_rng(rng_seed, "column-sample", column_id, r)
            idx = rng.choice(len(raw), size=k, replace=len(raw) < k)
            rows = [raw[i] for i in idx]
            out.append(ColumnSample(
                column_id=column_id, rows=rows, k=k, joined=join_rows(rows)
            ))
    return out


def aggregate_mode(char_labels: np.ndarray, separator_mask: np.ndarray,
                   rng: np.random.Generator) -> int:
    """Mode of the character labels excluding PAD and separator positions.

    Ties drop BACKGROUND when any entity is tied, then pick uniformly from
    the remaining candidates via ``rng``; all included positions empty yields
    BACKGROUND with a warning.
    """
    labels = np.asarray(char_labels)
    separator_mask = np.asarray(separator_mask, dtype=bool)
    if labels.shape != separator_mask.shape:
        raise ColumnError("labels and separator mask shapes differ")
    include = ~separator_mask & (labels != PAD)
    if not include.any():
        warnings.warn("no votable positions in column sample; returning BACKGROUND")
        return BACKGROUND
    counts = np.bincount(labels[include])
    top = int(counts.max())
    tied = np.flatnonzero(counts == top)
    non_bg = tied[tied != BACKGROUND]
    if len(non_bg) == 0:
        return BACKGROUND
    if len(non_bg) == 1:
        return int(non_bg[0])
    return int(non_bg[int(rng.integers(len(non_bg)))])


def predict_columns(
    columns: list[tuple[str, list[str]]],
    tagger,
    k: int,
    resamples: int = 10,
    rng_seed: int = 0,
) -> dict[str, dict]:
    """Column -> {per_resample, majority, confidence}.

    ``tagger`` maps a list of byte strings to per-document label arrays. The
    majority is the most common per-resample prediction; majority ties reuse
    the aggregation tie rule.
    """
    columns = list(columns)
    if not columns:
        raise ColumnError("no columns to predict")
    samples = build_column_samples(columns, k, resamples, rng_seed)
    labeled = tagger([s.joined for s in samples])
    if len(labeled) != len(samples):
        raise ColumnError("tagger returned wrong number of label arrays")
    per_column: dict[str, list[int]] = {cid: [] for cid, _ in columns}
    counters: dict[str, int] = {cid: 0 for cid, _ in columns}
    for sample, labels in zip(samples, labeled):
        if len(labels) != len(sample.joined):
            raise ColumnError(
                f"tagger output length {len(labels)} != sample length "
                f"{len(sample.joined)} for column {sample.column_id!r}"
            )
        tie_rng = derive_rng(rng_seed, "column-tie", sample.column_id,
                             counters[sample.column_id])
        counters[sample.column_id] += 1
        per_column[sample.column_id].append(
            aggregate_mode(labels, sample.separator_mask(), tie_rng)
        )
    out = {}
    for cid, preds in per_column.items():
        counts = np.bincount(preds)
        top = int(counts.max())
        tied = np.flatnonzero(counts == top)
        non_bg = tied[tied != BACKGROUND]
        if len(non_bg) == 0:
            majority = BACKGROUND
        elif len(non_bg) == 1:
            majority = int(non_bg[0])
        else:
            maj_rng = derive_rng(rng_seed, "column-majority", cid)
            majority = int(non_bg[int(maj_rng.integers(len(non_bg)))])
        out[cid] = {
            "per_resample": [label_name(p) for p in preds],
            "majority": label_name(majority),
            "confidence": float(preds.count(majority) / len(preds)),
        }
    return out
