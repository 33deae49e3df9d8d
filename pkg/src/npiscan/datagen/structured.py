"""Structured (tabular) synthetic data and the columnar training set.

Multi-column tables draw a BACKGROUND/entity split per column (50% background,
otherwise uniform over the remaining entities) with one fixed format per
column; single-column tables draw one entity uniformly over all classes. For
the character taggers a table row is rendered as an RFC-4180 CSV line with
exact per-byte labels.
"""
from __future__ import annotations

import csv
import json
from dataclasses import dataclass

import numpy as np

from ..labels import (
    BACKGROUND,
    GENERATABLE_LABELS,
    LABEL_DTYPE,
    NUM_LABELS,
    PAD,
    DatasetManifest,
    LabeledDocument,
    config_digest,
    label_name,
)
from ..rng import derive_rng
from .entities import generate_entity_value, pick_format
from .words import WordDistribution, generate_background_word

# Uniform draw space for single-column datasets: every class except PAD.
ALL_COLUMN_LABELS: tuple[int, ...] = tuple(
    i for i in range(NUM_LABELS) if i != PAD
)


@dataclass
class Table:
    column_names: list[str]
    rows: list[list[str]]
    gold_labels: list[int]

    @property
    def n_cols(self) -> int:
        return len(self.column_names)

    def column(self, idx: int) -> list[str]:
        return [row[idx] for row in self.rows]


def _cell_value(label: int, fmt: str | None, dist: WordDistribution, rng) -> str:
    if label == BACKGROUND:
        return generate_background_word(dist, rng)
    return generate_entity_value(label, rng, fmt)


def generate_multicolumn_dataset(
    n_rows: int,
    n_cols: int,
    rng: np.random.Generator,
    dist: WordDistribution | None = None,
) -> Table:
    """Random-schema table: each column background with p=0.5, else uniform
    over the other entities; all cells in a column share entity and format."""
    if not 1 <= n_cols <= 20:
        raise ValueError("n_cols must be in [1, 20]")
    dist = dist or WordDistribution.load()
    gold, fmts = [], []
    for _ in range(n_cols):
        if rng.random() < 0.5:
            gold.append(BACKGROUND)
            fmts.append(None)
        else:
            label = GENERATABLE_LABELS[int(rng.integers(len(GENERATABLE_LABELS)))]
            gold.append(label)
            fmts.append(pick_format(label, rng))
    names = [f"col_{label_name(g).lower()}_{i}" for i, g in enumerate(gold)]
    rows = [
        [_cell_value(g, f, dist, rng) for g, f in zip(gold, fmts)]
        for _ in range(n_rows)
    ]
    return Table(column_names=names, rows=rows, gold_labels=gold)


def generate_singlecolumn_dataset(
    n_rows: int,
    rng: np.random.Generator,
    dist: WordDistribution | None = None,
) -> Table:
    """One column; entity uniform over all classes, one format throughout."""
    dist = dist or WordDistribution.load()
    label = ALL_COLUMN_LABELS[int(rng.integers(len(ALL_COLUMN_LABELS)))]
    fmt = pick_format(label, rng) if label != BACKGROUND else None
    rows = [[_cell_value(label, fmt, dist, rng)] for _ in range(n_rows)]
    return Table(
        column_names=[f"col_{label_name(label).lower()}_0"],
        rows=rows,
        gold_labels=[label],
    )


def table_row_to_document(row: list[str], gold: list[int],
                          source_id: str) -> LabeledDocument:
    """Render one table row as a labeled CSV line.

    Quoting bytes added around a cell are BACKGROUND; escaped quote doubling
    inside a cell keeps the cell's label (the serialized bytes represent cell
    content).
    """
    pieces: list[bytes] = []
    labels: list[np.ndarray] = []

    def add(piece: str, label: int) -> None:
        raw = piece.encode("utf-8")
        pieces.append(raw)
        labels.append(np.full(len(raw), label, dtype=LABEL_DTYPE))

    for i, (value, label) in enumerate(zip(row, gold)):
        if i:
            add(",", BACKGROUND)
        if any(c in value for c in ',"\r\n'):
            add('"', BACKGROUND)
            add(value.replace('"', '""'), label)
            add('"', BACKGROUND)
        else:
            add(value, label)
    return LabeledDocument(
        text=b"".join(pieces),
        labels=np.concatenate(labels) if labels else np.zeros(0, dtype=LABEL_DTYPE),
        source_id=source_id,
    )


def table_to_documents(table: Table, id_prefix: str) -> list[LabeledDocument]:
    return [
        table_row_to_document(row, table.gold_labels, f"{id_prefix}r{i:05d}")
        for i, row in enumerate(table.rows)
    ]


def table_manifest(table: Table, kind: str, seed: int, config: dict) -> DatasetManifest:
    counts: dict[str, int] = {}
    for g in table.gold_labels:
        if g != BACKGROUND:
            name = label_name(g)
            counts[name] = counts.get(name, 0) + len(table.rows)
    return DatasetManifest(
        kind=kind,
        sample_count=len(table.rows),
        entity_counts=counts,
        generator_seed=seed,
        config_digest=config_digest(config),
    )


def write_table_csv(path, table: Table) -> None:
    with open(path, "w", encoding="utf-8", newline="") as f:
        writer = csv.writer(f, quoting=csv.QUOTE_MINIMAL, lineterminator="\n")
        writer.writerow(table.column_names)
        writer.writerows(table.rows)


def read_table_csv(path) -> Table:
    with open(path, "r", encoding="utf-8", newline="") as f:
        reader = csv.reader(f)
        rows = list(reader)
    if not rows:
        raise ValueError(f"empty CSV table: {path}")
    return Table(column_names=rows[0], rows=rows[1:], gold_labels=[])


def write_table_jsonl(path, table: Table) -> None:
    with open(path, "w", encoding="utf-8") as f:
        for row in table.rows:
            f.write(json.dumps(dict(zip(table.column_names, row)), ensure_ascii=True))
            f.write("\n")


def read_table_jsonl(path) -> Table:
    records = []
    with open(path, "r", encoding="utf-8") as f:
        for line in f:
            line = line.strip()
            if line:
                records.append(json.loads(line))
    if not records:
        raise ValueError(f"empty JSON-lines table: {path}")
    names = list(records[0].keys())
    rows = [[str(rec.get(n, "")) for n in names] for rec in records]
    return Table(column_names=names, rows=rows, gold_labels=[])


def build_columnar_training_set(
    total_values: int = 75000,
    aggregate_size: int = 1,
    rng: np.random.Generator | None = None,
    seed: int = 0,
    dist: WordDistribution | None = None,
) -> list[tuple[list[str], int]]:
    """Aggregated (values, entity) pairs for column-level training.

    ``total_values`` values are split evenly across all entity classes
    (including BACKGROUND), generated, and grouped into aggregates of
    ``aggregate_size`` consecutive values; a ragged tail keeps its short
    group.
    """
    if not 1 <= aggregate_size <= 10:
        raise ValueError("aggregate_size must be in [1, 10]")
    rng = rng or derive_rng(seed, "columnar-train")
    dist = dist or WordDistribution.load()
    per_entity = total_values // len(ALL_COLUMN_LABELS)
    extra = total_values - per_entity * len(ALL_COLUMN_LABELS)
    out: list[tuple[list[str], int]] = []
    for idx, label in enumerate(ALL_COLUMN_LABELS):
        n = per_entity + (1 if idx < extra else 0)
        values = [
            _cell_value(label, None if label == BACKGROUND else pick_format(label, rng), dist, rng)
            for _ in range(n)
        ]
        for lo in range(0, n, aggregate_size):
            group = values[lo:lo + aggregate_size]
            if group:
                out.append((group, label))
    return out
