"""Throughput measurement: GB of raw input labeled per hour.

Bytes are counted on the raw input; timing covers preprocessing plus model
inference (what flattening accelerates) and excludes model load and warmup
batches. GB means 2^30 bytes, recorded in the result metadata.
"""
from __future__ import annotations

import json
import time
from dataclasses import asdict, dataclass

GB = float(2 ** 30)


class BenchError(ValueError):
    pass


@dataclass
class BenchResult:
    engine: str
    preprocessing: str
    bytes_processed: int
    wall_seconds: float
    padded_char_overhead: float
    workers: int
    warmup_batches: int
    measured_batches: int
    gb_definition: str = "2**30 bytes"
    error: str | None = None

    @property
    def gb_per_hour(self) -> float:
        if self.wall_seconds <= 0:
            return 0.0
        return (self.bytes_processed / GB) / (self.wall_seconds / 3600.0)

    def to_dict(self) -> dict:
        out = asdict(self)
        out["gb_per_hour"] = self.gb_per_hour
        return out

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)


def read_corpus(path) -> list[bytes]:
    """One document per line, read as raw bytes."""
    with open(path, "rb") as f:
        blob = f.read()
    docs = [line for line in blob.split(b"\n") if line]
    if not docs:
        raise BenchError(f"corpus {path} holds no documents")
    return docs


def run_bench(
    engine,
    corpus_path,
    preprocessing: str = "flatten",
    warmup_batches: int = 1,
    measured_batches: int = 8,
    docs_per_batch: int = 64,
    workers: int = 1,
) -> BenchResult:
    """Label the corpus batch by batch, timing only the measured batches."""
    docs = read_corpus(corpus_path)
    batches = [
        docs[i:i + docs_per_batch] for i in range(0, len(docs), docs_per_batch)
    ]
    if measured_batches < 1:
        raise BenchError("measured_batches must be >= 1")
    warm = [batches[i % len(batches)] for i in range(warmup_batches)]
    measured = [batches[i % len(batches)] for i in range(measured_batches)]
    raw_bytes = sum(len(d) for batch in measured for d in batch)
    overhead = engine.processed_codes(
        [d for batch in measured for d in batch], preprocessing
    ) / max(raw_bytes, 1)
    result = BenchResult(
        engine=engine.name,
        preprocessing=preprocessing,
        bytes_processed=raw_bytes,
        wall_seconds=0.0,
        padded_char_overhead=overhead,
        workers=workers,
        warmup_batches=warmup_batches,
        measured_batches=measured_batches,
    )
    try:
        for batch in warm:
            engine.label_documents(batch)
        t0 = time.perf_counter()
        for batch in measured:
            engine.label_documents(batch)
        result.wall_seconds = time.perf_counter() - t0
    except Exception as exc:  # partial result with error flag
        result.error = f"{type(exc).__name__}: {exc}"
        result.wall_seconds = max(result.wall_seconds, 0.0)
    return result
