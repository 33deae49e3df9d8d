"""Label vocabulary, labeled documents, span conversion, and dataset manifests.

Every detector in this package predicts one label per *byte* of input text.
Offsets everywhere refer to the UTF-8 byte sequence of the unescaped text, so
flattening and chunking arithmetic stays exact for any input.
"""
from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field

import numpy as np

# PAD occupies id 0 so that zero-padded label tensors are automatically PAD.
# The remaining 19 labels are fixed alphabetically; the order is recorded in
# every checkpoint so confusion matrices stay comparable across runs.
LABEL_NAMES: tuple[str, ...] = (
    "PAD",
    "ADDRESS",
    "BACKGROUND",
    "BAN",
    "CREDIT_CARD",
    "DATETIME",
    "EMAIL_ADDRESS",
    "FLOAT",
    "HASH_OR_KEY",
    "INTEGER",
    "IPV4",
    "IPV6",
    "MAC_ADDRESS",
    "ORDINAL",
    "PERSON",
    "PHONE_NUMBER",
    "QUANTITY",
    "SSN",
    "URL",
    "UUID",
)

NUM_LABELS = len(LABEL_NAMES)
_NAME_TO_ID = {name: i for i, name in enumerate(LABEL_NAMES)}

PAD = _NAME_TO_ID["PAD"]
BACKGROUND = _NAME_TO_ID["BACKGROUND"]

# Non-sensitive value-like classes; everything else except PAD/BACKGROUND is
# sensitive NPI.
NONSENSITIVE_VALUE_LABELS = frozenset(
    _NAME_TO_ID[n] for n in ("FLOAT", "INTEGER", "ORDINAL", "QUANTITY")
)
SENSITIVE_LABELS = frozenset(
    i for i in range(NUM_LABELS)
    if i not in NONSENSITIVE_VALUE_LABELS and i not in (PAD, BACKGROUND)
)

# All real entity classes (everything a generator can emit a value for).
GENERATABLE_LABELS: tuple[int, ...] = tuple(
    i for i in range(NUM_LABELS) if i not in (PAD, BACKGROUND)
)

LABEL_DTYPE = np.uint8


class ValidationError(ValueError):
    """Raised when labels, spans, or documents violate their contracts."""


def label_id(name: str) -> int:
    try:
        return _NAME_TO_ID[name]
    except KeyError:
        raise ValidationError(f"unknown label name: {name!r}") from None


def label_name(lid: int) -> str:
    if not 0 <= lid < NUM_LABELS:
        raise ValidationError(f"label id out of range: {lid}")
    return LABEL_NAMES[lid]


def is_sensitive(lid: int) -> bool:
    return lid in SENSITIVE_LABELS


@dataclass(frozen=True, order=True)
class SpanAnnotation:
    """Half-open byte span [start, end) carrying a single entity label."""

    start: int
    end: int
    label: int

    def __post_init__(self):
        if not 0 <= self.start < self.end:
            raise ValidationError(f"bad span bounds: {self})")
        if not 0 <= self.label < NUM_LABELS:
            raise ValidationError(f"bad span label: {self}")


@dataclass(frozen=True)
class LabeledDocument:
    """Text plus one label per byte; the universal sample format."""

    text: bytes
    labels: np.ndarray
    source_id: str = ""

    def __post_init__(self):
        labels = np.asarray(self.labels, dtype=LABEL_DTYPE)
        if labels.ndim != 1 or len(labels) != len(self.text):
            raise ValidationError(
                f"document {self.source_id!r}: {len(self.text)} bytes but "
                f"{labels.shape} labels"
            )
        if len(labels) and (labels == PAD).any():
            raise ValidationError(
                f"document {self.source_id!r}: PAD labels are only legal in "
                "encoded batches"
            )
        labels.setflags(write=False)
        object.__setattr__(self, "labels", labels)

    def __len__(self) -> int:
        return len(self.text)

    def spans(self) -> list[SpanAnnotation]:
        return char_labels_to_spans(self.labels)


def spans_to_char_labels(text: bytes, spans: list[SpanAnnotation]) -> np.ndarray:
    """Expand span annotations into a per-byte label array.

    Bytes outside every span are BACKGROUND. Spans must be in-range,
    non-overlapping, and sorted by start.
    """
    n = len(text)
    labels = np.full(n, BACKGROUND, dtype=LABEL_DTYPE)
    prev_end = 0
    prev = None
    for span in spans:
        if span.end > n:
            raise ValidationError(f"span out of range for {n}-byte text: {span}")
        if span.start < prev_end:
            raise ValidationError(
                f"span overlaps or is out of order: {span} after {prev}"
            )
        labels[span.start:span.end] = span.label
        prev_end = span.end
        prev = span
    return labels


def char_labels_to_spans(labels: np.ndarray) -> list[SpanAnnotation]:
    """Collapse a per-byte label array into maximal same-label spans.

    BACKGROUND runs produce no span. PAD must not appear.
    """
    labels = np.asarray(labels)
    if len(labels) == 0:
        return []
    if (labels == PAD).any():
        raise ValidationError("PAD labels cannot be converted to spans")
    boundaries = np.flatnonzero(np.diff(labels)) + 1
    starts = np.concatenate(([0], boundaries))
    ends = np.concatenate((boundaries, [len(labels)]))
    return [
        SpanAnnotation(int(s), int(e), int(labels[s]))
        for s, e in zip(starts, ends)
        if labels[s] != BACKGROUND
    ]


def config_digest(config: dict) -> str:
    """Stable digest of a JSON-serializable config mapping."""
    blob = json.dumps(config, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(blob.encode("utf-8")).hexdigest()


@dataclass
class DatasetManifest:
    """Provenance record written alongside every generated dataset."""

    kind: str
    sample_count: int
    entity_counts: dict[str, int]
    generator_seed: int
    config_digest: str

    KINDS = ("unstructured", "multi_column", "single_column", "columnar_aggregate")

    def __post_init__(self):
        if self.kind not in self.KINDS:
            raise ValidationError(f"unknown manifest kind: {self.kind!r}")

    def to_json(self) -> str:
        return json.dumps(
            {
                "kind": self.kind,
                "sample_count": self.sample_count,
                "entity_counts": dict(sorted(self.entity_counts.items())),
                "generator_seed": self.generator_seed,
                "config_digest": self.config_digest,
            },
            indent=2,
            sort_keys=True,
        )

    @classmethod
    def from_json(cls, blob: str) -> "DatasetManifest":
        raw = json.loads(blob)
        return cls(
            kind=raw["kind"],
            sample_count=int(raw["sample_count"]),
            entity_counts={k: int(v) for k, v in raw["entity_counts"].items()},
            generator_seed=int(raw["generator_seed"]),
            config_digest=raw["config_digest"],
        )


def count_entities(docs) -> dict[str, int]:
    """Count entity occurrences (maximal non-BACKGROUND runs) across documents."""
    counts: dict[str, int] = {}
    for doc in docs:
        for span in char_labels_to_spans(doc.labels):
            name = label_name(span.label)
            counts[name] = counts.get(name, 0) + 1
    return counts


# --- JSON-lines labeled dataset file -------------------------------------
#
# One object per sample: {"id": str, "text": str, "spans": [[start, end,
# "LABEL"], ...]}. Text is escaped per JSON; offsets refer to the UTF-8 byte
# sequence of the unescaped text.

def document_to_record(doc: LabeledDocument) -> dict:
    return {
        "id": doc.source_id,
        "text": doc.text.decode("utf-8"),
        "spans": [[s.start, s.end, label_name(s.label)] for s in doc.spans()],
    }


def record_to_document(record: dict) -> LabeledDocument:
    text = record["text"].encode("utf-8")
    spans = [
        SpanAnnotation(int(s), int(e), label_id(name))
        for s, e, name in record.get("spans", [])
    ]
    return LabeledDocument(
        text=text,
        labels=spans_to_char_labels(text, spans),
        source_id=str(record.get("id", "")),
    )


def write_documents(path, docs) -> None:
    with open(path, "w", encoding="utf-8") as f:
        for doc in docs:
            f.write(json.dumps(document_to_record(doc), ensure_ascii=True))
            f.write("\n")


def read_documents(path) -> list[LabeledDocument]:
    docs = []
    with open(path, "r", encoding="utf-8") as f:
        for line in f:
            line = line.strip()
            if line:
                docs.append(record_to_document(json.loads(line)))
    return docs
