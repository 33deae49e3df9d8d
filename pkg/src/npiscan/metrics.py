"""Per-character accuracy scoring.

Precision/recall/F1 per entity plus micro and macro aggregates over
characters, excluding PAD and BACKGROUND from the scored entity set: a
BACKGROUND gold character predicted SSN is an SSN false positive, an SSN gold
character predicted BACKGROUND an SSN false negative. The sensitive-only view
additionally drops FLOAT/INTEGER/ORDINAL/QUANTITY from the entity set.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .labels import (
    BACKGROUND,
    LABEL_NAMES,
    NONSENSITIVE_VALUE_LABELS,
    NUM_LABELS,
    PAD,
    label_name,
)


class ScoreError(ValueError):
    pass


@dataclass
class ConfusionMatrix:
    """Character counts indexed [gold, predicted]."""

    counts: np.ndarray = field(
        default_factory=lambda: np.zeros((NUM_LABELS, NUM_LABELS), dtype=np.int64)
    )

    def add(self, gold: np.ndarray, pred: np.ndarray) -> None:
        flat = np.asarray(gold, dtype=np.int64) * NUM_LABELS + np.asarray(pred, dtype=np.int64)
        self.counts += np.bincount(flat, minlength=NUM_LABELS * NUM_LABELS).reshape(
            NUM_LABELS, NUM_LABELS
        )

    def merge(self, other: "ConfusionMatrix") -> "ConfusionMatrix":
        return ConfusionMatrix(counts=self.counts + other.counts)

    @property
    def total(self) -> int:
        return int(self.counts.sum())


@dataclass
class EntityScore:
    precision: float
    recall: float
    f1: float
    support: int
    tp: int
    fp: int
    fn: int


@dataclass
class AggregateScore:
    precision: float
    recall: float
    f1: float


@dataclass
class EvalReport:
    per_entity: dict[str, EntityScore]
    micro: AggregateScore
    macro: AggregateScore
    confusion: ConfusionMatrix
    include_nonsensitive: bool


def _f1(p: float, r: float) -> float:
    return 2 * p * r / (p + r) if (p + r) > 0 else 0.0


def _ratio(num: int, den: int) -> float:
    return num / den if den else 0.0


def included_entities(include_nonsensitive: bool) -> list[int]:
    excluded = {PAD, BACKGROUND}
    if not include_nonsensitive:
        excluded |= NONSENSITIVE_VALUE_LABELS
    return [i for i in range(NUM_LABELS) if i not in excluded]


def report_from_confusion(conf: ConfusionMatrix,
                          include_nonsensitive: bool = True) -> EvalReport:
    counts = conf.counts
    entities = included_entities(include_nonsensitive)
    per_entity: dict[str, EntityScore] = {}
    tp_sum = fp_sum = fn_sum = 0
    f1s, ps, rs = [], [], []
    for e in entities:
        tp = int(counts[e, e])
        fp = int(counts[:, e].sum() - counts[e, e])
        fn = int(counts[e, :].sum() - counts[e, e])
        support = int(counts[e, :].sum())
        p, r = _ratio(tp, tp + fp), _ratio(tp, tp + fn)
        per_entity[label_name(e)] = EntityScore(
            precision=p, recall=r, f1=_f1(p, r), support=support,
            tp=tp, fp=fp, fn=fn,
        )
        tp_sum += tp
        fp_sum += fp
        fn_sum += fn
        if support > 0:
            ps.append(p)
            rs.append(r)
            f1s.append(_f1(p, r))
    micro_p, micro_r = _ratio(tp_sum, tp_sum + fp_sum), _ratio(tp_sum, tp_sum + fn_sum)
    micro = AggregateScore(micro_p, micro_r, _f1(micro_p, micro_r))
    macro = AggregateScore(
        float(np.mean(ps)) if ps else 0.0,
        float(np.mean(rs)) if rs else 0.0,
        float(np.mean(f1s)) if f1s else 0.0,
    )
    return EvalReport(per_entity=per_entity, micro=micro, macro=macro,
                      confusion=conf, include_nonsensitive=include_nonsensitive)


def score(gold, pred, ids=None, include_nonsensitive: bool = True) -> EvalReport:
    """Compare per-document label arrays character by character."""
    gold, pred = list(gold), list(pred)
    if len(gold) != len(pred):
        raise ScoreError(f"{len(gold)} gold documents vs {len(pred)} predictions")
    conf = ConfusionMatrix()
    for i, (g, p) in enumerate(zip(gold, pred)):
        g, p = np.asarray(g), np.asarray(p)
        if g.shape != p.shape:
            doc = ids[i] if ids else f"#{i}"
            raise ScoreError(
                f"document {doc}: gold length {g.shape} != prediction {p.shape}"
            )
        if len(g):
            conf.add(g, p)
    return report_from_confusion(conf, include_nonsensitive)


_SCHEMA_VERSION = 1


def render_report(report: EvalReport, fmt: str = "text") -> bytes:
    """Stable text table or versioned JSON."""
    names = [n for n in LABEL_NAMES if n in report.per_entity]
    if fmt == "json":
        payload = {
            "schema_version": _SCHEMA_VERSION,
            "include_nonsensitive": report.include_nonsensitive,
            "per_entity": {
                n: {
                    "precision": report.per_entity[n].precision,
                    "recall": report.per_entity[n].recall,
                    "f1": report.per_entity[n].f1,
                    "support": report.per_entity[n].support,
                }
                for n in names
            },
            "micro": vars(report.micro),
            "macro": vars(report.macro),
        }
        return (json.dumps(payload, indent=2, sort_keys=True) + "\n").encode("utf-8")
    if fmt != "text":
        raise ScoreError(f"unknown report format {fmt!r}")
    width = max([len(n) for n in names] + [7])
    lines = [f"{'entity':<{width}}  {'prec':>7}  {'recall':>7}  {'f1':>7}  {'support':>9}"]
    for n in names:
        s = report.per_entity[n]
        lines.append(
            f"{n:<{width}}  {s.precision:>7.4f}  {s.recall:>7.4f}  "
            f"{s.f1:>7.4f}  {s.support:>9d}"
        )
    for tag, agg in (("micro", report.micro), ("macro", report.macro)):
        lines.append(
            f"{tag:<{width}}  {agg.precision:>7.4f}  {agg.recall:>7.4f}  "
            f"{agg.f1:>7.4f}  {'':>9}"
        )
    return ("\n".join(lines) + "\n").encode("utf-8")


def report_to_dict(report: EvalReport) -> dict:
    return json.loads(render_report(report, "json").decode("utf-8"))
