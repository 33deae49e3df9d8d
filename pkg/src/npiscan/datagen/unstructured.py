"""Unstructured text samples: sentences, flat JSON, and delimited lines.

A sample first draws its format (json / delimited / sentence), then runs the
word loop: draw a background-word budget, then emit words until that many
background words have been placed, where each next word is an entity value
with ``prob_of_npi`` (uniform over the non-background entities) and entity
words are followed by a second one with ``prob_two_npi_together``. Labels are
assembled alongside the text, so every value byte carries exactly its entity
and everything else is BACKGROUND.
"""
from __future__ import annotations

import json

import numpy as np

from ..labels import (
    BACKGROUND,
    GENERATABLE_LABELS,
    LABEL_DTYPE,
    DatasetManifest,
    LabeledDocument,
    config_digest,
    count_entities,
)
from ..rng import derive_rng
from .config import GeneratorConfig
from .entities import generate_entity_value
from .words import WordDistribution, generate_background_word

DELIMITED_SEPARATORS = (",", " ", "\t", ";", "\x00", "\x01")


class _Builder:
    """Accumulates (text piece, label) pairs into a LabeledDocument."""

    def __init__(self):
        self.pieces: list[bytes] = []
        self.labels: list[np.ndarray] = []

    def add(self, piece: str, label: int) -> None:
        raw = piece.encode("utf-8")
        self.pieces.append(raw)
        self.labels.append(np.full(len(raw), label, dtype=LABEL_DTYPE))

    def document(self, source_id: str) -> LabeledDocument:
        text = b"".join(self.pieces)
        labels = (
            np.concatenate(self.labels) if self.labels
            else np.zeros(0, dtype=LABEL_DTYPE)
        )
        return LabeledDocument(text=text, labels=labels, source_id=source_id)


def _draw_entity(rng) -> int:
    return GENERATABLE_LABELS[int(rng.integers(len(GENERATABLE_LABELS)))]


def _word_stream(config: GeneratorConfig, dist: WordDistribution, rng):
    """Yield (token, label) pairs following the background-budget loop."""
    budget = int(rng.integers(config.bg_word_count_min, config.bg_word_count_max + 1))
    placed = 0
    while placed < budget:
        if rng.random() < config.prob_of_npi:
            entity = _draw_entity(rng)
            yield generate_entity_value(entity, rng), entity
            if rng.random() < config.prob_two_npi_together:
                entity = _draw_entity(rng)
                yield generate_entity_value(entity, rng), entity
        else:
            yield generate_background_word(dist, rng), BACKGROUND
            placed += 1


def _sentence_sample(config, dist, rng, b: _Builder) -> None:
    first = True
    for token, label in _word_stream(config, dist, rng):
        if not first:
            b.add(" ", BACKGROUND)
        b.add(token, label)
        first = False


def _delimited_sample(config, dist, rng, b: _Builder) -> None:
    delim = DELIMITED_SEPARATORS[int(rng.integers(len(DELIMITED_SEPARATORS)))]
    first = True
    for token, label in _word_stream(config, dist, rng):
        if not first:
            b.add(delim, BACKGROUND)
        b.add(token, label)
        first = False


def _json_escape(piece: str) -> str:
    # Inner content of a JSON string literal, quotes excluded.
    return json.dumps(piece, ensure_ascii=True)[1:-1]


def _json_sample(config, dist, rng, b: _Builder) -> None:
    budget = int(rng.integers(config.bg_word_count_min, config.bg_word_count_max + 1))
    pairs: list[tuple[str, str, int]] = []
    placed = 0
    while placed < budget:
        key = generate_background_word(dist, rng)
        placed += 1
        if rng.random() < config.prob_of_npi:
            entity = _draw_entity(rng)
            value = generate_entity_value(entity, rng)
        else:
            entity = BACKGROUND
            value = generate_background_word(dist, rng)
            placed += 1
        pairs.append((key, value, entity))
    b.add("{", BACKGROUND)
    for i, (key, value, entity) in enumerate(pairs):
        if i:
            b.add(", ", BACKGROUND)
        b.add(f'"{_json_escape(key)}": "', BACKGROUND)
        b.add(_json_escape(value), entity)
        b.add('"', BACKGROUND)
    b.add("}", BACKGROUND)


def generate_unstructured_sample(
    config: GeneratorConfig,
    dist: WordDistribution,
    rng: np.random.Generator,
    source_id: str = "",
) -> LabeledDocument:
    b = _Builder()
    draw = rng.random()
    if draw < config.prob_json:
        _json_sample(config, dist, rng, b)
    elif draw < config.prob_json + config.prob_structured:
        _delimited_sample(config, dist, rng, b)
    else:
        _sentence_sample(config, dist, rng, b)
    return b.document(source_id)


def generate_unstructured_corpus(
    config: GeneratorConfig,
    dist: WordDistribution | None = None,
    id_prefix: str = "u",
) -> tuple[list[LabeledDocument], DatasetManifest]:
    """Generate ``config.num_samples`` documents plus their manifest.

    Per-sample RNG streams are derived from the root seed, so generation is
    deterministic and parallel-safe across samples.
    """
    config.validate()
    dist = dist or WordDistribution.load()
    docs = [
        generate_unstructured_sample(
            config, dist, derive_rng(config.seed, "unstructured", i),
            source_id=f"{id_prefix}{i:06d}",
        )
        for i in range(config.num_samples)
    ]
    manifest = DatasetManifest(
        kind="unstructured",
        sample_count=len(docs),
        entity_counts=count_entities(docs),
        generator_seed=config.seed,
        config_digest=config_digest(config.to_dict()),
    )
    return docs, manifest
