"""Synthetic financial-NPI data generation and character-level detectors."""

__version__ = "0.1.0"

from . import (  # noqa: F401
    bench,
    checkpoint,
    cnn,
    columns,
    crf,
    datagen,
    encode,
    engines,
    labels,
    metrics,
    ngram_features,
    regex_scan,
)
