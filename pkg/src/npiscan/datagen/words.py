"""Background-word sampling.

Background tokens are drawn from a bundled (token, part-of-speech class,
count) frequency list: first a class is picked proportionally to its total
count, then a word within the class by relative frequency. One to four words
are joined by a random delimiter, and each word is capitalized per the fixed
distribution.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from importlib import resources

import numpy as np

CAPITALIZATION_DIST = {"lower": 0.59, "upper": 0.20, "title": 0.20, "random": 0.01}
JOIN_COUNT_DIST = (0.9, 0.065, 0.025, 0.01)
JOIN_DELIMITERS = ("", "_", "-", ".")


@dataclass
class WordDistribution:
    words: list[tuple[str, str, float]]
    capitalization_dist: dict[str, float] = field(
        default_factory=lambda: dict(CAPITALIZATION_DIST)
    )
    join_count_dist: tuple[float, ...] = JOIN_COUNT_DIST
    join_delimiters: tuple[str, ...] = JOIN_DELIMITERS

    def __post_init__(self):
        if not self.words:
            raise ValueError("word list must not be empty")
        if any(freq <= 0 for _, _, freq in self.words):
            raise ValueError("word frequencies must be positive")
        for name, total in (
            ("capitalization_dist", sum(self.capitalization_dist.values())),
            ("join_count_dist", sum(self.join_count_dist)),
        ):
            if abs(total - 1.0) > 1e-9:
                raise ValueError(f"{name} must sum to 1, got {total}")
        self._index()

    def _index(self):
        classes: dict[str, list[tuple[str, float]]] = {}
        for token, cls, freq in self.words:
            classes.setdefault(cls, []).append((token, freq))
        self._class_names = sorted(classes)
        class_totals = np.array(
            [sum(f for _, f in classes[c]) for c in self._class_names]
        )
        self._class_cdf = np.cumsum(class_totals / class_totals.sum())
        self._class_tokens = {}
        self._class_cdfs = {}
        for c in self._class_names:
            toks, freqs = zip(*classes[c])
            freqs = np.array(freqs, dtype=np.float64)
            self._class_tokens[c] = toks
            self._class_cdfs[c] = np.cumsum(freqs / freqs.sum())
        caps, probs = zip(*sorted(self.capitalization_dist.items()))
        self._cap_names = caps
        self._cap_cdf = np.cumsum(probs)
        self._join_cdf = np.cumsum(self.join_count_dist)

    @classmethod
    def load(cls, path: str | None = None) -> "WordDistribution":
        """Load from a tab-separated (token, class, count) file; bundled default."""
        if path is None:
            text = resources.files("npiscan.data").joinpath("words.tsv").read_text()
        else:
            with open(path, "r", encoding="utf-8") as f:
                text = f.read()
        words = []
        for line in text.splitlines():
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            token, pos_class, count = line.split("\t")
            words.append((token, pos_class, float(count)))
        return cls(words=words)

    def sample_word(self, rng: np.random.Generator) -> str:
        cls = self._class_names[int(np.searchsorted(self._class_cdf, rng.random()))]
        toks = self._class_tokens[cls]
        return toks[int(np.searchsorted(self._class_cdfs[cls], rng.random()))]


def _capitalize(word: str, style: str, rng: np.random.Generator) -> str:
    if style == "lower":
        return word.lower()
    if style == "upper":
        return word.upper()
    if style == "title":
        return word.title()
    return "".join(
        c.upper() if rng.random() < 0.5 else c.lower() for c in word
    )


def generate_background_word(dist: WordDistribution, rng: np.random.Generator) -> str:
    """One background token: 1-4 corpus words joined by a random delimiter."""
    n_join = int(np.searchsorted(dist._join_cdf, rng.random())) + 1
    delim = dist.join_delimiters[int(rng.integers(len(dist.join_delimiters)))]
    parts = []
    for _ in range(n_join):
        style = dist._cap_names[int(np.searchsorted(dist._cap_cdf, rng.random()))]
        parts.append(_capitalize(dist.sample_word(rng), style, rng))
    return delim.join(parts)
