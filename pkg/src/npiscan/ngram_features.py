"""Handcrafted per-character features with neighbor windows.

Each position emits four base features for every in-window offset — the
lowercased character identity, is-upper, is-digit, is-alnum — tagged with the
offset, plus explicit BOS/EOS markers for offsets that fall outside the text.
Features are binary indicators; their weights live in
``CrfParams.feature_weights``.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

_N_BASE = 4


def _base_features(byte: int) -> tuple[str, str, str, str]:
    ch = chr(byte)
    return (
        f"lower={ch.lower()}",
        f"isupper={int(ch.isupper())}",
        f"isdigit={int(ch.isdigit())}",
        f"isalnum={int(ch.isalnum())}",
    )


def feature_strings_at(text: bytes, pos: int, window_len: int) -> list[str]:
    feats = []
    for o in range(-window_len, window_len + 1):
        j = pos + o
        if j < 0:
            feats.append(f"BOS@{o}")
        elif j >= len(text):
            feats.append(f"EOS@{o}")
        else:
            feats.extend(f"{base}@{o}" for base in _base_features(text[j]))
    return feats


def extract_features(text: bytes, window_len: int = 4) -> list[list[str]]:
    """Per-position feature string sets for a document."""
    if window_len < 0:
        raise ValueError("window_len must be >= 0")
    return [feature_strings_at(text, t, window_len) for t in range(len(text))]


@dataclass
class FeatureVocabulary:
    """Dense feature-string -> id map; frozen vocabularies drop unseen features."""

    feature_to_id: dict[str, int] = field(default_factory=dict)
    frozen: bool = False
    _tables: dict[int, tuple] = field(default_factory=dict, repr=False)

    def __len__(self) -> int:
        return len(self.feature_to_id)

    def add(self, feature: str) -> int | None:
        fid = self.feature_to_id.get(feature)
        if fid is None:
            if self.frozen:
                return None
            fid = len(self.feature_to_id)
            self.feature_to_id[feature] = fid
            self._tables.clear()
        return fid

    def freeze(self) -> "FeatureVocabulary":
        self.frozen = True
        return self

    def to_list(self) -> list[str]:
        items = sorted(self.feature_to_id.items(), key=lambda kv: kv[1])
        return [k for k, _ in items]

    @classmethod
    def from_list(cls, features: list[str], frozen: bool = True) -> "FeatureVocabulary":
        return cls(feature_to_id={f: i for i, f in enumerate(features)}, frozen=frozen)

    def _lookup_tables(self, window_len: int):
        """Cached (offset, byte) -> feature-id tables for fast extraction."""
        key = window_len
        if key not in self._tables:
            offsets = list(range(-window_len, window_len + 1))
            base_ids = np.full((len(offsets), 256, _N_BASE), -1, dtype=np.int64)
            bos_ids = np.full(len(offsets), -1, dtype=np.int64)
            eos_ids = np.full(len(offsets), -1, dtype=np.int64)
            for oi, o in enumerate(offsets):
                bos_ids[oi] = self.feature_to_id.get(f"BOS@{o}", -1)
                eos_ids[oi] = self.feature_to_id.get(f"EOS@{o}", -1)
                for b in range(256):
                    for k, base in enumerate(_base_features(b)):
                        base_ids[oi, b, k] = self.feature_to_id.get(f"{base}@{o}", -1)
            self._tables[key] = (np.array(offsets), base_ids, bos_ids, eos_ids)
        return self._tables[key]


def build_vocabulary(texts, window_len: int = 4) -> FeatureVocabulary:
    """Vocabulary over a corpus, ids assigned in first-seen order.

    For speed, every (byte present in a text, offset) combination is admitted,
    a small superset of what ``extract_features`` can actually emit near text
    boundaries; never-active features keep zero weight. The id *set* is
    determined by the corpus contents, not its order.
    """
    vocab = FeatureVocabulary()
    for text in texts:
        if not len(text):
            continue
        seen_bytes = sorted(set(text))
        for o in range(-window_len, window_len + 1):
            for b in seen_bytes:
                for base in _base_features(b):
                    vocab.add(f"{base}@{o}")
        for o in range(-window_len, 0):
            vocab.add(f"BOS@{o}")
        for o in range(1, window_len + 1):
            vocab.add(f"EOS@{o}")
    return vocab


def feature_matrix(text: bytes, vocab: FeatureVocabulary,
                   window_len: int = 4) -> sp.csr_matrix:
    """Sparse [T, F] indicator matrix of active features per position."""
    T = len(text)
    F = len(vocab)
    if T == 0:
        return sp.csr_matrix((0, F))
    offsets, base_ids, bos_ids, eos_ids = vocab._lookup_tables(window_len)
    codes = np.frombuffer(text, dtype=np.uint8).astype(np.int64)
    n_off = len(offsets)
    ids = np.full((T, n_off * _N_BASE + n_off), -1, dtype=np.int64)
    pos = np.arange(T)
    for oi, o in enumerate(offsets):
        j = pos + o
        inb = (j >= 0) & (j < T)
        block = ids[:, oi * _N_BASE:(oi + 1) * _N_BASE]
        block[inb] = base_ids[oi, codes[j[inb]]]
        marker = ids[:, n_off * _N_BASE + oi]
        marker[j < 0] = bos_ids[oi]
        marker[j >= T] = eos_ids[oi]
    valid = ids >= 0
    counts = valid.sum(axis=1)
    indptr = np.concatenate(([0], np.cumsum(counts)))
    indices = ids[valid]
    data = np.ones(len(indices), dtype=np.float64)
    return sp.csr_matrix((data, indices, indptr), shape=(T, F))
