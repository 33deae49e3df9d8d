"""Uniform detector interface over the regex, n-gram CRF, and CNN models.

Every engine labels a list of byte documents and reports how many character
codes its preprocessing touches, which is what the throughput benchmark
accounts against raw input bytes.
"""
from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from . import cnn as cnn_mod
from . import crf as crf_mod
from . import encode as enc
from . import regex_scan
from .checkpoint import Checkpoint, load_checkpoint, save_checkpoint
from .labels import BACKGROUND, LABEL_DTYPE, LABEL_NAMES, LabeledDocument, NUM_LABELS
from .ngram_features import FeatureVocabulary, feature_matrix

ENGINE_NAMES = ("regex", "ngram-crf", "cnn", "cnn-crf")


class EngineError(ValueError):
    pass


def _sharded(docs, workers: int, fn):
    """Apply fn to shards of docs on a thread pool, preserving order."""
    if workers <= 1 or len(docs) <= 1:
        return fn(docs)
    shards = [docs[i::workers] for i in range(workers)]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        results = list(pool.map(fn, shards))
    out = [None] * len(docs)
    for w, shard_out in enumerate(results):
        for j, arr in enumerate(shard_out):
            out[w + j * workers] = arr
    return out


class RegexEngine:
    name = "regex"

    def __init__(self, registry=None, workers: int = 1):
        self.registry = registry or regex_scan.default_registry()
        self.workers = workers

    def label_documents(self, docs: list[bytes]) -> list[np.ndarray]:
        return _sharded(
            docs, self.workers,
            lambda shard: [regex_scan.scan_chars(d, self.registry) for d in shard],
        )

    def processed_codes(self, docs: list[bytes], preprocessing: str = "flatten") -> int:
        return sum(len(d) for d in docs)


class NgramCrfEngine:
    name = "ngram-crf"

    def __init__(self, params: crf_mod.CrfParams, vocab: FeatureVocabulary,
                 window_len: int, max_length: int, workers: int = 1):
        self.params = params
        self.vocab = vocab
        self.window_len = window_len
        self.max_length = max_length
        self.workers = workers

    def _label_shard(self, docs: list[bytes]) -> list[np.ndarray]:
        out = []
        for doc in docs:
            labels = np.zeros(len(doc), dtype=np.int64)
            for lo in range(0, len(doc), self.max_length):
                piece = doc[lo:lo + self.max_length]
                if not piece:
                    continue
                feats = feature_matrix(piece, self.vocab, self.window_len)
                emis = np.asarray(feats @ self.params.feature_weights)
                labels[lo:lo + len(piece)] = crf_mod.viterbi_decode(
                    crf_mod.EmissionSequence(scores=emis), self.params
                )
            out.append(labels)
        return out

    def label_documents(self, docs: list[bytes]) -> list[np.ndarray]:
        return _sharded(docs, self.workers, self._label_shard)

    def processed_codes(self, docs: list[bytes], preprocessing: str = "flatten") -> int:
        return sum(len(d) for d in docs)

    def save(self, path) -> str:
        return save_checkpoint(path, Checkpoint(
            kind="ngram-crf",
            config={"window_len": self.window_len, "max_length": self.max_length},
            tensors={
                "feature_weights": self.params.feature_weights,
                "transitions": self.params.transitions,
                "start_scores": self.params.start_scores,
                "end_scores": self.params.end_scores,
            },
            label_order=list(LABEL_NAMES),
            vocabulary=self.vocab.to_list(),
        ))

    @classmethod
    def load(cls, path, workers: int = 1) -> "NgramCrfEngine":
        ckpt = load_checkpoint(path)
        if ckpt.kind != "ngram-crf":
            raise EngineError(f"checkpoint holds a {ckpt.kind!r} model, not ngram-crf")
        params = crf_mod.CrfParams(
            transitions=ckpt.tensors["transitions"].astype(np.float64),
            start_scores=ckpt.tensors["start_scores"].astype(np.float64),
            end_scores=ckpt.tensors["end_scores"].astype(np.float64),
            feature_weights=ckpt.tensors["feature_weights"].astype(np.float64),
        )
        vocab = FeatureVocabulary.from_list(ckpt.vocabulary or [])
        return cls(params, vocab, int(ckpt.config["window_len"]),
                   int(ckpt.config["max_length"]), workers=workers)


class CnnEngine:
    def __init__(self, params: cnn_mod.CnnParams, preprocessing: str = "flatten",
                 workers: int = 1):
        self.params = params
        self.preprocessing = preprocessing
        self.name = "cnn-crf" if params.config.head == "crf" else "cnn"
        self.workers = workers

    def _docs(self, docs: list[bytes]):
        # Placeholder BACKGROUND labels: predict() only needs text + ids.
        return [
            LabeledDocument(text=d, labels=np.full(len(d), BACKGROUND, dtype=LABEL_DTYPE),
                            source_id=str(i))
            for i, d in enumerate(docs)
        ]

    def label_documents(self, docs: list[bytes]) -> list[np.ndarray]:
        return _sharded(
            docs, self.workers,
            lambda shard: cnn_mod.predict(
                self._docs(shard), self.params, preprocessing=self.preprocessing
            ),
        )

    def processed_codes(self, docs: list[bytes], preprocessing: str | None = None) -> int:
        mode = preprocessing or self.preprocessing
        wrapped = self._docs(docs)
        if mode == "flatten":
            return enc.flatten(wrapped, self.params.config.max_length).codes.size
        return enc.pad_per_sample(wrapped, self.params.config.max_length).codes.size


def train_ngram_crf(
    train_docs,
    config: crf_mod.CrfTrainConfig,
    seed: int = 0,
    vocab: FeatureVocabulary | None = None,
    log=None,
) -> tuple[NgramCrfEngine, crf_mod.CrfTrainReport]:
    """Build the feature vocabulary, extract per-document feature matrices,
    and fit the chain model."""
    from .ngram_features import build_vocabulary

    docs = list(train_docs)
    if not docs:
        raise EngineError("empty training set")
    pieces: list[tuple[bytes, np.ndarray]] = []
    for d in docs:
        for lo in range(0, len(d.text), config.max_length):
            piece = d.text[lo:lo + config.max_length]
            if piece:
                pieces.append((piece, d.labels[lo:lo + len(piece)]))
    if vocab is None:
        vocab = build_vocabulary([p for p, _ in pieces], config.window_len).freeze()
    samples = [
        (feature_matrix(p, vocab, config.window_len), y.astype(np.int64))
        for p, y in pieces
    ]
    params, report = crf_mod.train_crf(samples, config, seed=seed,
                                       num_labels=NUM_LABELS)
    if log:
        log(f"ngram-crf: {len(samples)} sequences, {len(vocab)} features, "
            f"final loss {report.losses[-1]:.4f}")
    engine = NgramCrfEngine(params, vocab, config.window_len, config.max_length)
    return engine, report


def load_engine(name: str, model_path: str | None = None, workers: int = 1,
                preprocessing: str = "flatten"):
    if name == "regex":
        return RegexEngine(workers=workers)
    if model_path is None:
        raise EngineError(f"engine {name!r} requires a model checkpoint")
    if name == "ngram-crf":
        return NgramCrfEngine.load(model_path, workers=workers)
    if name in ("cnn", "cnn-crf"):
        params = cnn_mod.load_params(model_path)
        engine = CnnEngine(params, preprocessing=preprocessing, workers=workers)
        if engine.name != name:
            raise EngineError(
                f"checkpoint holds a {engine.name} model but engine {name} requested"
            )
        return engine
    raise EngineError(f"unknown engine {name!r}; expected one of {ENGINE_NAMES}")
