"""Character-level convolutional tagger with softmax or CRF decoding head.

Architecture: embedding lookup -> four conv blocks (1-d conv, activation,
dropout, batch normalization; same-length padding, stride 1) -> two dense
blocks applied position-wise (dense, activation, dropout) -> linear projection
to one logit per label per character. The CRF head drops the dense blocks and
decodes chunk label sequences with Viterbi.

Forward and reverse passes are written out against plain numpy arrays, so
gradients are exact and checkable against finite differences.
"""
from __future__ import annotations

import time
from dataclasses import asdict, dataclass, field, replace

import numpy as np

from . import crf as crf_mod
from . import encode as enc
from .checkpoint import Checkpoint, load_checkpoint, save_checkpoint
from .labels import LABEL_NAMES, NUM_LABELS, PAD
from .rng import derive_rng

BN_EPS = 1e-5
BN_MOMENTUM = 0.9
ADAM_BETA1, ADAM_BETA2, ADAM_EPS = 0.9, 0.999, 1e-8
RMSPROP_RHO, RMSPROP_EPS = 0.9, 1e-8


class CnnError(RuntimeError):
    pass


@dataclass
class CnnConfig:
    head: str = "softmax"                 # "softmax" | "crf"
    epochs: int = 10
    num_conv_layers: int = 4
    num_dense_layers: int = 2
    batch_size: int = 24
    embedding_dim: int = 64
    max_length: int = 3400
    filter_size: int = 13
    dense_layer_size: int = 96
    dropout: float = 0.073
    channels: int = 64
    activation: str = "relu"              # "relu" | "none"
    optimizer: str = "adam"               # "adam" | "rmsprop"
    learning_rate: float = 1e-3

    @classmethod
    def defaults(cls, head: str = "softmax", **overrides) -> "CnnConfig":
        """Tuned defaults per head; the CRF head swaps the dense blocks for
        the chain decoder and trains longer with larger rmsprop batches."""
        if head == "crf":
            base = cls(head="crf", epochs=15, batch_size=128,
                       num_dense_layers=0, optimizer="rmsprop")
        else:
            base = cls()
        return replace(base, **overrides)

    def validate(self) -> None:
        if self.head not in ("softmax", "crf"):
            raise CnnError(f"unknown head {self.head!r}")
        if self.activation not in ("relu", "none"):
            raise CnnError(f"unknown activation {self.activation!r}")
        if self.optimizer not in ("adam", "rmsprop"):
            raise CnnError(f"unknown optimizer {self.optimizer!r}")
        if not 0.0 <= self.dropout < 1.0:
            raise CnnError("dropout must be in [0, 1)")
        for name in ("epochs", "num_conv_layers", "batch_size", "embedding_dim",
                     "max_length", "filter_size", "dense_layer_size", "channels",
                     "learning_rate"):
            if getattr(self, name) <= 0:
                raise CnnError(f"{name} must be positive")
        if self.num_dense_layers < 0:
            raise CnnError("num_dense_layers must be >= 0")

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, raw: dict) -> "CnnConfig":
        cfg = cls(**raw)
        cfg.validate()
        return cfg


@dataclass
class CnnParams:
    tensors: dict[str, np.ndarray]
    config: CnnConfig
    label_order: tuple[str, ...] = LABEL_NAMES

    def astype(self, dtype) -> "CnnParams":
        return CnnParams(
            tensors={k: v.astype(dtype) for k, v in self.tensors.items()},
            config=self.config,
            label_order=self.label_order,
        )

    def crf_params(self) -> crf_mod.CrfParams:
        return crf_mod.CrfParams(
            transitions=self.tensors["crf_transitions"],
            start_scores=self.tensors["crf_start"],
            end_scores=self.tensors["crf_end"],
        )

    def trainable_names(self) -> list[str]:
        return [k for k in self.tensors
                if not (k.endswith("_run_mean") or k.endswith("_run_var"))]


@dataclass
class TrainReport:
    losses: list[float] = field(default_factory=list)
    eval_micro_f1: list[float | None] = field(default_factory=list)
    wall_seconds: float = 0.0
    seed: int = 0

    def to_dict(self) -> dict:
        return asdict(self)


# --- initialization --------------------------------------------------------

def _parse_embedding_file(path, dim: int) -> dict[int, np.ndarray]:
    """Plain-text vectors: one line per char, `0xNN` hex code or a single
    printable character, then ``dim`` floats."""
    rows: dict[int, np.ndarray] = {}
    with open(path, "r", encoding="utf-8") as f:
        for lineno, line in enumerate(f, start=1):
            if not line.strip():
                continue
            parts = line.split()
            if len(parts) != dim + 1:
                raise CnnError(
                    f"embedding file line {lineno}: expected 1 token + {dim} "
                    f"floats, got {len(parts)} fields"
                )
            token = parts[0]
            if token.lower().startswith("0x"):
                try:
                    byte = int(token, 16)
                except ValueError:
                    raise CnnError(f"embedding file line {lineno}: bad code {token!r}") from None
            elif len(token) == 1:
                byte = ord(token)
            else:
                raise CnnError(f"embedding file line {lineno}: bad char token {token!r}")
            if not 0 <= byte < 256:
                raise CnnError(f"embedding file line {lineno}: code out of range")
            try:
                vec = np.array([float(x) for x in parts[1:]], dtype=np.float32)
            except ValueError:
                raise CnnError(f"embedding file line {lineno}: non-numeric vector") from None
            rows[enc.encode_chars(bytes([byte]))[0]] = vec
    return rows


def init_params(config: CnnConfig, seed: int = 0,
                embedding_source: str | None = None) -> CnnParams:
    """Fresh parameters; embeddings come from a vector file when given
    (missing codes fall back to random), otherwise uniform +-0.05. All other
    weights are normal with 1/sqrt(fan_in) scale."""
    config.validate()
    rng = derive_rng(seed, "cnn-init")
    t: dict[str, np.ndarray] = {}
    emb = rng.uniform(-0.05, 0.05, size=(enc.VOCAB_SIZE, config.embedding_dim))
    t["embedding"] = emb.astype(np.float32)
    if embedding_source is not None:
        for code, vec in _parse_embedding_file(embedding_source, config.embedding_dim).items():
            t["embedding"][code] = vec

    def dense_init(fan_in, fan_out):
        return (rng.standard_normal((fan_in, fan_out)) / np.sqrt(fan_in)).astype(np.float32)

    c_in = config.embedding_dim
    for i in range(config.num_conv_layers):
        k = config.filter_size
        w = rng.standard_normal((k, c_in, config.channels)) / np.sqrt(k * c_in)
        t[f"conv{i}_w"] = w.astype(np.float32)
        t[f"conv{i}_b"] = np.zeros(config.channels, dtype=np.float32)
        t[f"conv{i}_gamma"] = np.ones(config.channels, dtype=np.float32)
        t[f"conv{i}_beta"] = np.zeros(config.channels, dtype=np.float32)
        t[f"conv{i}_run_mean"] = np.zeros(config.channels, dtype=np.float32)
        t[f"conv{i}_run_var"] = np.ones(config.channels, dtype=np.float32)
        c_in = config.channels
    for j in range(config.num_dense_layers):
        n_out = config.dense_layer_size
        t[f"dense{j}_w"] = dense_init(c_in, n_out)
        t[f"dense{j}_b"] = np.zeros(n_out, dtype=np.float32)
        c_in = n_out
    t["out_w"] = dense_init(c_in, NUM_LABELS)
    t["out_b"] = np.zeros(NUM_LABELS, dtype=np.float32)
    if config.head == "crf":
        t["crf_transitions"] = np.zeros((NUM_LABELS, NUM_LABELS), dtype=np.float32)
        t["crf_start"] = np.zeros(NUM_LABELS, dtype=np.float32)
        t["crf_end"] = np.zeros(NUM_LABELS, dtype=np.float32)
    return CnnParams(tensors=t, config=config)


# --- layer primitives ------------------------------------------------------

def _conv1d(x: np.ndarray, w: np.ndarray, b: np.ndarray):
    """Same-length 1-d convolution via one matmul per filter tap."""
    n, t_len, _ = x.shape
    k, c_in, c_out = w.shape
    pad_l = (k - 1) // 2
    xp = np.zeros((n, t_len + k - 1, c_in), dtype=x.dtype)
    xp[:, pad_l:pad_l + t_len] = x
    y = np.tile(b.astype(x.dtype), (n, t_len, 1))
    for tap in range(k):
        xk = np.ascontiguousarray(xp[:, tap:tap + t_len]).reshape(n * t_len, c_in)
        y += (xk @ w[tap]).reshape(n, t_len, c_out)
    return y, xp


def _conv1d_backward(xp: np.ndarray, w: np.ndarray, dy: np.ndarray):
    n, t_len, c_out = dy.shape
    k, c_in, _ = w.shape
    pad_l = (k - 1) // 2
    dy2 = dy.reshape(n * t_len, c_out)
    dxp = np.zeros_like(xp)
    dw = np.zeros_like(w)
    for tap in range(k):
        xk = np.ascontiguousarray(xp[:, tap:tap + t_len]).reshape(n * t_len, c_in)
        dw[tap] = xk.T @ dy2
        dxp[:, tap:tap + t_len] += (dy2 @ w[tap].T).reshape(n, t_len, c_in)
    db = dy.sum(axis=(0, 1))
    dx = dxp[:, pad_l:pad_l + t_len]
    return dx, dw, db


def _batchnorm(x, gamma, beta, run_mean, run_var, train: bool):
    if train:
        mean = x.mean(axis=(0, 1))
        var = x.var(axis=(0, 1))
        run_mean *= BN_MOMENTUM
        run_mean += (1.0 - BN_MOMENTUM) * mean.astype(run_mean.dtype)
        run_var *= BN_MOMENTUM
        run_var += (1.0 - BN_MOMENTUM) * var.astype(run_var.dtype)
    else:
        mean = run_mean.astype(x.dtype)
        var = run_var.astype(x.dtype)
    inv_std = 1.0 / np.sqrt(var + BN_EPS)
    xhat = (x - mean) * inv_std
    y = gamma * xhat + beta
    return y, (xhat, inv_std, train)


def _batchnorm_backward(cache, gamma, dy):
    xhat, inv_std, train = cache
    dgamma = (dy * xhat).sum(axis=(0, 1))
    dbeta = dy.sum(axis=(0, 1))
    dxhat = dy * gamma
    if not train:
        return dxhat * inv_std, dgamma, dbeta
    m = xhat.shape[0] * xhat.shape[1]
    dx = (inv_std / m) * (
        m * dxhat
        - dxhat.sum(axis=(0, 1))
        - xhat * (dxhat * xhat).sum(axis=(0, 1))
    )
    return dx, dgamma, dbeta


def _dropout_mask(shape, p: float, rng, dtype):
    u = rng.random(shape, dtype=np.float32) if dtype == np.float32 else rng.random(shape)
    return (u >= p).astype(dtype) / (1.0 - p)


# --- forward / backward ----------------------------------------------------

def _forward_impl(codes, params: CnnParams, train: bool, dropout_rng, keep_cache: bool):
    cfg = params.config
    t = params.tensors
    dtype = t["embedding"].dtype
    codes = np.asarray(codes)
    if codes.max(initial=0) >= enc.VOCAB_SIZE:
        raise CnnError("character codes out of range for the embedding table")
    use_dropout = train and cfg.dropout > 0.0 and dropout_rng is not None
    h = t["embedding"][codes]
    cache = {"codes": codes, "blocks": []}
    for i in range(cfg.num_conv_layers):
        blk = {}
        y, xp = _conv1d(h, t[f"conv{i}_w"], t[f"conv{i}_b"])
        blk["xp"] = xp if keep_cache else None
        if cfg.activation == "relu":
            blk["relu_mask"] = (y > 0) if keep_cache else None
            y = np.maximum(y, 0.0)
        if use_dropout:
            mask = _dropout_mask(y.shape, cfg.dropout, dropout_rng, dtype)
            y = y * mask
            blk["drop_mask"] = mask if keep_cache else None
        y, bn_cache = _batchnorm(
            y, t[f"conv{i}_gamma"], t[f"conv{i}_beta"],
            t[f"conv{i}_run_mean"], t[f"conv{i}_run_var"], train
        )
        blk["bn"] = bn_cache if keep_cache else None
        cache["blocks"].append(("conv", i, blk))
        h = y
    for j in range(cfg.num_dense_layers):
        blk = {"x": h if keep_cache else None}
        y = h @ t[f"dense{j}_w"] + t[f"dense{j}_b"]
        if cfg.activation == "relu":
            blk["relu_mask"] = (y > 0) if keep_cache else None
            y = np.maximum(y, 0.0)
        if use_dropout:
            mask = _dropout_mask(y.shape, cfg.dropout, dropout_rng, dtype)
            y = y * mask
            blk["drop_mask"] = mask if keep_cache else None
        cache["blocks"].append(("dense", j, blk))
        h = y
    cache["head_in"] = h if keep_cache else None
    logits = h @ t["out_w"] + t["out_b"]
    return logits, cache


def forward(batch: enc.EncodedBatch | np.ndarray, params: CnnParams,
            mode: str = "eval", dropout_rng=None) -> np.ndarray:
    """Per-character logits [n_rows, max_length, num_labels].

    Eval mode is pure: dropout off, batchnorm uses running statistics, and no
    state is mutated.
    """
    codes = batch.codes if isinstance(batch, enc.EncodedBatch) else batch
    if mode not in ("train", "eval"):
        raise CnnError(f"unknown mode {mode!r}")
    logits, _ = _forward_impl(codes, params, mode == "train", dropout_rng, False)
    return logits


def _backward_impl(dlogits, params: CnnParams, cache):
    cfg = params.config
    t = params.tensors
    grads: dict[str, np.ndarray] = {}
    h = cache["head_in"]
    n, t_len, _ = dlogits.shape
    grads["out_w"] = h.reshape(n * t_len, -1).T @ dlogits.reshape(n * t_len, -1)
    grads["out_b"] = dlogits.sum(axis=(0, 1))
    dh = dlogits @ t["out_w"].T
    for kind, idx, blk in reversed(cache["blocks"]):
        if kind == "dense":
            if blk.get("drop_mask") is not None:
                dh = dh * blk["drop_mask"]
            if cfg.activation == "relu":
                dh = dh * blk["relu_mask"]
            x = blk["x"]
            grads[f"dense{idx}_w"] = (
                x.reshape(n * t_len, -1).T @ dh.reshape(n * t_len, -1)
            )
            grads[f"dense{idx}_b"] = dh.sum(axis=(0, 1))
            dh = dh @ t[f"dense{idx}_w"].T
        else:
            dh, dgamma, dbeta = _batchnorm_backward(blk["bn"], t[f"conv{idx}_gamma"], dh)
            grads[f"conv{idx}_gamma"] = dgamma
            grads[f"conv{idx}_beta"] = dbeta
            if blk.get("drop_mask") is not None:
                dh = dh * blk["drop_mask"]
            if cfg.activation == "relu":
                dh = dh * blk["relu_mask"]
            dh, dw, db = _conv1d_backward(blk["xp"], t[f"conv{idx}_w"], dh)
            grads[f"conv{idx}_w"] = dw
            grads[f"conv{idx}_b"] = db
    demb = np.zeros_like(t["embedding"])
    np.add.at(demb, cache["codes"], dh)
    grads["embedding"] = demb
    return grads


def loss_and_grads(batch: enc.EncodedBatch, params: CnnParams,
                   dropout_rng=None, bn_frozen: bool = False):
    """Training loss and gradients for every trainable tensor.

    Softmax head: mean masked cross-entropy over non-PAD positions. CRF head:
    chain NLL over the valid prefix of each chunk, normalized by the number
    of valid characters. ``bn_frozen`` keeps batchnorm on running statistics
    (used by gradient checks); dropout activates only when a generator is
    passed.
    """
    if batch.labels is None:
        raise CnnError("batch has no labels")
    cfg = params.config
    train_bn = not bn_frozen
    logits, cache = _forward_impl(batch.codes, params, train_bn, dropout_rng, True)
    labels = batch.labels
    if cfg.head == "softmax":
        mask = labels != PAD
        n_valid = int(mask.sum())
        if n_valid == 0:
            return 0.0, {k: np.zeros_like(v) for k, v in params.tensors.items()
                         if k in params.trainable_names()}
        m = logits.max(axis=-1, keepdims=True)
        shifted = logits - m
        logsumexp = np.log(np.exp(shifted).sum(axis=-1, keepdims=True)) + m
        logp = logits - logsumexp
        gold_logp = np.take_along_axis(logp, labels[..., None].astype(np.int64), axis=-1)[..., 0]
        loss = -(gold_logp * mask).sum() / n_valid
        probs = np.exp(logp)
        dlogits = probs
        np.subtract.at(
            dlogits,
            (np.arange(labels.shape[0])[:, None], np.arange(labels.shape[1])[None, :],
             labels.astype(np.int64)),
            1.0,
        )
        dlogits *= (mask[..., None] / n_valid).astype(logits.dtype)
    else:
        lengths = batch.valid_lengths()
        keep = lengths > 0
        if not keep.any():
            return 0.0, {k: np.zeros_like(v) for k, v in params.tensors.items()
                         if k in params.trainable_names()}
        emis = logits[keep].astype(np.float64)
        lens = lengths[keep]
        gold = labels[keep].astype(np.int64)
        n_valid = int(lens.sum())
        nll, demis, dtrans, dstart, dend = crf_mod._batched_nll_grads(
            emis, lens, gold, params.crf_params()
        )
        loss = float(nll) / n_valid
        dlogits = np.zeros_like(logits)
        dlogits[keep] = (demis / n_valid).astype(logits.dtype)
    if not np.isfinite(loss):
        raise CnnError("non-finite training loss")
    grads = _backward_impl(dlogits, params, cache)
    if cfg.head == "crf":
        crf_dtype = params.tensors["crf_transitions"].dtype
        grads["crf_transitions"] = (dtrans / n_valid).astype(crf_dtype)
        grads["crf_start"] = (dstart / n_valid).astype(crf_dtype)
        grads["crf_end"] = (dend / n_valid).astype(crf_dtype)
    return float(loss), grads


# --- optimizers ------------------------------------------------------------

class _Optimizer:
    def __init__(self, lr: float):
        self.lr = lr
        self.state: dict[str, tuple] = {}
        self.t = 0

    def step(self, tensors: dict[str, np.ndarray], grads: dict[str, np.ndarray]):
        raise NotImplementedError


class Adam(_Optimizer):
    def step(self, tensors, grads):
        self.t += 1
        for name, g in grads.items():
            m, v = self.state.get(name, (np.zeros_like(g, dtype=np.float64),) * 2)
            m = ADAM_BETA1 * m + (1 - ADAM_BETA1) * g
            v = ADAM_BETA2 * v + (1 - ADAM_BETA2) * g * g
            self.state[name] = (m, v)
            mhat = m / (1 - ADAM_BETA1 ** self.t)
            vhat = v / (1 - ADAM_BETA2 ** self.t)
            tensors[name] -= (self.lr * mhat / (np.sqrt(vhat) + ADAM_EPS)).astype(
                tensors[name].dtype
            )


class RMSprop(_Optimizer):
    def step(self, tensors, grads):
        self.t += 1
        for name, g in grads.items():
            (v,) = self.state.get(name, (np.zeros_like(g, dtype=np.float64),))
            v = RMSPROP_RHO * v + (1 - RMSPROP_RHO) * g * g
            self.state[name] = (v,)
            tensors[name] -= (self.lr * g / (np.sqrt(v) + RMSPROP_EPS)).astype(
                tensors[name].dtype
            )


def _make_optimizer(config: CnnConfig) -> _Optimizer:
    cls = {"adam": Adam, "rmsprop": RMSprop}[config.optimizer]
    return cls(config.learning_rate)


# --- training / inference --------------------------------------------------

def train(
    train_docs,
    config: CnnConfig,
    seed: int = 0,
    eval_docs=None,
    checkpoint_path=None,
    embedding_source: str | None = None,
    log=None,
) -> tuple[CnnParams, TrainReport]:
    """Shuffled minibatch training over flattened chunks."""
    config.validate()
    train_docs = list(train_docs)
    if not train_docs:
        raise CnnError("empty training set")
    params = init_params(config, seed, embedding_source)
    batch = enc.flatten(train_docs, config.max_length)
    if batch.n_rows == 0:
        raise CnnError("training set holds no characters")
    optimizer = _make_optimizer(config)
    report = TrainReport(seed=seed)
    t0 = time.perf_counter()
    order = np.arange(batch.n_rows)
    initial_loss = None
    for epoch in range(config.epochs):
        shuffle_rng = derive_rng(seed, "cnn-shuffle", epoch)
        dropout_rng = derive_rng(seed, "cnn-dropout", epoch)
        shuffle_rng.shuffle(order)
        total, count = 0.0, 0
        for lo in range(0, len(order), config.batch_size):
            rows = order[lo:lo + config.batch_size]
            sub = enc.EncodedBatch(
                codes=batch.codes[rows],
                chunk_map=[],
                max_length=config.max_length,
                labels=batch.labels[rows],
            )
            loss, grads = loss_and_grads(sub, params, dropout_rng=dropout_rng)
            optimizer.step(params.tensors, grads)
            total += loss
            count += 1
        epoch_loss = total / max(count, 1)
        report.losses.append(epoch_loss)
        if initial_loss is None:
            initial_loss = epoch_loss
        if not np.isfinite(epoch_loss) or epoch_loss > 10.0 * max(initial_loss, 1e-12):
            raise CnnError(
                f"training diverged at epoch {epoch}: loss {epoch_loss:.4g} "
                f"vs initial {initial_loss:.4g}"
            )
        if eval_docs:
            from .metrics import score
            preds = predict(eval_docs, params)
            rep = score([d.labels for d in eval_docs], preds,
                        ids=[d.source_id for d in eval_docs])
            report.eval_micro_f1.append(rep.micro.f1)
        else:
            report.eval_micro_f1.append(None)
        if log:
            log(f"epoch {epoch + 1}/{config.epochs}: loss {epoch_loss:.4f}"
                + (f", eval micro-F1 {report.eval_micro_f1[-1]:.4f}"
                   if report.eval_micro_f1[-1] is not None else ""))
    report.wall_seconds = time.perf_counter() - t0
    if checkpoint_path is not None:
        save_params(checkpoint_path, params)
    return params, report


def predict(docs, params: CnnParams, rows_per_batch: int = 64,
            preprocessing: str = "flatten") -> list[np.ndarray]:
    """Label arrays per document: encode, forward in eval mode, decode,
    map back through the chunk map."""
    docs = list(docs)
    if not docs:
        return []
    cfg = params.config
    if preprocessing == "flatten":
        batch = enc.flatten(docs, cfg.max_length)
    elif preprocessing == "padded":
        batch = enc.pad_per_sample(docs, cfg.max_length)
    else:
        raise CnnError(f"unknown preprocessing mode {preprocessing!r}")
    if batch.n_rows == 0:
        return [np.zeros(0, dtype=np.int64) for _ in docs]
    pred = np.zeros(batch.codes.shape, dtype=np.int64)
    for lo in range(0, batch.n_rows, rows_per_batch):
        codes = batch.codes[lo:lo + rows_per_batch]
        logits = forward(codes, params, mode="eval")
        if cfg.head == "softmax":
            pred[lo:lo + rows_per_batch] = logits.argmax(axis=-1)
        else:
            lengths = (codes != enc.PAD_CODE).sum(axis=1)
            keep = lengths > 0
            if keep.any():
                paths = crf_mod.viterbi_decode_batch(
                    logits[keep].astype(np.float64), lengths[keep],
                    params.crf_params()
                )
                out_rows = np.flatnonzero(keep)
                for row, path in zip(out_rows, paths):
                    pred[lo + row, :len(path)] = path
    return enc.unflatten(pred, batch)


# --- persistence -----------------------------------------------------------

def save_params(path, params: CnnParams) -> str:
    kind = "cnn-crf" if params.config.head == "crf" else "cnn"
    return save_checkpoint(path, Checkpoint(
        kind=kind,
        config=params.config.to_dict(),
        tensors=params.tensors,
        label_order=list(params.label_order),
    ))


def load_params(path) -> CnnParams:
    ckpt = load_checkpoint(path)
    if ckpt.kind not in ("cnn", "cnn-crf"):
        raise CnnError(f"checkpoint holds a {ckpt.kind!r} model, not a cnn")
    config = CnnConfig.from_dict(ckpt.config)
    return CnnParams(
        tensors=ckpt.tensors,
        config=config,
        label_order=tuple(ckpt.label_order),
    )
