"""Linear-chain CRF over character label sequences.

Provides the exact log-partition, marginals, NLL gradient, and Viterbi
decoding used both by the standalone n-gram feature model and as the tag
decoder head of the convolutional tagger. All internal arithmetic runs in
float64; scores are combined as

    score(y) = start[y_0] + sum_t emissions[t, y_t]
             + sum_t transitions[y_{t-1}, y_t] + end[y_{T-1}].
"""
from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from .labels import NUM_LABELS, PAD


class CrfError(ValueError):
    pass


@dataclass
class CrfParams:
    transitions: np.ndarray                 # [L, L]
    start_scores: np.ndarray                # [L]
    end_scores: np.ndarray                  # [L]
    feature_weights: np.ndarray | None = None   # [F, L]; n-gram mode only

    @classmethod
    def zeros(cls, num_labels: int = NUM_LABELS, num_features: int | None = None):
        return cls(
            transitions=np.zeros((num_labels, num_labels)),
            start_scores=np.zeros(num_labels),
            end_scores=np.zeros(num_labels),
            feature_weights=None if num_features is None
            else np.zeros((num_features, num_labels)),
        )

    def validate(self) -> None:
        for name in ("transitions", "start_scores", "end_scores"):
            arr = getattr(self, name)
            if not np.isfinite(arr).all():
                raise CrfError(f"non-finite values in {name}")
        if self.feature_weights is not None and not np.isfinite(self.feature_weights).all():
            raise CrfError("non-finite values in feature_weights")


@dataclass
class EmissionSequence:
    """Per-position label scores plus a validity mask.

    The mask marks real positions; padding must be a contiguous suffix so the
    chain structure stays intact.
    """

    scores: np.ndarray            # [T, L]
    mask: np.ndarray | None = None

    def valid_length(self) -> int:
        if self.mask is None:
            return self.scores.shape[0]
        mask = np.asarray(self.mask, dtype=bool)
        if mask.shape != (self.scores.shape[0],):
            raise CrfError("mask shape does not match scores")
        n = int(mask.sum())
        if n and not mask[:n].all():
            raise CrfError("mask padding must be a contiguous suffix")
        return n


def _logsumexp(a: np.ndarray, axis: int) -> np.ndarray:
    m = np.max(a, axis=axis, keepdims=True)
    m = np.where(np.isfinite(m), m, 0.0)
    with np.errstate(divide="ignore"):
        out = np.log(np.sum(np.exp(a - m), axis=axis)) + np.squeeze(m, axis=axis)
    return out


def _forward_alphas(emis, lengths, trans, start):
    """alpha[b, t] for t < lengths[b]; emis is [B, T, L] float64."""
    B, T, L = emis.shape
    alpha = np.empty((B, T, L))
    alpha[:, 0] = start[None, :] + emis[:, 0]
    for t in range(1, T):
        active = t < lengths
        if not active.any():
            alpha[:, t] = alpha[:, t - 1]
            continue
        scores = alpha[:, t - 1][:, :, None] + trans[None, :, :]
        nxt = _logsumexp(scores, axis=1) + emis[:, t]
        alpha[:, t] = np.where(active[:, None], nxt, alpha[:, t - 1])
    return alpha


def _backward_betas(emis, lengths, trans, end):
    B, T, L = emis.shape
    beta = np.full((B, T, L), -np.inf)
    beta[np.arange(B), lengths - 1] = end[None, :]
    for t in range(T - 2, -1, -1):
        inner = t + 1 < lengths
        if inner.any():
            nxt = beta[:, t + 1] + emis[:, t + 1]
            val = _logsumexp(trans[None, :, :] + nxt[:, None, :], axis=2)
            beta[:, t] = np.where(inner[:, None], val, beta[:, t])
    return beta


def _batch_stack(sequences):
    """Stack [T_i, L] emission arrays into ([B, Tmax, L], lengths)."""
    lengths = np.array([s.shape[0] for s in sequences], dtype=np.int64)
    B, Tmax, L = len(sequences), int(lengths.max()), sequences[0].shape[1]
    emis = np.zeros((B, Tmax, L))
    for i, s in enumerate(sequences):
        emis[i, :len(s)] = s
    return emis, lengths


def _unpack(seq: EmissionSequence) -> np.ndarray:
    n = seq.valid_length()
    if n == 0:
        raise CrfError("empty sequence: at least one unmasked position required")
    return np.asarray(seq.scores[:n], dtype=np.float64)


def log_partition(emissions: EmissionSequence, params: CrfParams) -> float:
    """log sum over all label sequences of exp(score), numerically stabilized."""
    e = _unpack(emissions)
    emis, lengths = _batch_stack([e])
    alpha = _forward_alphas(emis, lengths, params.transitions.astype(np.float64),
                            params.start_scores.astype(np.float64))
    final = alpha[0, lengths[0] - 1] + params.end_scores
    return float(_logsumexp(final[None, :], axis=1)[0])


def sequence_score(emissions: EmissionSequence, labels: np.ndarray,
                   params: CrfParams) -> float:
    e = _unpack(emissions)
    y = np.asarray(labels)[:len(e)]
    score = params.start_scores[y[0]] + params.end_scores[y[-1]]
    score += e[np.arange(len(e)), y].sum()
    if len(y) > 1:
        score += params.transitions[y[:-1], y[1:]].sum()
    return float(score)


def marginals(emissions: EmissionSequence, params: CrfParams) -> np.ndarray:
    """Per-position posterior label probabilities, [T_valid, L]."""
    e = _unpack(emissions)
    emis, lengths = _batch_stack([e])
    trans = params.transitions.astype(np.float64)
    alpha = _forward_alphas(emis, lengths, trans, params.start_scores.astype(np.float64))
    beta = _backward_betas(emis, lengths, trans, params.end_scores.astype(np.float64))
    joint = alpha[0, :lengths[0]] + beta[0, :lengths[0]]
    log_z = _logsumexp(alpha[0, lengths[0] - 1][None, :] + params.end_scores[None, :], axis=1)[0]
    return np.exp(joint - log_z)


@dataclass
class CrfGradients:
    emissions: np.ndarray
    transitions: np.ndarray
    start_scores: np.ndarray
    end_scores: np.ndarray
    feature_weights: np.ndarray | None = None


def neg_log_likelihood_grad(
    emissions: EmissionSequence,
    gold: np.ndarray,
    params: CrfParams,
    l1: float = 0.0,
    l2: float = 0.0,
    features: sp.spmatrix | None = None,
) -> tuple[float, CrfGradients]:
    """Regularized NLL of the gold path and its exact gradients.

    loss = log_partition - score(gold) + l1*|w|_1 + l2*|w|_2^2 with the
    regularizers applied to ``feature_weights`` only. When ``features`` (a
    [T, F] indicator matrix) is supplied, emission gradients are chained
    through to the feature weights.
    """
    e = _unpack(emissions)
    T, L = e.shape
    y = np.asarray(gold[:T], dtype=np.int64)
    if (y == PAD).any() and L == NUM_LABELS:
        raise CrfError("gold labels contain PAD on unmasked positions")
    emis, lengths = _batch_stack([e])
    nll, demis, dtrans, dstart, dend = _batched_nll_grads(
        emis, lengths, y[None, :], params
    )
    loss = float(nll)
    grads = CrfGradients(
        emissions=demis[0],
        transitions=dtrans,
        start_scores=dstart,
        end_scores=dend,
    )
    w = params.feature_weights
    if w is not None:
        if features is not None:
            grads.feature_weights = np.asarray(features.T @ demis[0])
        else:
            grads.feature_weights = np.zeros_like(w)
        loss += l1 * np.abs(w).sum() + l2 * float((w ** 2).sum())
        grads.feature_weights += l1 * np.sign(w) + 2.0 * l2 * w
    return loss, grads


def _batched_nll_grads(emis, lengths, gold, params):
    """Sum of NLLs over a batch plus gradients w.r.t. emissions and CRF params.

    emis: [B, T, L] float64, suffix-padded; gold: [B, T] int; lengths: [B].
    """
    B, T, L = emis.shape
    trans = params.transitions.astype(np.float64)
    start = params.start_scores.astype(np.float64)
    end = params.end_scores.astype(np.float64)
    alpha = _forward_alphas(emis, lengths, trans, start)
    beta = _backward_betas(emis, lengths, trans, end)
    last = alpha[np.arange(B), lengths - 1] + end[None, :]
    log_z = _logsumexp(last, axis=1)

    valid = np.arange(T)[None, :] < lengths[:, None]
    node = np.exp(alpha + beta - log_z[:, None, None])
    node[~valid] = 0.0

    rows = np.arange(B)[:, None]
    cols = np.arange(T)[None, :]
    gold_onehot = np.zeros((B, T, L))
    gold_onehot[rows, cols, gold] = 1.0
    gold_onehot[~valid] = 0.0

    demis = node - gold_onehot

    dstart = (node[:, 0] - gold_onehot[:, 0]).sum(axis=0)
    last_idx = lengths - 1
    dend = (node[np.arange(B), last_idx] - gold_onehot[np.arange(B), last_idx]).sum(axis=0)

    dtrans = np.zeros((L, L))
    for t in range(T - 1):
        inner = t + 1 < lengths
        if not inner.any():
            continue
        pair = (
            alpha[:, t][:, :, None]
            + trans[None, :, :]
            + (emis[:, t + 1] + beta[:, t + 1])[:, None, :]
            - log_z[:, None, None]
        )
        pair = np.exp(pair)
        pair[~inner] = 0.0
        dtrans += pair.sum(axis=0)
        sel = np.flatnonzero(inner)
        np.subtract.at(dtrans, (gold[sel, t], gold[sel, t + 1]), 1.0)

    gold_score = start[gold[:, 0]] + end[gold[np.arange(B), last_idx]]
    gold_score = gold_score + (emis * gold_onehot).sum(axis=(1, 2))
    for t in range(T - 1):
        inner = t + 1 < lengths
        gold_score = gold_score + np.where(inner, trans[gold[:, t], gold[:, t + 1]], 0.0)
    nll = (log_z - gold_score).sum()
    return nll, demis, dtrans, dstart, dend


def viterbi_decode(emissions: EmissionSequence, params: CrfParams) -> np.ndarray:
    """Highest-scoring label sequence; ties break toward the lower label id."""
    e = _unpack(emissions)
    T, L = e.shape
    trans = params.transitions.astype(np.float64)
    delta = params.start_scores.astype(np.float64) + e[0]
    back = np.zeros((T, L), dtype=np.int64)
    for t in range(1, T):
        scores = delta[:, None] + trans
        back[t] = np.argmax(scores, axis=0)
        delta = scores[back[t], np.arange(L)] + e[t]
    delta = delta + params.end_scores
    path = np.zeros(T, dtype=np.int64)
    path[-1] = int(np.argmax(delta))
    for t in range(T - 1, 0, -1):
        path[t - 1] = back[t, path[t]]
    return path


def viterbi_decode_batch(emis: np.ndarray, lengths: np.ndarray,
                         params: CrfParams) -> list[np.ndarray]:
    """Viterbi over a suffix-padded [B, T, L] batch; returns per-row paths."""
    B, T, L = emis.shape
    trans = params.transitions.astype(np.float64)
    delta = params.start_scores.astype(np.float64)[None, :] + emis[:, 0]
    back = np.zeros((B, T, L), dtype=np.int32)
    finals = np.zeros((B, L))
    done0 = lengths == 1
    if done0.any():
        finals[done0] = delta[done0]
    for t in range(1, T):
        active = t < lengths
        if not active.any():
            break
        scores = delta[:, :, None] + trans[None, :, :]
        bp = np.argmax(scores, axis=1)
        nxt = np.take_along_axis(scores, bp[:, None, :], axis=1)[:, 0, :] + emis[:, t]
        back[:, t] = bp
        delta = np.where(active[:, None], nxt, delta)
        ending = lengths == t + 1
        if ending.any():
            finals[ending] = delta[ending]
    finals = finals + params.end_scores[None, :]
    paths = []
    for b in range(B):
        n = int(lengths[b])
        path = np.zeros(n, dtype=np.int64)
        path[-1] = int(np.argmax(finals[b]))
        for t in range(n - 1, 0, -1):
            path[t - 1] = back[b, t, path[t]]
        paths.append(path)
    return paths


# --- Training for the n-gram feature model --------------------------------

@dataclass
class CrfTrainConfig:
    window_len: int = 4
    batch_size: int = 1000
    max_length: int = 2500
    l1: float = 0.1
    l2: float = 0.1
    max_iterations: int = 100
    all_possible_transitions: bool = True
    all_possible_states: bool = True
    step: float = 0.1
    step_decay: float = 0.9

    def validate(self) -> None:
        if self.window_len < 0:
            raise CrfError("window_len must be >= 0")
        if self.batch_size < 1 or self.max_length < 1 or self.max_iterations < 1:
            raise CrfError("batch_size, max_length, max_iterations must be >= 1")
        if not (self.all_possible_transitions and self.all_possible_states):
            raise CrfError("sparse transition/state support is not implemented")


@dataclass
class CrfTrainReport:
    losses: list[float] = field(default_factory=list)
    wall_seconds: float = 0.0
    seed: int = 0


def train_crf(
    samples: list[tuple[sp.spmatrix, np.ndarray]],
    config: CrfTrainConfig,
    seed: int = 0,
    num_labels: int = NUM_LABELS,
) -> tuple[CrfParams, CrfTrainReport]:
    """Minibatch gradient descent on the regularized NLL.

    ``samples`` are (feature indicator matrix [T, F], gold labels [T]) pairs;
    sequences longer than ``config.max_length`` must be split by the caller.
    The per-batch objective is normalized by character count so the fixed
    step size stays scale-free; the l1/l2 coefficients act on the whole
    training objective and are scaled down accordingly. l1 is applied as a
    soft-threshold proximal step.
    """
    from .rng import derive_rng

    config.validate()
    if not samples:
        raise CrfError("empty training set")
    num_features = samples[0][0].shape[1]
    params = CrfParams.zeros(num_labels, num_features)
    total_chars = sum(int(s[0].shape[0]) for s in samples)
    report = CrfTrainReport(seed=seed)
    t0 = time.perf_counter()
    step = config.step
    order = np.arange(len(samples))
    for epoch in range(config.max_iterations):
        rng = derive_rng(seed, "crf-epoch", epoch)
        rng.shuffle(order)
        epoch_loss = 0.0
        for lo in range(0, len(order), config.batch_size):
            batch_idx = order[lo:lo + config.batch_size]
            batch = [samples[i] for i in batch_idx]
            n_chars = sum(int(s[0].shape[0]) for s in batch)
            frac = n_chars / total_chars
            feats = sp.vstack([s[0] for s in batch], format="csr")
            emis_flat = np.asarray(feats @ params.feature_weights)
            seqs, golds, pos = [], [], 0
            for S, y in batch:
                t = S.shape[0]
                seqs.append(emis_flat[pos:pos + t])
                golds.append(np.asarray(y, dtype=np.int64))
                pos += t
            emis, lengths = _batch_stack(seqs)
            gold = np.zeros(emis.shape[:2], dtype=np.int64)
            for i, y in enumerate(golds):
                gold[i, :len(y)] = y
            nll, demis, dtrans, dstart, dend = _batched_nll_grads(
                emis, lengths, gold, params
            )
            demis_flat = np.concatenate(
                [demis[i, :lengths[i]] for i in range(len(batch))], axis=0
            )
            dw = np.asarray(feats.T @ demis_flat) / n_chars
            w = params.feature_weights
            l2_eff = config.l2 * frac / n_chars
            l1_eff = config.l1 * frac / n_chars
            batch_loss = (
                nll / n_chars
                + l1_eff * np.abs(w).sum()
                + l2_eff * float((w ** 2).sum())
            )
            if not np.isfinite(batch_loss):
                raise CrfError(
                    f"non-finite training loss at epoch {epoch}, batch {lo // config.batch_size}"
                )
            w -= step * (dw + 2.0 * l2_eff * w)
            w[:] = np.sign(w) * np.maximum(np.abs(w) - step * l1_eff, 0.0)
            params.transitions -= step * dtrans / n_chars
            params.start_scores -= step * dstart / n_chars
            params.end_scores -= step * dend / n_chars
            epoch_loss += batch_loss * n_chars
        report.losses.append(epoch_loss / total_chars)
        step *= config.step_decay
    report.wall_seconds = time.perf_counter() - t0
    params.validate()
    return params, report
