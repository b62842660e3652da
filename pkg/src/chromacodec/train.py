"""Losses with winner-only gradient routing and the two training loops.

The colorizer loss takes, at every pixel, the minimum joint squared chroma
error over the K branches; only the winning branch receives gradient from
that pixel (ties break toward the lowest index). Losses are reported as
per-pixel means so the learning rate is independent of image size; the
returned gradients match that normalization.
"""

from dataclasses import dataclass

import numpy as np

from chromacodec.errors import (
    DivergedTraining,
    EmptyCorpus,
    IndexOutOfRange,
    InvalidConfig,
    ShapeMismatch,
)
from chromacodec.net import (
    AdamState,
    adam_step,
    backward_hypotheses,
    backward_predictor,
    forward_hypotheses,
    forward_predictor,
    init_model,
)
from chromacodec.oracle import BranchMap, pixel_oracle


@dataclass(frozen=True)
class TrainConfig:
    epochs: int
    batch_size: int
    learning_rate: float = 1e-3
    lr_drop_epochs: tuple = None  # default: drops at 50% and 75% of epochs
    lr_drop_factor: float = 0.1
    seed: int = 0

    def validate(self):
        if self.epochs < 1:
            raise InvalidConfig("epochs must be >= 1")
        if self.batch_size < 1:
            raise InvalidConfig("batch_size must be >= 1")
        if self.learning_rate <= 0:
            raise InvalidConfig("learning_rate must be > 0")
        if not 0 < self.lr_drop_factor <= 1:
            raise InvalidConfig("lr_drop_factor must be in (0, 1]")

    def drop_epochs(self):
        if self.lr_drop_epochs is not None:
            return set(self.lr_drop_epochs)
        return {self.epochs // 2, (3 * self.epochs) // 4} - {0}


@dataclass
class EpochStats:
    epoch: int
    loss: float
    learning_rate: float
    accuracy: float = None


@dataclass
class TrainResult:
    weights: object
    history: list

    @property
    def final_loss(self):
        return self.history[-1].loss

    @property
    def final_accuracy(self):
        return self.history[-1].accuracy


def hypothesis_loss_and_grad(hyp, truth):
    """Min-over-branches loss with winner-only gradient routing.

    Returns (per-pixel mean loss, d(loss)/d(branch outputs) shaped like
    hyp.chroma, winner BranchMap). Losing branches get exactly zero gradient.
    """
    truth = np.asarray(truth, dtype=np.float64)
    if truth.shape != hyp.chroma.shape[1:]:
        raise ShapeMismatch(f"truth {truth.shape} vs hypotheses {hyp.chroma.shape[1:]}")
    err = hyp.chroma - truth[None]
    sq = err[:, 0] ** 2 + err[:, 1] ** 2  # (K, H, W)
    winner = np.argmin(sq, axis=0)  # first occurrence = lowest index on ties
    min_sq = np.take_along_axis(sq, winner[None], axis=0)[0]
    loss = float(min_sq.mean())
    n = min_sq.size
    dchroma = np.zeros_like(hyp.chroma)
    for j in range(hyp.k):
        mask = winner == j
        dchroma[j][:, mask] = 2.0 * err[j][:, mask] / n
    h, w = winner.shape
    return loss, dchroma, BranchMap(width=w, height=h, indices=winner.astype(np.int32), k=hyp.k)


def single_branch_loss(pred, truth):
    """Per-pixel mean joint squared error; the K=1 case of the branched loss."""
    pred = np.asarray(pred, dtype=np.float64)
    truth = np.asarray(truth, dtype=np.float64)
    if pred.shape != truth.shape or pred.ndim != 3 or pred.shape[0] != 2:
        raise ShapeMismatch(f"pred {pred.shape} vs truth {truth.shape}")
    err = pred - truth
    sq = err[0] ** 2 + err[1] ** 2
    loss = float(sq.mean())
    return loss, 2.0 * err / sq.size


def predictor_loss_and_grad(probs, oracle):
    """Mean per-pixel cross-entropy against the oracle branch indices.

    Returns (loss, gradient w.r.t. the pre-softmax logits = (p - onehot)/N).
    """
    probs = np.asarray(probs, dtype=np.float64)
    idx = oracle.indices if isinstance(oracle, BranchMap) else np.asarray(oracle)
    k = probs.shape[0]
    if idx.shape != probs.shape[1:]:
        raise ShapeMismatch(f"oracle {idx.shape} vs probs {probs.shape[1:]}")
    if idx.size and (idx.min() < 0 or idx.max() >= k):
        raise IndexOutOfRange(f"oracle indices must lie in [0, {k})")
    picked = np.take_along_axis(probs, idx[None], axis=0)[0]
    loss = float(-np.log(np.maximum(picked, 1e-300)).mean())
    n = idx.size
    dlogits = probs / n
    yy, xx = np.indices(idx.shape)
    dlogits[idx, yy, xx] -= 1.0 / n
    return loss, dlogits


def _batches(order, batch_size):
    for start in range(0, len(order), batch_size):
        yield order[start:start + batch_size]


def _accumulate(total, grads):
    if total is None:
        return [None if g is None else [g[0], g[1]] for g in grads]
    for slot, g in zip(total, grads):
        if g is not None:
            slot[0] += g[0]
            slot[1] += g[1]
    return total


def _scale_grads(total, factor):
    return [None if g is None else (g[0] * factor, g[1] * factor) for g in total]


def train_colorizer(corpus, config, tc):
    """Mini-batch ADAM on the min-over-branches loss. Deterministic given seeds."""
    images = list(corpus)
    if not images:
        raise EmptyCorpus("corpus is empty")
    config.validate()
    tc.validate()
    weights = init_model(config)
    state = AdamState.for_weights(weights)
    rng = np.random.default_rng(tc.seed)
    drops = tc.drop_epochs()
    lr = tc.learning_rate
    history = []
    t = 0
    for epoch in range(tc.epochs):
        if epoch in drops:
            lr *= tc.lr_drop_factor
        order = rng.permutation(len(images))
        epoch_loss = 0.0
        n_batches = 0
        for batch in _batches(order, tc.batch_size):
            total = None
            batch_loss = 0.0
            for img_idx in batch:
                img = images[img_idx]
                hyp, cache = forward_hypotheses(weights, img.gray, cache=True)
                loss, dchroma, _ = hypothesis_loss_and_grad(hyp, img.chroma)
                batch_loss += loss
                total = _accumulate(total, backward_hypotheses(weights, cache, dchroma))
            batch_loss /= len(batch)
            if not np.isfinite(batch_loss):
                raise DivergedTraining(f"loss became non-finite at epoch {epoch}")
            t += 1
            adam_step(weights, _scale_grads(total, 1.0 / len(batch)), state, t, lr)
            epoch_loss += batch_loss
            n_batches += 1
        history.append(EpochStats(epoch=epoch, loss=epoch_loss / n_batches, learning_rate=lr))
    return TrainResult(weights=weights, history=history)


def predictor_accuracy(weights, corpus, oracles=None):
    """Fraction of pixels where the predictor argmax equals the pixel oracle."""
    hits = 0
    total = 0
    for i, img in enumerate(corpus):
        hyp = forward_hypotheses(weights, img.gray)
        oracle = oracles[i] if oracles is not None else pixel_oracle(hyp, img.chroma)
        guess = np.argmax(forward_predictor(weights, hyp), axis=0)
        hits += int(np.count_nonzero(guess == oracle.indices))
        total += oracle.indices.size
    return hits / total


def train_predictor(corpus, weights, tc):
    """Train only the predictor head against per-image pixel-oracle maps.

    The colorizer is frozen, so hypotheses and oracle maps are computed once
    per image and reused every epoch.
    """
    images = list(corpus)
    if not images:
        raise EmptyCorpus("corpus is empty")
    tc.validate()
    weights = weights.copy()
    cached = []
    for img in images:
        hyp = forward_hypotheses(weights, img.gray)
        cached.append((hyp, pixel_oracle(hyp, img.chroma)))

    state = AdamState.for_weights(weights)
    rng = np.random.default_rng(tc.seed)
    drops = tc.drop_epochs()
    lr = tc.learning_rate
    history = []
    t = 0
    for epoch in range(tc.epochs):
        if epoch in drops:
            lr *= tc.lr_drop_factor
        order = rng.permutation(len(images))
        epoch_loss = 0.0
        hits = 0
        total_px = 0
        n_batches = 0
        for batch in _batches(order, tc.batch_size):
            total = None
            batch_loss = 0.0
            for img_idx in batch:
                hyp, oracle = cached[img_idx]
                probs, pcache = forward_predictor(weights, hyp, cache=True)
                loss, dlogits = predictor_loss_and_grad(probs, oracle)
                batch_loss += loss
                hits += int(np.count_nonzero(np.argmax(probs, axis=0) == oracle.indices))
                total_px += oracle.indices.size
                total = _accumulate(total, backward_predictor(weights, pcache, dlogits))
            batch_loss /= len(batch)
            if not np.isfinite(batch_loss):
                raise DivergedTraining(f"loss became non-finite at epoch {epoch}")
            t += 1
            adam_step(weights, _scale_grads(total, 1.0 / len(batch)), state, t, lr)
            epoch_loss += batch_loss
            n_batches += 1
        history.append(
            EpochStats(
                epoch=epoch,
                loss=epoch_loss / n_batches,
                learning_rate=lr,
                accuracy=hits / total_px,
            )
        )
    # final accuracy with the trained head (history holds in-epoch estimates)
    history[-1].accuracy = predictor_accuracy(
        weights, images, oracles=[oracle for _, oracle in cached]
    )
    return TrainResult(weights=weights, history=history)


def write_loss_log(history, path):
    """CSV loss log: epoch, loss, learning_rate, accuracy (blank for colorizer)."""
    lines = ["epoch,loss,learning_rate,accuracy"]
    for st in history:
        acc = "" if st.accuracy is None else repr(st.accuracy)
        lines.append(f"{st.epoch},{st.loss!r},{st.learning_rate!r},{acc}")
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")
