"""Boolean error backpropagation.

One layer step, for a batch of inputs X_k with output errors E_k:

1. weight phase: for every neuron i, collect the masks that would fix samples
   with E_ki = 1 (I) and those that would spoil samples with E_ki = 0 (C), and
   project them to a weight difference mask; W' = W xor D^w;
2. re-evaluate with W' and the old bias to get E'_k;
3. bias phase: flip the biases that are wrong on every sample;
4. input phase: for every sample, project the per-output masks onto the input
   to get D^x_k, which becomes the error signal of the preceding layer.

Two flows share this skeleton. The general flow uses the positive/negative
sensitivities with Selection Expansion and the set-packing style projection.
The specialized flow keeps only single-bit flips and solves the projection
column-wise; it is fully vectorized over the batch.
"""

from __future__ import annotations

import logging
import time
from dataclasses import dataclass, field, replace
from typing import Callable, Optional, Sequence

import numpy as np

from .bitcore import WORD_DTYPE, BitMatrix, BitVector, Rng, masked_or, pack_bits, stack_rows
from .layers import Layer, Model, activation_counts, forward_batch
from .projection import ProjectionProblem, project, retain_one_rows
from .sensitivity import selection_expansion

log = logging.getLogger(__name__)

MODES = ("general", "specialized")
PROJECTIONS = ("exact", "greedy", "auto")
RETAIN_POLICIES = ("off", "dx", "dx_and_dw")

# rng sub-stream tags
_PHASE_W = 0
_PHASE_X = 1
_SHUFFLE = -1


@dataclass(frozen=True)
class Batch:
    """Inputs X_k and expected outputs Y^e_k, one row per sample.

    ``labels`` optionally carries class ids for accuracy reporting.
    """

    inputs: BitMatrix
    targets: BitMatrix
    labels: Optional[np.ndarray] = None

    def __post_init__(self):
        if self.inputs.rows != self.targets.rows:
            raise ValueError(f"{self.inputs.rows} inputs but {self.targets.rows} targets")
        if self.labels is not None and len(self.labels) != self.inputs.rows:
            raise ValueError("labels length does not match sample count")

    @classmethod
    def from_vectors(cls, inputs: Sequence[BitVector], targets: Sequence[BitVector], labels=None) -> "Batch":
        if not inputs:
            raise ValueError("empty batch")
        return cls(BitMatrix.from_vectors(list(inputs)), BitMatrix.from_vectors(list(targets)), labels)

    def __len__(self) -> int:
        return self.inputs.rows

    def take(self, idx) -> "Batch":
        idx = np.asarray(idx, dtype=np.intp)
        labels = None if self.labels is None else self.labels[idx]
        return Batch(self.inputs.take(idx), self.targets.take(idx), labels)

    def head(self, n: int) -> "Batch":
        return self.take(np.arange(min(n, len(self))))


@dataclass(frozen=True)
class TrainConfig:
    mode: str = "specialized"
    projection: str = "auto"
    exact_limit: int = 20
    # None picks the mode default: dx_and_dw for specialized, off for general
    retain_one_policy: Optional[str] = None
    batch_size: int = 16
    epochs: int = 1
    seed: int = 0
    shuffle: bool = True

    def __post_init__(self):
        if self.mode not in MODES:
            raise ValueError(f"mode must be one of {MODES}")
        if self.projection not in PROJECTIONS:
            raise ValueError(f"projection must be one of {PROJECTIONS}")
        if self.retain_one_policy is not None and self.retain_one_policy not in RETAIN_POLICIES:
            raise ValueError(f"retain_one_policy must be one of {RETAIN_POLICIES}")
        if self.exact_limit < 1:
            raise ValueError("exact_limit must be >= 1")
        if self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")
        if self.epochs < 0:
            raise ValueError("epochs must be >= 0")

    @property
    def retain(self) -> str:
        if self.mode == "general":
            return "off"
        return self.retain_one_policy or "dx_and_dw"


@dataclass
class LayerUpdateReport:
    weight_flips: int = 0
    bias_flips: int = 0
    errors_before: int = 0
    errors_after: int = 0


@dataclass(frozen=True)
class EpochReport:
    epoch: int
    split: str
    hamming_error_rate: float
    accuracy: Optional[float]
    weight_flips: int
    bias_flips: int
    seconds: float


def _as_matrix(rows, cols: int | None = None) -> BitMatrix:
    if isinstance(rows, BitMatrix):
        return rows
    if isinstance(rows, BitVector):
        return rows.as_matrix()
    rows = list(rows)
    return BitMatrix.from_vectors(rows, cols)


def _wrap_bool(bits: np.ndarray) -> BitMatrix:
    return BitMatrix._wrap(bits.shape[0], bits.shape[1], pack_bits(bits))


def output_errors(outputs, targets) -> BitMatrix:
    """E_k = Y_k xor Y^e_k, one row per sample."""
    y, ye = _as_matrix(outputs), _as_matrix(targets)
    if y.shape != ye.shape:
        raise ValueError(f"output shape {y.shape} != target shape {ye.shape}")
    return y ^ ye


# -- general flow ---------------------------------------------------------


def _general_problem(pos_rows: list[BitVector], neg_rows: list[BitVector], cols: int) -> BitMatrix:
    """[expanded positive rows; whole negative rows]."""
    parts = [selection_expansion(r) for r in pos_rows]
    parts += [r.as_matrix() for r in neg_rows]
    return stack_rows(parts, cols)


def _general_weight_masks(w: BitMatrix, x: BitMatrix, e: np.ndarray, z: np.ndarray, cfg: TrainConfig) -> np.ndarray:
    n = w.cols
    out = np.zeros((w.rows, w.words.shape[1]), dtype=WORD_DTYPE)
    for i in range(w.rows):
        if not e[:, i].any():
            continue
        w_i = w.row(i)
        c_pos, c_neg, i_pos, i_neg = [], [], [], []
        for k in range(x.rows):
            x_k = x.row(k)
            if z[k, i]:
                (i_neg if e[k, i] else c_neg).append(w_i & x_k)
            else:
                (i_pos if e[k, i] else c_pos).append(x_k)
        problem = ProjectionProblem(_general_problem(c_pos, c_neg, n), _general_problem(i_pos, i_neg, n))
        d, _ = project(problem, cfg.projection, cfg.exact_limit)
        out[i] = d.words
    return out


def _general_input_masks(w: BitMatrix, x: BitMatrix, e: np.ndarray, z: np.ndarray, cfg: TrainConfig) -> np.ndarray:
    n = x.cols
    out = np.zeros((x.rows, x.words.shape[1]), dtype=WORD_DTYPE)
    for k in range(x.rows):
        if not e[k].any():
            continue
        x_k = x.row(k)
        c_pos, c_neg, i_pos, i_neg = [], [], [], []
        for i in range(w.rows):
            w_i = w.row(i)
            if z[k, i]:
                (i_neg if e[k, i] else c_neg).append(x_k & w_i)
            else:
                (i_pos if e[k, i] else c_pos).append(w_i)
        problem = ProjectionProblem(_general_problem(c_pos, c_neg, n), _general_problem(i_pos, i_neg, n))
        d, _ = project(problem, cfg.projection, cfg.exact_limit)
        out[k] = d.words
    return out


# -- specialized flow -----------------------------------------------------


def _specialized_unions(w: BitMatrix, x: BitMatrix, counts: np.ndarray, select: np.ndarray, by_neuron: bool) -> BitMatrix:
    """Union of specialized sensitivity rows over the selected (k, i) pairs.

    by_neuron=True: row i = OR_k [select_ki] S*(W, X_k)_i   (weight side, m x n)
    by_neuron=False: row k = OR_i [select_ki] S*(X_k, W)_i  (input side, b x n)

    S*(W, X_k)_i is X_k when Z_ki = 0 and W_i AND X_k when W_i AND X_k has a
    single bit; S*(X_k, W)_i is W_i resp. the same single bit.
    """
    zero = select & (counts == 0)
    single = select & (counts == 1)
    if by_neuron:
        pos = masked_or(zero.T, x)
        neg = masked_or(single.T, x).words & w.words
    else:
        pos = masked_or(zero, w)
        neg = masked_or(single, w).words & x.words
    return BitMatrix._wrap(pos.rows, pos.cols, pos.words | neg)


def _specialized_masks(w, x, counts, e, rng: Optional[Rng], by_neuron: bool) -> np.ndarray:
    fix = _specialized_unions(w, x, counts, e, by_neuron)
    spoil = _specialized_unions(w, x, counts, ~e, by_neuron)
    d = fix.words & ~spoil.words
    if rng is None:
        return d
    bits = BitMatrix._wrap(fix.rows, fix.cols, d).to_bool()
    return pack_bits(retain_one_rows(bits, rng.random(fix.rows)))


# -- phases ----------------------------------------------------------------


def weight_phase(layer: Layer, inputs, errors, cfg: TrainConfig, rng: Rng):
    """Returns (W', D^w, report)."""
    x = _as_matrix(inputs, layer.n_in)
    e_m = _as_matrix(errors, layer.n_out)
    if x.cols != layer.n_in or e_m.cols != layer.n_out or x.rows != e_m.rows:
        raise ValueError("inputs/errors do not match the layer shape")
    w = layer.W
    e = e_m.to_bool()
    counts = activation_counts(x, w)
    if cfg.mode == "specialized":
        sub = rng.child(_PHASE_W) if cfg.retain == "dx_and_dw" else None
        dw = _specialized_masks(w, x, counts, e, sub, by_neuron=True)
    else:
        dw = _general_weight_masks(w, x, e, counts > 0, cfg)
    dw_m = BitMatrix._wrap(w.rows, w.cols, dw)
    new_w = BitMatrix._wrap(w.rows, w.cols, w.words ^ dw)
    report = LayerUpdateReport(weight_flips=dw_m.popcount(), errors_before=int(e.sum()))
    return new_w, dw_m, report


def bias_phase(bias: BitVector, errors):
    """Returns (B', D^b, E''): flip biases wrong on every sample."""
    e = _as_matrix(errors, bias.len)
    if e.rows == 0:
        raise ValueError("bias phase needs at least one sample")
    if e.cols != bias.len:
        raise ValueError(f"error width {e.cols} != bias width {bias.len}")
    db = BitVector._wrap(bias.len, np.bitwise_and.reduce(e.words, axis=0))
    residual = BitMatrix._wrap(e.rows, e.cols, e.words & ~db.words[None, :])
    return bias ^ db, db, residual


def input_phase(layer: Layer, inputs, errors, cfg: TrainConfig, rng: Rng) -> BitMatrix:
    """D^x_k for every sample, from the updated layer's weights."""
    x = _as_matrix(inputs, layer.n_in)
    e_m = _as_matrix(errors, layer.n_out)
    if x.cols != layer.n_in or e_m.cols != layer.n_out or x.rows != e_m.rows:
        raise ValueError("inputs/errors do not match the layer shape")
    e = e_m.to_bool()
    counts = activation_counts(x, layer.W)
    if cfg.mode == "specialized":
        sub = rng.child(_PHASE_X) if cfg.retain in ("dx", "dx_and_dw") else None
        dx = _specialized_masks(layer.W, x, counts, e, sub, by_neuron=False)
    else:
        dx = _general_input_masks(layer.W, x, e, counts > 0, cfg)
    return BitMatrix._wrap(x.rows, x.cols, dx)


def backward_layer(layer: Layer, inputs, errors, cfg: TrainConfig, rng: Rng, is_first: bool = False):
    """One full layer step; returns (updated layer, D^x or None, report)."""
    x = _as_matrix(inputs, layer.n_in)
    e = _as_matrix(errors, layer.n_out)
    if not e.any():
        dx = None if is_first else BitMatrix(x.rows, x.cols)
        return layer, dx, LayerUpdateReport()
    z = activation_counts(x, layer.W) > 0
    new_w, _, report = weight_phase(layer, x, e, cfg, rng)
    z_new = activation_counts(x, new_w) > 0
    # E' = Y' xor Y^e with Y' = Z' xor B (old bias) and Y^e = Z xor B xor E
    e_new = _wrap_bool(z_new ^ z) ^ e
    new_b, db, residual = bias_phase(layer.B, e_new)
    report.bias_flips = db.popcount()
    report.errors_after = residual.popcount()
    updated = Layer(new_w, new_b)
    dx = None if is_first else input_phase(updated, x, residual, cfg, rng)
    return updated, dx, report


def train_batch(model: Model, batch: Batch, cfg: TrainConfig, rng: Rng):
    """Forward, then update layers back to front; returns (model, reports).

    ``reports`` is ordered like ``model.layers``.
    """
    y, trace = forward_batch(model, batch.inputs)
    errors = output_errors(y, batch.targets)
    reports: list[Optional[LayerUpdateReport]] = [None] * len(model.layers)
    layers = list(model.layers)
    for idx in reversed(range(len(layers))):
        layers[idx], errors, reports[idx] = backward_layer(
            layers[idx], trace.inputs[idx], errors, cfg, rng.child(idx), is_first=(idx == 0)
        )
    return Model(tuple(layers)), reports


# -- driver ------------------------------------------------------------------

Decoder = Callable[[BitMatrix], np.ndarray]


def evaluate(model: Model, data: Batch, decoder: Optional[Decoder] = None, chunk: int = 2048):
    """Returns (hamming_error_rate, accuracy or None)."""
    if len(data) == 0:
        raise ValueError("empty dataset")
    wrong_bits = 0
    correct = 0
    for s in range(0, len(data), chunk):
        part = data.take(np.arange(s, min(s + chunk, len(data))))
        y, _ = forward_batch(model, part.inputs, keep_trace=False)
        wrong_bits += (y ^ part.targets).popcount()
        if decoder is not None and part.labels is not None:
            correct += int((decoder(y) == part.labels).sum())
    rate = wrong_bits / (len(data) * data.targets.cols)
    acc = correct / len(data) if decoder is not None and data.labels is not None else None
    return rate, acc


def fit(
    model: Model,
    data: Batch,
    cfg: TrainConfig,
    progress: Optional[Callable[[EpochReport], None]] = None,
    test: Optional[Batch] = None,
    decoder: Optional[Decoder] = None,
    clock: Callable[[], float] = time.perf_counter,
):
    """Run ``cfg.epochs`` epochs of mini-batch training; returns (model, history)."""
    if len(data) == 0:
        raise ValueError("empty dataset")
    root = Rng(cfg.seed)
    history: list[EpochReport] = []
    order = np.arange(len(data))
    for epoch in range(cfg.epochs):
        start = clock()
        if cfg.shuffle:
            order = root.child(epoch, _SHUFFLE).permutation(len(data))
        w_flips = b_flips = 0
        for bno, s in enumerate(range(0, len(data), cfg.batch_size)):
            batch = data.take(order[s:s + cfg.batch_size])
            model, reports = train_batch(model, batch, cfg, root.child(epoch, bno))
            w_flips += sum(r.weight_flips for r in reports)
            b_flips += sum(r.bias_flips for r in reports)
        elapsed = clock() - start
        splits = [("train", data)] + ([("test", test)] if test is not None else [])
        for name, split in splits:
            rate, acc = evaluate(model, split, decoder)
            rep = EpochReport(epoch, name, rate, acc, w_flips, b_flips, elapsed)
            history.append(rep)
            if progress is not None:
                progress(rep)
        log.info("epoch %d done in %.1fs", epoch, elapsed)
    return model, history
