"""Composite gate, Row Activation and fully connected inference."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .bitcore import (
    BitMatrix,
    BitVector,
    Bits,
    Rng,
    as_rows,
    broadcast_pair,
    make_matrix,
    pack_bits,
    random_matrix,
)

# samples processed per chunk in batched kernels; bounds the b*m*words temp
_CHUNK_ELEMS = 1 << 22


def gate_eval(x: BitVector, w: BitVector, b: int | bool) -> int:
    """y = OR_i (x_i AND w_i) XOR b."""
    if x.len != w.len:
        raise ValueError(f"length mismatch: {x.len} vs {w.len}")
    return int(bool((x.words & w.words).any()) ^ bool(b))


def row_activation(x: Bits, w: Bits) -> BitVector:
    """Z_i = OR_j (X_ij AND W_ij); a row vector operand is broadcast."""
    wx, ww, rows, cols = broadcast_pair(x, w)
    z = (wx & ww).any(axis=1) if rows else np.zeros(0, dtype=bool)
    return BitVector._wrap(rows, pack_bits(z.reshape(1, -1))[0])


def activation_counts(x: BitMatrix, w: BitMatrix) -> np.ndarray:
    """Popcount of X_k AND W_i for every sample k and neuron i, shape (b, m).

    ``counts > 0`` is the batched Row Activation; ``counts == 1`` marks
    neurons driven by exactly one active conjunct.
    """
    xw, ww = as_rows(x), as_rows(w)
    if xw.shape[1] != ww.shape[1] or x.cols != w.cols:
        raise ValueError(f"width mismatch: {x.cols} vs {w.cols}")
    b, m = xw.shape[0], ww.shape[0]
    out = np.empty((b, m), dtype=np.int32)
    step = max(1, _CHUNK_ELEMS // max(1, m * ww.shape[1]))
    for s in range(0, b, step):
        blk = xw[s:s + step, None, :] & ww[None, :, :]
        out[s:s + step] = np.bitwise_count(blk).sum(axis=2, dtype=np.int32)
    return out


def batch_activation(x: BitMatrix, w: BitMatrix) -> np.ndarray:
    """Row Activation of every sample row of ``x`` against ``w``; bool (b, m)."""
    xw, ww = as_rows(x), as_rows(w)
    if x.cols != w.cols:
        raise ValueError(f"width mismatch: {x.cols} vs {w.cols}")
    b, m = xw.shape[0], ww.shape[0]
    out = np.empty((b, m), dtype=bool)
    step = max(1, _CHUNK_ELEMS // max(1, m * ww.shape[1]))
    for s in range(0, b, step):
        out[s:s + step] = (xw[s:s + step, None, :] & ww[None, :, :]).any(axis=2)
    return out


@dataclass(frozen=True)
class Layer:
    W: BitMatrix
    B: BitVector

    def __post_init__(self):
        if self.B.len != self.W.rows:
            raise ValueError(f"bias length {self.B.len} != {self.W.rows} neurons")

    @property
    def n_in(self) -> int:
        return self.W.cols

    @property
    def n_out(self) -> int:
        return self.W.rows

    @classmethod
    def init(cls, rng: Rng, n_in: int, n_out: int, density: float | None = None) -> "Layer":
        """Random weights with one expected active conjunct per neuron; zero bias."""
        if density is None:
            density = 1.0 / n_in if n_in else 0.0
        return cls(random_matrix(rng, n_out, n_in, density), BitVector(n_out))

    @classmethod
    def zeros(cls, n_in: int, n_out: int) -> "Layer":
        return cls(make_matrix(n_out, n_in, 0), BitVector(n_out))


@dataclass(frozen=True)
class Model:
    layers: tuple[Layer, ...]

    def __post_init__(self):
        object.__setattr__(self, "layers", tuple(self.layers))
        for i, (a, b) in enumerate(zip(self.layers, self.layers[1:])):
            if a.n_out != b.n_in:
                raise ValueError(f"layer {i} outputs {a.n_out} bits but layer {i + 1} takes {b.n_in}")

    @property
    def widths(self) -> list[int]:
        if not self.layers:
            return []
        return [self.layers[0].n_in] + [l.n_out for l in self.layers]

    @classmethod
    def init(cls, rng: Rng, widths, density: float | None = None) -> "Model":
        if len(widths) < 2:
            raise ValueError("need at least an input and an output width")
        return cls(tuple(
            Layer.init(rng.child(i), n, m, density)
            for i, (n, m) in enumerate(zip(widths, widths[1:]))
        ))

    def replace(self, index: int, layer: Layer) -> "Model":
        layers = list(self.layers)
        layers[index] = layer
        return Model(tuple(layers))

    def __eq__(self, other):
        if not isinstance(other, Model):
            return NotImplemented
        return len(self.layers) == len(other.layers) and all(
            a.W == b.W and a.B == b.B for a, b in zip(self.layers, other.layers)
        )

    __hash__ = None


@dataclass
class ForwardTrace:
    """Per-layer inputs X, activations Z and outputs Y.

    Entries are BitVectors for single-sample forwards and BitMatrix (one row
    per sample) for batched forwards.
    """

    inputs: list = field(default_factory=list)
    activations: list = field(default_factory=list)
    outputs: list = field(default_factory=list)

    def __len__(self) -> int:
        return len(self.inputs)


def layer_forward(layer: Layer, x: BitVector) -> tuple[BitVector, BitVector]:
    if x.len != layer.n_in:
        raise ValueError(f"input width {x.len} != layer width {layer.n_in}")
    z = row_activation(x, layer.W)
    return z, z ^ layer.B


def model_forward(model: Model, x: BitVector) -> tuple[BitVector, ForwardTrace]:
    if not model.layers:
        raise ValueError("model has no layers")
    trace = ForwardTrace()
    for i, layer in enumerate(model.layers):
        if x.len != layer.n_in:
            raise ValueError(f"layer {i}: input width {x.len} != {layer.n_in}")
        z, y = layer_forward(layer, x)
        trace.inputs.append(x)
        trace.activations.append(z)
        trace.outputs.append(y)
        x = y
    return x, trace


def forward_batch(model: Model, x: BitMatrix, keep_trace: bool = True):
    """Forward every row of ``x``; returns (Y, trace or None)."""
    if not model.layers:
        raise ValueError("model has no layers")
    trace = ForwardTrace() if keep_trace else None
    for i, layer in enumerate(model.layers):
        if x.cols != layer.n_in:
            raise ValueError(f"layer {i}: input width {x.cols} != {layer.n_in}")
        z = BitMatrix._wrap(x.rows, layer.n_out, pack_bits(batch_activation(x, layer.W)))
        y = BitMatrix._wrap(x.rows, layer.n_out, z.words ^ layer.B.words[None, :])
        if trace is not None:
            trace.inputs.append(x)
            trace.activations.append(z)
            trace.outputs.append(y)
        x = y
    return x, trace
