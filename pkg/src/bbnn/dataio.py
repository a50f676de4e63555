"""MNIST ingestion, Boolean encodings, checkpoints and synthetic data."""

from __future__ import annotations

import gzip
import io
import os
import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .bitcore import WORD_DTYPE, BitMatrix, BitVector, Rng, n_words, pack_bits, random_matrix
from .layers import Layer, Model, forward_batch
from .training import Batch

IMAGE_MAGIC = 0x00000803
LABEL_MAGIC = 0x00000801
PIXELS = 28 * 28

CHECKPOINT_MAGIC = b"BBNN"
CHECKPOINT_VERSION = 1


class DataError(Exception):
    """Base class for malformed data or checkpoint files."""


class BadMagic(DataError):
    pass


class TruncatedPayload(DataError):
    pass


class CountMismatch(DataError):
    pass


class VersionMismatch(DataError):
    pass


class InconsistentDims(DataError):
    pass


@dataclass(frozen=True)
class RawDataset:
    images: np.ndarray  # (samples, 784) uint8
    labels: np.ndarray  # (samples,) uint8

    def __post_init__(self):
        if self.images.ndim != 2 or self.images.shape[1] != PIXELS:
            raise ValueError(f"images must be (samples, {PIXELS})")
        if len(self.images) != len(self.labels):
            raise CountMismatch(f"{len(self.images)} images vs {len(self.labels)} labels")

    def __len__(self) -> int:
        return len(self.labels)

    def head(self, n: int | None) -> "RawDataset":
        if n is None:
            return self
        return RawDataset(self.images[:n], self.labels[:n])


@dataclass(frozen=True)
class EncodingSpec:
    thermometer_levels: int = 8
    classes: int = 10
    class_block: int = 32

    def __post_init__(self):
        if self.thermometer_levels < 1 or self.classes < 1 or self.class_block < 1:
            raise ValueError("encoding parameters must be >= 1")

    @property
    def input_width(self) -> int:
        return PIXELS * self.thermometer_levels

    @property
    def output_width(self) -> int:
        return self.classes * self.class_block

    @classmethod
    def for_widths(cls, n_in: int, n_out: int, classes: int = 10) -> "EncodingSpec":
        """Infer thermometer levels and block size from the interface widths."""
        if n_in % PIXELS or n_out % classes:
            raise ValueError(f"widths {n_in}/{n_out} are not multiples of {PIXELS}/{classes}")
        return cls(n_in // PIXELS, classes, n_out // classes)


# -- IDX ------------------------------------------------------------------


def _read(path) -> bytes:
    path = Path(path)
    if not path.exists() and Path(str(path) + ".gz").exists():
        path = Path(str(path) + ".gz")
    with open(path, "rb") as fh:
        data = fh.read()
    if data[:2] == b"\x1f\x8b":
        data = gzip.decompress(data)
    return data


def _parse_idx(data: bytes, magic: int, ndim: int) -> np.ndarray:
    if len(data) < 4 + 4 * ndim:
        raise TruncatedPayload("header is truncated")
    (got,) = struct.unpack(">I", data[:4])
    if got != magic:
        raise BadMagic(f"bad magic 0x{got:08x}, expected 0x{magic:08x}")
    dims = struct.unpack(f">{ndim}I", data[4:4 + 4 * ndim])
    size = int(np.prod(dims))
    body = data[4 + 4 * ndim:]
    if len(body) < size:
        raise TruncatedPayload(f"payload has {len(body)} bytes, header promises {size}")
    return np.frombuffer(body, dtype=np.uint8, count=size).reshape(dims)


def load_idx(images_path, labels_path) -> RawDataset:
    images = _parse_idx(_read(images_path), IMAGE_MAGIC, 3)
    labels = _parse_idx(_read(labels_path), LABEL_MAGIC, 1)
    if images.shape[1:] != (28, 28):
        raise InconsistentDims(f"images are {images.shape[1]}x{images.shape[2]}, expected 28x28")
    if len(images) != len(labels):
        raise CountMismatch(f"{len(images)} images vs {len(labels)} labels")
    return RawDataset(images.reshape(len(images), PIXELS), labels.copy())


def write_idx(images_path, labels_path, images: np.ndarray, labels: np.ndarray) -> None:
    """Write an IDX pair; mostly for building fixtures."""
    images = np.asarray(images, dtype=np.uint8).reshape(-1, 28, 28)
    labels = np.asarray(labels, dtype=np.uint8)
    with open(images_path, "wb") as fh:
        fh.write(struct.pack(">IIII", IMAGE_MAGIC, *images.shape))
        fh.write(images.tobytes())
    with open(labels_path, "wb") as fh:
        fh.write(struct.pack(">II", LABEL_MAGIC, len(labels)))
        fh.write(labels.tobytes())


MNIST_FILES = {
    "train": ("train-images-idx3-ubyte", "train-labels-idx1-ubyte"),
    "test": ("t10k-images-idx3-ubyte", "t10k-labels-idx1-ubyte"),
}


def load_mnist(data_dir, split: str) -> RawDataset:
    images, labels = MNIST_FILES[split]
    data_dir = Path(data_dir)
    return load_idx(data_dir / images, data_dir / labels)


# -- encodings --------------------------------------------------------------


def thermometer_thresholds(levels: int) -> np.ndarray:
    return np.array([(t + 1) * 255 / (levels + 1) for t in range(levels)])


def binarize(raw: RawDataset | np.ndarray, spec: EncodingSpec) -> BitMatrix:
    """Thermometer-code every pixel: bit t is set iff p > (t+1)*255/(T+1)."""
    images = raw.images if isinstance(raw, RawDataset) else np.asarray(raw, dtype=np.uint8)
    images = images.reshape(len(images), -1)
    bits = images[:, :, None] > thermometer_thresholds(spec.thermometer_levels)
    return BitMatrix.from_bits(bits.reshape(len(images), -1))


def encode_label(c: int, spec: EncodingSpec) -> BitVector:
    if not 0 <= c < spec.classes:
        raise ValueError(f"class {c} out of range [0, {spec.classes})")
    bits = np.zeros(spec.output_width, dtype=bool)
    bits[c * spec.class_block:(c + 1) * spec.class_block] = True
    return BitVector.from_bits(bits)


def encode_labels(labels: np.ndarray, spec: EncodingSpec) -> BitMatrix:
    labels = np.asarray(labels, dtype=np.int64)
    if labels.size and (labels.min() < 0 or labels.max() >= spec.classes):
        raise ValueError("label out of range")
    block = np.repeat(np.eye(spec.classes, dtype=bool), spec.class_block, axis=1)
    return BitMatrix.from_bits(block[labels]) if labels.size else BitMatrix(0, spec.output_width)


def decode_output(y, spec: EncodingSpec):
    """Class with the most set bits in its block; ties go to the lowest id.

    Accepts one BitVector (returns an int) or a BitMatrix (returns an array).
    """
    single = isinstance(y, BitVector)
    m = y.as_matrix() if single else y
    if m.cols != spec.output_width:
        raise ValueError(f"output width {m.cols} != {spec.output_width}")
    counts = m.to_bool().reshape(m.rows, spec.classes, spec.class_block).sum(axis=2)
    cls = counts.argmax(axis=1)  # argmax returns the first maximum
    return int(cls[0]) if single else cls


def block_decoder(spec: EncodingSpec):
    return lambda y: decode_output(y, spec)


def encode_dataset(raw: RawDataset, spec: EncodingSpec) -> Batch:
    return Batch(binarize(raw, spec), encode_labels(raw.labels, spec), raw.labels.astype(np.int64))


# -- checkpoints ------------------------------------------------------------

_HEADER = struct.Struct("<4sIIIII")  # magic, version, T, classes, block, layer count
_DIMS = struct.Struct("<II")


def checkpoint_size(widths: list[int]) -> int:
    size = _HEADER.size + _DIMS.size * (len(widths) - 1)
    for n, m in zip(widths, widths[1:]):
        size += 8 * (m * n_words(n) + n_words(m))
    return size


def dump_checkpoint(model: Model, spec: EncodingSpec | None) -> bytes:
    """Serialize; ``spec=None`` (no data encoding) is stored as zeros."""
    t, c, b = (spec.thermometer_levels, spec.classes, spec.class_block) if spec else (0, 0, 0)
    out = io.BytesIO()
    out.write(_HEADER.pack(CHECKPOINT_MAGIC, CHECKPOINT_VERSION, t, c, b, len(model.layers)))
    for layer in model.layers:
        out.write(_DIMS.pack(layer.n_out, layer.n_in))
    for layer in model.layers:
        out.write(layer.W.words.astype(WORD_DTYPE).tobytes())
        out.write(layer.B.words.astype(WORD_DTYPE).tobytes())
    return out.getvalue()


def parse_checkpoint(data: bytes) -> tuple[Model, EncodingSpec | None]:
    if len(data) < _HEADER.size:
        raise TruncatedPayload("checkpoint header is truncated")
    magic, version, t, c, b, count = _HEADER.unpack_from(data, 0)
    if magic != CHECKPOINT_MAGIC:
        raise BadMagic(f"bad checkpoint magic {magic!r}")
    if version != CHECKPOINT_VERSION:
        raise VersionMismatch(f"checkpoint version {version}, expected {CHECKPOINT_VERSION}")
    pos = _HEADER.size
    if len(data) < pos + _DIMS.size * count:
        raise TruncatedPayload("layer table is truncated")
    dims = [_DIMS.unpack_from(data, pos + _DIMS.size * i) for i in range(count)]
    pos += _DIMS.size * count
    for (m0, _), (_, n1) in zip(dims, dims[1:]):
        if m0 != n1:
            raise InconsistentDims(f"layer output {m0} does not feed input {n1}")
    if count and checkpoint_size([dims[0][1]] + [m for m, _ in dims]) != len(data):
        expected = checkpoint_size([dims[0][1]] + [m for m, _ in dims])
        if len(data) < expected:
            raise TruncatedPayload(f"checkpoint has {len(data)} bytes, expected {expected}")
        raise InconsistentDims(f"checkpoint has {len(data) - expected} trailing bytes")
    layers = []
    for m, n in dims:
        nw = n_words(n)
        w = np.frombuffer(data, dtype=WORD_DTYPE, count=m * nw, offset=pos).reshape(m, nw).copy()
        pos += 8 * m * nw
        bw = np.frombuffer(data, dtype=WORD_DTYPE, count=n_words(m), offset=pos).copy()
        pos += 8 * n_words(m)
        layers.append(Layer(BitMatrix(m, n, w), BitVector(m, bw)))
        if _pad_dirty(layers[-1]):
            raise InconsistentDims("nonzero pad bits in checkpoint payload")
    spec = EncodingSpec(t, c, b) if t or c or b else None
    return Model(tuple(layers)), spec


def _pad_dirty(layer: Layer) -> bool:
    def dirty(words: np.ndarray, cols: int) -> bool:
        rem = cols % 64
        return bool(rem and words.size and (words[..., -1] >> np.uint64(rem)).any())

    return dirty(layer.W.words, layer.n_in) or dirty(layer.B.words, layer.n_out)


def save_checkpoint(model: Model, spec: EncodingSpec | None, path) -> None:
    data = dump_checkpoint(model, spec)
    tmp = Path(str(path) + ".tmp")
    with open(tmp, "wb") as fh:
        fh.write(data)
    os.replace(tmp, path)


def load_checkpoint(path) -> tuple[Model, EncodingSpec | None]:
    with open(path, "rb") as fh:
        return parse_checkpoint(fh.read())


# -- synthetic data ------------------------------------------------------------


def synth_teacher(rng: Rng, widths, samples: int, density: float | None = None):
    """Random teacher model plus a batch labelled by it.

    Teacher layers use ``density`` (default 1/n per row) and random biases;
    inputs are uniform bits.
    """
    if samples < 1:
        raise ValueError("samples must be >= 1")
    widths = list(widths)
    layers = []
    for i, (n, m) in enumerate(zip(widths, widths[1:])):
        r = rng.child(1, i)
        d = (1.0 / n) if density is None else density
        layers.append(Layer(random_matrix(r, m, n, d), random_matrix(r, 1, m, 0.5).row(0)))
    teacher = Model(tuple(layers))
    x = random_matrix(rng.child(2), samples, widths[0], 0.5)
    y, _ = forward_batch(teacher, x, keep_trace=False)
    return teacher, Batch(x, y)
