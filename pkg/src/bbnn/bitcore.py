"""Bit-packed Boolean vectors and matrices.

Layout: bits are packed LSB-first into little-endian uint64 words. Bit ``j``
of a row lives in word ``j // 64`` at position ``j % 64``. Every row is padded
independently and the pad bits past ``cols`` are always zero, so kernels can
AND/OR/popcount whole words without masking.
"""

from __future__ import annotations

import hashlib
from typing import Iterable, Sequence, Union

import numpy as np

WORD_BITS = 64
WORD_DTYPE = np.dtype("<u8")

# guard against silly allocations (rows * words * 8 bytes)
MAX_WORDS = 1 << 34

XOR = "xor"
AND = "and"
OR = "or"
ANDNOT = "andnot"
OPS = (XOR, AND, OR, ANDNOT)


def n_words(cols: int) -> int:
    return (cols + WORD_BITS - 1) // WORD_BITS


def _tail_mask(cols: int) -> np.uint64:
    rem = cols % WORD_BITS
    if rem == 0:
        return np.uint64(0xFFFFFFFFFFFFFFFF)
    return np.uint64((1 << rem) - 1)


def pack_bits(bits: np.ndarray) -> np.ndarray:
    """Pack a 2-D array of 0/1 values into a (rows, words) uint64 array."""
    bits = np.asarray(bits, dtype=bool)
    if bits.ndim != 2:
        raise ValueError(f"expected a 2-D array, got shape {bits.shape}")
    rows, cols = bits.shape
    words = n_words(cols)
    padded = np.zeros((rows, words * WORD_BITS), dtype=bool)
    padded[:, :cols] = bits
    packed = np.packbits(padded, axis=1, bitorder="little")
    return packed.view(WORD_DTYPE).reshape(rows, words).copy()


def unpack_bits(words: np.ndarray, cols: int) -> np.ndarray:
    """Inverse of :func:`pack_bits`; returns a (rows, cols) bool array."""
    words = np.ascontiguousarray(words, dtype=WORD_DTYPE)
    rows = words.shape[0]
    if rows == 0 or cols == 0:
        return np.zeros((rows, cols), dtype=bool)
    as_bytes = words.view(np.uint8).reshape(rows, -1)
    bits = np.unpackbits(as_bytes, axis=1, count=cols, bitorder="little")
    return bits.astype(bool)


class BitMatrix:
    """Immutable ``rows x cols`` Boolean matrix backed by packed words."""

    __slots__ = ("rows", "cols", "words")

    def __init__(self, rows: int, cols: int, words: np.ndarray | None = None):
        if rows < 0 or cols < 0:
            raise ValueError("rows and cols must be non-negative")
        nw = n_words(cols)
        if rows * nw > MAX_WORDS:
            raise OverflowError(f"{rows}x{cols} bit matrix exceeds addressable size")
        if words is None:
            words = np.zeros((rows, nw), dtype=WORD_DTYPE)
        else:
            words = np.ascontiguousarray(words, dtype=WORD_DTYPE)
            if words.shape != (rows, nw):
                raise ValueError(f"payload shape {words.shape} != {(rows, nw)}")
        words.flags.writeable = False
        self.rows = rows
        self.cols = cols
        self.words = words

    # -- construction -----------------------------------------------------

    @classmethod
    def from_bits(cls, bits) -> "BitMatrix":
        arr = np.asarray(bits, dtype=bool)
        if arr.ndim == 1:
            arr = arr.reshape(1, -1)
        if arr.ndim != 2:
            raise ValueError(f"expected 2-D bits, got shape {arr.shape}")
        return cls(arr.shape[0], arr.shape[1], pack_bits(arr))

    @classmethod
    def _wrap(cls, rows: int, cols: int, words: np.ndarray) -> "BitMatrix":
        """Adopt ``words`` without copying; caller guarantees zero pad bits."""
        obj = cls.__new__(cls)
        words.flags.writeable = False
        obj.rows, obj.cols, obj.words = rows, cols, words
        return obj

    @classmethod
    def from_vectors(cls, vectors: Sequence["BitVector"], cols: int | None = None) -> "BitMatrix":
        if not vectors:
            if cols is None:
                raise ValueError("cols required for an empty vector list")
            return cls(0, cols)
        width = vectors[0].len
        if any(v.len != width for v in vectors):
            raise ValueError("vectors have different lengths")
        return cls(len(vectors), width, np.stack([v.words for v in vectors]))

    # -- access -----------------------------------------------------------

    @property
    def shape(self) -> tuple[int, int]:
        return (self.rows, self.cols)

    def get(self, i: int, j: int) -> bool:
        if not (0 <= i < self.rows and 0 <= j < self.cols):
            raise IndexError((i, j))
        return bool((int(self.words[i, j // WORD_BITS]) >> (j % WORD_BITS)) & 1)

    def set(self, i: int, j: int, value: bool) -> "BitMatrix":
        """Return a copy with bit (i, j) replaced."""
        if not (0 <= i < self.rows and 0 <= j < self.cols):
            raise IndexError((i, j))
        words = self.words.copy()
        bit = np.uint64(1 << (j % WORD_BITS))
        if value:
            words[i, j // WORD_BITS] |= bit
        else:
            words[i, j // WORD_BITS] &= ~bit
        return BitMatrix._wrap(self.rows, self.cols, words)

    def row(self, i: int) -> "BitVector":
        if not 0 <= i < self.rows:
            raise IndexError(i)
        return BitVector._wrap(self.cols, self.words[i])

    def __iter__(self):
        return (self.row(i) for i in range(self.rows))

    def __len__(self) -> int:
        return self.rows

    def take(self, indices) -> "BitMatrix":
        idx = np.asarray(indices, dtype=np.intp)
        return BitMatrix._wrap(len(idx), self.cols, self.words[idx])

    def to_bool(self) -> np.ndarray:
        return unpack_bits(self.words, self.cols)

    def tolist(self) -> list[list[int]]:
        return self.to_bool().astype(int).tolist()

    def popcount(self) -> int:
        return int(np.bitwise_count(self.words).sum())

    def any(self) -> bool:
        return bool(self.words.any())

    def __eq__(self, other) -> bool:
        if not isinstance(other, BitMatrix):
            return NotImplemented
        return self.shape == other.shape and np.array_equal(self.words, other.words)

    __hash__ = None

    def __repr__(self) -> str:
        if self.rows * self.cols <= 256:
            return f"BitMatrix({self.tolist()})"
        return f"BitMatrix<{self.rows}x{self.cols}>"

    # operator sugar, same-shape only
    def __xor__(self, other):
        return elementwise(XOR, self, other)

    def __and__(self, other):
        return elementwise(AND, self, other)

    def __or__(self, other):
        return elementwise(OR, self, other)

    def __invert__(self) -> "BitMatrix":
        words = ~self.words
        if self.cols % WORD_BITS and words.size:
            words[:, -1] &= _tail_mask(self.cols)
        return BitMatrix._wrap(self.rows, self.cols, words)


class BitVector:
    """Immutable 1 x ``len`` Boolean row vector."""

    __slots__ = ("len", "words")

    def __init__(self, length: int, words: np.ndarray | None = None):
        if length < 0:
            raise ValueError("length must be non-negative")
        nw = n_words(length)
        if words is None:
            words = np.zeros(nw, dtype=WORD_DTYPE)
        else:
            words = np.array(words, dtype=WORD_DTYPE).reshape(-1)
            if words.shape != (nw,):
                raise ValueError(f"payload has {words.size} words, expected {nw}")
        words.flags.writeable = False
        self.len = length
        self.words = words

    @classmethod
    def from_bits(cls, bits) -> "BitVector":
        arr = np.asarray(bits, dtype=bool).reshape(-1)
        return cls._wrap(arr.size, pack_bits(arr.reshape(1, -1))[0])

    @classmethod
    def from_int(cls, value: int, length: int) -> "BitVector":
        if value < 0 or value >> length:
            raise ValueError("value does not fit in length bits")
        raw = value.to_bytes(n_words(length) * 8, "little")
        return cls._wrap(length, np.frombuffer(raw, dtype=WORD_DTYPE).copy())

    @classmethod
    def _wrap(cls, length: int, words: np.ndarray) -> "BitVector":
        obj = cls.__new__(cls)
        if words.flags.writeable:
            words.flags.writeable = False
        obj.len, obj.words = length, words
        return obj

    @classmethod
    def zeros(cls, length: int) -> "BitVector":
        return cls(length)

    def __len__(self) -> int:
        return self.len

    def get(self, i: int) -> bool:
        if not 0 <= i < self.len:
            raise IndexError(i)
        return bool((int(self.words[i // WORD_BITS]) >> (i % WORD_BITS)) & 1)

    __getitem__ = get

    def set(self, i: int, value: bool) -> "BitVector":
        return self.as_matrix().set(0, i, value).row(0)

    def as_matrix(self) -> BitMatrix:
        return BitMatrix._wrap(1, self.len, self.words.reshape(1, -1))

    def to_int(self) -> int:
        return int.from_bytes(self.words.tobytes(), "little")

    def to_bool(self) -> np.ndarray:
        return unpack_bits(self.words.reshape(1, -1), self.len)[0]

    def tolist(self) -> list[int]:
        return self.to_bool().astype(int).tolist()

    def popcount(self) -> int:
        return int(np.bitwise_count(self.words).sum())

    def set_bits(self) -> list[int]:
        return np.flatnonzero(self.to_bool()).tolist()

    def any(self) -> bool:
        return bool(self.words.any())

    def __eq__(self, other) -> bool:
        if not isinstance(other, BitVector):
            return NotImplemented
        return self.len == other.len and np.array_equal(self.words, other.words)

    __hash__ = None

    def __repr__(self) -> str:
        if self.len <= 128:
            return f"BitVector({self.tolist()})"
        return f"BitVector<{self.len}>"

    def __xor__(self, other):
        return elementwise(XOR, self, other)

    def __and__(self, other):
        return elementwise(AND, self, other)

    def __or__(self, other):
        return elementwise(OR, self, other)

    def __invert__(self) -> "BitVector":
        return (~self.as_matrix()).row(0)


Bits = Union[BitMatrix, BitVector]


def as_rows(x: Bits) -> np.ndarray:
    """Packed words of ``x`` as a 2-D array (a vector becomes one row)."""
    if isinstance(x, BitVector):
        return x.words.reshape(1, -1)
    return x.words


def broadcast_pair(a: Bits, b: Bits) -> tuple[np.ndarray, np.ndarray, int, int]:
    """Return (a_words, b_words, rows, cols) with numpy-level broadcasting.

    A vector (or a 1-row matrix) pairs with an m-row matrix by row reuse; no
    copies are materialised.
    """
    ca = a.len if isinstance(a, BitVector) else a.cols
    cb = b.len if isinstance(b, BitVector) else b.cols
    if ca != cb:
        raise ValueError(f"column mismatch: {ca} vs {cb}")
    wa, wb = as_rows(a), as_rows(b)
    ra, rb = wa.shape[0], wb.shape[0]
    if ra != rb and ra != 1 and rb != 1:
        raise ValueError(f"row mismatch: {ra} vs {rb} and neither is a row vector")
    return wa, wb, rb if ra == 1 else ra, ca


def make_matrix(rows: int, cols: int, fill: bool | int = 0) -> BitMatrix:
    m = BitMatrix(rows, cols)
    if not fill or rows == 0 or cols == 0:
        return m
    words = np.full((rows, n_words(cols)), np.uint64(0xFFFFFFFFFFFFFFFF), dtype=WORD_DTYPE)
    words[:, -1] = _tail_mask(cols)
    return BitMatrix._wrap(rows, cols, words)


def elementwise(op: str, a: Bits, b: Bits) -> Bits:
    """Apply XOR/AND/OR/ANDNOT bitwise; ANDNOT is ``a & ~b``.

    Two vectors give a vector; anything involving a matrix gives a matrix,
    with a row vector broadcast across the other operand's rows.
    """
    wa, wb, rows, cols = broadcast_pair(a, b)
    if op == XOR:
        out = wa ^ wb
    elif op == AND:
        out = wa & wb
    elif op == OR:
        out = wa | wb
    elif op == ANDNOT:
        out = wa & ~wb
    else:
        raise ValueError(f"unknown op {op!r}; expected one of {OPS}")
    # pad bits stay zero for all four ops since both inputs have zero pads
    out = np.ascontiguousarray(out)
    if isinstance(a, BitVector) and isinstance(b, BitVector):
        return BitVector._wrap(cols, out[0])
    return BitMatrix._wrap(out.shape[0], cols, out)


def popcount_rows(a: Bits) -> list[int]:
    return np.bitwise_count(as_rows(a)).sum(axis=1, dtype=np.int64).tolist()


def concat_rows(a: BitMatrix, b: BitMatrix) -> BitMatrix:
    if isinstance(a, BitVector):
        a = a.as_matrix()
    if isinstance(b, BitVector):
        b = b.as_matrix()
    if a.cols != b.cols:
        raise ValueError(f"column mismatch: {a.cols} vs {b.cols}")
    return BitMatrix._wrap(a.rows + b.rows, a.cols, np.concatenate([a.words, b.words], axis=0))


def stack_rows(parts: Iterable[BitMatrix], cols: int) -> BitMatrix:
    blocks = [as_rows(p) for p in parts]
    if not blocks:
        return BitMatrix(0, cols)
    words = np.concatenate(blocks, axis=0)
    return BitMatrix._wrap(words.shape[0], cols, words)


class Rng:
    """Seeded counter-based generator identified by ``(seed, stream)``.

    Backed by Philox with the 128-bit key ``(seed, stream)``, so a given pair
    produces the same sequence on every platform. ``child`` derives an
    independent stream from a tuple of integer keys.
    """

    def __init__(self, seed: int, stream: int = 0):
        self.seed = int(seed) & 0xFFFFFFFFFFFFFFFF
        self.stream = int(stream) & 0xFFFFFFFFFFFFFFFF
        self._gen = np.random.Generator(np.random.Philox(key=[self.seed, self.stream]))

    def child(self, *keys: int) -> "Rng":
        h = hashlib.blake2b(digest_size=8)
        h.update(self.stream.to_bytes(8, "little"))
        for k in keys:
            h.update(int(k).to_bytes(8, "little", signed=True))
        return Rng(self.seed, int.from_bytes(h.digest(), "little"))

    def random(self, size=None):
        return self._gen.random(size)

    def integers(self, low, high=None, size=None):
        return self._gen.integers(low, high, size=size)

    def permutation(self, n: int) -> np.ndarray:
        return self._gen.permutation(n)

    def __repr__(self) -> str:
        return f"Rng(seed={self.seed}, stream={self.stream})"


def random_matrix(rng: Rng, rows: int, cols: int, density: float) -> BitMatrix:
    if not 0.0 <= density <= 1.0:
        raise ValueError(f"density must be in [0, 1], got {density}")
    if rows == 0 or cols == 0:
        return BitMatrix(rows, cols)
    words = pack_bits(rng.random((rows, cols)) < density)
    return BitMatrix._wrap(rows, cols, words)


def masked_or(select: np.ndarray, rows: BitMatrix) -> BitMatrix:
    """Row r of the result is the OR of ``rows[s]`` over all s with select[r, s].

    A Boolean matrix product over (OR, AND); ``select`` has shape (r, rows.rows).
    """
    select = np.asarray(select, dtype=bool)
    if select.ndim != 2 or select.shape[1] != rows.rows:
        raise ValueError(f"selector shape {select.shape} incompatible with {rows.rows} rows")
    r, nw = select.shape[0], rows.words.shape[1]
    out = np.zeros((r, nw), dtype=WORD_DTYPE)
    if r == 0 or rows.rows == 0 or nw == 0:
        return BitMatrix._wrap(r, rows.cols, out)
    step = max(1, (1 << 22) // max(1, rows.rows * nw))
    for s in range(0, r, step):
        sel = select[s:s + step]
        picked = np.where(sel[:, :, None], rows.words[None, :, :], np.uint64(0))
        out[s:s + step] = np.bitwise_or.reduce(picked, axis=1)
    return BitMatrix._wrap(r, rows.cols, out)
