"""Activation Sensitivity: which argument bits can flip a Row Activation output.

For ``Z = row_activation(A, B)``:

* positive rows (Z_i = 0): any single bit j with B_ij = 1 flips Z_i when A_ij is
  set, so the row is B_i;
* negative rows (Z_i = 1): every active conjunct A_ij AND B_ij has to be cleared,
  so the row is A_i AND B_i;
* specialized rows keep the positive rows and only those negative rows with a
  single active conjunct.

These closed forms are what the functions below compute. The literal
flip-and-re-evaluate definitions live in :mod:`bbnn.oracle`.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .bitcore import WORD_DTYPE, BitMatrix, BitVector, Bits, broadcast_pair


@dataclass(frozen=True)
class SensitivityPair:
    positive: BitMatrix
    negative: BitMatrix


def _prepare(a: Bits, b: Bits):
    wa, wb, rows, cols = broadcast_pair(a, b)
    conj = np.broadcast_to(wa & wb, (rows, wa.shape[1]))
    counts = np.bitwise_count(conj).sum(axis=1)
    wb_full = np.broadcast_to(wb, (rows, wb.shape[1]))
    return wb_full, conj, counts, rows, cols


def _select_rows(mask: np.ndarray, words: np.ndarray, rows: int, cols: int) -> BitMatrix:
    out = np.where(mask[:, None], words, np.uint64(0)).astype(WORD_DTYPE, copy=False)
    return BitMatrix._wrap(rows, cols, np.ascontiguousarray(out))


def pos_sensitivity(a: Bits, b: Bits) -> BitMatrix:
    """S+(A, B): row i is B_i where Z_i = 0, else zero."""
    wb, _, counts, rows, cols = _prepare(a, b)
    return _select_rows(counts == 0, wb, rows, cols)


def neg_sensitivity(a: Bits, b: Bits) -> BitMatrix:
    """S-(A, B): row i is A_i AND B_i where Z_i = 1, else zero."""
    _, conj, counts, rows, cols = _prepare(a, b)
    return _select_rows(counts > 0, conj, rows, cols)


def sensitivity_pair(a: Bits, b: Bits) -> SensitivityPair:
    wb, conj, counts, rows, cols = _prepare(a, b)
    return SensitivityPair(
        _select_rows(counts == 0, wb, rows, cols),
        _select_rows(counts > 0, conj, rows, cols),
    )


def full_sensitivity(a: Bits, b: Bits) -> BitMatrix:
    pair = sensitivity_pair(a, b)
    return pair.positive | pair.negative


def specialized_sensitivity(a: Bits, b: Bits) -> BitMatrix:
    """S*(A, B): bits whose individual flip changes Z_i."""
    wb, conj, counts, rows, cols = _prepare(a, b)
    out = np.where((counts == 0)[:, None], wb, np.where((counts == 1)[:, None], conj, np.uint64(0)))
    return BitMatrix._wrap(rows, cols, np.ascontiguousarray(out, dtype=WORD_DTYPE))


def selection_expansion(s: BitVector) -> BitMatrix:
    """One one-hot row per set bit of ``s``, in ascending bit order."""
    idx = s.set_bits()
    bits = np.zeros((len(idx), s.len), dtype=bool)
    bits[np.arange(len(idx)), idx] = True
    return BitMatrix.from_bits(bits) if idx else BitMatrix(0, s.len)
