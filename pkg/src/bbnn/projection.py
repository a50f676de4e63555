"""Error Projection: pick fixing masks (I rows) without spoiling protected outputs.

A protecting row ``c`` of C is spoiled when the combined mask D covers it
entirely (``c & D == c``). The exact solver finds the largest subset of I rows
whose union spoils no C row; the greedy solver is a fast, possibly sub-maximal
fallback; the specialized form is a column-wise formula used when every row
stands for a single-bit flip.

Normalization applied by the exact and greedy solvers:

* all-zero C rows are dropped (no flip can spoil those outputs);
* all-zero I rows are dropped (they fix nothing);
* I rows that on their own cover some C row are dropped (never feasible).

``chosen`` always reports indices into the caller's original I.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .bitcore import BitMatrix, BitVector, Rng

DEFAULT_EXACT_LIMIT = 20


class ProjectionTooLarge(ValueError):
    """Raised by :func:`project_exact` when the candidate count exceeds the limit."""


@dataclass(frozen=True)
class ProjectionProblem:
    C: BitMatrix
    I: BitMatrix

    def __post_init__(self):
        if self.C.cols != self.I.cols:
            raise ValueError(f"C has {self.C.cols} columns but I has {self.I.cols}")

    @property
    def n(self) -> int:
        return self.I.cols


def _row_ints(m: BitMatrix) -> list[int]:
    return [int.from_bytes(m.words[i].tobytes(), "little") for i in range(m.rows)]


def _normalize(problem: ProjectionProblem) -> tuple[list[int], list[tuple[int, int]]]:
    """Return (multi-bit C rows, feasible I candidates as (index, mask))."""
    forbidden = 0
    c_rows = []
    for c in set(_row_ints(problem.C)):
        if c == 0:
            continue
        if c & (c - 1) == 0:
            # a one-hot C row just forbids that bit
            forbidden |= c
        else:
            c_rows.append(c)
    c_rows.sort()
    cands = []
    for idx, r in enumerate(_row_ints(problem.I)):
        if r == 0 or r & forbidden:
            continue
        if any(r & c == c for c in c_rows):
            continue
        cands.append((idx, r))
    # drop C rows that no surviving candidate touches
    touched = 0
    for _, r in cands:
        touched |= r
    c_rows = [c for c in c_rows if c & touched]
    return c_rows, cands


def _feasible(d: int, c_rows: list[int]) -> bool:
    for c in c_rows:
        if d & c == c:
            return False
    return True


def _to_vector(d: int, n: int) -> BitVector:
    return BitVector.from_int(d, n)


def candidate_count(problem: ProjectionProblem) -> int:
    """Number of I rows left after normalization; what ``limit`` is compared to."""
    return len(_normalize(problem)[1])


def project_exact(problem: ProjectionProblem, limit: int = DEFAULT_EXACT_LIMIT) -> tuple[BitVector, frozenset[int]]:
    """Maximum-cardinality feasible subset of I by branch and bound.

    Ties between equally large subsets go to the lexicographically smallest
    sorted index tuple: the search includes rows before excluding them and in
    ascending index order, and only replaces the incumbent on strict
    improvement.
    """
    c_rows, cands = _normalize(problem)
    q = len(cands)
    if q > limit:
        raise ProjectionTooLarge(f"{q} candidate rows exceed the exact limit {limit}")

    best: list = [0, -1, ()]  # [mask, size, indices]
    chosen: list[int] = []

    def search(pos: int, d: int) -> None:
        if len(chosen) + (q - pos) <= best[1]:
            return
        if pos == q:
            best[0], best[1], best[2] = d, len(chosen), tuple(chosen)
            return
        idx, r = cands[pos]
        nd = d | r
        if nd == d:
            # already covered by D: including it is free and dominates skipping it
            chosen.append(idx)
            search(pos + 1, d)
            chosen.pop()
            return
        if _feasible(nd, c_rows):
            chosen.append(idx)
            search(pos + 1, nd)
            chosen.pop()
        search(pos + 1, d)

    search(0, 0)
    return _to_vector(best[0], problem.n), frozenset(best[2])


def project_greedy(problem: ProjectionProblem) -> tuple[BitVector, frozenset[int]]:
    """Accept I rows in (popcount, index) order while the union stays feasible."""
    c_rows, cands = _normalize(problem)
    order = sorted(cands, key=lambda t: (t[1].bit_count(), t[0]))
    d = 0
    chosen = []
    for idx, r in order:
        nd = d | r
        if nd == d or _feasible(nd, c_rows):
            d = nd
            chosen.append(idx)
    return _to_vector(d, problem.n), frozenset(chosen)


def project(problem: ProjectionProblem, strategy: str = "auto", limit: int = DEFAULT_EXACT_LIMIT):
    """Dispatch on ``strategy`` in {exact, greedy, auto}; returns (D, chosen)."""
    if strategy == "greedy":
        return project_greedy(problem)
    if strategy == "exact":
        return project_exact(problem, limit)
    if strategy == "auto":
        try:
            return project_exact(problem, limit)
        except ProjectionTooLarge:
            return project_greedy(problem)
    raise ValueError(f"unknown projection strategy {strategy!r}")


def project_specialized(problem: ProjectionProblem) -> BitVector:
    """D_j = (OR_i I_ij) AND NOT (OR_i C_ij)."""
    union_i = np.bitwise_or.reduce(problem.I.words, axis=0) if problem.I.rows else None
    if union_i is None:
        return BitVector(problem.n)
    if problem.C.rows:
        union_i = union_i & ~np.bitwise_or.reduce(problem.C.words, axis=0)
    return BitVector._wrap(problem.n, union_i)


def retain_one(d: BitVector, rng: Rng) -> BitVector:
    """Keep one uniformly chosen set bit when more than one is set."""
    bits = d.set_bits()
    if len(bits) <= 1:
        return d
    keep = bits[int(rng.integers(len(bits)))]
    return BitVector.from_int(1 << keep, d.len)


def retain_one_rows(bits: np.ndarray, u: np.ndarray) -> np.ndarray:
    """Row-wise retain-one on a bool (r, n) array driven by uniforms ``u`` (r,).

    Row r keeps its ``floor(u[r] * popcount)``-th set bit; rows with at most
    one set bit pass through.
    """
    counts = bits.sum(axis=1)
    pick = np.minimum((u * counts).astype(np.int64), np.maximum(counts - 1, 0))
    rank = np.cumsum(bits, axis=1)
    keep = bits & (rank == (pick + 1)[:, None])
    return np.where((counts > 1)[:, None], keep, bits)
