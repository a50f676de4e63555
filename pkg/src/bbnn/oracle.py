"""Brute-force reference implementations.

Everything here works on plain Python lists of 0/1 and re-evaluates outputs
after literally flipping bits or enumerating subsets. Nothing is imported from
the optimized kernels; the bit types are only used to convert at the
boundary.
"""

from __future__ import annotations

from itertools import combinations

from .bitcore import BitMatrix, BitVector, Rng

MAX_BRUTEFORCE_ROWS = 12


def _rows(x) -> list[list[int]]:
    if isinstance(x, BitVector):
        return [x.tolist()]
    if isinstance(x, BitMatrix):
        return x.tolist()
    x = [list(map(int, r)) for r in x]
    return x


def _cols(x) -> int:
    if isinstance(x, BitVector):
        return x.len
    if isinstance(x, BitMatrix):
        return x.cols
    return len(x[0]) if x else 0


def _broadcast(a, b) -> tuple[list[list[int]], list[list[int]]]:
    ra, rb = _rows(a), _rows(b)
    if _cols(a) != _cols(b):
        raise ValueError("column mismatch")
    if len(ra) == 1 and len(rb) != 1:
        ra = [list(ra[0]) for _ in rb]
    elif len(rb) == 1 and len(ra) != 1:
        rb = [list(rb[0]) for _ in ra]
    if len(ra) != len(rb):
        raise ValueError("row mismatch")
    return ra, rb


def _z(a_row: list[int], b_row: list[int]) -> int:
    for p, q in zip(a_row, b_row):
        if p and q:
            return 1
    return 0


def naive_row_activation(x, w) -> BitVector:
    xs, ws = _broadcast(x, w)
    out = []
    for i in range(len(xs)):
        z = 0
        for j in range(len(xs[i])):
            if xs[i][j] == 1 and ws[i][j] == 1:
                z = 1
        out.append(z)
    return BitVector.from_bits(out)


def naive_gate(x: list[int], w: list[int], b: int) -> int:
    return _z(x, w) ^ b


def flip_sensitivity(a, b, kind: str) -> BitMatrix:
    """Sensitivity of Z = row_activation(A, B) to A, computed by flipping bits.

    positive:    Z_i = 0 and setting A_ij = 1 turns Z_i into 1;
    negative:    Z_i = 1 and no assignment of the row that keeps A_ij = 1
                 reaches Z_i = 0 (checked with every other bit cleared);
    specialized: toggling A_ij alone changes Z_i.
    """
    if kind not in ("positive", "negative", "specialized", "full"):
        raise ValueError(kind)
    if kind == "full":
        p = flip_sensitivity(a, b, "positive").tolist()
        q = flip_sensitivity(a, b, "negative").tolist()
        return BitMatrix.from_bits([[x | y for x, y in zip(r, s)] for r, s in zip(p, q)]) if p else BitMatrix(0, _cols(a))
    am, bm = _broadcast(a, b)
    out = []
    for i in range(len(am)):
        z = _z(am[i], bm[i])
        row = []
        for j in range(len(am[i])):
            if kind == "positive":
                trial = list(am[i])
                trial[j] = 1
                row.append(int(z == 0 and _z(trial, bm[i]) == 1))
            elif kind == "negative":
                if z == 0:
                    row.append(0)
                    continue
                # most favourable attempt at Z_i = 0 while A_ij stays 1
                trial = [0] * len(am[i])
                trial[j] = 1
                row.append(int(am[i][j] == 1 and _z(trial, bm[i]) == 1))
            else:
                trial = list(am[i])
                trial[j] ^= 1
                row.append(int(_z(trial, bm[i]) != z))
        out.append(row)
    if not out:
        return BitMatrix(0, _cols(a))
    return BitMatrix.from_bits(out)


def naive_selection_expansion(s) -> BitMatrix:
    bits = _rows(s)[0]
    out = []
    for i, v in enumerate(bits):
        if v:
            row = [0] * len(bits)
            row[i] = 1
            out.append(row)
    return BitMatrix.from_bits(out) if out else BitMatrix(0, len(bits))


def _covers(d: list[int], c: list[int]) -> bool:
    # C_i AND D == C_i
    return all((cj & dj) == cj for cj, dj in zip(c, d))


def projection_bruteforce(c, i) -> tuple[BitVector, frozenset[int]]:
    """Largest subset of I rows whose OR covers no nonzero C row.

    Enumerates subsets from largest to smallest in lexicographic order and
    returns the first feasible one. All-zero C rows and all-zero I rows are
    ignored.
    """
    crows = [r for r in _rows(c) if any(r)]
    irows = _rows(i)
    n = _cols(i)
    cand = [k for k, r in enumerate(irows) if any(r)]
    if len(cand) > MAX_BRUTEFORCE_ROWS:
        raise ValueError(f"{len(cand)} rows is too many to enumerate")
    for size in range(len(cand), -1, -1):
        for subset in combinations(cand, size):
            d = [0] * n
            for k in subset:
                d = [x | y for x, y in zip(d, irows[k])]
            if not any(_covers(d, r) for r in crows):
                return BitVector.from_bits(d) if n else BitVector(0), frozenset(subset)
    raise AssertionError("the empty subset is always feasible")


def naive_specialized_projection(c, i) -> BitVector:
    crows, irows = _rows(c), _rows(i)
    n = _cols(i)
    out = []
    for j in range(n):
        fix = any(r[j] for r in irows)
        spoil = any(r[j] for r in crows)
        out.append(int(fix and not spoil))
    return BitVector.from_bits(out)


def naive_forward(widths_weights: list[tuple[list[list[int]], list[int]]], x: list[int]) -> list[int]:
    """Reference forward pass over (W, B) given as nested lists."""
    for w, b in widths_weights:
        x = [_z(x, w[i]) ^ b[i] for i in range(len(w))]
    return x


def verify(rng: Rng, trials: int = 200) -> dict[str, int]:
    """Cross-check optimized kernels against the oracles on random instances.

    Returns the number of mismatches per check; all zeros means agreement.
    """
    from . import layers, projection, sensitivity
    from .bitcore import random_matrix

    kinds = {
        "positive": sensitivity.pos_sensitivity,
        "negative": sensitivity.neg_sensitivity,
        "specialized": sensitivity.specialized_sensitivity,
        "full": sensitivity.full_sensitivity,
    }
    fails = {"row_activation": 0, "expansion": 0, "projection": 0, **{k: 0 for k in kinds}}
    for t in range(trials):
        r = rng.child(t)
        m, n = int(r.integers(1, 5)), int(r.integers(1, 80))
        a = random_matrix(r, m, n, float(r.random()))
        b = random_matrix(r, 1 if t % 2 else m, n, float(r.random()))
        if layers.row_activation(a, b) != naive_row_activation(a, b):
            fails["row_activation"] += 1
        for k, fn in kinds.items():
            if fn(a, b) != flip_sensitivity(a, b, k):
                fails[k] += 1
        if sensitivity.selection_expansion(a.row(0)) != naive_selection_expansion(a.row(0)):
            fails["expansion"] += 1
        q, p, w = int(r.integers(0, 9)), int(r.integers(0, 5)), int(r.integers(1, 10))
        prob = projection.ProjectionProblem(random_matrix(r, p, w, 0.4), random_matrix(r, q, w, 0.3))
        if projection.project_exact(prob) != projection_bruteforce(prob.C, prob.I):
            fails["projection"] += 1
    return fails
