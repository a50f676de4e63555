import numpy as np
import pytest

from bbnn.bitcore import BitMatrix, Rng, make_matrix, random_matrix
from bbnn.layers import row_activation
from bbnn.oracle import flip_sensitivity, naive_selection_expansion
from bbnn.sensitivity import (
    full_sensitivity, neg_sensitivity, pos_sensitivity, selection_expansion, sensitivity_pair,
    specialized_sensitivity,
)

from conftest import bm, bv

FUNCS = {
    "positive": pos_sensitivity,
    "negative": neg_sensitivity,
    "specialized": specialized_sensitivity,
    "full": full_sensitivity,
}


def test_worked_full_sensitivity(worked_xw):
    x, w = worked_xw
    assert full_sensitivity(x, w) == bm([[0, 0, 0, 0], [0, 1, 0, 1], [1, 0, 1, 0]])
    assert full_sensitivity(w, x) == bm([[1, 0, 1, 0]] * 3)
    assert full_sensitivity(make_matrix(2, 3, 0), make_matrix(2, 3, 0)) == make_matrix(2, 3, 0)


def test_positive_examples(worked_xw):
    x, w = worked_xw
    assert pos_sensitivity(x, w) == bm([[0, 0, 0, 0], [0, 1, 0, 1], [0, 0, 0, 0]])
    assert pos_sensitivity(w, x) == bm([[1, 0, 1, 0], [1, 0, 1, 0], [0, 0, 0, 0]])
    assert pos_sensitivity(bv([1, 1]), bm([[1, 0], [0, 1]])) == make_matrix(2, 2, 0)


def test_negative_examples(worked_xw):
    x, w = worked_xw
    assert neg_sensitivity(x, w) == bm([[0, 0, 0, 0], [0, 0, 0, 0], [1, 0, 1, 0]])
    assert neg_sensitivity(bv([0, 0]), bm([[1, 1]])) == bm([[0, 0]])
    assert neg_sensitivity(bv([1, 1]), bv([1, 0])) == bm([[1, 0]])


def test_specialized_examples(worked_xw):
    x, w = worked_xw
    assert specialized_sensitivity(x, w) == bm([[0, 0, 0, 0], [0, 1, 0, 1], [0, 0, 0, 0]])
    assert specialized_sensitivity(bv([1, 0]), bv([1, 1])) == bm([[1, 0]])
    rng = Rng(4)
    for t in range(30):
        a, b = random_matrix(rng.child(t), 5, 40, 0.05), random_matrix(rng.child(t, 1), 5, 40, 0.3)
        z = row_activation(a, b)
        spec, pos = specialized_sensitivity(a, b), pos_sensitivity(a, b)
        for i in range(5):
            if not z.get(i):
                assert spec.row(i) == pos.row(i)


def test_shape_mismatch():
    for fn in FUNCS.values():
        with pytest.raises(ValueError):
            fn(bm([[1, 0], [0, 1]]), bm([[1, 0], [0, 1], [1, 1]]))


def test_pair_is_rowwise_disjoint():
    rng = Rng(8)
    for t in range(50):
        pair = sensitivity_pair(random_matrix(rng.child(t), 6, 20, 0.2), random_matrix(rng.child(t, 1), 1, 20, 0.5))
        both = pair.positive.to_bool().any(axis=1) & pair.negative.to_bool().any(axis=1)
        assert not both.any()


def _all_cases(max_m=3, max_n=4, max_bits=8):
    for m in range(1, max_m + 1):
        for n in range(1, max_n + 1):
            if m * n > max_bits:
                continue
            for av in range(1 << n):
                a = bv([(av >> j) & 1 for j in range(n)])
                for wv in range(1 << (m * n)):
                    w = bm(np.array([(wv >> j) & 1 for j in range(m * n)]).reshape(m, n))
                    yield a, w


@pytest.mark.parametrize("kind", list(FUNCS))
def test_against_flip_oracle_exhaustive(kind):
    fn = FUNCS[kind]
    for a, w in _all_cases():
        assert fn(a, w) == flip_sensitivity(a, w, kind)
        assert fn(w, a) == flip_sensitivity(w, a, kind)


def test_specialized_random_wide():
    rng = Rng(21)
    for t in range(100):
        r = rng.child(t)
        a, b = random_matrix(r, 2, 100, 0.02), random_matrix(r, 2, 100, 0.5)
        assert specialized_sensitivity(a, b) == flip_sensitivity(a, b, "specialized")


def _z(a, b, i):
    return row_activation(a, b).get(i)


def test_positive_negative_flip_semantics():
    """Sensitivities predict flips of Z, and of Y = Z xor b for either bias."""
    rng = Rng(13)
    for t in range(60):
        r = rng.child(t)
        a, b = random_matrix(r, 3, 6, 0.3), random_matrix(r, 3, 6, 0.5)
        pos, neg = pos_sensitivity(a, b), neg_sensitivity(a, b)
        z = row_activation(a, b)
        for i in range(3):
            for j in range(6):
                if not z.get(i) and not a.get(i, j):
                    flipped = _z(a.set(i, j, True), b, i)
                    assert flipped == pos.get(i, j)
                    for bias in (0, 1):
                        assert ((z.get(i) ^ bias) != (flipped ^ bias)) == pos.get(i, j)
            if z.get(i):
                row = neg.row(i).set_bits()
                cleared = a
                for j in row:
                    cleared = cleared.set(i, j, False)
                assert not _z(cleared, b, i)
                for skip in row:
                    partial = a
                    for j in row:
                        if j != skip:
                            partial = partial.set(i, j, False)
                    assert _z(partial, b, i)


def test_selection_expansion():
    assert selection_expansion(bv([0, 1, 0, 1])) == bm([[0, 1, 0, 0], [0, 0, 0, 1]])
    empty = selection_expansion(bv([0, 0, 0]))
    assert empty.shape == (0, 3)
    assert selection_expansion(bv([1])) == bm([[1]])


def test_selection_expansion_or_roundtrip_and_oracle():
    rng = Rng(17)
    for t in range(100):
        s = random_matrix(rng.child(t), 1, int(rng.child(t, 1).integers(1, 150)), 0.3).row(0)
        e = selection_expansion(s)
        assert e == naive_selection_expansion(s)
        union = np.bitwise_or.reduce(e.words, axis=0) if e.rows else np.zeros_like(s.words)
        assert np.array_equal(union, s.words)
