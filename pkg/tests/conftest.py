import os
from pathlib import Path

import pytest

from bbnn.bitcore import BitMatrix, BitVector


def bm(rows):
    return BitMatrix.from_bits(rows)


def bv(bits):
    return BitVector.from_bits(bits)


def mnist_dir():
    """MNIST IDX directory from $BBNN_MNIST_DIR, else a few conventional spots."""
    candidates = [os.environ.get("BBNN_MNIST_DIR"), "/root/mnist", "data/mnist", str(Path.home() / "mnist")]
    for c in candidates:
        if c and (Path(c) / "train-images-idx3-ubyte").exists() or c and (Path(c) / "train-images-idx3-ubyte.gz").exists():
            return Path(c)
    return None


@pytest.fixture
def worked_xw():
    x = bv([1, 0, 1, 0])
    w = bm([[0, 0, 0, 0], [0, 1, 0, 1], [1, 0, 1, 0]])
    return x, w
