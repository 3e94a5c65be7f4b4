import numpy as np
import pytest

from innabs.network import InnNetwork, InputBox, random_network


def random_shape(rng, max_layers=4, max_width=6):
    n_layers = int(rng.integers(2, max_layers + 1))
    return [int(rng.integers(2, max_width + 1)) for _ in range(n_layers)]


def random_box(rng, n, limit=1.0):
    a = rng.uniform(-limit, limit, n)
    b = rng.uniform(-limit, limit, n)
    return InputBox(np.minimum(a, b), np.maximum(a, b))


def tiny(w, b):
    """Single-layer net from nested lists of (lo, hi) pairs."""
    w = np.asarray(w, dtype=float)
    b = np.asarray(b, dtype=float)
    return InnNetwork([w[..., 0]], [w[..., 1]], [b[..., 0]], [b[..., 1]])


@pytest.fixture
def rng():
    return np.random.default_rng(0)


@pytest.fixture
def pair_net():
    # Two inputs, two hidden nodes, one output; hidden-to-output weights 7, 10 and 8, 11.
    w0 = np.array([[1.0, 1.0], [1.0, 1.0]])
    w1 = np.array([[7.0], [10.0]])
    return InnNetwork.from_concrete([w0, w1], [np.zeros(2), np.zeros(1)])


__all__ = ["random_shape", "random_box", "tiny", "random_network"]
