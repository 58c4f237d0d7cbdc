import numpy as np
import pytest


def smooth_image(rng, shape=(1, 16, 12)):
    """Random image in [0, 1] with some low-rank structure plus noise."""
    c, h, w = shape
    out = []
    for _ in range(c):
        base = np.outer(rng.random(h), rng.random(w)) + 0.3 * np.outer(rng.random(h), rng.random(w))
        base = base / base.max() * 0.8 + 0.1 * rng.random((h, w))
        out.append(base)
    return np.clip(np.stack(out), 0.0, 1.0).astype(np.float32)


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


@pytest.fixture
def image_suite():
    """16 fixed images: grayscale and RGB, square and non-square."""
    r = np.random.default_rng(7)
    shapes = [(1, 16, 16), (1, 12, 20), (3, 16, 16), (1, 20, 12)] * 4
    return [smooth_image(r, s) for s in shapes]
