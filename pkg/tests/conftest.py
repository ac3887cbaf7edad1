import numpy as np
import pytest

from salshift.imaging import MaskLayer, RasterImage


def pytest_terminal_summary(terminalreporter):
    """Echo one line per acceptance criterion in the run summary."""
    try:
        from test_acceptance import OUTCOMES
    except ImportError:
        return
    if OUTCOMES:
        terminalreporter.section("acceptance criteria")
        for line in OUTCOMES:
            terminalreporter.write_line(line)


@pytest.fixture
def rng():
    return np.random.default_rng(20240817)


def random_image(rng, height=32, width=32):
    return RasterImage(rng.random((height, width, 3)))


def random_binary_mask(rng, height=32, width=32):
    """Non-empty, non-full binarized mask."""
    while True:
        weights = (rng.random((height, width)) < rng.uniform(0.2, 0.8)).astype(float)
        if 0 < weights.sum() < weights.size:
            return MaskLayer(weights)


def random_soft_mask(rng, height=32, width=32):
    return MaskLayer(rng.random((height, width)))


def disc_mask(height, width, cy, cx, radius):
    yy, xx = np.mgrid[0:height, 0:width]
    return MaskLayer(((yy - cy) ** 2 + (xx - cx) ** 2 <= radius * radius).astype(float))


def patch_image(height=256, width=256, bg=0.5, patch=(0.55, 0.53, 0.52), cy=128, cx=150, radius=36):
    """Uniform background with a low-contrast disc."""
    arr = np.full((height, width, 3), float(bg))
    yy, xx = np.mgrid[0:height, 0:width]
    disc = (yy - cy) ** 2 + (xx - cx) ** 2 <= radius * radius
    arr[disc] = patch
    return RasterImage(arr), MaskLayer(disc.astype(float))
