import numpy as np
import pytest

from regtrack import GrayImage, gaussian_smooth, texture_image


@pytest.fixture(scope="session")
def textured():
    """A 256x256 smooth random texture rich in gradients."""
    return texture_image(256, 256, seed=7)


@pytest.fixture(scope="session")
def textured_smoothed(textured):
    return gaussian_smooth(textured)


@pytest.fixture(scope="session")
def box100():
    """Axis-aligned 100x100 box centered in the 256x256 texture."""
    return np.array([[78.0, 78.0], [178.0, 78.0], [178.0, 178.0], [78.0, 178.0]])


@pytest.fixture()
def ramp_image():
    """I(x, y) = 3x + 2y on a 32x32 canvas."""
    xs, ys = np.meshgrid(np.arange(32, dtype=float), np.arange(32, dtype=float))
    return GrayImage(3.0 * xs + 2.0 * ys)
