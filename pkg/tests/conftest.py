import numpy as np
import pytest

from randersgeo.grid import Grid2D, Image, Polyline


@pytest.fixture
def grid100():
    return Grid2D(100, 100)


@pytest.fixture
def circle():
    def make(center, radius, n=240):
        t = np.linspace(0, 2 * np.pi, n, endpoint=False)
        return Polyline(np.column_stack([center[0] + radius * np.cos(t),
                                         center[1] + radius * np.sin(t)]),
                        True)
    return make


@pytest.fixture
def flat_image():
    def make(size=64, value=0.5, channels=1):
        g = Grid2D(size, size)
        if channels == 1:
            return Image(g, 1, np.full(g.shape, value))
        return Image(g, 3, np.full(g.shape + (3,), value))
    return make
