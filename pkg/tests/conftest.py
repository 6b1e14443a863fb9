import numpy as np
import pytest

from adabox.grid import BoundingBox, DensityGrid


def grid_from_counts(counts):
    """Unit-cell grid over [0, n]^2 with the given count matrix and no points."""
    counts = np.asarray(counts, dtype=np.int64)
    n = counts.shape[0]
    return DensityGrid(BoundingBox(0.0, 0.0, float(n), float(n)), n, 1.0, 1.0,
                       counts, np.zeros((0, 2), dtype=np.int64))


@pytest.fixture
def make_grid():
    return grid_from_counts
