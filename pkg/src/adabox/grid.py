"""Adaptive density grid over 2D point sets.

The lattice is sized from the data's own bounding box, so every quantity
derived from it (cell counts, point-to-cell assignment) is unchanged by a
uniform rescaling or translation of the input.
"""

from __future__ import annotations

import functools
from dataclasses import dataclass

import numpy as np

from .errors import InvalidInput

DEFAULT_PADDING = 0.01

_NEIGHBOR_OFFSETS = tuple(
    (dr, dc) for dr in (-1, 0, 1) for dc in (-1, 0, 1) if (dr, dc) != (0, 0)
)


@dataclass(frozen=True)
class BoundingBox:
    min_x: float
    min_y: float
    max_x: float
    max_y: float

    @property
    def width(self) -> float:
        return self.max_x - self.min_x

    @property
    def height(self) -> float:
        return self.max_y - self.min_y


@dataclass
class DensityGrid:
    """Cell lattice with per-cell point counts.

    Attributes
    ----------
    bbox : BoundingBox
        Padded box the lattice covers.
    n_boxes : int
        Cells per dimension.
    cell_w, cell_h : float
        Cell size in data units.
    counts : ndarray of shape (n_boxes, n_boxes), dtype int64
        ``counts[row, col]`` is the number of points in the cell. Rows index y,
        columns index x.
    point_cell : ndarray of shape (n, 2), dtype int64
        ``(row, col)`` of each input point.
    """

    bbox: BoundingBox
    n_boxes: int
    cell_w: float
    cell_h: float
    counts: np.ndarray
    point_cell: np.ndarray

    @property
    def n_points(self) -> int:
        return int(self.point_cell.shape[0])

    def flat_index(self) -> np.ndarray:
        """Row-major cell index of every point."""
        return self.point_cell[:, 0] * self.n_boxes + self.point_cell[:, 1]

    def cell_center(self, row, col):
        x = self.bbox.min_x + (np.asarray(col) + 0.5) * self.cell_w
        y = self.bbox.min_y + (np.asarray(row) + 0.5) * self.cell_h
        return x, y


def as_points(points) -> np.ndarray:
    """Validate and convert input to a float64 array of shape (n, 2)."""
    arr = np.asarray(points, dtype=np.float64)
    if arr.ndim != 2 or arr.shape[0] == 0:
        if arr.size == 0:
            raise InvalidInput("at least one point is required")
        raise InvalidInput(f"expected an (n, 2) array of points, got shape {arr.shape}")
    if arr.shape[1] != 2:
        raise InvalidInput(
            f"points must be 2D, got d={arr.shape[1]}; reduce with pca_2d first"
        )
    if not np.all(np.isfinite(arr)):
        raise InvalidInput("points contain non-finite coordinates")
    return arr


def _padded_range(lo: float, hi: float, padding_fraction: float):
    extent = hi - lo
    if extent <= 0.0:
        # degenerate axis: unit extent centred on the constant value
        return lo - 0.5, hi + 0.5
    pad = padding_fraction * extent
    return lo - pad, hi + pad


def bounding_box(points: np.ndarray, padding_fraction: float = DEFAULT_PADDING) -> BoundingBox:
    min_x, min_y = points.min(axis=0)
    max_x, max_y = points.max(axis=0)
    lo_x, hi_x = _padded_range(float(min_x), float(max_x), padding_fraction)
    lo_y, hi_y = _padded_range(float(min_y), float(max_y), padding_fraction)
    return BoundingBox(lo_x, lo_y, hi_x, hi_y)


def _adaptive_bins(v: np.ndarray, n_boxes: int, padding_fraction: float) -> np.ndarray:
    """Cell index along one axis of the padded data range.

    Works on ``(v - min) / extent`` so that uniform scaling and translation
    leave the bins unchanged whenever those differences are exact.
    """
    lo, hi = float(v.min()), float(v.max())
    extent = hi - lo
    if extent <= 0.0:
        # degenerate axis: all points share the middle cell of a unit extent
        return np.floor((v - lo + 0.5) * n_boxes)
    t = (v - lo) / extent
    return np.floor((t + padding_fraction) * (n_boxes / (1.0 + 2.0 * padding_fraction)))


def build_grid(
    points,
    n_boxes: int,
    padding_fraction: float = DEFAULT_PADDING,
    bbox: BoundingBox | None = None,
) -> DensityGrid:
    """Bin points into an ``n_boxes`` x ``n_boxes`` lattice.

    The lattice spans the points' bounding box, padded by ``padding_fraction``
    of the extent on every side. Passing an explicit ``bbox`` disables the
    adaptive sizing; points outside it are clamped into the border cells.
    """
    pts = as_points(points)
    if int(n_boxes) != n_boxes or n_boxes < 2:
        raise InvalidInput(f"n_boxes must be an integer >= 2, got {n_boxes!r}")
    n_boxes = int(n_boxes)
    if not 0.0 < padding_fraction < 0.5:
        raise InvalidInput(f"padding_fraction must lie in (0, 0.5), got {padding_fraction}")
    adaptive = bbox is None
    if adaptive:
        bbox = bounding_box(pts, padding_fraction)
    elif not (bbox.max_x > bbox.min_x and bbox.max_y > bbox.min_y):
        raise InvalidInput("bounding box must have positive extent")

    cell_w = (bbox.max_x - bbox.min_x) / n_boxes
    cell_h = (bbox.max_y - bbox.min_y) / n_boxes
    if adaptive:
        col = _adaptive_bins(pts[:, 0], n_boxes, padding_fraction)
        row = _adaptive_bins(pts[:, 1], n_boxes, padding_fraction)
    else:
        col = np.floor((pts[:, 0] - bbox.min_x) / cell_w)
        row = np.floor((pts[:, 1] - bbox.min_y) / cell_h)
    col = np.clip(col, 0, n_boxes - 1).astype(np.int64)
    row = np.clip(row, 0, n_boxes - 1).astype(np.int64)

    flat = row * n_boxes + col
    counts = np.bincount(flat, minlength=n_boxes * n_boxes).reshape(n_boxes, n_boxes)
    point_cell = np.stack([row, col], axis=1)
    return DensityGrid(bbox, n_boxes, cell_w, cell_h, counts.astype(np.int64), point_cell)


def _moore(row: int, col: int, n_boxes: int) -> tuple:
    return tuple(
        (row + dr, col + dc)
        for dr, dc in _NEIGHBOR_OFFSETS
        if 0 <= row + dr < n_boxes and 0 <= col + dc < n_boxes
    )


@functools.lru_cache(maxsize=32)
def neighbor_table(n_boxes: int) -> dict:
    """Map every ``(row, col)`` of an ``n_boxes`` lattice to its neighbours."""
    return {(r, c): _moore(r, c, n_boxes) for r in range(n_boxes) for c in range(n_boxes)}


def cell_neighbors(cell, n_boxes: int) -> list[tuple[int, int]]:
    """8-connected neighbours of ``cell`` clipped to the lattice, row-major."""
    row, col = cell
    if not (0 <= row < n_boxes and 0 <= col < n_boxes):
        raise InvalidInput(f"cell {cell} outside a {n_boxes}x{n_boxes} grid")
    return list(neighbor_table(n_boxes)[(row, col)])
