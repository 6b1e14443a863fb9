"""Gaussian boundary refinement.

Noise points are pulled into the cluster whose nearby mass, weighted by a
Gaussian kernel over cell centres, is largest. Reassignments are applied at
the end of each round, so the outcome does not depend on point order.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import InvalidInput
from .grid import DensityGrid

# kernel is truncated beyond this many bandwidths
KERNEL_CUTOFF = 6.0


@dataclass(frozen=True)
class RefinementConfig:
    refinement_sigma: float = 1.0
    affinity_min: float = 1.0
    max_rounds: int = 5

    def __post_init__(self):
        if not self.refinement_sigma > 0:
            raise InvalidInput("refinement_sigma must be positive")
        if not self.affinity_min > 0:
            raise InvalidInput("affinity_min must be positive")
        if self.max_rounds < 1:
            raise InvalidInput("max_rounds must be >= 1")


def _cluster_mass(labels, flat_cell, cluster_ids, n_cells):
    """Member count of every cluster in every cell, shape (n_clusters, n_cells)."""
    member = labels >= 0
    rank = np.searchsorted(cluster_ids, labels[member])
    mass = np.zeros((len(cluster_ids), n_cells), dtype=np.float64)
    np.add.at(mass, (rank, flat_cell[member]), 1.0)
    return mass


def affinities(points, grid: DensityGrid, mass, sigma_cells: float) -> np.ndarray:
    """Kernel-weighted cluster mass around each point.

    ``mass`` has shape (n_clusters, n_boxes**2). Distances are measured in
    units of the cell width; cells whose centre lies beyond the kernel cutoff
    contribute nothing.
    """
    pts = np.asarray(points, dtype=np.float64)
    nb = grid.n_boxes
    # point position in cell-width units, relative to the grid origin
    u = (pts[:, 0] - grid.bbox.min_x) / grid.cell_w
    v = (pts[:, 1] - grid.bbox.min_y) / grid.cell_w
    aspect = grid.cell_h / grid.cell_w
    col = np.clip(np.floor(u), 0, nb - 1).astype(np.int64)
    row = np.clip(np.floor(v / aspect), 0, nb - 1).astype(np.int64)

    cutoff = KERNEL_CUTOFF * sigma_cells
    reach_c = int(math.ceil(cutoff)) + 1
    reach_r = int(math.ceil(cutoff / aspect)) + 1
    two_var = 2.0 * sigma_cells * sigma_cells
    out = np.zeros((pts.shape[0], mass.shape[0]), dtype=np.float64)
    for dr in range(-reach_r, reach_r + 1):
        r = row + dr
        ok_r = (r >= 0) & (r < nb)
        dy = v - (r + 0.5) * aspect
        for dc in range(-reach_c, reach_c + 1):
            c = col + dc
            ok = ok_r & (c >= 0) & (c < nb)
            if not ok.any():
                continue
            dx = u - (c + 0.5)
            d2 = dx * dx + dy * dy
            ok &= d2 <= cutoff * cutoff
            idx = np.flatnonzero(ok)
            if idx.size == 0:
                continue
            cells = r[idx] * nb + c[idx]
            m = mass[:, cells].T
            if not m.any():
                continue
            out[idx] += m * np.exp(-d2[idx] / two_var)[:, None]
    return out


def refine(labels, points, grid: DensityGrid, cfg: RefinementConfig = RefinementConfig()):
    """Reassign noise points to nearby clusters until nothing changes.

    Returns ``(labels, n_rounds)``. Clustered points keep their labels.
    """
    labels = np.array(labels, dtype=np.int64, copy=True)
    pts = np.asarray(points, dtype=np.float64)
    if labels.shape[0] != pts.shape[0]:
        raise InvalidInput("labels and points differ in length")
    cluster_ids = np.unique(labels[labels >= 0])
    if cluster_ids.size == 0:
        return labels, 0
    flat_cell = grid.flat_index()
    n_cells = grid.n_boxes * grid.n_boxes

    rounds = 0
    while rounds < cfg.max_rounds:
        noise = np.flatnonzero(labels < 0)
        if noise.size == 0:
            break
        rounds += 1
        mass = _cluster_mass(labels, flat_cell, cluster_ids, n_cells)
        aff = affinities(pts[noise], grid, mass, cfg.refinement_sigma)
        best = np.argmax(aff, axis=1)
        best_aff = aff[np.arange(noise.size), best]
        take = best_aff >= cfg.affinity_min
        if not take.any():
            break
        labels[noise[take]] = cluster_ids[best[take]]
    return labels, rounds
