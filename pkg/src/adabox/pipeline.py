"""End-to-end AdaBox clustering and density-scaled parameter transfer."""

from __future__ import annotations

from dataclasses import asdict, dataclass, field, replace

import numpy as np

from .errors import InvalidInput
from .grid import DEFAULT_PADDING, BoundingBox, as_points, build_grid
from .growth import GrowthConfig, initialize_seeds, run_growth
from .merging import MergeConfig, merge_all
from .refinement import RefinementConfig, refine


@dataclass(frozen=True)
class AdaBoxParams:
    """The six tuned hyperparameters.

    ``min_density`` and ``min_cluster_size`` are absolute point counts and
    scale with dataset size (see :func:`transfer_params`); the other four are
    relative and transfer unchanged.
    """

    n_boxes: int = 30
    min_density: float = 3.0
    regular_threshold_factor: float = 0.3
    merge_adjacent: bool = True
    refinement_sigma: float = 1.0
    min_cluster_size: int = 10

    def __post_init__(self):
        if int(self.n_boxes) != self.n_boxes or self.n_boxes < 2:
            raise InvalidInput(f"n_boxes must be an integer >= 2, got {self.n_boxes!r}")
        if not self.min_density > 0:
            raise InvalidInput("min_density must be positive")
        if not self.regular_threshold_factor > 0:
            raise InvalidInput("regular_threshold_factor must be positive")
        if not self.refinement_sigma > 0:
            raise InvalidInput("refinement_sigma must be positive")
        if int(self.min_cluster_size) != self.min_cluster_size or self.min_cluster_size < 1:
            raise InvalidInput("min_cluster_size must be an integer >= 1")

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass(frozen=True)
class EngineConfig:
    """Fixed constants of the engine plus the switches used for ablations."""

    padding_fraction: float = DEFAULT_PADDING
    graduation_min_growths: int = 2
    continuity_min: float = 0.5
    alpha: float = 0.05
    # refinement acceptance bar as a fraction of min_density, so it follows
    # min_density through transfer_params
    affinity_fraction: float = 1.0 / 3.0
    max_rounds: int = 5
    refine: bool = True
    # when set, the lattice covers this box instead of the data extent
    fixed_bbox: BoundingBox | None = None


@dataclass
class Clustering:
    labels: np.ndarray
    n_clusters: int
    cluster_sizes: list[int]
    stage_trace: dict = field(default_factory=dict)

    @property
    def n_noise(self) -> int:
        return int(np.count_nonzero(self.labels < 0))


def relabel(labels) -> np.ndarray:
    """Map cluster ids to 0..k-1 by decreasing size, then first occurrence.

    Negative labels are noise and map to -1.
    """
    labels = np.asarray(labels, dtype=np.int64)
    out = np.full(labels.shape, -1, dtype=np.int64)
    member = labels >= 0
    if not member.any():
        return out
    ids, first, sizes = np.unique(labels[member], return_index=True, return_counts=True)
    # first index among members maps monotonically to first index overall
    order = np.lexsort((first, -sizes))
    mapping = np.empty(ids.size, dtype=np.int64)
    mapping[order] = np.arange(ids.size)
    out[member] = mapping[np.searchsorted(ids, labels[member])]
    return out


def make_clustering(labels, trace=None) -> Clustering:
    labels = relabel(labels)
    k = int(labels.max()) + 1 if labels.size and labels.max() >= 0 else 0
    sizes = np.bincount(labels[labels >= 0], minlength=k).tolist() if k else []
    return Clustering(labels, k, [int(s) for s in sizes], dict(trace or {}))


def fit(points, params: AdaBoxParams = AdaBoxParams(), engine: EngineConfig = EngineConfig()) -> Clustering:
    """Cluster 2D points with AdaBox.

    Stages run in order: grid, seeding, growth, merging (when
    ``params.merge_adjacent``), cell-to-point labelling, boundary refinement,
    and finally the ``min_cluster_size`` filter.
    """
    pts = as_points(points)
    grid = build_grid(pts, params.n_boxes, engine.padding_fraction, bbox=engine.fixed_bbox)

    growth_cfg = GrowthConfig(
        seed_threshold=params.min_density,
        regular_threshold_factor=params.regular_threshold_factor,
        graduation_min_growths=engine.graduation_min_growths,
    )
    seeds = initialize_seeds(grid, params.min_density)
    n_seeds = len(seeds)
    clusters = run_growth(seeds, grid, growth_cfg)
    n_graduated = len(clusters)

    merges = []
    if params.merge_adjacent and len(clusters) > 1:
        clusters, merges = merge_all(clusters, grid, MergeConfig(engine.continuity_min, engine.alpha))

    cell_label = np.full(grid.n_boxes * grid.n_boxes, -1, dtype=np.int64)
    for c in clusters:
        for row, col in c.cells:
            cell_label[row * grid.n_boxes + col] = c.id
    labels = cell_label[grid.flat_index()]

    refined = 0
    rounds = 0
    if engine.refine and clusters:
        before = np.count_nonzero(labels < 0)
        cfg = RefinementConfig(
            params.refinement_sigma, engine.affinity_fraction * params.min_density, engine.max_rounds
        )
        labels, rounds = refine(labels, pts, grid, cfg)
        refined = int(before - np.count_nonzero(labels < 0))

    dropped = 0
    if clusters:
        ids, sizes = np.unique(labels[labels >= 0], return_counts=True)
        small = ids[sizes < params.min_cluster_size]
        if small.size:
            dropped = int(small.size)
            labels[np.isin(labels, small)] = -1

    trace = {
        "seeds_created": n_seeds,
        "graduated": n_graduated,
        "merges_performed": len(merges),
        "points_refined": refined,
        "refinement_rounds": rounds,
        "clusters_dropped": dropped,
    }
    return make_clustering(labels, trace)


def transfer_params(
    params: AdaBoxParams, n_sample: int, n_full: int, scale_min_cluster_size: bool = True
) -> AdaBoxParams:
    """Rescale the count-valued parameters from a sample to a full dataset."""
    if n_sample < 1 or n_full < 1:
        raise InvalidInput("dataset sizes must be positive")
    if n_sample == n_full:
        return params
    ratio = n_full / n_sample
    mcs = params.min_cluster_size
    if scale_min_cluster_size:
        mcs = max(1, int(round(mcs * ratio)))
    return replace(params, min_density=params.min_density * ratio, min_cluster_size=mcs)
