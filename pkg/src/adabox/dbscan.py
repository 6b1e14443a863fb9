"""DBSCAN baseline and exhaustive grid-search tuning."""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from typing import Callable, Iterable, Sequence

import numpy as np
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import connected_components
from scipy.spatial import cKDTree

from .errors import InvalidInput
from .grid import as_points
from .metrics import ari
from .pipeline import Clustering, make_clustering


@dataclass(frozen=True)
class DBSCANParams:
    eps: float
    min_pts: int

    def __post_init__(self):
        if not self.eps > 0:
            raise InvalidInput("eps must be positive")
        if int(self.min_pts) != self.min_pts or self.min_pts < 1:
            raise InvalidInput("min_pts must be an integer >= 1")

    def to_dict(self) -> dict:
        return {"eps": self.eps, "min_pts": self.min_pts}


def _core_components(core_pts: np.ndarray, eps: float) -> np.ndarray:
    """Connected components of core points under the eps-neighbour relation.

    Core points are bucketed into square cells of diagonal just under eps, so
    every cell is a clique. Only cell pairs up to two cells apart can hold a
    linking pair; each candidate pair is settled with a nearest-neighbour
    query.
    """
    m = core_pts.shape[0]
    if m == 0:
        return np.zeros(0, dtype=np.int64)
    side = eps / math.sqrt(2.0) * (1.0 - 1e-9)
    origin = core_pts.min(axis=0)
    keys = np.floor((core_pts - origin) / side).astype(np.int64)
    uniq, cell_of = np.unique(keys, axis=0, return_inverse=True)
    cell_of = cell_of.ravel()
    n_cells = uniq.shape[0]
    members = np.split(np.argsort(cell_of, kind="stable"), np.cumsum(np.bincount(cell_of))[:-1])
    lookup = {(int(a), int(b)): i for i, (a, b) in enumerate(uniq)}
    trees: dict = {}

    def tree(i):
        t = trees.get(i)
        if t is None:
            t = trees[i] = cKDTree(core_pts[members[i]])
        return t

    rows, cols = [], []
    for i, (cx, cy) in enumerate(uniq):
        for dx in range(-2, 3):
            for dy in range(-2, 3):
                if (dx, dy) <= (0, 0):
                    continue  # each unordered pair once
                j = lookup.get((int(cx) + dx, int(cy) + dy))
                if j is None:
                    continue
                a, b = members[i], members[j]
                if a.size > b.size:
                    a, b, jj = b, a, i
                else:
                    jj = j
                d, _ = tree(jj).query(core_pts[a], k=1, distance_upper_bound=eps * (1 + 1e-9))
                if np.any(d <= eps):
                    rows.append(i)
                    cols.append(j)
    graph = coo_matrix((np.ones(len(rows)), (rows, cols)), shape=(n_cells, n_cells))
    _, cell_comp = connected_components(graph, directed=False)
    return cell_comp[cell_of]


def dbscan(points, params: DBSCANParams) -> Clustering:
    """Classical DBSCAN.

    A point is core when at least ``min_pts`` points, itself included, lie
    within ``eps``. Border points join the cluster that a sequential
    index-order scan would reach first, i.e. the adjacent cluster whose
    lowest-index core point is smallest.
    """
    pts = as_points(points)
    n = pts.shape[0]
    tree = cKDTree(pts)
    n_neighbors = tree.query_ball_point(pts, params.eps, return_length=True)
    core = n_neighbors >= params.min_pts
    labels = np.full(n, -1, dtype=np.int64)
    core_idx = np.flatnonzero(core)
    if core_idx.size == 0:
        return make_clustering(labels, {"core_points": 0})

    comp = _core_components(pts[core_idx], params.eps)
    # clusters are numbered by their lowest-index core point (scan order)
    start = np.full(comp.max() + 1, n, dtype=np.int64)
    np.minimum.at(start, comp, core_idx)
    labels[core_idx] = start[comp]

    border_candidates = np.flatnonzero(~core & (n_neighbors > 1))
    if border_candidates.size:
        core_tree = cKDTree(pts[core_idx])
        hits = core_tree.query_ball_point(pts[border_candidates], params.eps)
        for p, h in zip(border_candidates, hits):
            if h:
                labels[p] = start[comp[h]].min()
    return make_clustering(labels, {"core_points": int(core_idx.size)})


def core_mask(points, params: DBSCANParams) -> np.ndarray:
    pts = as_points(points)
    counts = cKDTree(pts).query_ball_point(pts, params.eps, return_length=True)
    return counts >= params.min_pts


class ParameterGrid:
    """Cartesian product of named value lists, iterated in declaration order.

    The last name varies fastest. ``factory`` turns each combination (a dict)
    into a parameter object.
    """

    def __init__(self, axes: dict, factory: Callable | None = None):
        if not axes or any(len(v) == 0 for v in axes.values()):
            raise InvalidInput("parameter grid is empty")
        self.axes = {k: list(v) for k, v in axes.items()}
        self.factory = factory or (lambda **kw: kw)

    def __len__(self):
        return math.prod(len(v) for v in self.axes.values())

    def __iter__(self):
        names = list(self.axes)
        for combo in itertools.product(*self.axes.values()):
            yield self.factory(**dict(zip(names, combo)))


@dataclass
class TuneResult:
    params: object
    score: float
    index: int
    n_evaluated: int


def grid_search_tune(
    points,
    labels_true,
    search_space: Iterable,
    fit_fn: Callable,
    objective: Callable = ari,
) -> TuneResult:
    """Exhaustively score every configuration and keep the best.

    ``fit_fn(points, params)`` must return a :class:`Clustering`. Ties go to
    the configuration declared first.
    """
    configs: Sequence = list(search_space)
    if not configs:
        raise InvalidInput("search space is empty")
    best = None
    for i, params in enumerate(configs):
        labels = fit_fn(points, params).labels
        score = float(objective(labels_true, labels))
        if best is None or score > best.score:
            best = TuneResult(params, score, i, len(configs))
    return best


def eps_quantile_grid(points, quantiles: Sequence[float], min_pts: Sequence[int], sample: int = 2000, seed: int = 0):
    """DBSCAN search space with eps taken at quantiles of pairwise distances.

    Pairwise distances come from at most ``sample`` points drawn with a fixed
    seed, so the grid is a deterministic function of the data.
    """
    pts = as_points(points)
    if pts.shape[0] > sample:
        rng = np.random.Generator(np.random.PCG64(seed))
        pts = pts[np.sort(rng.choice(pts.shape[0], sample, replace=False))]
    i, j = np.triu_indices(pts.shape[0], k=1)
    dist = np.hypot(*(pts[i] - pts[j]).T) if i.size else np.array([1.0])
    eps_values = [float(e) for e in np.quantile(dist, quantiles) if e > 0]
    eps_values = sorted(set(eps_values))
    if not eps_values:
        eps_values = [1.0]
    return ParameterGrid({"eps": eps_values, "min_pts": list(min_pts)}, DBSCANParams)


