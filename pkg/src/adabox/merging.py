"""Statistical merging of adjacent clusters.

Two touching clusters merge when the density across their shared border is
comparable to their interiors and no statistically significant density
valley separates them.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import stdtr

from .grid import DensityGrid, neighbor_table
from .growth import Seed


@dataclass(frozen=True)
class MergeConfig:
    continuity_min: float = 0.5
    alpha: float = 0.05


@dataclass(frozen=True)
class MergeDecision:
    pair: tuple
    boundary_continuity: float
    welch_p: float
    merged: bool


def _owner_map(clusters):
    owner = {}
    for c in clusters:
        for cell in c.cells:
            owner[cell] = c.id
    return owner


def find_adjacent_pairs(clusters: list[Seed], grid: DensityGrid) -> list[tuple[int, int]]:
    owner = _owner_map(clusters)
    table = neighbor_table(grid.n_boxes)
    pairs = set()
    for c in clusters:
        for cell in c.cells:
            for nb in table[cell]:
                other = owner.get(nb)
                if other is not None and other != c.id:
                    pairs.add((min(c.id, other), max(c.id, other)))
    return sorted(pairs)


def interface_cells(a: Seed, b: Seed, n_boxes: int) -> list:
    """Cells of either cluster that touch the other, a's first, each sorted."""
    table = neighbor_table(n_boxes)
    out = []
    for src, dst in ((a, b), (b, a)):
        for cell in sorted(src.cells):
            if any(nb in dst.cells for nb in table[cell]):
                out.append(cell)
    return out


def welch_p_value(x, y, alternative: str = "two-sided") -> float:
    """Welch t-test p-value; 1.0 when either sample has fewer than 2 values.

    ``alternative="less"`` tests whether ``x`` has the smaller mean.
    """
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if x.size < 2 or y.size < 2:
        return 1.0
    diff = x.mean() - y.mean()
    se_x = x.var(ddof=1) / x.size
    se_y = y.var(ddof=1) / y.size
    se2 = se_x + se_y
    if se2 == 0.0:
        if alternative == "less":
            return 0.0 if diff < 0 else 1.0
        return 1.0 if diff == 0 else 0.0
    t = diff / math.sqrt(se2)
    df = se2 * se2 / (se_x * se_x / (x.size - 1) + se_y * se_y / (y.size - 1))
    if alternative == "less":
        return float(stdtr(df, t))
    return float(min(1.0, 2.0 * stdtr(df, -abs(t))))


def evaluate_merge(a: Seed, b: Seed, grid: DensityGrid, cfg: MergeConfig = MergeConfig()) -> MergeDecision:
    """Decide whether two adjacent clusters are fragments of one.

    Continuity is the mean count of the interface cells over the smaller of
    the two cluster means, capped at 1. The statistical gate is a one-sided
    Welch test of whether the interface cells are sparser than the sparser
    cluster, i.e. whether a density valley separates the two. Both gates
    must pass.
    """
    counts = grid.counts
    a_counts = np.array([counts[c] for c in sorted(a.cells)], dtype=np.float64)
    b_counts = np.array([counts[c] for c in sorted(b.cells)], dtype=np.float64)
    iface = np.array([counts[c] for c in interface_cells(a, b, grid.n_boxes)], dtype=np.float64)
    sparser = a_counts if a_counts.mean() <= b_counts.mean() else b_counts
    denom = sparser.mean()
    continuity = min(float(iface.mean() / denom), 1.0) if iface.size and denom > 0 else 0.0
    p = welch_p_value(iface, sparser, alternative="less")
    merged = continuity >= cfg.continuity_min and p >= cfg.alpha
    pair = (min(a.id, b.id), max(a.id, b.id))
    return MergeDecision(pair, continuity, p, merged)


def merge_all(clusters: list[Seed], grid: DensityGrid, cfg: MergeConfig = MergeConfig()):
    """Greedily merge the first passing adjacent pair until none passes.

    Pairs are scanned in ``(low id, high id)`` order and the scan restarts
    after every merge; the smaller id survives. Returns ``(clusters,
    decisions)`` where ``decisions`` lists the merges performed, in order.
    """
    by_id = {c.id: Seed(c.id, set(c.cells), c.iteration_count,
                        c.successful_growth_count, c.status, c.mass)
             for c in clusters}
    pairs = set(find_adjacent_pairs(list(by_id.values()), grid))
    cache: dict = {}
    performed = []
    while True:
        chosen = None
        for pair in sorted(pairs):
            decision = cache.get(pair)
            if decision is None:
                decision = cache[pair] = evaluate_merge(by_id[pair[0]], by_id[pair[1]], grid, cfg)
            if decision.merged:
                chosen = decision
                break
        if chosen is None:
            break
        keep, gone = chosen.pair
        survivor, absorbed = by_id[keep], by_id.pop(gone)
        survivor.cells |= absorbed.cells
        survivor.mass += absorbed.mass
        survivor.iteration_count = max(survivor.iteration_count, absorbed.iteration_count)
        survivor.successful_growth_count += absorbed.successful_growth_count
        performed.append(chosen)

        rewired = set()
        for p in pairs:
            if gone in p or keep in p:
                q = tuple(sorted(keep if x == gone else x for x in p))
                if q[0] != q[1]:
                    rewired.add(q)
            else:
                rewired.add(p)
        pairs = rewired
        cache = {p: d for p, d in cache.items() if keep not in p and gone not in p}
    return [by_id[k] for k in sorted(by_id)], performed
