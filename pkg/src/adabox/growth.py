"""Liberal seeding and round-robin region growing with graduation.

Every sufficiently dense cell starts as its own candidate seed. Candidates
compete for neighbouring cells one step at a time; a candidate that stalls
before it has grown ``graduation_min_growths`` times is pruned and its cells
return to the pool, so only regions that keep growing survive.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field

import numpy as np

from .errors import Diverged, InvalidInput
from .grid import DensityGrid, neighbor_table


class Status(enum.Enum):
    CANDIDATE = "candidate"
    GRADUATED = "graduated"
    PRUNED = "pruned"


@dataclass
class Seed:
    id: int
    cells: set = field(default_factory=set)
    iteration_count: int = 0
    successful_growth_count: int = 0
    status: Status = Status.CANDIDATE
    # running sum of cell counts, kept in step with ``cells``
    mass: int = 0

    def mean_count(self) -> float:
        return self.mass / len(self.cells)


@dataclass(frozen=True)
class GrowthConfig:
    seed_threshold: float
    regular_threshold_factor: float = 0.3
    graduation_min_growths: int = 2
    max_iterations: int | None = None

    def __post_init__(self):
        if not self.seed_threshold > 0:
            raise InvalidInput("seed_threshold must be positive")
        if not self.regular_threshold_factor > 0:
            raise InvalidInput("regular_threshold_factor must be positive")
        if self.graduation_min_growths < 1:
            raise InvalidInput("graduation_min_growths must be >= 1")
        if self.max_iterations is not None and self.max_iterations < 1:
            raise InvalidInput("max_iterations must be positive")

    def iteration_bound(self, n_boxes: int) -> int:
        if self.max_iterations is not None:
            return self.max_iterations
        return 10 * n_boxes


def initialize_seeds(grid: DensityGrid, seed_threshold: float) -> list[Seed]:
    """One singleton seed per cell whose count reaches ``seed_threshold``.

    Seeds come out densest first; equal counts keep row-major order.
    """
    if not seed_threshold > 0:
        raise InvalidInput("seed_threshold must be positive")
    flat = grid.counts.ravel()
    candidates = np.flatnonzero(flat >= seed_threshold)
    # stable sort on -count keeps row-major order within ties
    order = candidates[np.argsort(-flat[candidates], kind="stable")]
    seeds = []
    for i, idx in enumerate(order):
        cell = divmod(int(idx), grid.n_boxes)
        seeds.append(Seed(id=i, cells={cell}, mass=int(flat[idx])))
    return seeds


def growth_threshold(seed: Seed, cfg: GrowthConfig) -> float:
    return cfg.regular_threshold_factor * max(seed.mean_count(), cfg.seed_threshold)


def grow_step(seed: Seed, grid: DensityGrid, claimed: dict, cfg: GrowthConfig):
    """Absorb every unclaimed neighbour dense enough relative to the region.

    The bar is ``cfg.regular_threshold_factor`` times the region's mean count
    at the start of the step, never taken below the same fraction of the
    seed threshold. Returns ``(seed, grew)``; ``seed`` and ``claimed`` are
    updated in place.
    """
    if seed.status is Status.PRUNED:
        raise InvalidInput(f"seed {seed.id} is pruned")
    threshold = growth_threshold(seed, cfg)
    counts = grid.counts
    table = neighbor_table(grid.n_boxes)
    absorbed = []
    for cell in sorted(seed.cells):
        for nb in table[cell]:
            if nb in claimed:
                continue
            if counts[nb] >= threshold:
                claimed[nb] = seed.id
                absorbed.append(nb)
    for nb in absorbed:
        seed.cells.add(nb)
        seed.mass += int(counts[nb])
    seed.iteration_count += 1
    grew = bool(absorbed)
    if grew:
        seed.successful_growth_count += 1
    return seed, grew


def run_growth(seeds: list[Seed], grid: DensityGrid, cfg: GrowthConfig) -> list[Seed]:
    """Grow all seeds round-robin and return the graduated ones.

    Each pass gives every live seed one :func:`grow_step` in seed order.
    Passes continue until one absorbs nothing and prunes nothing.
    """
    claimed: dict = {}
    for seed in seeds:
        for cell in seed.cells:
            if cell in claimed:
                raise InvalidInput(f"cell {cell} belongs to two seeds")
            claimed[cell] = seed.id

    bound = cfg.iteration_bound(grid.n_boxes)
    iteration = 0
    while True:
        iteration += 1
        if iteration > bound:
            raise Diverged(f"region growing did not settle within {bound} passes")
        changed = False
        for seed in seeds:
            if seed.status is Status.PRUNED:
                continue
            _, grew = grow_step(seed, grid, claimed, cfg)
            changed |= grew
            if seed.status is Status.CANDIDATE:
                if not grew:
                    seed.status = Status.PRUNED
                    for cell in seed.cells:
                        del claimed[cell]
                    changed = True
                elif seed.successful_growth_count >= cfg.graduation_min_growths:
                    seed.status = Status.GRADUATED
        if not changed:
            break
    return [s for s in seeds if s.status is Status.GRADUATED]
