"""Seeded synthetic generators, CSV input/output and a PCA front-end.

Every generator draws its structure (centres, shapes, rotations) from one
PCG64 stream and its points from another, both derived from the seed and the
family name. Structure therefore does not depend on ``n``: growing ``n`` at a
fixed seed only adds points to the same geometry, scaling every local
density by the same factor.
"""

from __future__ import annotations

import csv
import logging
import math
import zlib
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .errors import InvalidInput, ParseError

log = logging.getLogger(__name__)

FAMILIES = ("blobs", "moons", "rings", "anisotropic", "varied_density", "blobs_with_noise")

# side of the square every generator fills before ``extent`` scaling
_BOX = 10.0


@dataclass(frozen=True)
class GeneratorSpec:
    family: str
    n: int
    rng_seed: int = 0
    n_centers: int = 3
    cluster_std: float = 0.5
    noise_fraction: float | None = None
    extent: float = _BOX
    offset: tuple = (0.0, 0.0)

    def effective_noise(self) -> float:
        if self.noise_fraction is not None:
            return self.noise_fraction
        return 0.1 if self.family == "blobs_with_noise" else 0.0

    def name(self) -> str:
        return f"{self.family}-n{self.n}-s{self.rng_seed}"


@dataclass
class Dataset:
    points: np.ndarray
    labels_true: np.ndarray | None = None
    provenance: dict = field(default_factory=dict)

    @property
    def n(self) -> int:
        return int(self.points.shape[0])


def _streams(spec: GeneratorSpec):
    key = zlib.crc32(spec.family.encode())
    root = np.random.SeedSequence([int(spec.rng_seed), key])
    structure, sampling = root.spawn(2)
    return np.random.Generator(np.random.PCG64(structure)), np.random.Generator(np.random.PCG64(sampling))


def _split(n: int, k: int) -> list[int]:
    base, extra = divmod(n, k)
    return [base + (1 if i < extra else 0) for i in range(k)]


def _spread_centers(rng, k: int, margin: float, min_sep: float) -> np.ndarray:
    # rejection sampling; a placement that boxes itself in starts over
    for _ in range(50):
        centers = []
        for _ in range(10_000):
            c = rng.uniform(margin, _BOX - margin, size=2)
            if all(np.hypot(*(c - o)) >= min_sep for o in centers):
                centers.append(c)
                if len(centers) == k:
                    return np.array(centers)
    raise InvalidInput(f"cannot place {k} centres {min_sep} apart")


def _blobs(spec, srng, prng, n, stds=None):
    k = spec.n_centers
    stds = [spec.cluster_std] * k if stds is None else stds
    sep = min(6.0 * max(stds), 4.5 if k <= 3 else 3.0)
    centers = _spread_centers(srng, k, margin=2.0, min_sep=sep)
    parts, labels = [], []
    for i, m in enumerate(_split(n, k)):
        parts.append(centers[i] + prng.normal(0.0, stds[i], size=(m, 2)))
        labels.append(np.full(m, i))
    return np.concatenate(parts), np.concatenate(labels)


def _moons(spec, srng, prng, n):
    angle = srng.uniform(0, 2 * math.pi)
    m0, m1 = _split(n, 2)
    t0 = prng.uniform(0, math.pi, m0)
    t1 = prng.uniform(0, math.pi, m1)
    a = np.stack([np.cos(t0), np.sin(t0)], axis=1)
    b = np.stack([1 - np.cos(t1), 0.5 - np.sin(t1)], axis=1)
    pts = np.concatenate([a, b]) - [0.5, 0.25]
    pts += prng.normal(0, spec.cluster_std * 0.1, size=pts.shape)
    rot = np.array([[math.cos(angle), -math.sin(angle)], [math.sin(angle), math.cos(angle)]])
    pts = pts @ rot.T * 3.0 + _BOX / 2
    return pts, np.concatenate([np.zeros(m0, int), np.ones(m1, int)])


def _rings(spec, srng, prng, n):
    radii = (1.2, 3.6)
    center = _BOX / 2 + srng.uniform(-0.3, 0.3, size=2)
    # points split in proportion to circumference so ring density is equal
    m_inner = int(round(n * radii[0] / sum(radii)))
    parts, labels = [], []
    for i, (r, m) in enumerate(zip(radii, (m_inner, n - m_inner))):
        t = prng.uniform(0, 2 * math.pi, m)
        rr = r + prng.normal(0, spec.cluster_std * 0.3, m)
        parts.append(center + np.stack([rr * np.cos(t), rr * np.sin(t)], axis=1))
        labels.append(np.full(m, i))
    return np.concatenate(parts), np.concatenate(labels)


def _anisotropic(spec, srng, prng, n):
    k = spec.n_centers
    centers = _spread_centers(srng, k, margin=2.0, min_sep=4.5 if k <= 3 else 3.0)
    parts, labels = [], []
    for i, m in enumerate(_split(n, k)):
        angle = srng.uniform(0, math.pi)
        rot = np.array([[math.cos(angle), -math.sin(angle)], [math.sin(angle), math.cos(angle)]])
        shape = rot @ np.diag([spec.cluster_std * 1.6, spec.cluster_std * 0.4])
        parts.append(centers[i] + prng.normal(size=(m, 2)) @ shape.T)
        labels.append(np.full(m, i))
    return np.concatenate(parts), np.concatenate(labels)


def _varied(spec, srng, prng, n):
    k = spec.n_centers
    stds = [spec.cluster_std * f for f in np.linspace(0.5, 1.5, k)]
    return _blobs(spec, srng, prng, n, stds)


_GENERATORS = {
    "blobs": _blobs,
    "blobs_with_noise": _blobs,
    "moons": _moons,
    "rings": _rings,
    "anisotropic": _anisotropic,
    "varied_density": _varied,
}


def generate(spec: GeneratorSpec) -> Dataset:
    """Draw a labelled dataset; generated noise points carry label -1."""
    if spec.family not in _GENERATORS:
        raise InvalidInput(f"unknown family {spec.family!r}; choose from {', '.join(FAMILIES)}")
    noise = spec.effective_noise()
    if not 0.0 <= noise < 1.0:
        raise InvalidInput("noise_fraction must lie in [0, 1)")
    if spec.n_centers < 1 or spec.cluster_std <= 0 or spec.extent <= 0:
        raise InvalidInput("n_centers, cluster_std and extent must be positive")
    n_noise = int(round(spec.n * noise))
    n_signal = spec.n - n_noise
    if n_signal < 2:
        raise InvalidInput(f"n={spec.n} too small for family {spec.family}")

    srng, prng = _streams(spec)
    pts, labels = _GENERATORS[spec.family](spec, srng, prng, n_signal)
    if n_noise:
        pts = np.concatenate([pts, prng.uniform(0.0, _BOX, size=(n_noise, 2))])
        labels = np.concatenate([labels, np.full(n_noise, -1)])
    pts = pts * (spec.extent / _BOX) + np.asarray(spec.offset, dtype=np.float64)
    prov = {
        "generator": spec.family,
        "seed": spec.rng_seed,
        "n": spec.n,
        "noise_fraction": noise,
        "extent": spec.extent,
    }
    return Dataset(pts, labels.astype(np.int64), prov)


def resize(spec: GeneratorSpec, n: int) -> GeneratorSpec:
    return replace(spec, n=n)


def _is_number(text: str) -> bool:
    try:
        float(text)
    except ValueError:
        return False
    return True


def load_csv(path, has_labels: bool = False) -> Dataset:
    """Read ``x,y[,label]`` rows. A first row with no numeric field is a header."""
    path = Path(path)
    try:
        with path.open(newline="") as fh:
            rows = list(csv.reader(fh))
    except OSError as exc:
        raise InvalidInput(f"cannot read {path}: {exc}") from exc

    width = 3 if has_labels else 2
    pts, labels = [], []
    for lineno, row in enumerate(rows, start=1):
        fields = [f.strip() for f in row]
        if not fields or all(f == "" for f in fields):
            continue
        if lineno == 1 and not any(_is_number(f) for f in fields):
            continue
        if len(fields) < width:
            raise ParseError(f"expected {width} columns, got {len(fields)}", row=lineno)
        try:
            x, y = float(fields[0]), float(fields[1])
        except ValueError:
            raise ParseError(f"non-numeric coordinate in {row!r}", row=lineno) from None
        if not (math.isfinite(x) and math.isfinite(y)):
            raise ParseError("non-finite coordinate", row=lineno)
        pts.append((x, y))
        if has_labels:
            try:
                labels.append(int(float(fields[2])))
            except ValueError:
                raise ParseError(f"non-numeric label {fields[2]!r}", row=lineno) from None
    if not pts:
        raise ParseError("no data rows", row=None)
    return Dataset(
        np.array(pts, dtype=np.float64),
        np.array(labels, dtype=np.int64) if has_labels else None,
        {"path": str(path)},
    )


def save_csv(dataset: Dataset, path) -> None:
    with Path(path).open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        has_labels = dataset.labels_true is not None
        w.writerow(["x", "y", "label"] if has_labels else ["x", "y"])
        for i, (x, y) in enumerate(dataset.points):
            row = [repr(float(x)), repr(float(y))]
            if has_labels:
                row.append(int(dataset.labels_true[i]))
            w.writerow(row)


def pca_2d(points) -> np.ndarray:
    """Project onto the two leading principal axes.

    Each axis is oriented so its first non-zero loading is positive.
    Zero-variance input yields zeros.
    """
    x = np.asarray(points, dtype=np.float64)
    if x.ndim != 2 or x.shape[1] < 2 or x.shape[0] < 2:
        raise InvalidInput(f"pca_2d needs n >= 2 rows and d >= 2 columns, got {x.shape}")
    if not np.all(np.isfinite(x)):
        raise InvalidInput("points contain non-finite values")
    centered = x - x.mean(axis=0)
    cov = centered.T @ centered / (x.shape[0] - 1)
    if not np.any(cov):
        log.warning("pca_2d: input has zero variance; returning zeros")
        return np.zeros((x.shape[0], 2))
    evals, evecs = np.linalg.eigh(cov)
    axes = evecs[:, np.argsort(evals)[::-1][:2]]
    for j in range(2):
        nz = np.flatnonzero(np.abs(axes[:, j]) > 1e-12)
        if nz.size and axes[nz[0], j] < 0:
            axes[:, j] = -axes[:, j]
    return centered @ axes
