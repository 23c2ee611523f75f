"""Axis-aligned box arithmetic on the unit hypercube.

All sampler computations happen in working coordinates ``[0, 1)^d``. A
:class:`Domain` maps native coordinates to and from that cube. Boxes are
half-open, so every point of the cube falls in exactly one leaf of a tree.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

__all__ = [
    "Domain",
    "DomainError",
    "RegionBox",
    "WeightedPartition",
    "normalize_points",
    "denormalize_points",
    "volume",
    "intersect",
    "build_global_partition",
    "leaf_exposure",
]

# largest double strictly below 1; points on the closed upper face map here
_BELOW_ONE = np.nextafter(1.0, 0.0)


class DomainError(ValueError):
    """A point lies outside the observation window."""

    def __init__(self, message: str, index: int | None = None):
        super().__init__(message)
        self.index = index


@dataclass(frozen=True)
class Domain:
    """Observation window as per-dimension ``(low, high)`` bounds."""

    bounds: tuple[tuple[float, float], ...]

    def __post_init__(self):
        b = tuple((float(lo), float(hi)) for lo, hi in self.bounds)
        if len(b) < 1:
            raise ValueError("domain needs at least one dimension")
        for j, (lo, hi) in enumerate(b):
            if not np.isfinite(lo) or not np.isfinite(hi) or not lo < hi:
                raise ValueError(f"dimension {j}: need finite low < high, got ({lo}, {hi})")
        object.__setattr__(self, "bounds", b)

    @classmethod
    def unit(cls, dim: int) -> "Domain":
        return cls(tuple((0.0, 1.0) for _ in range(dim)))

    @property
    def dim(self) -> int:
        return len(self.bounds)

    @property
    def low(self) -> np.ndarray:
        return np.array([lo for lo, _ in self.bounds])

    @property
    def high(self) -> np.ndarray:
        return np.array([hi for _, hi in self.bounds])

    @property
    def ranges(self) -> np.ndarray:
        return self.high - self.low

    @property
    def volume(self) -> float:
        return float(np.prod(self.ranges))


@dataclass(frozen=True, eq=False)
class RegionBox:
    """Half-open box ``prod_j [lower_j, upper_j)`` inside the unit cube."""

    lower: np.ndarray
    upper: np.ndarray

    def __post_init__(self):
        lo = np.asarray(self.lower, dtype=float).reshape(-1)
        hi = np.asarray(self.upper, dtype=float).reshape(-1)
        if lo.shape != hi.shape:
            raise ValueError("lower and upper must have the same length")
        if not np.all(lo < hi):
            raise ValueError(f"degenerate box {lo} .. {hi}")
        object.__setattr__(self, "lower", lo)
        object.__setattr__(self, "upper", hi)

    @classmethod
    def unit(cls, dim: int) -> "RegionBox":
        return cls(np.zeros(dim), np.ones(dim))

    @property
    def dim(self) -> int:
        return self.lower.size

    def contains(self, points: np.ndarray) -> np.ndarray:
        pts = np.atleast_2d(points)
        return np.all((pts >= self.lower) & (pts < self.upper), axis=1)

    def __eq__(self, other):
        if not isinstance(other, RegionBox):
            return NotImplemented
        return np.array_equal(self.lower, other.lower) and np.array_equal(self.upper, other.upper)

    def __hash__(self):
        return hash((self.lower.tobytes(), self.upper.tobytes()))

    def __repr__(self):
        spans = " x ".join(f"[{lo:g}, {hi:g})" for lo, hi in zip(self.lower, self.upper))
        return f"RegionBox({spans})"


@dataclass
class WeightedPartition:
    """Disjoint boxes covering the unit cube, each carrying a positive weight.

    Stored column-wise (``lower``/``upper`` of shape ``(K, d)``, ``weights`` of
    shape ``(K,)``) because every consumer is vectorised over cells.
    """

    lower: np.ndarray
    upper: np.ndarray
    weights: np.ndarray = field(default=None)

    def __post_init__(self):
        self.lower = np.atleast_2d(np.asarray(self.lower, dtype=float))
        self.upper = np.atleast_2d(np.asarray(self.upper, dtype=float))
        if self.weights is None:
            self.weights = np.ones(len(self.lower))
        self.weights = np.asarray(self.weights, dtype=float).reshape(-1)

    @classmethod
    def unit(cls, dim: int) -> "WeightedPartition":
        return cls(np.zeros((1, dim)), np.ones((1, dim)), np.ones(1))

    @property
    def cells(self) -> list[tuple[RegionBox, float]]:
        return [(RegionBox(lo, hi), float(w)) for lo, hi, w in zip(self.lower, self.upper, self.weights)]

    def __len__(self):
        return len(self.weights)

    def volumes(self) -> np.ndarray:
        return np.prod(self.upper - self.lower, axis=1)

    def refine(self, lower: np.ndarray, upper: np.ndarray, weights: np.ndarray) -> "WeightedPartition":
        """Intersect every cell with every box of another partition of the cube."""
        lo = np.maximum(self.lower[:, None, :], lower[None, :, :])
        hi = np.minimum(self.upper[:, None, :], upper[None, :, :])
        keep = np.all(hi > lo, axis=2)
        w = self.weights[:, None] * weights[None, :]
        return WeightedPartition(lo[keep], hi[keep], w[keep])

    def exposure(self, lower: np.ndarray, upper: np.ndarray) -> np.ndarray:
        """Weighted overlap volume of each query box (rows of ``lower``/``upper``)."""
        lower = np.atleast_2d(lower)
        upper = np.atleast_2d(upper)
        lo = np.maximum(self.lower[:, None, :], lower[None, :, :])
        hi = np.minimum(self.upper[:, None, :], upper[None, :, :])
        overlap = np.prod(np.clip(hi - lo, 0.0, None), axis=2)
        return self.weights @ overlap


def normalize_points(points, domain: Domain) -> np.ndarray:
    """Affinely map native coordinates onto ``[0, 1)^d``.

    Points on a closed upper face are pulled just below 1 so that they still
    belong to a half-open box.

    Raises
    ------
    DomainError
        If a point lies outside the domain; ``.index`` names the first such row.
    """
    pts = np.asarray(points, dtype=float)
    if pts.ndim == 1:
        pts = pts.reshape(-1, 1) if domain.dim == 1 else pts.reshape(1, -1)
    if pts.shape[1] != domain.dim:
        raise DomainError(f"expected {domain.dim} coordinates per point, got {pts.shape[1]}")
    low, high = domain.low, domain.high
    bad = ~np.all((pts >= low) & (pts <= high), axis=1)
    if bad.any():
        i = int(np.flatnonzero(bad)[0])
        raise DomainError(f"point {i} = {pts[i].tolist()} lies outside {list(domain.bounds)}", index=i)
    out = (pts - low) / (high - low)
    return np.minimum(out, _BELOW_ONE)


def denormalize_points(points, domain: Domain) -> np.ndarray:
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    return domain.low + pts * domain.ranges


def volume(box: RegionBox) -> float:
    return float(np.prod(box.upper - box.lower))


def intersect(a: RegionBox, b: RegionBox) -> RegionBox | None:
    """Intersection of two boxes, or ``None`` when it is empty."""
    lo = np.maximum(a.lower, b.lower)
    hi = np.minimum(a.upper, b.upper)
    if np.any(hi <= lo):
        return None
    return RegionBox(lo, hi)


def build_global_partition(other_trees: Iterable, dim: int | None = None) -> WeightedPartition:
    """Common refinement of the leaf partitions of ``other_trees``.

    Each cell is the nonempty intersection of one leaf from every tree and is
    weighted by the product of those leaves' intensities, so the weight is the
    value of the product of the trees anywhere inside the cell.

    ``dim`` is only needed when ``other_trees`` is empty.
    """
    trees: Sequence = list(other_trees)
    if not trees:
        if dim is None:
            raise ValueError("dim is required for an empty tree list")
        return WeightedPartition.unit(dim)
    part = WeightedPartition.unit(trees[0].dim)
    for tree in trees:
        lo, hi = tree.leaf_bounds()
        part = part.refine(lo, hi, tree.leaf_values())
    return part


def leaf_exposure(leaf_box: RegionBox, global_partition: WeightedPartition) -> float:
    """Integral over ``leaf_box`` of the piecewise-constant partition weights."""
    return float(global_partition.exposure(leaf_box.lower, leaf_box.upper)[0])
