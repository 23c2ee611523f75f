"""Decision trees over the unit cube and their Galton-Watson prior.

A tree recursively bisects ``[0, 1)^d`` with rules ``x[dim] < value``; points
satisfying the rule go left. Leaves carry positive multiplicative intensities
and an ensemble's intensity at a point is the product of the leaves that
contain it.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterator

import numpy as np

from .geometry import RegionBox

__all__ = [
    "SplitGrid",
    "Node",
    "DecisionTree",
    "EnsembleState",
    "split_probability",
    "available_splits",
    "sample_prior_tree",
    "log_tree_prior",
    "evaluate_intensity",
    "leaf_point_counts",
    "as_points",
]


def as_points(points, dim: int) -> np.ndarray:
    """Coerce to an ``(n, dim)`` float array; a flat array is a list of 1-D points when ``dim == 1``."""
    pts = np.asarray(points, dtype=float)
    if pts.ndim <= 1:
        pts = pts.reshape(-1, 1) if dim == 1 else pts.reshape(1, -1)
    return pts


class SplitGrid:
    """Candidate split values, one strictly increasing row per dimension."""

    def __init__(self, values):
        values = np.atleast_2d(np.asarray(values, dtype=float))
        if values.shape[1] < 1:
            raise ValueError("grid needs at least one value per dimension")
        if np.any(values <= 0.0) or np.any(values >= 1.0):
            raise ValueError("split values must lie strictly inside (0, 1)")
        if np.any(np.diff(values, axis=1) <= 0.0):
            raise ValueError("split values must be strictly increasing")
        self.values = values

    @classmethod
    def uniform(cls, dim: int, n_values: int = 100) -> "SplitGrid":
        """``n_values`` equally spaced values ``k / (n_values + 1)`` per dimension."""
        row = np.arange(1, n_values + 1) / (n_values + 1)
        return cls(np.tile(row, (dim, 1)))

    @property
    def dim(self) -> int:
        return self.values.shape[0]

    @property
    def size(self) -> int:
        return self.values.shape[1]

    def interior_range(self, lower: np.ndarray, upper: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """Index ranges ``[start, stop)`` of values strictly inside each side of a box."""
        start = np.array([np.searchsorted(row, lo, side="right") for row, lo in zip(self.values, lower)])
        stop = np.array([np.searchsorted(row, hi, side="left") for row, hi in zip(self.values, upper)])
        return start, np.maximum(stop, start)


class Node:
    __slots__ = ("lower", "upper", "depth", "dim", "value", "left", "right", "lam")

    def __init__(self, lower, upper, depth=0, lam=1.0):
        self.lower = lower
        self.upper = upper
        self.depth = depth
        self.dim = None
        self.value = None
        self.left = None
        self.right = None
        self.lam = lam

    @property
    def is_leaf(self) -> bool:
        return self.left is None

    @property
    def is_cherry(self) -> bool:
        return self.left is not None and self.left.left is None and self.right.left is None

    @property
    def box(self) -> RegionBox:
        return RegionBox(self.lower, self.upper)

    def _children_bounds(self, dim, value):
        left_hi = self.upper.copy()
        left_hi[dim] = value
        right_lo = self.lower.copy()
        right_lo[dim] = value
        return (self.lower, left_hi), (right_lo, self.upper)

    def __repr__(self):
        if self.is_leaf:
            return f"Leaf(depth={self.depth}, lam={self.lam:g})"
        return f"Split(x{self.dim} < {self.value:g}, depth={self.depth})"


class DecisionTree:
    """Binary partition of the unit cube with a positive value on each leaf.

    Leaves are always enumerated depth-first, left before right; every
    per-leaf array returned by this class follows that order.
    """

    def __init__(self, root: Node):
        self.root = root
        self._leaves = None
        self._bounds = None

    @classmethod
    def single_leaf(cls, dim: int, lam: float = 1.0) -> "DecisionTree":
        return cls(Node(np.zeros(dim), np.ones(dim), 0, float(lam)))

    @classmethod
    def from_splits(cls, dim: int, spec, values=None) -> "DecisionTree":
        """Build a tree from a nested ``(dim, value, left, right)`` spec; ``None`` is a leaf.

        ``values`` optionally lists the leaf intensities in depth-first order.
        """
        root = Node(np.zeros(dim), np.ones(dim), 0)

        def build(node, s):
            if s is None:
                return
            d, v, left, right = s
            _split(node, d, v)
            build(node.left, left)
            build(node.right, right)

        build(root, spec)
        tree = cls(root)
        if values is not None:
            tree.set_leaf_values(values)
        return tree

    @property
    def dim(self) -> int:
        return self.root.lower.size

    def _touch(self):
        self._leaves = None
        self._bounds = None

    def nodes(self) -> Iterator[Node]:
        stack = [self.root]
        while stack:
            node = stack.pop()
            yield node
            if node.left is not None:
                stack.append(node.right)
                stack.append(node.left)

    def leaves(self) -> list[Node]:
        if self._leaves is None:
            self._leaves = [n for n in self.nodes() if n.is_leaf]
        return self._leaves

    def cherries(self) -> list[Node]:
        return [n for n in self.nodes() if n.is_cherry]

    def internal_nodes(self) -> list[Node]:
        return [n for n in self.nodes() if not n.is_leaf]

    @property
    def n_leaves(self) -> int:
        return len(self.leaves())

    def depth(self) -> int:
        return max(n.depth for n in self.leaves())

    def leaf_bounds(self) -> tuple[np.ndarray, np.ndarray]:
        """Stacked ``(lower, upper)`` arrays of shape ``(b, d)``."""
        if self._bounds is None:
            leaves = self.leaves()
            self._bounds = (
                np.array([n.lower for n in leaves]),
                np.array([n.upper for n in leaves]),
            )
        return self._bounds

    def leaf_values(self) -> np.ndarray:
        return np.array([n.lam for n in self.leaves()])

    def set_leaf_values(self, values) -> None:
        leaves = self.leaves()
        values = np.asarray(values, dtype=float).reshape(-1)
        if values.size != len(leaves):
            raise ValueError(f"expected {len(leaves)} leaf values, got {values.size}")
        for node, v in zip(leaves, values):
            node.lam = float(v)

    def leaf_index(self, points: np.ndarray) -> np.ndarray:
        """Index (depth-first order) of the leaf containing each point."""
        pts = as_points(points, self.dim)
        lo, hi = self.leaf_bounds()
        if len(lo) == 1:
            return np.zeros(len(pts), dtype=np.intp)
        inside = np.all((pts[:, None, :] >= lo[None]) & (pts[:, None, :] < hi[None]), axis=2)
        return np.argmax(inside, axis=1)

    def __call__(self, points: np.ndarray) -> np.ndarray:
        """Leaf value at each point."""
        return self.leaf_values()[self.leaf_index(points)]

    def copy(self) -> "DecisionTree":
        def clone(node):
            new = Node(node.lower, node.upper, node.depth, node.lam)
            if node.left is not None:
                new.dim = node.dim
                new.value = node.value
                new.left = clone(node.left)
                new.right = clone(node.right)
            return new

        return DecisionTree(clone(self.root))

    def node_at(self, path: tuple[int, ...]) -> Node:
        node = self.root
        for step in path:
            node = node.right if step else node.left
        return node

    def path_to(self, target: Node) -> tuple[int, ...]:
        def walk(node, path):
            if node is target:
                return path
            if node.left is None:
                return None
            return walk(node.left, path + (0,)) or walk(node.right, path + (1,))

        path = walk(self.root, ())
        if path is None:
            raise ValueError("node does not belong to this tree")
        return path

    # structural edits; callers work on copies

    def grow(self, leaf: Node, dim: int, value: float) -> None:
        _split(leaf, dim, value)
        self._touch()

    def prune(self, node: Node) -> None:
        if not node.is_cherry:
            raise ValueError("only a node with two leaf children can be pruned")
        node.lam = node.left.lam
        node.dim = node.value = node.left = node.right = None
        self._touch()

    def change(self, node: Node, dim: int, value: float) -> None:
        if not node.is_cherry:
            raise ValueError("only a node with two leaf children can change its rule")
        lam = (node.left.lam, node.right.lam)
        node.dim = node.value = node.left = node.right = None
        _split(node, dim, value)
        node.left.lam, node.right.lam = lam
        self._touch()

    def structure(self):
        """Hashable description of the topology (rules only, no leaf values)."""

        def walk(node):
            if node.is_leaf:
                return None
            return (node.dim, node.value, walk(node.left), walk(node.right))

        return walk(self.root)

    def __repr__(self):
        return f"DecisionTree(leaves={self.n_leaves}, structure={self.structure()})"


def _split(node: Node, dim: int, value: float) -> None:
    if not node.lower[dim] < value < node.upper[dim]:
        raise ValueError(f"split x{dim} < {value} does not cut the node box")
    (llo, lhi), (rlo, rhi) = node._children_bounds(dim, value)
    node.dim = int(dim)
    node.value = float(value)
    node.left = Node(llo, lhi, node.depth + 1, node.lam)
    node.right = Node(rlo, rhi, node.depth + 1, node.lam)


@dataclass
class EnsembleState:
    """All trees of one chain at one iteration."""

    trees: list[DecisionTree]

    def __post_init__(self):
        if not self.trees:
            raise ValueError("an ensemble needs at least one tree")

    @property
    def m(self) -> int:
        return len(self.trees)

    @property
    def dim(self) -> int:
        return self.trees[0].dim

    def copy(self) -> "EnsembleState":
        return EnsembleState([t.copy() for t in self.trees])


def split_probability(depth: int, gamma: float, delta: float) -> float:
    """Probability that a node at ``depth`` has children: ``gamma / (1 + depth)**delta``."""
    return gamma / (1.0 + depth) ** delta


def available_splits(tree: DecisionTree | None, node: Node, grid: SplitGrid) -> tuple[list[int], dict[int, np.ndarray]]:
    """Dimensions and grid values that would cut ``node``'s box.

    Returns the usable dimensions and, for each of them, the grid values
    strictly inside the box along that dimension. ``tree`` is accepted for
    symmetry with the other tree queries; only the node's box matters.
    """
    start, stop = grid.interior_range(node.lower, node.upper)
    dims = [j for j in range(grid.dim) if stop[j] > start[j]]
    return dims, {j: grid.values[j, start[j]:stop[j]] for j in dims}


def split_counts(node: Node, grid: SplitGrid) -> np.ndarray:
    """Number of usable grid values per dimension for ``node``."""
    start, stop = grid.interior_range(node.lower, node.upper)
    return stop - start


def draw_rule(node: Node, grid: SplitGrid, rng: np.random.Generator):
    """Uniform usable dimension, then uniform value; ``None`` when nothing cuts the box.

    Returns ``(dim, value, n_dims, n_values)``; the two counts are the
    cardinalities entering the proposal and prior probabilities of the rule.
    """
    start, stop = grid.interior_range(node.lower, node.upper)
    usable = np.flatnonzero(stop > start)
    if usable.size == 0:
        return None
    dim = int(usable[rng.integers(usable.size)])
    k = int(rng.integers(start[dim], stop[dim]))
    return dim, float(grid.values[dim, k]), int(usable.size), int(stop[dim] - start[dim])


def rule_cardinalities(node: Node, grid: SplitGrid, dim: int) -> tuple[int, int]:
    """``(usable dimensions, usable values along dim)`` at ``node``'s box."""
    counts = split_counts(node, grid)
    return int(np.count_nonzero(counts)), int(counts[dim])


def sample_prior_tree(
    grid: SplitGrid,
    gamma: float,
    delta: float,
    rng: np.random.Generator,
    alpha: float | None = None,
    beta: float | None = None,
) -> DecisionTree:
    """Draw a tree from the depth-dependent Galton-Watson prior.

    A node whose box admits no grid value stays a leaf whatever the coin
    says. Leaves get ``Gamma(alpha, rate=beta)`` intensities when both are
    given, and 1 otherwise.
    """
    tree = DecisionTree.single_leaf(grid.dim)
    stack = [tree.root]
    while stack:
        node = stack.pop()
        if rng.random() >= split_probability(node.depth, gamma, delta):
            continue
        rule = draw_rule(node, grid, rng)
        if rule is None:
            continue
        _split(node, rule[0], rule[1])
        stack.append(node.right)
        stack.append(node.left)
    tree._touch()
    if alpha is not None and beta is not None:
        tree.set_leaf_values(rng.gamma(alpha, 1.0 / beta, size=tree.n_leaves))
    return tree


def log_tree_prior(tree: DecisionTree, gamma: float, delta: float, grid: SplitGrid) -> float:
    """Log prior probability of the topology and rules of ``tree``.

    Internal nodes contribute the split probability times the uniform rule
    probability; every leaf contributes the probability of not splitting.
    """
    total = 0.0
    for node in tree.nodes():
        p = split_probability(node.depth, gamma, delta)
        if node.is_leaf:
            total += math.log1p(-p)
        else:
            n_dims, n_values = rule_cardinalities(node, grid, node.dim)
            total += math.log(p) - math.log(n_dims) - math.log(n_values)
    return total


def evaluate_intensity(ensemble: EnsembleState, points) -> np.ndarray | float:
    """Product over trees of the leaf value containing each point."""
    pts = np.asarray(points, dtype=float)
    single = pts.ndim == 1
    pts = np.atleast_2d(pts) if not single else pts.reshape(1, -1)
    out = np.ones(len(pts))
    for tree in ensemble.trees:
        out *= tree(pts)
    return float(out[0]) if single else out


def leaf_point_counts(tree: DecisionTree, points) -> np.ndarray:
    """Number of points in each leaf, depth-first leaf order."""
    pts = as_points(points, tree.dim)
    if pts.size == 0:
        return np.zeros(tree.n_leaves, dtype=int)
    return np.bincount(tree.leaf_index(pts), minlength=tree.n_leaves)
