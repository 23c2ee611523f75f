import numpy as np
import pytest

from bartpp.tree import DecisionTree, EnsembleState, SplitGrid, sample_prior_tree

ACCEPTANCE_LINES = []


def random_tree(rng, dim, grid=None, gamma=0.9, delta=1.0, max_leaves=None):
    """Prior tree with random positive leaf values, optionally capped in size."""
    grid = grid or SplitGrid.uniform(dim, 20)
    while True:
        tree = sample_prior_tree(grid, gamma, delta, rng)
        if max_leaves is None or tree.n_leaves <= max_leaves:
            break
    tree.set_leaf_values(rng.uniform(0.2, 5.0, size=tree.n_leaves))
    return tree


def random_ensemble(rng, m, dim, grid=None, **kw):
    return EnsembleState([random_tree(rng, dim, grid, **kw) for _ in range(m)])


def brute_force_product(trees, points):
    """Product of tree values at each point by walking every tree node by node."""
    out = np.ones(len(points))
    for i, p in enumerate(points):
        for tree in trees:
            node = tree.root
            while not node.is_leaf:
                node = node.left if p[node.dim] < node.value else node.right
            out[i] *= node.lam
    return out


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


@pytest.fixture
def two_trees_1d():
    # split 0.3 with leaves 2|3, split 0.6 with leaves 5|7
    a = DecisionTree.from_splits(1, (0, 0.3, None, None), [2.0, 3.0])
    b = DecisionTree.from_splits(1, (0, 0.6, None, None), [5.0, 7.0])
    return a, b


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
