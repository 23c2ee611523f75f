"""Metropolis-Hastings within Gibbs sampling of a multiplicative tree ensemble.

Each Gibbs step updates one tree ``h`` given the others. The other trees are
collapsed into a weighted partition of the unit cube; integrating it over a
leaf of ``h`` gives that leaf's exposure ``c``. With ``n`` points in the leaf
the Gamma prior is conjugate, so the topology is moved with leaf values
integrated out and the values are then redrawn from
``Gamma(n + alpha, rate=c + beta)``.

Every ratio is computed in log space.
"""

from __future__ import annotations

import logging
import math
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, replace
from typing import Iterator

import numpy as np
from scipy.special import gammaln

from .geometry import WeightedPartition, build_global_partition
from .tree import (
    DecisionTree,
    EnsembleState,
    SplitGrid,
    as_points,
    draw_rule,
    rule_cardinalities,
    split_probability,
)

__all__ = [
    "SamplerConfig",
    "LeafTerms",
    "LeafTermsSource",
    "ProposalOutcome",
    "ChainResult",
    "BINNING_RULES",
    "fit_gamma_hyperparameters",
    "n_bins_per_dim",
    "log_conditional_likelihood",
    "log_integrated_likelihood",
    "grow_move",
    "prune_move",
    "change_move",
    "propose_grow",
    "propose_prune",
    "propose_change",
    "mh_tree_update",
    "draw_leaf_intensities",
    "gibbs_sweep",
    "initial_state",
    "run_chain",
    "iter_chain",
    "run_parallel_chains",
    "chain_rng",
]

log = logging.getLogger(__name__)

BINNING_RULES = ("fixed", "root_d1", "root_d2", "iqr")
MOVES = ("grow", "prune", "change")


@dataclass(frozen=True)
class SamplerConfig:
    """Hyperparameters and run settings of the sampler.

    ``alpha``/``beta`` left as ``None`` are fitted from the data with the
    binning rule ``binning``. Setting all three proposal probabilities to
    zero freezes every topology (leaf values are still refreshed).
    """

    m: int = 10
    iterations: int = 10000
    burn_in_fraction: float = 0.5
    p_grow: float = 0.4
    p_prune: float = 0.4
    p_change: float = 0.2
    gamma: float = 0.98
    delta: float = 2.0
    alpha: float | None = None
    beta: float | None = None
    n_splits: int = 100
    binning: str = "fixed"
    n_bins: int = 100
    fix_beta: bool = False
    chains: int = 3
    seed: int = 0
    thin: int = 1

    def __post_init__(self):
        probs = (self.p_grow, self.p_prune, self.p_change)
        if min(probs) < 0:
            raise ValueError("proposal probabilities must be nonnegative")
        total = sum(probs)
        if total != 0 and abs(total - 1.0) > 1e-9:
            raise ValueError(f"proposal probabilities must sum to 1 (or all be 0), got {total}")
        if self.m < 1 or self.iterations < 1 or self.chains < 1 or self.thin < 1:
            raise ValueError("m, iterations, chains and thin must be >= 1")
        if not 0 <= self.burn_in_fraction < 1:
            raise ValueError("burn_in_fraction must lie in [0, 1)")
        if not 0 < self.gamma < 1 or self.delta < 0:
            raise ValueError("need 0 < gamma < 1 and delta >= 0")
        for name in ("alpha", "beta"):
            v = getattr(self, name)
            if v is not None and not v > 0:
                raise ValueError(f"{name} must be positive")
        if self.n_splits < 1:
            raise ValueError("n_splits must be >= 1")
        if self.binning not in BINNING_RULES:
            raise ValueError(f"unknown binning rule {self.binning!r}; choose from {BINNING_RULES}")

    @property
    def burn_in(self) -> int:
        return int(self.iterations * self.burn_in_fraction)

    @property
    def n_kept(self) -> int:
        return len(range(self.burn_in, self.iterations, self.thin))

    def to_dict(self) -> dict:
        return asdict(self)


# ---------------------------------------------------------------------------
# hyperparameters


def n_bins_per_dim(points: np.ndarray, rule: str = "fixed", n_bins: int = 100) -> int:
    """Bins per dimension for the Gamma moment-matching histogram."""
    n, d = points.shape
    if rule == "fixed":
        return max(1, int(round(n_bins ** (1.0 / d))))
    if rule == "root_d1":
        return math.ceil(n ** (1.0 / (d + 1)))
    if rule == "root_d2":
        return math.ceil(n ** (1.0 / (d + 2)))
    if rule == "iqr":
        q75, q25 = np.percentile(points, [75, 25], axis=0)
        iqr = q75 - q25
        iqr = iqr[iqr > 0]
        if iqr.size == 0:
            return 1
        return max(1, int(np.max(np.ceil(n ** (1.0 / (d + 2)) / (2.0 * iqr)))))
    raise ValueError(f"unknown binning rule {rule!r}")


def fit_gamma_hyperparameters(
    points,
    m: int,
    rule: str = "fixed",
    n_bins: int = 100,
    fix_beta: bool = False,
) -> tuple[float, float]:
    """Match a Gamma(alpha, rate=beta) to the per-tree share of binned densities.

    ``points`` are in unit-cube coordinates. The cube is cut into equal
    cells, each cell's density ``count / volume`` is taken to the power
    ``1/m``, and alpha, beta reproduce the sample mean and variance of those
    roots. With ``fix_beta`` only the mean is matched, with ``beta = 1``.
    A zero variance falls back to the same mean-only match.
    """
    pts = np.asarray(points, dtype=float)
    if pts.ndim == 1:
        pts = pts.reshape(-1, 1)
    if len(pts) == 0:
        raise ValueError("cannot fit hyperparameters without points")
    d = pts.shape[1]
    nb = n_bins_per_dim(pts, rule, n_bins)
    idx = np.minimum((pts * nb).astype(np.int64), nb - 1)
    flat = np.ravel_multi_index(idx.T, (nb,) * d)
    counts = np.bincount(flat, minlength=nb**d)
    densities = counts * float(nb**d)
    roots = densities ** (1.0 / m)
    mu = float(roots.mean())
    var = float(roots.var(ddof=1)) if roots.size > 1 else 0.0
    if fix_beta:
        return mu, 1.0
    if not var > 0:
        warnings.warn("binned densities have zero variance; using beta=1, alpha=mean", RuntimeWarning, stacklevel=2)
        return mu, 1.0
    return mu * mu / var, mu / var


# ---------------------------------------------------------------------------
# likelihoods


@dataclass
class LeafTerms:
    """Per-leaf point counts ``n`` and exposures ``c`` of the tree being updated."""

    n: np.ndarray
    c: np.ndarray


class LeafTermsSource:
    """Counts and exposures of arbitrary boxes for one Gibbs step.

    ``partition`` is the common refinement of every tree except the one
    being updated, weighted by the product of their leaf values.
    """

    def __init__(self, points: np.ndarray, partition: WeightedPartition):
        self.points = points
        self.partition = partition

    def counts(self, lower: np.ndarray, upper: np.ndarray) -> np.ndarray:
        pts = self.points
        inside = np.all((pts[:, None, :] >= lower[None]) & (pts[:, None, :] < upper[None]), axis=2)
        return np.count_nonzero(inside, axis=0)

    def exposures(self, lower: np.ndarray, upper: np.ndarray) -> np.ndarray:
        return self.partition.exposure(lower, upper)

    def boxes(self, lower: np.ndarray, upper: np.ndarray) -> LeafTerms:
        lower = np.atleast_2d(lower)
        upper = np.atleast_2d(upper)
        return LeafTerms(self.counts(lower, upper), self.exposures(lower, upper))

    def leaf_terms(self, tree: DecisionTree) -> LeafTerms:
        lo, hi = tree.leaf_bounds()
        n = np.bincount(tree.leaf_index(self.points), minlength=len(lo)) if len(self.points) else np.zeros(len(lo), int)
        return LeafTerms(n, self.exposures(lo, hi))


def leaf_terms(tree: DecisionTree, state: EnsembleState, h: int, points) -> LeafTerms:
    """Counts and exposures of the leaves of ``tree`` against the other trees of ``state``."""
    pts = as_points(points, tree.dim)
    others = [t for j, t in enumerate(state.trees) if j != h]
    part = build_global_partition(others, dim=tree.dim)
    return LeafTermsSource(pts, part).leaf_terms(tree)


def log_conditional_likelihood(state: EnsembleState, points) -> float:
    """Poisson log-likelihood ``sum log lambda(s_i) - integral of lambda``, exactly."""
    pts = as_points(points, state.dim)
    log_sum = 0.0
    for tree in state.trees:
        if len(pts):
            log_sum += float(np.sum(np.log(tree(pts))))
    part = build_global_partition(state.trees)
    integral = float(part.weights @ part.volumes())
    return log_sum - integral


def _leaf_marginal(n, c, alpha, beta):
    return gammaln(n + alpha) - (n + alpha) * np.log(c + beta)


def log_integrated_likelihood(tree: DecisionTree, terms: LeafTerms, alpha: float, beta: float) -> float:
    """Log marginal likelihood of the topology with leaf values integrated out.

    The factor contributed by the other trees at the data points is the
    same for every topology of this tree and is left out.
    """
    n = np.asarray(terms.n, dtype=float)
    c = np.asarray(terms.c, dtype=float)
    if n.size != tree.n_leaves or c.size != tree.n_leaves:
        raise ValueError("leaf terms do not match the tree's leaves")
    if np.any(c + beta <= 0) or not np.all(np.isfinite(c)):
        raise FloatingPointError("nonpositive or non-finite exposure; sampler state is corrupted")
    b = tree.n_leaves
    return float(b * (alpha * math.log(beta) - math.lgamma(alpha)) + np.sum(_leaf_marginal(n, c, alpha, beta)))


def _lm(n, c, alpha, beta):
    return math.lgamma(n + alpha) - (n + alpha) * math.log(c + beta)


def _log(x: float) -> float:
    return math.log(x) if x > 0 else -math.inf


# ---------------------------------------------------------------------------
# proposals


@dataclass
class ProposalOutcome:
    """One Metropolis-Hastings proposal and its three log ratios.

    ``candidate`` is ``None`` for a proposal that cannot be applied to the
    current tree; such proposals are rejected outright.
    """

    kind: str
    candidate: DecisionTree | None
    log_transition_ratio: float = -math.inf
    log_likelihood_ratio: float = 0.0
    log_tree_structure_ratio: float = 0.0
    accepted: bool = False
    path: tuple[int, ...] = ()

    @property
    def applicable(self) -> bool:
        return self.candidate is not None

    @property
    def log_ratio(self) -> float:
        if self.candidate is None:
            return -math.inf
        return self.log_transition_ratio + self.log_likelihood_ratio + self.log_tree_structure_ratio


def _split_prior(depth, config):
    """Log prior of splitting a node at ``depth`` into two non-splitting leaves, over it staying a leaf."""
    p = split_probability(depth, config.gamma, config.delta)
    q = split_probability(depth + 1, config.gamma, config.delta)
    return math.log(p) + 2.0 * math.log1p(-q) - math.log1p(-p)


def grow_move(tree: DecisionTree, path, dim: int, value: float, source: LeafTermsSource, config: SamplerConfig, grid: SplitGrid) -> ProposalOutcome:
    """Ratios for splitting the leaf at ``path`` with rule ``x[dim] < value``."""
    leaf = tree.node_at(path)
    if not leaf.is_leaf:
        raise ValueError("GROW needs a leaf")
    n_dims, n_values = rule_cardinalities(leaf, grid, dim)
    candidate = tree.copy()
    node = candidate.node_at(path)
    candidate.grow(node, dim, value)
    w_star = len(candidate.cherries())

    log_rule = math.log(n_dims) + math.log(n_values)
    log_tr = _log(config.p_prune) - math.log(w_star) - (_log(config.p_grow) - math.log(tree.n_leaves) - log_rule)
    log_tsr = _split_prior(leaf.depth, config) - log_rule

    lower = np.array([leaf.lower, node.left.lower, node.right.lower])
    upper = np.array([leaf.upper, node.left.upper, node.right.upper])
    t = source.boxes(lower, upper)
    a, bt = config.alpha, config.beta
    log_lr = (
        a * math.log(bt) - math.lgamma(a)
        + _lm(t.n[1], t.c[1], a, bt) + _lm(t.n[2], t.c[2], a, bt)
        - _lm(t.n[0], t.c[0], a, bt)
    )
    return ProposalOutcome("grow", candidate, log_tr, log_lr, log_tsr, path=tuple(path))


def prune_move(tree: DecisionTree, path, source: LeafTermsSource, config: SamplerConfig, grid: SplitGrid) -> ProposalOutcome:
    """Ratios for collapsing the cherry at ``path`` into a leaf."""
    node = tree.node_at(path)
    w = len(tree.cherries())
    candidate = tree.copy()
    candidate.prune(candidate.node_at(path))
    # the reverse GROW picks this leaf among the leaves of the pruned tree
    b_star = candidate.n_leaves

    n_dims, n_values = rule_cardinalities(node, grid, node.dim)
    log_rule = math.log(n_dims) + math.log(n_values)
    log_tr = _log(config.p_grow) - math.log(b_star) - log_rule - (_log(config.p_prune) - math.log(w))
    log_tsr = -(_split_prior(node.depth, config) - log_rule)

    lower = np.array([node.lower, node.left.lower, node.right.lower])
    upper = np.array([node.upper, node.left.upper, node.right.upper])
    t = source.boxes(lower, upper)
    a, bt = config.alpha, config.beta
    log_lr = (
        -(a * math.log(bt) - math.lgamma(a))
        + _lm(t.n[0], t.c[0], a, bt)
        - _lm(t.n[1], t.c[1], a, bt) - _lm(t.n[2], t.c[2], a, bt)
    )
    return ProposalOutcome("prune", candidate, log_tr, log_lr, log_tsr, path=tuple(path))


def change_move(tree: DecisionTree, path, dim: int, value: float, source: LeafTermsSource, config: SamplerConfig, grid: SplitGrid) -> ProposalOutcome:
    """Ratios for giving the cherry at ``path`` the rule ``x[dim] < value``.

    The node's box is unchanged, so the transition and prior ratios are
    reciprocal and only the likelihood ratio is left.
    """
    node = tree.node_at(path)
    _, n_new = rule_cardinalities(node, grid, dim)
    _, n_old = rule_cardinalities(node, grid, node.dim)
    candidate = tree.copy()
    new = candidate.node_at(path)
    candidate.change(new, dim, value)

    log_tr = math.log(n_new) - math.log(n_old)
    log_tsr = math.log(n_old) - math.log(n_new)

    lower = np.array([node.left.lower, node.right.lower, new.left.lower, new.right.lower])
    upper = np.array([node.left.upper, node.right.upper, new.left.upper, new.right.upper])
    t = source.boxes(lower, upper)
    a, bt = config.alpha, config.beta
    log_lr = (
        _lm(t.n[2], t.c[2], a, bt) + _lm(t.n[3], t.c[3], a, bt)
        - _lm(t.n[0], t.c[0], a, bt) - _lm(t.n[1], t.c[1], a, bt)
    )
    return ProposalOutcome("change", candidate, log_tr, log_lr, log_tsr, path=tuple(path))


def propose_grow(tree: DecisionTree, source: LeafTermsSource, rng, config: SamplerConfig, grid: SplitGrid) -> ProposalOutcome:
    """Split a uniformly chosen leaf with a uniformly drawn rule."""
    leaves = tree.leaves()
    leaf = leaves[int(rng.integers(len(leaves)))]
    rule = draw_rule(leaf, grid, rng)
    if rule is None:
        return ProposalOutcome("grow", None)
    return grow_move(tree, tree.path_to(leaf), rule[0], rule[1], source, config, grid)


def propose_prune(tree: DecisionTree, source: LeafTermsSource, rng, config: SamplerConfig, grid: SplitGrid) -> ProposalOutcome:
    """Collapse a uniformly chosen cherry into a leaf."""
    cherries = tree.cherries()
    if not cherries:
        return ProposalOutcome("prune", None)
    node = cherries[int(rng.integers(len(cherries)))]
    return prune_move(tree, tree.path_to(node), source, config, grid)


def propose_change(tree: DecisionTree, source: LeafTermsSource, rng, config: SamplerConfig, grid: SplitGrid) -> ProposalOutcome:
    """Redraw the rule of a uniformly chosen cherry."""
    cherries = tree.cherries()
    if not cherries:
        return ProposalOutcome("change", None)
    node = cherries[int(rng.integers(len(cherries)))]
    dim, value, _, _ = draw_rule(node, grid, rng)
    return change_move(tree, tree.path_to(node), dim, value, source, config, grid)


_PROPOSALS = {"grow": propose_grow, "prune": propose_prune, "change": propose_change}


def accept(log_ratio: float, rng) -> bool:
    """Metropolis-Hastings acceptance with probability ``min(1, exp(log_ratio))``."""
    if log_ratio >= 0:
        return True
    if log_ratio == -math.inf:
        return False
    return bool(rng.random() < math.exp(log_ratio))


def mh_tree_update(
    state: EnsembleState,
    h: int,
    points,
    rng,
    config: SamplerConfig,
    grid: SplitGrid,
    source: LeafTermsSource | None = None,
) -> tuple[DecisionTree, ProposalOutcome | None]:
    """One Metropolis-Hastings step on the topology of tree ``h``.

    Returns the new tree (the current one on rejection) and the proposal,
    or ``None`` for the proposal when all move probabilities are zero.
    """
    tree = state.trees[h]
    if source is None:
        others = [t for j, t in enumerate(state.trees) if j != h]
        source = LeafTermsSource(as_points(points, state.dim), build_global_partition(others, dim=state.dim))
    probs = np.array([config.p_grow, config.p_prune, config.p_change])
    if probs.sum() == 0:
        return tree, None
    kind = MOVES[int(np.searchsorted(np.cumsum(probs), rng.random(), side="right").clip(0, 2))]
    outcome = _PROPOSALS[kind](tree, source, rng, config, grid)
    if outcome.applicable and accept(outcome.log_ratio, rng):
        outcome.accepted = True
        return outcome.candidate, outcome
    return tree, outcome


def draw_leaf_intensities(tree: DecisionTree, terms: LeafTerms, alpha: float, beta: float, rng) -> np.ndarray:
    """Independent conjugate draws ``Gamma(n + alpha, rate=c + beta)`` per leaf."""
    shape = np.asarray(terms.n, dtype=float) + alpha
    rate = np.asarray(terms.c, dtype=float) + beta
    if shape.size != tree.n_leaves:
        raise ValueError("leaf terms do not match the tree's leaves")
    return rng.gamma(shape, 1.0 / rate)


# ---------------------------------------------------------------------------
# chains


@dataclass
class MoveStats:
    proposed: dict = field(default_factory=lambda: dict.fromkeys(MOVES, 0))
    accepted: dict = field(default_factory=lambda: dict.fromkeys(MOVES, 0))

    def record(self, outcome: ProposalOutcome | None):
        if outcome is None:
            return
        self.proposed[outcome.kind] += 1
        self.accepted[outcome.kind] += int(outcome.accepted)

    def rates(self) -> dict:
        return {k: (self.accepted[k] / self.proposed[k] if self.proposed[k] else 0.0) for k in MOVES}

    def merge(self, other: "MoveStats") -> "MoveStats":
        out = MoveStats()
        for k in MOVES:
            out.proposed[k] = self.proposed[k] + other.proposed[k]
            out.accepted[k] = self.accepted[k] + other.accepted[k]
        return out


def gibbs_sweep(state: EnsembleState, points, config: SamplerConfig, grid: SplitGrid, rng, stats: MoveStats | None = None) -> EnsembleState:
    """Update every tree in turn: topology by MH, then fresh leaf values.

    Tree ``h`` always conditions on the latest values of all other trees.
    The state is modified in place and returned.
    """
    pts = as_points(points, state.dim)
    for h in range(state.m):
        _update_tree(state, h, pts, config, grid, rng, stats)
    return state


def _update_tree(state, h, pts, config, grid, rng, stats):
    others = [t for j, t in enumerate(state.trees) if j != h]
    source = LeafTermsSource(pts, build_global_partition(others, dim=state.dim))
    tree, outcome = mh_tree_update(state, h, pts, rng, config, grid, source)
    if stats is not None:
        stats.record(outcome)
    terms = source.leaf_terms(tree)
    tree.set_leaf_values(draw_leaf_intensities(tree, terms, config.alpha, config.beta, rng))
    state.trees[h] = tree
    return outcome is not None and outcome.accepted


def initial_state(dim: int, config: SamplerConfig, rng) -> EnsembleState:
    """``m`` single-leaf trees with prior Gamma leaf values."""
    values = rng.gamma(config.alpha, 1.0 / config.beta, size=config.m)
    return EnsembleState([DecisionTree.single_leaf(dim, v) for v in values])


def _check_unit(points, name):
    if np.any(points < 0) or np.any(points >= 1):
        raise ValueError(f"{name} must lie in the unit cube [0, 1)^d")


def resolve_hyperparameters(points, config: SamplerConfig) -> SamplerConfig:
    """Fill in ``alpha``/``beta`` left unset in ``config`` from the data."""
    if config.alpha is not None and config.beta is not None:
        return config
    alpha, beta = fit_gamma_hyperparameters(points, config.m, config.binning, config.n_bins, config.fix_beta)
    return replace(config, alpha=config.alpha or alpha, beta=config.beta or beta)


def iter_chain(points, config: SamplerConfig, test_points, rng, stats: MoveStats | None = None) -> Iterator[tuple[int, np.ndarray]]:
    """Yield ``(iteration, intensity at test points)`` after every sweep.

    Intensities are in unit-cube units. Test-point leaf lookups are cached
    per tree and refreshed only when that tree's topology changes.
    """
    pts = np.asarray(points, dtype=float)
    if pts.ndim != 2 or len(pts) == 0:
        raise ValueError("need at least one point, shaped (n, d)")
    dim = pts.shape[1]
    tests = as_points(test_points, dim)
    _check_unit(pts, "points")
    _check_unit(tests, "test points")
    config = resolve_hyperparameters(pts, config)
    grid = SplitGrid.uniform(dim, config.n_splits)
    state = initial_state(dim, config, rng)
    test_leaf = [t.leaf_index(tests) for t in state.trees]
    for it in range(1, config.iterations + 1):
        for h in range(config.m):
            if _update_tree(state, h, pts, config, grid, rng, stats):
                test_leaf[h] = state.trees[h].leaf_index(tests)
        values = np.ones(len(tests))
        for tree, idx in zip(state.trees, test_leaf):
            values *= tree.leaf_values()[idx]
        yield it, values


@dataclass
class ChainResult:
    """Kept draws of one chain: ``samples[k, i]`` is the intensity at test point ``i``."""

    samples: np.ndarray
    iterations: np.ndarray
    stats: MoveStats
    alpha: float
    beta: float

    def acceptance_rates(self) -> dict:
        return self.stats.rates()


def run_chain(points, config: SamplerConfig, test_points, rng, burn_in: int = 0) -> ChainResult:
    """Run one chain, keeping every ``config.thin``-th sweep after ``burn_in`` sweeps."""
    pts = np.asarray(points, dtype=float)
    if pts.ndim == 1:
        pts = pts.reshape(-1, 1)
    if len(pts) == 0:
        raise ValueError("cannot fit an intensity to zero points")
    config = resolve_hyperparameters(pts, config)
    tests = as_points(test_points, pts.shape[1])
    kept = range(burn_in, config.iterations, config.thin)
    samples = np.empty((len(kept), len(tests)))
    iters = np.empty(len(kept), dtype=np.int64)
    stats = MoveStats()
    k = 0
    for it, values in iter_chain(pts, config, tests, rng, stats):
        if it > burn_in and (it - burn_in - 1) % config.thin == 0:
            samples[k] = values
            iters[k] = it
            k += 1
        if it % 1000 == 0:
            log.debug("iteration %d/%d, acceptance %s", it, config.iterations, stats.rates())
    return ChainResult(samples, iters, stats, config.alpha, config.beta)


def chain_rng(seed: int, chain: int) -> np.random.Generator:
    """Independent generator for chain ``chain`` derived from the run seed."""
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(_CHAIN_STREAM, chain)))


_CHAIN_STREAM = 7


def _run_one(args):
    points, config, test_points, k = args
    return run_chain(points, config, test_points, chain_rng(config.seed, k), burn_in=config.burn_in)


def run_parallel_chains(points, config: SamplerConfig, test_points, jobs: int | None = None) -> list[ChainResult]:
    """Run ``config.chains`` independent chains with burn-in dropped.

    Hyperparameters are resolved once so all chains share them. Chains run
    in up to ``jobs`` worker processes; results do not depend on ``jobs``.
    """
    pts = np.asarray(points, dtype=float)
    if pts.ndim == 1:
        pts = pts.reshape(-1, 1)
    if len(pts) == 0:
        raise ValueError("cannot fit an intensity to zero points")
    config = resolve_hyperparameters(pts, config)
    tasks = [(pts, config, test_points, k) for k in range(config.chains)]
    jobs = config.chains if jobs is None else max(1, min(jobs, config.chains))
    if jobs == 1:
        return [_run_one(t) for t in tasks]
    with ProcessPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(_run_one, tasks))
