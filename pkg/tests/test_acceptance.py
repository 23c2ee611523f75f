"""Acceptance criteria, one test each, with a PASS/FAIL line per criterion.

The lines are printed as the tests run and repeated in the terminal summary.
"""

import math
import time

import numpy as np
import pytest
from scipy import integrate, stats

from bartpp.geometry import WeightedPartition, build_global_partition
from bartpp.io import cmd_pipeline, config_from_dict
from bartpp.sampler import (
    LeafTermsSource,
    SamplerConfig,
    change_move,
    grow_move,
    leaf_terms,
    log_integrated_likelihood,
    prune_move,
    run_chain,
)
from bartpp.tree import DecisionTree, EnsembleState, SplitGrid, draw_rule, log_tree_prior

from conftest import ACCEPTANCE_LINES, random_ensemble, random_tree
from test_sampler import _reverse, batch_means_se, run_topology_chain


def report(name, ok, detail):
    line = f"[{'PASS' if ok else 'FAIL'}] {name}: {detail}"
    ACCEPTANCE_LINES.append(line)
    print(line)
    assert ok, line


def quadrature_marginal(n, c, alpha, beta):
    """Integral of lambda^n exp(-c lambda) against the Gamma(alpha, rate=beta) density."""
    prior = stats.gamma(alpha, scale=1.0 / beta)
    mode = max((n + alpha - 1) / (c + beta), 1e-8)
    f = lambda x: math.exp(n * math.log(x) - c * x + prior.logpdf(x)) if x > 0 else 0.0
    left = integrate.quad(f, 0, mode, epsabs=0, epsrel=1e-12, limit=200)[0]
    right = integrate.quad(f, mode, np.inf, epsabs=0, epsrel=1e-12, limit=200)[0]
    return left + right


def test_integrated_likelihood_matches_quadrature():
    rng = np.random.default_rng(101)
    start, worst = time.perf_counter(), 0.0
    for _ in range(50):
        dim = int(rng.integers(1, 3))
        tree = random_tree(rng, dim, gamma=0.9, max_leaves=3)
        other = random_tree(rng, dim, max_leaves=4)
        pts = rng.random((int(rng.integers(0, 21)), dim))
        alpha, beta = float(rng.uniform(0.5, 5)), float(rng.uniform(0.2, 4))
        terms = leaf_terms(tree, EnsembleState([tree, other]), 0, pts)
        exact = math.exp(log_integrated_likelihood(tree, terms, alpha, beta))
        quad = math.prod(quadrature_marginal(n, c, alpha, beta) for n, c in zip(terms.n, terms.c))
        worst = max(worst, abs(exact - quad) / quad)
    elapsed = time.perf_counter() - start
    report(
        "integrated likelihood vs quadrature (50 instances)",
        worst <= 1e-6 and elapsed < 60,
        f"max relative error {worst:.2e} (tol 1e-6), {elapsed:.1f}s",
    )


def test_ratio_consistency():
    rng = np.random.default_rng(102)
    start = time.perf_counter()
    n_checked, worst_lr, worst_rev = 0, 0.0, 0.0
    while n_checked < 500:
        m, dim = int(rng.integers(1, 6)), int(rng.integers(1, 3))
        state = random_ensemble(rng, m, dim, max_leaves=6)
        h = int(rng.integers(m))
        pts = rng.random((int(rng.integers(0, 40)), dim))
        others = [t for j, t in enumerate(state.trees) if j != h]
        src = LeafTermsSource(pts, build_global_partition(others, dim=dim))
        cfg = SamplerConfig(m=m, alpha=float(rng.uniform(0.5, 4)), beta=float(rng.uniform(0.2, 3)))
        grid = SplitGrid.uniform(dim, 30)
        tree = state.trees[h]
        kind = ("grow", "prune", "change")[int(rng.integers(3))]
        if kind == "grow":
            leaf = tree.leaves()[int(rng.integers(tree.n_leaves))]
            rule = draw_rule(leaf, grid, rng)
            if rule is None:
                continue
            out = grow_move(tree, tree.path_to(leaf), rule[0], rule[1], src, cfg, grid)
        else:
            cherries = tree.cherries()
            if not cherries:
                continue
            node = cherries[int(rng.integers(len(cherries)))]
            path = tree.path_to(node)
            if kind == "prune":
                out = prune_move(tree, path, src, cfg, grid)
            else:
                d, v, _, _ = draw_rule(node, grid, rng)
                out = change_move(tree, path, d, v, src, cfg, grid)
        diff = log_integrated_likelihood(out.candidate, src.leaf_terms(out.candidate), cfg.alpha, cfg.beta)
        diff -= log_integrated_likelihood(tree, src.leaf_terms(tree), cfg.alpha, cfg.beta)
        back = _reverse(tree, out, src, cfg, grid)
        worst_lr = max(worst_lr, abs(out.log_likelihood_ratio - diff))
        worst_rev = max(worst_rev, abs(out.log_ratio + back.log_ratio))
        n_checked += 1
    elapsed = time.perf_counter() - start
    report(
        "ratio consistency (500 proposals)",
        worst_lr <= 1e-10 and worst_rev <= 1e-10 and elapsed < 60,
        f"max |LR - dlogL| {worst_lr:.1e}, max |forward + reverse| {worst_rev:.1e} (tol 1e-10), {elapsed:.1f}s",
    )


@pytest.mark.slow
def test_exact_posterior_two_topologies():
    grid = SplitGrid([[0.5]])
    pts = np.array([[0.05], [0.1], [0.2], [0.3], [0.35], [0.45], [0.7]])
    cfg = SamplerConfig(m=1, alpha=2.0, beta=1.0, gamma=0.95, delta=2.0, p_grow=0.5, p_prune=0.5, p_change=0.0)
    src = LeafTermsSource(pts, WeightedPartition.unit(1))
    trees = [DecisionTree.single_leaf(1), DecisionTree.from_splits(1, (0, 0.5, None, None))]
    logp = [
        log_tree_prior(t, cfg.gamma, cfg.delta, grid)
        + log_integrated_likelihood(t, src.leaf_terms(t), cfg.alpha, cfg.beta)
        for t in trees
    ]
    p_split = 1.0 / (1.0 + math.exp(logp[0] - logp[1]))
    start = time.perf_counter()
    trace = run_topology_chain(pts, cfg, grid, 1_000_000, seed=103)
    elapsed = time.perf_counter() - start
    ind = np.array([s is not None for s in trace])
    freq = ind.mean()
    se = batch_means_se(ind, 1000)
    report(
        "exact posterior, 2-topology system (1e6 MH iterations)",
        abs(freq - p_split) <= 3 * se and elapsed < 120,
        f"P(split) enumerated {p_split:.5f}, sampled {freq:.5f}, |diff| = {abs(freq - p_split) / se:.2f} SE (tol 3), {elapsed:.1f}s",
    )


def test_conjugate_leaf_draws():
    rng = np.random.default_rng(104)
    pts = rng.random((12, 1))
    alpha, beta = 3.0, 2.0
    cfg = SamplerConfig(m=1, iterations=100_000, alpha=alpha, beta=beta, p_grow=0, p_prune=0, p_change=0)
    start = time.perf_counter()
    draws = run_chain(pts, cfg, [[0.5]], np.random.default_rng(105)).samples[:, 0]
    elapsed = time.perf_counter() - start
    k, rate = len(pts) + alpha, 1.0 + beta
    mean, var = k / rate, k / rate**2
    n = len(draws)
    se_mean = math.sqrt(var / n)
    se_var = var * math.sqrt((2.0 + 6.0 / k) / n)
    z_mean = abs(draws.mean() - mean) / se_mean
    z_var = abs(draws.var(ddof=1) - var) / se_var
    report(
        "conjugate leaf draws (1e5 sweeps)",
        z_mean <= 3 and z_var <= 3 and elapsed < 120,
        f"mean {draws.mean():.4f} vs {mean:.4f} ({z_mean:.2f} SE), var {draws.var(ddof=1):.4f} vs {var:.4f} ({z_var:.2f} SE), {elapsed:.1f}s",
    )


def test_conservation():
    rng = np.random.default_rng(106)
    start = time.perf_counter()
    worst_vol, worst_c, counts_ok = 0.0, 0.0, True
    for _ in range(1000):
        m, dim = int(rng.integers(1, 5)), int(rng.integers(1, 4))
        state = random_ensemble(rng, m, dim, max_leaves=8)
        part = build_global_partition(state.trees)
        worst_vol = max(worst_vol, abs(part.volumes().sum() - 1.0))
        h = int(rng.integers(m))
        pts = rng.random((int(rng.integers(0, 50)), dim))
        unit = EnsembleState([t.copy() for t in state.trees])
        for j, t in enumerate(unit.trees):
            if j != h:
                t.set_leaf_values(np.ones(t.n_leaves))
        terms = leaf_terms(unit.trees[h], unit, h, pts)
        counts_ok &= int(terms.n.sum()) == len(pts)
        worst_c = max(worst_c, abs(terms.c.sum() - 1.0))
    elapsed = time.perf_counter() - start
    report(
        "conservation (1000 instances)",
        worst_vol <= 1e-10 and worst_c <= 1e-10 and counts_ok and elapsed < 30,
        f"max |sum vol - 1| {worst_vol:.1e}, max |sum c - |S|| {worst_c:.1e}, counts {'conserved' if counts_ok else 'LOST'}, {elapsed:.1f}s",
    )


def run_scenario(tmp_path, scenario, sampler, test_points="uniform:1000"):
    cfg = config_from_dict(
        {"scenario": scenario, "sampler": sampler, "test_points": test_points, "out": str(tmp_path / "run")}
    )
    start = time.perf_counter()
    result = cmd_pipeline(cfg)
    return result, time.perf_counter() - start


@pytest.mark.slow
def test_cosine_end_to_end(tmp_path):
    result, elapsed = run_scenario(tmp_path, "cosine", {"m": 10, "iterations": 10000, "chains": 3, "seed": 1})
    s = result["diagnose"]["scores"]["mean"]
    frac = result["diagnose"]["rhat_below_1.1"]
    report(
        "cosine scenario, m=10, 3 x 10000",
        s["aae"] <= 9.0 and s["rmse"] <= 14.5 and frac >= 0.9,
        f"{result['simulate']['n_events']} events, AAE {s['aae']:.2f} (<= 9.0), RMSE {s['rmse']:.2f} (<= 14.5), "
        f"R-hat < 1.1 at {100 * frac:.1f}% of points (>= 90%), {elapsed / 60:.1f} min",
    )


@pytest.mark.slow
def test_gaussian2d_end_to_end(tmp_path):
    result, elapsed = run_scenario(
        tmp_path, "gaussian2d", {"m": 8, "iterations": 10000, "chains": 3, "fix_beta": True, "seed": 1}
    )
    s = result["diagnose"]["scores"]["mean"]
    report(
        "2-D Gaussian scenario, m=8, beta=1, 3 x 10000",
        s["aae"] <= 270 and s["rmse"] <= 385,
        f"{result['simulate']['n_events']} events, AAE {s['aae']:.1f} (<= 270), RMSE {s['rmse']:.1f} (<= 385), {elapsed / 60:.1f} min",
    )


@pytest.mark.slow
@pytest.mark.parametrize("name, iterations", [("step1d", 3000), ("step2d", 2000)])
def test_stepwise_scenarios(tmp_path, name, iterations):
    fit, elapsed = run_scenario(tmp_path / "fit", name, {"m": 5, "iterations": iterations, "chains": 3, "seed": 1})
    baseline, _ = run_scenario(
        tmp_path / "base",
        name,
        {"m": 1, "iterations": 200, "chains": 3, "seed": 1, "p_grow": 0, "p_prune": 0, "p_change": 0},
    )
    truth = np.loadtxt(tmp_path / "fit" / "run" / "truth.csv", delimiter=",", skiprows=1, ndmin=2)[:, -1]
    aae_fit = fit["diagnose"]["scores"]["mean"]["aae"]
    aae_base = baseline["diagnose"]["scores"]["mean"]["aae"]
    limit = 0.4 * truth.mean()
    report(
        f"stepwise scenario {name}",
        aae_fit <= limit and aae_fit <= 0.7 * aae_base,
        f"AAE {aae_fit:.0f} (<= {limit:.0f}, 40% of mean truth), constant baseline AAE {aae_base:.0f} "
        f"(improvement {100 * (1 - aae_fit / aae_base):.0f}%, need >= 30%), {elapsed / 60:.1f} min",
    )


def test_pipeline_determinism(tmp_path):
    sampler = {"m": 3, "iterations": 200, "chains": 2, "seed": 7}
    outputs = []
    for k in range(2):
        cfg = config_from_dict(
            {"scenario": "step2d", "sampler": sampler, "test_points": "uniform:50", "out": str(tmp_path / f"r{k}"), "jobs": k + 1}
        )
        cmd_pipeline(cfg)
        outputs.append([(tmp_path / f"r{k}" / f).read_bytes() for f in ("summary.csv", "scores.csv")])
    report(
        "pipeline determinism",
        outputs[0] == outputs[1],
        "summary.csv and scores.csv byte-identical across repeated runs (1 and 2 workers)",
    )
