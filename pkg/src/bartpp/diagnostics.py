"""Posterior summaries, error scores and convergence checks for intensity draws."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

__all__ = [
    "PosteriorSummary",
    "aae",
    "rmse",
    "hdi",
    "gelman_rubin",
    "autocorrelation",
    "summarize",
]


def _pair(estimate, truth):
    est = np.asarray(estimate, dtype=float).reshape(-1)
    tru = np.asarray(truth, dtype=float).reshape(-1)
    if est.shape != tru.shape:
        raise ValueError(f"length mismatch: {est.size} estimates vs {tru.size} true values")
    if est.size == 0:
        raise ValueError("need at least one test point")
    return est, tru


def aae(estimate, truth) -> float:
    """Average absolute error over test points."""
    est, tru = _pair(estimate, truth)
    return float(np.mean(np.abs(est - tru)))


def rmse(estimate, truth) -> float:
    """Root mean square error over test points."""
    est, tru = _pair(estimate, truth)
    return float(np.sqrt(np.mean((est - tru) ** 2)))


def hdi(samples, mass: float = 0.95, axis: int = 0):
    """Shortest interval holding ``ceil(mass * n)`` of the sorted samples.

    Works along ``axis``, so a ``(draws, points)`` matrix gives one interval
    per point. Ties go to the leftmost window.

    Returns
    -------
    lower, upper : float or ndarray
    """
    x = np.sort(np.asarray(samples, dtype=float), axis=axis)
    x = np.moveaxis(x, axis, 0)
    n = x.shape[0]
    if n < 20:
        raise ValueError(f"hdi needs at least 20 samples, got {n}")
    if not 0 < mass <= 1:
        raise ValueError("mass must lie in (0, 1]")
    k = math.ceil(mass * n - 1e-9)
    widths = x[k - 1:] - x[: n - k + 1]
    start = np.argmin(widths, axis=0)
    lower = np.take_along_axis(x, start[None, ...], axis=0)[0]
    upper = np.take_along_axis(x, (start + k - 1)[None, ...], axis=0)[0]
    if lower.ndim == 0:
        return float(lower), float(upper)
    return lower, upper


def gelman_rubin(chains) -> float | np.ndarray:
    """Potential scale reduction factor of ``chains`` shaped ``(M, L[, ...])``.

    Uses the classic between/within variance ratio on the sequences as
    given (burn-in already removed). Trailing axes are treated as separate
    quantities. Returns 1 where every chain is the same constant.
    """
    x = np.asarray(chains, dtype=float)
    if x.ndim < 2 or x.shape[0] < 2:
        raise ValueError("gelman_rubin needs at least two chains")
    M, L = x.shape[:2]
    if L < 2:
        raise ValueError("each chain needs at least two draws")
    means = x.mean(axis=1)
    W = x.var(axis=1, ddof=1).mean(axis=0)
    B = L * means.var(axis=0, ddof=1)
    pooled = (L - 1) / L * W + B / L
    with np.errstate(divide="ignore", invalid="ignore"):
        r = np.sqrt(pooled / W)
    r = np.where((W == 0) & (B == 0), 1.0, r)
    r = np.where((W == 0) & (B > 0), np.inf, r)
    return float(r) if r.ndim == 0 else r


def autocorrelation(sequence, max_lag: int) -> np.ndarray:
    """Biased sample autocorrelation at lags ``0..max_lag``."""
    x = np.asarray(sequence, dtype=float).reshape(-1)
    if len(x) <= max_lag:
        raise ValueError("sequence must be longer than max_lag")
    x = x - x.mean()
    denom = float(x @ x)
    out = np.zeros(max_lag + 1)
    out[0] = 1.0
    if denom == 0:
        return out
    for k in range(1, max_lag + 1):
        out[k] = float(x[:-k] @ x[k:]) / denom
    return out


def _rhat(stack: np.ndarray) -> np.ndarray:
    M, L, N = stack.shape
    if M == 1 and L >= 4:
        half = L // 2
        stack = np.stack([stack[0, :half], stack[0, L - half:]])
        M, L = 2, half
    constant = np.all(stack == stack[:1, :1], axis=(0, 1))
    if M < 2 or L < 2:
        return np.where(constant, 1.0, np.nan)
    return np.where(constant, 1.0, gelman_rubin(stack))


@dataclass
class PosteriorSummary:
    """Per-test-point posterior summaries; every array has length ``N_t``."""

    mean: np.ndarray
    median: np.ndarray
    hdi_low: np.ndarray
    hdi_high: np.ndarray
    rhat: np.ndarray
    scores: dict | None = None

    def __len__(self):
        return len(self.mean)


def summarize(chains, truth=None, mass: float = 0.95) -> PosteriorSummary:
    """Pool kept draws across chains and summarise each test point.

    ``chains`` is a sequence of ``(draws, N_t)`` matrices of equal shape.
    R-hat compares the separate chains; a lone chain is split into halves.
    With ``truth`` the AAE and RMSE of the posterior mean
    and median are attached as ``scores``.
    """
    mats = [np.asarray(c, dtype=float) for c in chains]
    if not mats:
        raise ValueError("no chains to summarise")
    if any(m.ndim != 2 for m in mats) or len({m.shape for m in mats}) != 1:
        raise ValueError(f"chains are misaligned: shapes {[m.shape for m in mats]}")
    stack = np.stack(mats)
    pooled = stack.reshape(-1, stack.shape[2])
    mean = pooled.mean(axis=0)
    median = np.median(pooled, axis=0)
    if pooled.shape[0] >= 20:
        lo, hi = hdi(pooled, mass)
    else:
        lo, hi = pooled.min(axis=0), pooled.max(axis=0)
    rhat = _rhat(stack)
    summary = PosteriorSummary(mean, median, np.asarray(lo), np.asarray(hi), np.asarray(rhat))
    if truth is not None:
        summary.scores = {
            "mean": {"aae": aae(mean, truth), "rmse": rmse(mean, truth)},
            "median": {"aae": aae(median, truth), "rmse": rmse(median, truth)},
        }
    return summary
