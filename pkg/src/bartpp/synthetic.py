"""Synthetic inhomogeneous Poisson processes and the benchmark intensities."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .geometry import Domain

__all__ = [
    "IntensityScenario",
    "BoundViolation",
    "simulate_thinning",
    "piecewise_constant",
    "stepwise_1d",
    "homogeneous",
    "cosine",
    "gaussian2d",
    "step1d",
    "step2d",
    "builtin_scenarios",
    "get_scenario",
]


class BoundViolation(ValueError):
    """The intensity exceeded the dominating rate used for thinning."""


@dataclass(frozen=True)
class IntensityScenario:
    """A known intensity on a rectangular domain.

    ``intensity`` maps an ``(n, d)`` array of native coordinates to ``n``
    rates; ``lambda_max`` bounds it from above on the whole domain.
    """

    name: str
    domain: Domain
    intensity: Callable[[np.ndarray], np.ndarray]
    lambda_max: float

    @property
    def dim(self) -> int:
        return self.domain.dim

    def __call__(self, points) -> np.ndarray:
        pts = np.asarray(points, dtype=float)
        if pts.ndim == 1:
            pts = pts.reshape(-1, self.dim)
        return np.asarray(self.intensity(pts), dtype=float)


def simulate_thinning(scenario: IntensityScenario, rng: np.random.Generator) -> np.ndarray:
    """Draw one realisation by thinning a dominating homogeneous process.

    Returns an ``(n, d)`` array in native coordinates.
    """
    dom = scenario.domain
    if not np.isfinite(scenario.lambda_max) or scenario.lambda_max <= 0:
        raise ValueError("lambda_max must be finite and positive")
    n = rng.poisson(scenario.lambda_max * dom.volume)
    cand = dom.low + rng.random((n, dom.dim)) * dom.ranges
    rate = scenario(cand)
    if np.any(rate > scenario.lambda_max * (1 + 1e-12)):
        worst = int(np.argmax(rate))
        raise BoundViolation(
            f"{scenario.name}: intensity {rate[worst]:g} at {cand[worst].tolist()} exceeds lambda_max {scenario.lambda_max:g}"
        )
    keep = rng.random(n) * scenario.lambda_max < rate
    return cand[keep]


def piecewise_constant(
    name: str,
    domain: Domain,
    base: float,
    boxes: Sequence[tuple[Sequence[float], Sequence[float], float]] = (),
) -> IntensityScenario:
    """Constant ``base`` rate overridden on half-open boxes ``(lower, upper, level)``.

    Boxes are given in native coordinates; later boxes win where they overlap.
    """
    boxes = [(np.asarray(lo, float), np.asarray(hi, float), float(level)) for lo, hi, level in boxes]
    levels = [base] + [level for *_, level in boxes]
    if min(levels) < 0:
        raise ValueError("intensity levels must be nonnegative")

    def intensity(pts):
        out = np.full(len(pts), float(base))
        for lo, hi, level in boxes:
            out[np.all((pts >= lo) & (pts < hi), axis=1)] = level
        return out

    return IntensityScenario(name, domain, intensity, float(max(levels)))


def stepwise_1d(name: str, breaks: Sequence[float], levels: Sequence[float], domain: Domain | None = None) -> IntensityScenario:
    """Step function on a 1-D domain: ``levels[k]`` between consecutive ``breaks``."""
    domain = domain or Domain(((0.0, 1.0),))
    edges = [domain.bounds[0][0], *breaks, domain.bounds[0][1]]
    if len(levels) != len(edges) - 1:
        raise ValueError("need exactly one more level than breaks")
    if np.any(np.diff(edges) <= 0):
        raise ValueError("breaks must be increasing and inside the domain")
    boxes = [([lo], [hi], lv) for lo, hi, lv in zip(edges[:-1], edges[1:], levels)]
    # close the last step on the right edge
    boxes[-1] = ([edges[-2]], [np.inf], levels[-1])
    return piecewise_constant(name, domain, levels[0], boxes)


def homogeneous(rate: float = 100.0, domain: Domain | None = None) -> IntensityScenario:
    domain = domain or Domain(((0.0, 1.0),))
    return piecewise_constant("homogeneous", domain, rate)


def cosine() -> IntensityScenario:
    """``20 exp(-x/5) (5 + 4 cos x)`` on ``[0, 10]``; the maximum 180 is at ``x = 0``."""

    def intensity(pts):
        x = pts[:, 0]
        return 20.0 * np.exp(-x / 5.0) * (5.0 + 4.0 * np.cos(x))

    return IntensityScenario("cosine", Domain(((0.0, 10.0),)), intensity, 180.0)


def gaussian2d() -> IntensityScenario:
    """``1000 exp(x^2 + y^2)`` on the unit square."""

    def intensity(pts):
        return 1000.0 * np.exp(np.sum(pts**2, axis=1))

    return IntensityScenario("gaussian2d", Domain(((0.0, 1.0), (0.0, 1.0))), intensity, 1000.0 * np.e**2)


def step1d() -> IntensityScenario:
    """Five-step preset on ``[0, 1)`` with expected count 3590."""
    return stepwise_1d("step1d", [0.2, 0.4, 0.6, 0.8], [2000.0, 5000.0, 1500.0, 4500.0, 4950.0])


def step2d() -> IntensityScenario:
    """Three raised rectangles over a flat background; expected count 5579."""
    return piecewise_constant(
        "step2d",
        Domain(((0.0, 1.0), (0.0, 1.0))),
        3000.0,
        [
            ([0.1, 0.5], [0.5, 0.9], 14000.0),
            ([0.6, 0.1], [0.9, 0.4], 9000.0),
            ([0.55, 0.55], [0.85, 0.85], 6100.0),
        ],
    )


_BUILTIN = {"cosine": cosine, "gaussian2d": gaussian2d, "step1d": step1d, "step2d": step2d}


def builtin_scenarios() -> dict[str, IntensityScenario]:
    return {name: make() for name, make in _BUILTIN.items()}


def get_scenario(name: str, **params) -> IntensityScenario:
    """Look up a scenario by name.

    Besides the four presets, ``homogeneous`` (``rate``, ``bounds``),
    ``stepwise`` (``breaks``, ``levels``, ``bounds``) and ``piecewise``
    (``base``, ``boxes``, ``bounds``) build custom intensities.
    """
    if name in _BUILTIN:
        if params:
            raise ValueError(f"scenario {name!r} takes no parameters")
        return _BUILTIN[name]()
    bounds = params.pop("bounds", None)
    domain = Domain(tuple(map(tuple, bounds))) if bounds is not None else None
    if name == "homogeneous":
        return homogeneous(params.pop("rate", 100.0), domain)
    if name == "stepwise":
        return stepwise_1d("stepwise", params.pop("breaks"), params.pop("levels"), domain)
    if name == "piecewise":
        if domain is None:
            raise ValueError("piecewise scenario needs bounds")
        return piecewise_constant("piecewise", domain, params.pop("base"), params.pop("boxes", ()))
    raise KeyError(f"unknown scenario {name!r}")
