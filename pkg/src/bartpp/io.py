"""Run configuration, on-disk formats and the simulate / fit / diagnose steps.

All tabular artifacts are CSV with fixed headers:

``points.csv``
    ``x1[,x2,...]``, one event per row, native coordinates.
``test_points.csv``
    ``x1[,x2,...]``, native coordinates.
``truth.csv``
    ``x1..xd,truth`` (simulated scenarios only).
``chain_<k>.csv``
    ``iter,z1..zN``: one row per kept iteration, intensities in native units.
``summary.csv``
    ``x1..xd,mean,median,hdi_low,hdi_high,rhat``.
``scores.csv``
    ``estimator,aae,rmse`` for the posterior mean and median.
"""

from __future__ import annotations

import csv
import json
import logging
import time
from dataclasses import dataclass, field, fields, replace
from pathlib import Path

import numpy as np

from .diagnostics import summarize
from .geometry import Domain, DomainError, denormalize_points, normalize_points
from .sampler import SamplerConfig, n_bins_per_dim, resolve_hyperparameters, run_parallel_chains
from .synthetic import IntensityScenario, get_scenario, simulate_thinning

__all__ = [
    "ConfigError",
    "DataError",
    "RunConfig",
    "load_config",
    "parse_points_csv",
    "read_points_csv",
    "write_points_csv",
    "resolve_test_points",
    "cmd_simulate",
    "cmd_fit",
    "cmd_diagnose",
    "cmd_pipeline",
]

log = logging.getLogger(__name__)

_SIM_STREAM = 1
_TEST_STREAM = 2
_FMT = "%.17g"


class ConfigError(ValueError):
    """Invalid or inconsistent run configuration."""


class DataError(ValueError):
    """Unreadable or invalid input data."""


@dataclass
class RunConfig:
    """Everything a run needs; the JSON config file is this dataclass's dict form.

    Exactly one of ``scenario`` / ``points`` names the data source.
    ``test_points`` is ``"uniform:K"`` (K uniform draws), ``"grid:K"`` (a
    K-per-dimension lattice of cell centres) or a CSV path.
    """

    sampler: SamplerConfig = field(default_factory=SamplerConfig)
    scenario: str | None = None
    scenario_params: dict = field(default_factory=dict)
    points: str | None = None
    domain: tuple | None = None
    test_points: str = "uniform:1000"
    out: str = "bartpp-out"
    jobs: int | None = None

    def __post_init__(self):
        if (self.scenario is None) == (self.points is None):
            raise ConfigError("give exactly one of 'scenario' or 'points'")
        if self.points is not None and self.domain is None:
            raise ConfigError("'domain' is required when reading points from a file")
        if self.domain is not None:
            try:
                self.domain = Domain(tuple(tuple(b) for b in self.domain))
            except (TypeError, ValueError) as exc:
                raise ConfigError(f"bad domain: {exc}") from exc
        spec = self.test_points
        if not isinstance(spec, str) or not spec:
            raise ConfigError("'test_points' must be a non-empty string")
        if spec.startswith(("uniform:", "grid:")):
            try:
                k = int(spec.split(":", 1)[1])
            except ValueError as exc:
                raise ConfigError(f"bad test point spec {spec!r}") from exc
            if k < 1:
                raise ConfigError("test point count must be positive")

    def get_scenario(self) -> IntensityScenario | None:
        if self.scenario is None:
            return None
        try:
            return get_scenario(self.scenario, **dict(self.scenario_params))
        except (KeyError, TypeError, ValueError) as exc:
            raise ConfigError(f"scenario {self.scenario!r}: {exc}") from exc

    def get_domain(self) -> Domain:
        if self.domain is not None:
            return self.domain
        return self.get_scenario().domain

    @property
    def out_dir(self) -> Path:
        return Path(self.out)

    def to_dict(self) -> dict:
        return {
            "sampler": self.sampler.to_dict(),
            "scenario": self.scenario,
            "scenario_params": self.scenario_params,
            "points": self.points,
            "domain": [list(b) for b in self.domain.bounds] if self.domain is not None else None,
            "test_points": self.test_points,
            "out": self.out,
            "jobs": self.jobs,
        }


def config_from_dict(raw: dict, *, seed: int | None = None, jobs: int | None = None, out: str | None = None) -> RunConfig:
    """Build a :class:`RunConfig`, applying command-line overrides."""
    if not isinstance(raw, dict):
        raise ConfigError("config must be a JSON object")
    raw = dict(raw)
    allowed = {f.name for f in fields(RunConfig)}
    unknown = set(raw) - allowed
    if unknown:
        raise ConfigError(f"unknown config keys: {sorted(unknown)}")
    sampler_raw = dict(raw.pop("sampler", {}) or {})
    sampler_fields = {f.name for f in fields(SamplerConfig)}
    bad = set(sampler_raw) - sampler_fields
    if bad:
        raise ConfigError(f"unknown sampler keys: {sorted(bad)}")
    if seed is not None:
        sampler_raw["seed"] = seed
    scenario = raw.get("scenario")
    if isinstance(scenario, dict):
        scenario = dict(scenario)
        raw["scenario"] = scenario.pop("name", None)
        raw["scenario_params"] = scenario
    try:
        sampler = SamplerConfig(**sampler_raw)
        cfg = RunConfig(sampler=sampler, **raw)
    except TypeError as exc:
        raise ConfigError(str(exc)) from exc
    except ValueError as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(str(exc)) from exc
    if jobs is not None:
        cfg.jobs = jobs
    if out is not None:
        cfg.out = out
    return cfg


def load_config(path, **overrides) -> RunConfig:
    try:
        with open(path) as fh:
            raw = json.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: invalid JSON ({exc})") from exc
    return config_from_dict(raw, **overrides)


# ---------------------------------------------------------------------------
# CSV


def _header(d: int) -> list[str]:
    return [f"x{j + 1}" for j in range(d)]


def read_points_csv(path, dim: int | None = None) -> np.ndarray:
    """Read an ``x1..xd`` CSV into an ``(n, d)`` array of native coordinates."""
    path = Path(path)
    try:
        fh = open(path, newline="")
    except OSError as exc:
        raise DataError(f"cannot read {path}: {exc}") from exc
    with fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise DataError(f"{path}: empty file, no events") from None
        header = [h.strip() for h in header]
        d = len(header)
        if header != _header(d):
            raise DataError(f"{path}:1: expected header {','.join(_header(d))}, got {','.join(header)}")
        if dim is not None and d != dim:
            raise DataError(f"{path}:1: expected {dim} columns for a {dim}-d domain, got {d}")
        rows = []
        for lineno, row in enumerate(reader, start=2):
            if not row or all(not c.strip() for c in row):
                continue
            if len(row) != d:
                raise DataError(f"{path}:{lineno}: expected {d} columns, got {len(row)}")
            try:
                rows.append([float(c) for c in row])
            except ValueError:
                raise DataError(f"{path}:{lineno}: non-numeric value in {row}") from None
            if not all(np.isfinite(rows[-1])):
                raise DataError(f"{path}:{lineno}: non-finite value in {row}")
    if not rows:
        raise DataError(f"{path}: no events")
    return np.array(rows, dtype=float).reshape(-1, d)


def parse_points_csv(path, domain: Domain) -> np.ndarray:
    """Read events and map them onto the unit cube.

    Errors name the offending line (the header is line 1).
    """
    raw = read_points_csv(path, domain.dim)
    try:
        return normalize_points(raw, domain)
    except DomainError as exc:
        raise DataError(f"{path}:{exc.index + 2}: {exc}") from exc


def write_points_csv(path, points: np.ndarray, extra: dict | None = None) -> None:
    pts = np.atleast_2d(points)
    cols = [pts[:, j] for j in range(pts.shape[1])]
    names = _header(pts.shape[1])
    for name, values in (extra or {}).items():
        names.append(name)
        cols.append(np.asarray(values, dtype=float))
    data = np.column_stack(cols) if cols and len(pts) else np.empty((0, len(names)))
    np.savetxt(path, data, fmt=_FMT, delimiter=",", header=",".join(names), comments="")


def _write_matrix(path, iters: np.ndarray, values: np.ndarray) -> None:
    names = ["iter"] + [f"z{i + 1}" for i in range(values.shape[1])]
    with open(path, "w") as fh:
        fh.write(",".join(names) + "\n")
        body = np.column_stack([iters.astype(float), values])
        fmt = ["%d"] + [_FMT] * values.shape[1]
        np.savetxt(fh, body, fmt=fmt, delimiter=",")


def _read_matrix(path) -> np.ndarray:
    path = Path(path)
    with open(path) as fh:
        header = fh.readline().strip().split(",")
    if not header or header[0] != "iter":
        raise DataError(f"{path}:1: expected an 'iter' column first")
    data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    if data.shape[1] != len(header):
        raise DataError(f"{path}: rows do not match the header width")
    return data[:, 1:]


# ---------------------------------------------------------------------------
# steps


def _rng(seed: int, stream: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(stream,)))


def resolve_test_points(cfg: RunConfig) -> np.ndarray:
    """Test points in unit-cube coordinates."""
    domain = cfg.get_domain()
    d = domain.dim
    spec = cfg.test_points
    if spec.startswith("uniform:"):
        k = int(spec.split(":", 1)[1])
        return _rng(cfg.sampler.seed, _TEST_STREAM).random((k, d))
    if spec.startswith("grid:"):
        k = int(spec.split(":", 1)[1])
        axis = (np.arange(k) + 0.5) / k
        mesh = np.meshgrid(*([axis] * d), indexing="ij")
        return np.column_stack([g.ravel() for g in mesh])
    return parse_points_csv(spec, domain)


def _load_points(cfg: RunConfig) -> tuple[np.ndarray, Domain]:
    domain = cfg.get_domain()
    if cfg.points is not None:
        return parse_points_csv(cfg.points, domain), domain
    scenario = cfg.get_scenario()
    raw = simulate_thinning(scenario, _rng(cfg.sampler.seed, _SIM_STREAM))
    if len(raw) == 0:
        raise DataError(f"scenario {scenario.name!r} produced no events")
    return normalize_points(raw, domain), domain


def cmd_simulate(cfg: RunConfig) -> dict:
    """Write ``points.csv``, ``test_points.csv`` and ``truth.csv`` for a scenario."""
    scenario = cfg.get_scenario()
    if scenario is None:
        raise ConfigError("simulate needs a 'scenario'")
    domain = cfg.get_domain()
    out = cfg.out_dir
    out.mkdir(parents=True, exist_ok=True)
    raw = simulate_thinning(scenario, _rng(cfg.sampler.seed, _SIM_STREAM))
    write_points_csv(out / "points.csv", raw)
    tests = denormalize_points(resolve_test_points(cfg), domain)
    write_points_csv(out / "test_points.csv", tests)
    write_points_csv(out / "truth.csv", tests, {"truth": scenario(tests)})
    log.info("simulated %d events from %s", len(raw), scenario.name)
    return {"n_events": int(len(raw)), "n_test_points": int(len(tests))}


def cmd_fit(cfg: RunConfig) -> dict:
    """Run the chains and write one matrix per chain plus ``manifest.json``."""
    start = time.perf_counter()
    points, domain = _load_points(cfg)
    tests = resolve_test_points(cfg)
    out = cfg.out_dir
    out.mkdir(parents=True, exist_ok=True)
    sampler = resolve_hyperparameters(points, cfg.sampler)
    fitted = cfg.sampler.alpha is None or cfg.sampler.beta is None
    results = run_parallel_chains(points, sampler, tests, jobs=cfg.jobs)
    scale = 1.0 / domain.volume
    for k, res in enumerate(results):
        if not np.all(np.isfinite(res.samples)):
            raise FloatingPointError(f"chain {k} produced non-finite intensities")
        _write_matrix(out / f"chain_{k}.csv", res.iterations, res.samples * scale)
    write_points_csv(out / "test_points.csv", denormalize_points(tests, domain))
    manifest = {
        "config": cfg.to_dict(),
        "seed": cfg.sampler.seed,
        "n_events": int(len(points)),
        "n_test_points": int(len(tests)),
        "hyperparameters": {
            "alpha": sampler.alpha,
            "beta": sampler.beta,
            "fitted": fitted,
            "binning": sampler.binning,
            "bins_per_dim": n_bins_per_dim(points, sampler.binning, sampler.n_bins),
            "fix_beta": sampler.fix_beta,
        },
        "chains": [
            {
                "file": f"chain_{k}.csv",
                "kept": int(len(res.iterations)),
                "acceptance": res.acceptance_rates(),
                "proposed": dict(res.stats.proposed),
            }
            for k, res in enumerate(results)
        ],
        "wall_time_s": time.perf_counter() - start,
    }
    with open(out / "manifest.json", "w") as fh:
        json.dump(manifest, fh, indent=2)
    return manifest


def cmd_diagnose(cfg: RunConfig) -> dict:
    """Summarise the chain matrices in ``out`` into ``summary.csv`` (and ``scores.csv``)."""
    out = cfg.out_dir
    files = sorted(out.glob("chain_*.csv"), key=lambda p: int(p.stem.split("_")[1]))
    if not files:
        raise DataError(f"no chain_*.csv files in {out}")
    chains = [_read_matrix(f) for f in files]
    if len({c.shape for c in chains}) != 1:
        raise DataError(f"chain matrices are misaligned: {[c.shape for c in chains]}")
    domain = cfg.get_domain()
    tests = read_points_csv(out / "test_points.csv", domain.dim)
    if len(tests) != chains[0].shape[1]:
        raise DataError("test_points.csv does not match the chain matrices")
    truth = None
    truth_path = out / "truth.csv"
    if truth_path.exists():
        table = np.loadtxt(truth_path, delimiter=",", skiprows=1, ndmin=2)
        if not np.array_equal(table[:, :-1], tests):
            raise DataError("truth.csv test points differ from test_points.csv")
        truth = table[:, -1]
    summary = summarize(chains, truth)
    write_points_csv(
        out / "summary.csv",
        tests,
        {
            "mean": summary.mean,
            "median": summary.median,
            "hdi_low": summary.hdi_low,
            "hdi_high": summary.hdi_high,
            "rhat": summary.rhat,
        },
    )
    result = {"n_test_points": len(summary), "rhat_below_1.1": float(np.mean(summary.rhat < 1.1))}
    if summary.scores is not None:
        with open(out / "scores.csv", "w") as fh:
            fh.write("estimator,aae,rmse\n")
            for name, s in summary.scores.items():
                fh.write(f"{name},{s['aae']!r},{s['rmse']!r}\n")
        result["scores"] = summary.scores
    return result


def cmd_pipeline(cfg: RunConfig) -> dict:
    result = {}
    if cfg.scenario is not None:
        result["simulate"] = cmd_simulate(cfg)
    result["fit"] = cmd_fit(cfg)
    result["diagnose"] = cmd_diagnose(cfg)
    return result
