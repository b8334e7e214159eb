"""Experiment driver: replicate batches, rate fits, persistence.

Replicates standardize with formula moments (mean and variance assembled
from intensity-free integrals), not sample moments, so the recorded values
are exactly the normalized quantity the distance estimates refer to.  Every
random stream derives from (master seed, lambda index, replicate index);
rerunning a config byte-reproduces its outputs.
"""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass
from typing import Optional, Sequence, Union

import numpy as np

from ._streams import spawn_rng, stream_token
from .applications import make_kernel
from .clt_bounds import BoundReport, geometric_bound, local_bound
from .distance import SampleSet, kolmogorov_to_normal, wasserstein_to_normal
from .errors import ConfigError, DegenerateFunctionalError
from .point_process import (
    BallWindow,
    BoxWindow,
    IntensityModel,
    LineWindow,
    Window,
    sample_lines,
    sample_points,
)
from .ustat_core import Estimate, Integrator, UStatKernel, combine_se, evaluate, variance_terms

__all__ = [
    "ExperimentConfig",
    "ReplicateRecord",
    "RateFitResult",
    "window_from_spec",
    "window_to_spec",
    "default_window",
    "moment_table",
    "run_replicates",
    "rate_experiment",
    "emit_csv",
    "emit_report",
    "read_records",
    "read_rates",
]


def window_from_spec(doc: dict) -> Window:
    """Build a window from a JSON-style {"shape": ...} mapping."""
    if not isinstance(doc, dict) or "shape" not in doc:
        raise ConfigError("window spec needs a 'shape' key")
    shape = doc["shape"]
    if shape == "box":
        if "bounds" not in doc:
            raise ConfigError("box window spec needs 'bounds'")
        return BoxWindow(tuple(tuple(float(v) for v in axis) for axis in doc["bounds"]))
    if shape == "ball":
        if "radius" not in doc:
            raise ConfigError("ball window spec needs 'radius'")
        return BallWindow(float(doc["radius"]), int(doc.get("dimension", 2)))
    if shape == "line-disk":
        if "radius" not in doc:
            raise ConfigError("line-disk window spec needs 'radius'")
        return LineWindow(float(doc["radius"]))
    raise ConfigError(f"unknown window shape {shape!r}; use box, ball or line-disk")


def window_to_spec(window: Window) -> dict:
    if isinstance(window, BoxWindow):
        return {"shape": "box", "bounds": [list(axis) for axis in window.bounds]}
    if isinstance(window, BallWindow):
        return {"shape": "ball", "radius": window.radius, "dimension": window.dimension}
    if isinstance(window, LineWindow):
        return {"shape": "line-disk", "radius": window.radius}
    raise ConfigError(f"unknown window type {type(window).__name__}")


def default_window(kernel_name: str) -> Window:
    """Conventional window for a registered kernel name."""
    if kernel_name == "counterexample":
        return BoxWindow(((-1.0, 1.0),))
    if kernel_name == "line-intersections":
        return LineWindow(1.0)
    return BoxWindow(((0.0, 1.0), (0.0, 1.0)))


@dataclass(frozen=True)
class ExperimentConfig:
    """One experiment: kernel, window, lambda grid, replication plan."""

    kernel: Union[str, UStatKernel]
    window: Window
    lambdas: tuple
    replicates: int
    integrator: Integrator = Integrator()
    seed: int = 0
    delta: Optional[float] = None
    k: Optional[int] = None
    c_k: Optional[float] = None
    records_path: Optional[str] = None
    rates_path: Optional[str] = None
    report_path: Optional[str] = None

    def __post_init__(self):
        lambdas = tuple(float(v) for v in self.lambdas)
        if not lambdas:
            raise ConfigError("need at least one lambda")
        if any(not v > 0 for v in lambdas):
            raise ConfigError(f"lambdas must be positive, got {lambdas}")
        if any(b <= a for a, b in zip(lambdas, lambdas[1:])):
            raise ConfigError(f"lambda grid must be strictly increasing, got {lambdas}")
        object.__setattr__(self, "lambdas", lambdas)
        object.__setattr__(self, "replicates", int(self.replicates))
        if self.replicates < 1:
            raise ConfigError(f"replicates must be >= 1, got {self.replicates}")
        object.__setattr__(self, "seed", int(self.seed))
        if self.seed < 0:
            raise ConfigError(f"seed must be nonnegative, got {self.seed}")

    def resolve_kernel(self) -> UStatKernel:
        if isinstance(self.kernel, UStatKernel):
            return self.kernel
        return make_kernel(self.kernel, delta=self.delta, k=self.k, window=self.window)

    def intensity(self, lam: float) -> IntensityModel:
        return IntensityModel(lam, self.window)

    @classmethod
    def from_json(cls, text: str) -> "ExperimentConfig":
        try:
            doc = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config is not valid JSON: {exc}") from exc
        if not isinstance(doc, dict):
            raise ConfigError("config JSON must be an object")
        known = {
            "kernel", "window", "lambdas", "replicates", "integrator",
            "seed", "delta", "k", "c_k", "out",
        }
        unknown = set(doc) - known
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        for key in ("kernel", "lambdas", "replicates"):
            if key not in doc:
                raise ConfigError(f"config misses required key {key!r}")
        kernel = doc["kernel"]
        if not isinstance(kernel, str):
            raise ConfigError("config 'kernel' must be a registered name")
        window = window_from_spec(doc["window"]) if "window" in doc else default_window(kernel)
        integ = doc.get("integrator", {})
        if not isinstance(integ, dict):
            raise ConfigError("config 'integrator' must be an object")
        integrator = Integrator(
            samples=int(integ.get("samples", 4096)),
            seed=int(integ.get("seed", 0)),
            strata=int(integ.get("strata", 1)),
        )
        out = doc.get("out", {})
        if not isinstance(out, dict):
            raise ConfigError("config 'out' must be an object")
        return cls(
            kernel=kernel,
            window=window,
            lambdas=tuple(doc["lambdas"]),
            replicates=doc["replicates"],
            integrator=integrator,
            seed=int(doc.get("seed", 0)),
            delta=None if doc.get("delta") is None else float(doc["delta"]),
            k=None if doc.get("k") is None else int(doc["k"]),
            c_k=None if doc.get("c_k") is None else float(doc["c_k"]),
            records_path=out.get("records"),
            rates_path=out.get("rates"),
            report_path=out.get("report"),
        )


@dataclass(frozen=True)
class ReplicateRecord:
    """One simulated value with its formula-moment standardization."""

    lam: float
    index: int
    value: float
    standardized: float
    seed: int


@dataclass(frozen=True)
class RateFitResult:
    """Per-lambda distances and bounds with a log-log slope fit."""

    lambdas: tuple
    d_w: tuple
    d_k: tuple
    bounds: tuple
    ratios: tuple  # bound / d_w per lambda
    slope: float
    slope_se: float
    intercept: float
    replicates: int


def _moment_scales(kernel: UStatKernel, config: ExperimentConfig) -> tuple:
    """Intensity-free ingredients: mean integral and variance terms."""
    mean_integral = config.integrator.integrate(
        kernel, config.window, kernel.order, path=("expectation",)
    )
    terms = variance_terms(kernel, config.window, config.integrator)
    return mean_integral, terms


def _formula_moments(kernel: UStatKernel, lam: float, mean_integral: Estimate, terms: Sequence[Estimate]) -> tuple:
    k = kernel.order
    factor = 1.0 if kernel.intensity_factor is None else float(kernel.intensity_factor(lam))
    mean = lam**k * factor * mean_integral.value
    parts = [lam ** (2 * k - i) * factor**2 * t.value for i, t in enumerate(terms, start=1)]
    ses = [lam ** (2 * k - i) * factor**2 * t.se for i, t in enumerate(terms, start=1)]
    return mean, Estimate(math.fsum(parts), combine_se(*ses), max(t.n for t in terms))


def moment_table(config: ExperimentConfig) -> list:
    """Formula moments per lambda: rows of (lambda, mean, variance estimate)."""
    kernel = config.resolve_kernel()
    mean_integral, terms = _moment_scales(kernel, config)
    return [
        (lam,) + _formula_moments(kernel, lam, mean_integral, terms)
        for lam in config.lambdas
    ]


def run_replicates(config: ExperimentConfig) -> list:
    """Simulate every (lambda, replicate) cell of the config.

    Aborts before sampling a lambda whose formula variance is statistically
    indistinguishable from zero, naming that lambda.
    """
    kernel = config.resolve_kernel()
    mean_integral, terms = _moment_scales(kernel, config)
    is_lines = isinstance(config.window, LineWindow)
    records = []
    for li, lam in enumerate(config.lambdas):
        mean, var = _formula_moments(kernel, lam, mean_integral, terms)
        if not var.value > 3.0 * var.se:
            raise DegenerateFunctionalError(
                f"variance at lambda={lam:g} is consistent with zero "
                f"({var.value:.3g}, se {var.se:.3g})"
            )
        sd = math.sqrt(var.value)
        kern = kernel if kernel.intensity_factor is None else kernel.at_intensity(lam)
        intensity = config.intensity(lam)
        for r in range(config.replicates):
            rng = spawn_rng(config.seed, li, r)
            token = stream_token(config.seed, li, r)
            sample = sample_lines(intensity, rng) if is_lines else sample_points(intensity, rng)
            value = evaluate(kern, sample)
            records.append(
                ReplicateRecord(
                    lam=lam,
                    index=r,
                    value=value,
                    standardized=(value - mean) / sd,
                    seed=token,
                )
            )
    return records


def _ols_loglog(lambdas: Sequence[float], d_w: Sequence[float]) -> tuple:
    x = np.log(np.asarray(lambdas, dtype=float))
    y = np.log(np.asarray(d_w, dtype=float))
    xbar = float(np.mean(x))
    ybar = float(np.mean(y))
    sxx = float(np.sum((x - xbar) ** 2))
    slope = float(np.sum((x - xbar) * (y - ybar)) / sxx)
    intercept = ybar - slope * xbar
    resid = y - (intercept + slope * x)
    dof = len(x) - 2
    slope_se = float(math.sqrt(float(np.sum(resid**2)) / dof / sxx)) if dof > 0 else 0.0
    return slope, slope_se, intercept


def rate_experiment(config: ExperimentConfig) -> RateFitResult:
    """Distances and bounds across the lambda grid with a slope fit.

    Needs at least 3 lambdas, at least 100 replicates per lambda, lambdas
    >= 1 (the rate-form bounds assume it), and a kernel that is either
    intensity-independent or local; kernels outside those families have no
    rate-form bound to compare against.
    """
    if len(config.lambdas) < 3:
        raise ConfigError(f"rate fit needs >= 3 lambdas, got {len(config.lambdas)}")
    if config.replicates < 100:
        raise ConfigError(f"distance estimation needs >= 100 replicates, got {config.replicates}")
    if config.lambdas[0] < 1.0:
        raise ConfigError("rate-form bounds need every lambda >= 1")
    kernel = config.resolve_kernel()
    local = kernel.locality is not None
    if not (local or kernel.geometric):
        raise ConfigError("rate experiments need a geometric or local kernel")
    records = run_replicates(config)
    d_w = []
    d_k = []
    bounds = []
    if local:
        for lam in config.lambdas:
            rep = local_bound(kernel, config.intensity(lam), config.integrator, c_k=config.c_k)
            bounds.append(rep.bound)
    else:
        rep = geometric_bound(kernel, config.intensity(config.lambdas[0]), config.integrator)
        bounds = [rep.rate_factor / math.sqrt(lam) for lam in config.lambdas]
    for lam in config.lambdas:
        values = np.array([r.standardized for r in records if r.lam == lam])
        sample = SampleSet(values, label=f"lambda={lam:g}")
        d_w.append(wasserstein_to_normal(sample))
        d_k.append(kolmogorov_to_normal(sample))
    slope, slope_se, intercept = _ols_loglog(config.lambdas, d_w)
    return RateFitResult(
        lambdas=tuple(config.lambdas),
        d_w=tuple(d_w),
        d_k=tuple(d_k),
        bounds=tuple(bounds),
        ratios=tuple(b / d for b, d in zip(bounds, d_w)),
        slope=slope,
        slope_se=slope_se,
        intercept=intercept,
        replicates=config.replicates,
    )


def _fmt(value: float) -> str:
    return f"{value:.17g}"


RECORDS_HEADER = ["lambda", "replicate", "value", "standardized", "seed"]
RATES_HEADER = ["lambda", "d_w", "d_k", "bound", "ratio"]


def emit_csv(payload, path) -> None:
    """Write replicate records or a rate fit as CSV (17 significant digits)."""
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    if isinstance(payload, RateFitResult):
        writer.writerow(RATES_HEADER)
        for lam, dw, dk, b, ratio in zip(
            payload.lambdas, payload.d_w, payload.d_k, payload.bounds, payload.ratios
        ):
            writer.writerow([_fmt(lam), _fmt(dw), _fmt(dk), _fmt(b), _fmt(ratio)])
    else:
        writer.writerow(RECORDS_HEADER)
        for rec in payload:
            writer.writerow(
                [_fmt(rec.lam), str(rec.index), _fmt(rec.value), _fmt(rec.standardized), str(rec.seed)]
            )
    try:
        with open(path, "w", newline="") as fh:
            fh.write(buf.getvalue())
    except OSError as exc:
        raise OSError(f"writing {path}: {exc}") from exc


def emit_report(report: BoundReport, path) -> None:
    """Write a bound report as schema JSON."""
    try:
        with open(path, "w") as fh:
            fh.write(report.to_json())
            fh.write("\n")
    except OSError as exc:
        raise OSError(f"writing {path}: {exc}") from exc


def read_records(path) -> list:
    """Parse a records CSV back into ReplicateRecord rows."""
    try:
        with open(path, newline="") as fh:
            rows = list(csv.reader(fh))
    except OSError as exc:
        raise OSError(f"reading {path}: {exc}") from exc
    if not rows or rows[0] != RECORDS_HEADER:
        raise ConfigError(f"{path} is not a records CSV")
    out = []
    for row in rows[1:]:
        out.append(
            ReplicateRecord(
                lam=float(row[0]),
                index=int(row[1]),
                value=float(row[2]),
                standardized=float(row[3]),
                seed=int(row[4]),
            )
        )
    return out


def read_rates(path) -> list:
    """Parse a rate CSV into (lambda, d_w, d_k, bound, ratio) tuples."""
    try:
        with open(path, newline="") as fh:
            rows = list(csv.reader(fh))
    except OSError as exc:
        raise OSError(f"reading {path}: {exc}") from exc
    if not rows or rows[0] != RATES_HEADER:
        raise ConfigError(f"{path} is not a rate CSV")
    return [tuple(float(v) for v in row) for row in rows[1:]]
