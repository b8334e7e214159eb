"""Wasserstein bounds for normalized U-statistic sums.

Three assembly modes share one report type:

* general: 2 k^{7/2} sum_{i<=j} sqrt(M_ij) / Var F, with the fourth-moment
  quantities M_ij integrated at the full intensity;
* geometric: for an intensity-independent kernel and lam >= 1 the same
  shape factors as lam^{-1/2} times a lam-free constant, with M and the
  leading variance coefficient V-tilde evaluated at unit intensity;
* local: for a kernel supported on tuples of diameter <= delta, a sum of
  per-order terms lam^{1 - 3i/2} max(1, b^{i/2}) weighted by the fourth
  powers of the rescaled chaos kernels, where b is the largest mass a
  4*delta-ball can carry.

A small Monte Carlo oracle (r_terms_small) simulates the inner-product
fluctuation terms that the M quantities dominate, on cell-grid kernels
where the chaos integrals reduce to finite sums.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Optional, Sequence

import numpy as np

from ._streams import spawn_rng
from .chaos_algebra import SimpleFunction, cell_counts, enumerate_pi_bar, m_ij
from .errors import (
    AssumptionViolationError,
    CapacityError,
    ConfigError,
    DegenerateFunctionalError,
    LocalityError,
)
from .point_process import IntensityModel, LineWindow, sample_points, unit_ball_volume, window_measure
from .ustat_core import Estimate, Integrator, UStatKernel, combine_se, variance, variance_terms

__all__ = [
    "MTerm",
    "LocalTerm",
    "BoundReport",
    "wasserstein_bound",
    "geometric_bound",
    "local_bound",
    "default_local_constant",
    "r_terms_small",
]


@dataclass(frozen=True)
class MTerm:
    """One fourth-moment entry with its Monte Carlo error."""

    i: int
    j: int
    value: float
    se: float


@dataclass(frozen=True)
class LocalTerm:
    """One order's contribution to the local bound."""

    i: int
    norm: float  # L2 norm of the squared rescaled chaos kernel
    norm_se: float
    weight: float  # lam^{1 - 3i/2} * max(1, b^{i/2})
    contribution: float


@dataclass(frozen=True)
class BoundReport:
    """Assembled distance bound with its ingredients.

    The JSON form carries exactly the fields mode, k, lambda, variance,
    variance_se, m, bound, vtilde, b_delta, c_k; the remaining attributes
    (rate_factor, delta, local_terms, vtilde_se, notes) are in-process
    detail for callers and tests.
    """

    mode: str
    k: int
    lam: float
    variance: float
    variance_se: float
    m: tuple
    bound: float
    vtilde: Optional[float] = None
    b_delta: Optional[float] = None
    c_k: Optional[float] = None
    vtilde_se: float = field(default=0.0, compare=False)
    rate_factor: Optional[float] = None
    delta: Optional[float] = None
    local_terms: tuple = ()
    notes: str = field(default="", compare=False)

    def __post_init__(self):
        if self.mode not in ("general", "geometric", "local"):
            raise ConfigError(f"unknown mode {self.mode!r}")
        if not self.bound >= 0:
            raise ConfigError(f"bound must be nonnegative, got {self.bound}")
        if not self.variance > 0:
            raise ConfigError(f"variance must be positive, got {self.variance}")
        for term in self.m:
            if term.value < 0:
                raise ConfigError(f"M_{term.i}{term.j} is negative: {term.value}")
        object.__setattr__(self, "m", tuple(self.m))
        object.__setattr__(self, "local_terms", tuple(self.local_terms))

    def to_json(self) -> str:
        doc = {
            "mode": self.mode,
            "k": self.k,
            "lambda": self.lam,
            "variance": self.variance,
            "variance_se": self.variance_se,
            "m": [{"i": t.i, "j": t.j, "value": t.value, "se": t.se} for t in self.m],
            "bound": self.bound,
            "vtilde": self.vtilde,
            "b_delta": self.b_delta,
            "c_k": self.c_k,
        }
        return json.dumps(doc, indent=2)

    @classmethod
    def from_json(cls, text: str) -> "BoundReport":
        doc = json.loads(text)
        required = {"mode", "k", "lambda", "variance", "variance_se", "m", "bound", "vtilde", "b_delta", "c_k"}
        missing = required - set(doc)
        if missing:
            raise ConfigError(f"report JSON misses fields: {sorted(missing)}")
        terms = tuple(MTerm(int(t["i"]), int(t["j"]), float(t["value"]), float(t["se"])) for t in doc["m"])
        return cls(
            mode=doc["mode"],
            k=int(doc["k"]),
            lam=float(doc["lambda"]),
            variance=float(doc["variance"]),
            variance_se=float(doc["variance_se"]),
            m=terms,
            bound=float(doc["bound"]),
            vtilde=None if doc["vtilde"] is None else float(doc["vtilde"]),
            b_delta=None if doc["b_delta"] is None else float(doc["b_delta"]),
            c_k=None if doc["c_k"] is None else float(doc["c_k"]),
        )


def _sqrt_estimate(value: float, se: float) -> tuple:
    """Delta-method square root of a nonnegative Monte Carlo estimate."""
    v = max(value, 0.0)
    root = math.sqrt(v)
    if root > 0:
        return root, se / (2.0 * root)
    return 0.0, math.sqrt(max(se, 0.0))


def _assemble_variance(terms: Sequence[Estimate], lam: float, k: int) -> Estimate:
    parts = [lam ** (2 * k - i) * t.value for i, t in enumerate(terms, start=1)]
    ses = [lam ** (2 * k - i) * t.se for i, t in enumerate(terms, start=1)]
    return Estimate(math.fsum(parts), combine_se(*ses), max(t.n for t in terms))


def _sign_note(kernel: UStatKernel, window, integrator: Integrator) -> str:
    rng = integrator.rng("sign-check")
    pts = window.sample(rng, 256 * kernel.order).reshape(256, kernel.order, -1)
    if np.min(kernel(pts)) < 0:
        return "kernel attains negative values; fourth-moment terms integrate its absolute value"
    return ""


def wasserstein_bound(kernel: UStatKernel, intensity: IntensityModel, integrator: Integrator) -> BoundReport:
    """Distance bound from fourth-moment terms at the full intensity.

    bound = 2 k^{7/2} sum_{1<=i<=j<=k} sqrt(M_ij) / Var F.  The variance
    must clear three standard errors of zero; a flat kernel is refused
    because the normalized sum does not exist.
    """
    k = kernel.order
    var = variance(kernel, intensity, integrator)
    if not var.value > 3.0 * var.se:
        raise DegenerateFunctionalError(
            f"variance {var.value:.3g} (se {var.se:.3g}) is consistent with zero"
        )
    terms = []
    root_sum = []
    root_ses = []
    for i in range(1, k + 1):
        for j in range(i, k + 1):
            est = m_ij(kernel, i, j, intensity, integrator)
            terms.append(MTerm(i, j, est.value, est.se))
            root, root_se = _sqrt_estimate(est.value, est.se)
            root_sum.append(root)
            root_ses.append(root_se)
    bound = 2.0 * k**3.5 * math.fsum(root_sum) / var.value
    return BoundReport(
        mode="general",
        k=k,
        lam=float(intensity.lam),
        variance=var.value,
        variance_se=var.se,
        m=tuple(terms),
        bound=bound,
        notes=_sign_note(kernel, intensity.window, integrator),
    )


def geometric_bound(kernel: UStatKernel, intensity: IntensityModel, integrator: Integrator) -> BoundReport:
    """Rate-form bound for an intensity-independent kernel at lam >= 1.

    Evaluates all ingredients at unit intensity: vtilde is the leading
    variance coefficient k^2 int (int f dtheta^{k-1})^2 dtheta, the m
    entries are the unit-intensity fourth-moment terms, and

        bound(lam) = rate_factor / sqrt(lam)

    holds exactly (bit for bit, so quadrupling lam halves the bound) with
    rate_factor = 2 k^{7/2} sum sqrt(M~_ij) / vtilde.
    The reported variance is assembled at the requested lam from the same
    unit-intensity integrals.
    """
    k = kernel.order
    if not kernel.geometric or kernel.intensity_factor is not None:
        raise ConfigError("kernel is not flagged intensity-independent")
    lam = float(intensity.lam)
    if lam < 1.0:
        raise AssumptionViolationError(f"rate form needs lam >= 1, got {lam}")
    terms = variance_terms(kernel, intensity.window, integrator)
    vtilde = terms[0]
    if not vtilde.value > 3.0 * vtilde.se:
        raise AssumptionViolationError(
            "first-order variance coefficient is consistent with zero "
            f"({vtilde.value:.3g}, se {vtilde.se:.3g}); the normalized sum "
            "has no Gaussian first-order part"
        )
    unit = intensity.with_lam(1.0)
    m_terms = []
    root_sum = []
    for i in range(1, k + 1):
        for j in range(i, k + 1):
            est = m_ij(kernel, i, j, unit, integrator)
            m_terms.append(MTerm(i, j, est.value, est.se))
            root, _ = _sqrt_estimate(est.value, est.se)
            root_sum.append(root)
    rate_factor = 2.0 * k**3.5 * math.fsum(root_sum) / vtilde.value
    var = _assemble_variance(terms, lam, k)
    return BoundReport(
        mode="geometric",
        k=k,
        lam=lam,
        variance=var.value,
        variance_se=var.se,
        m=tuple(m_terms),
        bound=rate_factor / math.sqrt(lam),
        vtilde=vtilde.value,
        vtilde_se=vtilde.se,
        rate_factor=rate_factor,
        notes=_sign_note(kernel, intensity.window, integrator),
    )


@lru_cache(maxsize=None)
def default_local_constant(k: int) -> float:
    """Documented default for the local mode's order constant.

    2 k^{7/2} times the total count of connected diagrams over the
    (i, i, j, j) factor sizes, summed over 1 <= i <= j <= k; callers with
    sharper constants may override.
    """
    total = 0
    for i in range(1, k + 1):
        for j in range(i, k + 1):
            total += len(enumerate_pi_bar((i, i, j, j)))
    return 2.0 * k**3.5 * total


def _fourth_power_norms(kernel: UStatKernel, window, integrator: Integrator) -> list:
    """Estimates of int (f~_i)^4 dtheta^i for i = 1..k at unit intensity.

    The order-i rescaled chaos kernel f~_i(y) = C(k,i) int f(y, x) dtheta^{k-i}
    enters through its fourth power, estimated without nesting bias as the
    product of four independent inner integral estimates per outer point.
    """
    k = kernel.order
    theta = window_measure(window)
    out = []
    n = integrator.samples
    inner = max(32, n // 32)
    for i in range(1, k + 1):
        if i == k:
            out.append(
                integrator.integrate(
                    lambda ys: np.asarray(kernel(ys), dtype=float) ** 4,
                    window,
                    k,
                    path=("fourth-power", k),
                )
            )
            continue
        rng = integrator.rng("fourth-power", i)
        r = k - i
        scale_in = math.comb(k, i) * theta**r
        prods = np.empty(n)
        chunk = max(1, (1 << 18) // (inner * 4))
        done = 0
        while done < n:
            m = min(chunk, n - done)
            ys = window.sample(rng, m * i).reshape(m, i, -1)
            acc = np.full(m, theta**i)
            for _ in range(4):
                xs = window.sample(rng, m * inner * r).reshape(m, inner, r, -1)
                tup = np.concatenate([np.repeat(ys[:, None], inner, axis=1), xs], axis=2)
                vals = np.asarray(kernel(tup.reshape(m * inner, k, -1)), dtype=float)
                acc *= scale_in * vals.reshape(m, inner).mean(axis=1)
            prods[done : done + m] = acc
            done += m
        mean = float(np.mean(prods))
        se = float(np.std(prods, ddof=1) / math.sqrt(n))
        out.append(Estimate(mean, se, n))
    return out


def local_bound(kernel: UStatKernel, intensity: IntensityModel, integrator: Integrator, c_k: Optional[float] = None) -> BoundReport:
    """Rate-form bound for a kernel supported on tuples of diameter <= delta.

    bound = c_k * sum_{i=1..k} lam^{1 - 3i/2} max(1, b^{i/2}) |f~_i^2| / vtilde
    where |.| is the L2(theta^i) norm, vtilde = |f~_1|^2, and
    b = lam * (volume of a radius-4*delta ball) upper-bounds the mass any
    such ball can carry.  c_k defaults to default_local_constant(k).
    """
    k = kernel.order
    if kernel.locality is None:
        raise LocalityError("kernel declares no support diameter; not a local kernel")
    if isinstance(intensity.window, LineWindow):
        raise ConfigError("local bounds need a spatial window")
    lam = float(intensity.lam)
    if lam < 1.0:
        raise AssumptionViolationError(f"rate form needs lam >= 1, got {lam}")
    if c_k is None:
        c_k = default_local_constant(k)
    c_k = float(c_k)
    if not c_k > 0:
        raise ConfigError(f"c_k must be positive, got {c_k}")
    delta = float(kernel.locality)
    d = intensity.window.dimension
    b = lam * unit_ball_volume(d) * (4.0 * delta) ** d
    terms = variance_terms(kernel, intensity.window, integrator)
    vtilde = terms[0]
    if not vtilde.value > 3.0 * vtilde.se:
        raise AssumptionViolationError(
            "first-order variance coefficient is consistent with zero "
            f"({vtilde.value:.3g}, se {vtilde.se:.3g})"
        )
    norms = _fourth_power_norms(kernel, intensity.window, integrator)
    local_terms = []
    contributions = []
    for i, q in enumerate(norms, start=1):
        norm, norm_se = _sqrt_estimate(q.value, q.se)
        weight = lam ** (1.0 - 1.5 * i) * max(1.0, b ** (i / 2.0))
        contribution = weight * norm / vtilde.value
        local_terms.append(LocalTerm(i=i, norm=norm, norm_se=norm_se, weight=weight, contribution=contribution))
        contributions.append(contribution)
    var = _assemble_variance(terms, lam, k)
    return BoundReport(
        mode="local",
        k=k,
        lam=lam,
        variance=var.value,
        variance_se=var.se,
        m=(),
        bound=c_k * math.fsum(contributions),
        vtilde=vtilde.value,
        vtilde_se=vtilde.se,
        b_delta=b,
        c_k=c_k,
        delta=delta,
        local_terms=tuple(local_terms),
    )


def r_terms_small(chaos_fns: Sequence[SimpleFunction], intensity: IntensityModel, replicates: int, seed: int = 0, batches: int = 20) -> tuple:
    """Monte Carlo oracle for the chaos inner-product fluctuation terms.

    For cell-grid chaos kernels [g_1, ..., g_k] (g_i of order i) the random
    inner products

        X_ij = int I_{i-1}(g_i(s, .)) I_{j-1}(g_j(s, .)) dmu(s)

    reduce to cell sums.  Returns (R, Rtilde) where R[i-1][j-1] estimates
    Var X_ij for i = j (exactly zero when i = j = 1, since X_11 is a
    constant) and E X_ij^2 for i != j (the squared-mean subtrahend is
    structurally zero across chaos orders), and Rtilde[i-1] estimates the
    expected cell sum of the fourth power.  Standard errors come from
    batch means.  Small-scale only: at most order 2 and 32 cells.
    """
    fns = list(chaos_fns)
    k = len(fns)
    if k == 0:
        raise ConfigError("need at least one chaos kernel")
    for idx, f in enumerate(fns, start=1):
        if not isinstance(f, SimpleFunction):
            raise ConfigError(f"chaos kernel {idx} is not a cell-grid simple function")
        if f.order != idx:
            raise ConfigError(f"chaos kernel {idx} must have order {idx}, got {f.order}")
    grid = fns[0].grid
    for f in fns[1:]:
        if f.grid is not grid and not np.array_equal(f.grid.cells, grid.cells):
            raise ConfigError("chaos kernels live on incompatible grids")
    if k > 2:
        raise CapacityError(f"oracle is limited to order <= 2, got {k}")
    if grid.n_cells > 32:
        raise CapacityError(f"oracle is limited to 32 cells, got {grid.n_cells}")
    replicates = int(replicates)
    batches = int(batches)
    if batches < 2 or replicates < 2 * batches:
        raise ConfigError(f"need >= 2 batches and >= 2 replicates per batch, got {replicates} / {batches}")
    mu = float(intensity.lam) * grid.measures()
    xs = np.empty((replicates, k, k))
    ws = np.empty((replicates, k))
    for rep in range(replicates):
        config = sample_points(intensity, spawn_rng(seed, "r-terms", rep))
        centered = cell_counts(grid, config) - mu
        v = np.empty((k, grid.n_cells))
        for i, f in enumerate(fns, start=1):
            t = f.coeffs
            for _ in range(i - 1):
                t = np.tensordot(t, centered, axes=([t.ndim - 1], [0]))
            v[i - 1] = t
        for i in range(k):
            ws[rep, i] = float(np.sum(mu * v[i] ** 4))
            for j in range(k):
                xs[rep, i, j] = float(np.sum(mu * v[i] * v[j]))
    groups = np.array_split(np.arange(replicates), batches)
    r_out = [[None] * k for _ in range(k)]
    rt_out = [None] * k
    for i in range(k):
        for j in range(k):
            if i == j:
                per_batch = np.array([np.var(xs[g, i, j], ddof=1) for g in groups])
            else:
                per_batch = np.array([np.mean(xs[g, i, j] ** 2) for g in groups])
            r_out[i][j] = Estimate(
                float(np.mean(per_batch)),
                float(np.std(per_batch, ddof=1) / math.sqrt(batches)),
                replicates,
            )
        per_batch = np.array([np.mean(ws[g, i]) for g in groups])
        rt_out[i] = Estimate(
            float(np.mean(per_batch)),
            float(np.std(per_batch, ddof=1) / math.sqrt(batches)),
            replicates,
        )
    return r_out, rt_out
