"""U-statistics of Poisson processes and their Malliavin-type operators.

A U-statistic of order k sums a symmetric kernel f over all k-tuples of
distinct points of a configuration.  This module evaluates such sums (with an
optional cell-grid shortcut for local kernels), estimates moments by Monte
Carlo against the intensity measure ``lambda * theta``, and implements the
add-one-point difference operators, the generator L of the associated
Ornstein-Uhlenbeck semigroup, its pseudo-inverse, the projection kernels of
the chaos decomposition, and the closed-form variance

    Var F = sum_{i=1..k} i! C(k,i)^2 lam^(2k-i)
            int (int f dtheta^(k-i))^2 dtheta^i.

Squared inner integrals are estimated without bias by multiplying two
independent inner replicates.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, replace
from typing import Callable, Optional

import numpy as np

from ._streams import spawn_rng
from .errors import ConfigError, IntegrationError
from .point_process import (
    BallWindow,
    IntensityModel,
    PointConfiguration,
    Window,
    window_measure,
)

__all__ = [
    "Estimate",
    "Integrator",
    "UStatKernel",
    "KernelEstimate",
    "evaluate",
    "expectation",
    "difference",
    "iterated_difference",
    "ou_generator",
    "ou_generator_direct",
    "ou_inverse",
    "chaos_kernel",
    "chaos_kernel_map",
    "variance",
    "variance_terms",
    "check_symmetry",
]


@dataclass(frozen=True)
class Estimate:
    """A numeric estimate with its standard error and sample count."""

    value: float
    se: float
    n: int = 0

    def __float__(self) -> float:
        return float(self.value)

    def within(self, target: float, nse: float = 3.0) -> bool:
        return abs(self.value - target) <= nse * self.se


def combine_se(*ses: float) -> float:
    return math.sqrt(math.fsum(s * s for s in ses))


@dataclass(frozen=True)
class UStatKernel:
    """Symmetric kernel of a U-statistic.

    ``fn`` maps an array of tuples with shape (m, order, dim) to m values.
    ``geometric`` marks kernels whose value does not depend on the intensity
    rate (up to the optional scalar factor ``intensity_factor(lam)``), and
    ``locality`` is a radius beyond which the kernel vanishes: if set, ``fn``
    must return 0 whenever two tuple points are farther apart than it.
    """

    order: int
    fn: Callable[[np.ndarray], np.ndarray]
    name: str = ""
    symmetric: bool = True
    geometric: bool = False
    locality: Optional[float] = None
    intensity_factor: Optional[Callable[[float], float]] = None

    def __post_init__(self):
        if int(self.order) < 1:
            raise ConfigError(f"kernel order must be >= 1, got {self.order}")
        object.__setattr__(self, "order", int(self.order))
        if self.locality is not None and not self.locality > 0:
            raise ConfigError(f"locality radius must be positive, got {self.locality}")

    def __call__(self, tuples: np.ndarray) -> np.ndarray:
        tuples = np.asarray(tuples, dtype=float)
        out = np.asarray(self.fn(tuples), dtype=float)
        return out.reshape(tuples.shape[0])

    def at_intensity(self, lam: float) -> "UStatKernel":
        """Bake the scalar intensity factor at the given rate into ``fn``."""
        if self.intensity_factor is None:
            return self
        g = float(self.intensity_factor(float(lam)))
        base = self.fn
        return replace(self, fn=lambda tuples: g * np.asarray(base(tuples)), intensity_factor=None)


@dataclass(frozen=True)
class KernelEstimate:
    """A kernel of the chaos decomposition, evaluated by Monte Carlo."""

    index: int
    fn: Callable[[np.ndarray], Estimate]

    def __call__(self, points) -> Estimate:
        return self.fn(np.asarray(points, dtype=float))


@dataclass(frozen=True)
class Integrator:
    """Monte Carlo integrator against the normalized window measure.

    ``samples`` is the sample count used per integral.  ``strata`` > 1
    switches on tensor stratification of the unit-cube driver: with level L
    and a q-fold integral over a d-dimensional window the cube splits into
    L^(q*d) equal strata with equal allocation (the remainder of ``samples``
    modulo the stratum count is dropped).  Stratification needs a window
    with an inverse unit-cube map, which excludes balls.
    """

    samples: int = 4096
    seed: int = 0
    strata: int = 1

    def __post_init__(self):
        if int(self.samples) < 1:
            raise ConfigError(f"sample count must be >= 1, got {self.samples}")
        if int(self.strata) < 1:
            raise ConfigError(f"stratification level must be >= 1, got {self.strata}")

    def rng(self, *path) -> np.random.Generator:
        return spawn_rng(self.seed, *path)

    def draw(self, window: Window, arity: int, n: int, rng: np.random.Generator) -> np.ndarray:
        """Draw n tuples of ``arity`` theta-uniform points, shape (n, arity, dim)."""
        dim = window.point_dim
        if self.strata <= 1:
            return window.sample(rng, n * arity).reshape(n, arity, dim)
        if isinstance(window, BallWindow):
            raise ConfigError("stratified sampling needs an invertible window map; balls sample by rejection")
        d_total = arity * dim
        count = self.strata**d_total
        n_per = n // count
        if n_per < 1:
            raise ConfigError(
                f"sample count {n} is below the stratum count {count} (level {self.strata}, {d_total} axes)"
            )
        corners = np.stack(np.unravel_index(np.arange(count), (self.strata,) * d_total), axis=-1)
        u = (corners[:, None, :] + rng.random((count, n_per, d_total))) / self.strata
        return window.from_unit(u.reshape(n_per * count, arity, dim))

    def integrate(self, fn, window: Window, arity: int, *, path=(), rng=None, samples=None) -> Estimate:
        """Estimate of int_{W^arity} fn dtheta^arity with its standard error."""
        if rng is None:
            rng = self.rng(*path) if path else self.rng("integrate")
        n = int(samples) if samples else self.samples
        pts = self.draw(window, arity, n, rng)
        vals = np.asarray(fn(pts), dtype=float).reshape(-1)
        if not np.all(np.isfinite(vals)):
            bad = int(np.flatnonzero(~np.isfinite(vals))[0])
            raise IntegrationError(f"non-finite integrand value at tuple {pts[bad].tolist()}")
        scale = window_measure(window) ** arity
        n_eff = len(vals)
        mean = float(vals.mean())
        if self.strata > 1:
            count = self.strata ** (arity * window.point_dim)
            n_per = n_eff // count
            if n_per >= 2:
                per_stratum = vals.reshape(count, n_per).var(axis=1, ddof=1)
                se = scale * math.sqrt(float(per_stratum.sum()) / n_per) / count
            else:
                se = scale * float(vals.std(ddof=1)) / math.sqrt(n_eff) if n_eff > 1 else math.inf
        else:
            se = scale * float(vals.std(ddof=1)) / math.sqrt(n_eff) if n_eff > 1 else math.inf
        return Estimate(scale * mean, se, n_eff)


# ---------------------------------------------------------------------------
# tuple enumeration


def _subset_batches(n: int, k: int, batch: int = 1 << 15):
    """Yield index arrays (m, k) covering all unordered k-subsets of range(n)."""
    if k > n:
        return
    if k == 1:
        for s in range(0, n, batch):
            yield np.arange(s, min(s + batch, n), dtype=np.intp)[:, None]
        return
    if k == 2 and n <= 4096:
        i, j = np.triu_indices(n, 1)
        idx = np.stack([i, j], axis=1).astype(np.intp)
        for s in range(0, len(idx), batch):
            yield idx[s : s + batch]
        return
    it = itertools.combinations(range(n), k)
    while True:
        chunk = list(itertools.islice(it, batch))
        if not chunk:
            return
        yield np.array(chunk, dtype=np.intp)


def _cell_lists(points: np.ndarray, delta: float) -> dict:
    keys = np.floor(points / delta).astype(np.int64)
    cells: dict = {}
    for i, key in enumerate(map(tuple, keys)):
        cells.setdefault(key, []).append(i)
    return {key: np.array(v, dtype=np.intp) for key, v in cells.items()}


def _local_pair_batches(points: np.ndarray, delta: float):
    # cell-list enumeration: candidate pairs live in the same or an adjacent
    # cell of an axis-aligned grid with edge delta; extra candidates beyond
    # distance delta contribute exactly 0 under the locality contract
    cells = _cell_lists(points, delta)
    d = points.shape[1]
    zero = (0,) * d
    offsets = [off for off in itertools.product((-1, 0, 1), repeat=d) if off > zero]
    for key in sorted(cells):
        idx = cells[key]
        if len(idx) > 1:
            a, b = np.triu_indices(len(idx), 1)
            yield np.stack([idx[a], idx[b]], axis=1)
        for off in offsets:
            nb = tuple(k + o for k, o in zip(key, off))
            other = cells.get(nb)
            if other is not None:
                pairs = np.stack(np.meshgrid(idx, other, indexing="ij"), axis=-1)
                yield pairs.reshape(-1, 2)


def _local_anchor_batches(points: np.ndarray, delta: float, k: int, batch: int = 1 << 14):
    # every subset of diameter <= delta lies in the 3^d cell neighborhood of
    # its lowest-index point, which enumerates each candidate exactly once
    cells = _cell_lists(points, delta)
    keys = np.floor(points / delta).astype(np.int64)
    d = points.shape[1]
    offsets = list(itertools.product((-1, 0, 1), repeat=d))
    buf = []
    size = 0
    for i in range(len(points)):
        key = tuple(keys[i])
        nbh = []
        for off in offsets:
            got = cells.get(tuple(key[a] + off[a] for a in range(d)))
            if got is not None:
                nbh.append(got[got > i])
        if not nbh:
            continue
        cand = np.sort(np.concatenate(nbh))
        if len(cand) < k - 1:
            continue
        for rest in itertools.combinations(cand.tolist(), k - 1):
            buf.append((i, *rest))
            size += 1
            if size >= batch:
                yield np.array(buf, dtype=np.intp)
                buf, size = [], 0
    if buf:
        yield np.array(buf, dtype=np.intp)


def evaluate(kernel: UStatKernel, config: PointConfiguration, *, exhaustive: bool = False) -> float:
    """Sum of the kernel over ordered tuples of distinct configuration points.

    Computed as k! times the sum over unordered subsets, which requires the
    declared symmetry.  Local kernels use a cell-grid enumeration unless
    ``exhaustive`` is set; both paths sum the same nonzero terms.
    """
    if not kernel.symmetric:
        raise ConfigError("evaluate needs a symmetric kernel")
    pts = config.points
    n, k = len(pts), kernel.order
    if k > n:
        return 0.0
    if kernel.locality is not None and not exhaustive:
        if k == 2:
            batches = _local_pair_batches(pts, kernel.locality)
        else:
            batches = _local_anchor_batches(pts, kernel.locality, k)
    else:
        batches = _subset_batches(n, k)
    parts = [float(kernel(pts[idx]).sum()) for idx in batches]
    return math.factorial(k) * math.fsum(parts)


# ---------------------------------------------------------------------------
# difference operators


def _ordered_prefix_sums(
    kernel: UStatKernel, config: PointConfiguration, fixed: np.ndarray, chunk: int = 1 << 16
) -> np.ndarray:
    """For each fixed prefix (shape (m, i, d)), the sum of f(prefix, xs) over
    ordered (k-i)-tuples xs of distinct configuration points."""
    fixed = np.asarray(fixed, dtype=float)
    m, i, d = fixed.shape
    k = kernel.order
    r = k - i
    pts = config.points
    n = len(pts)
    if r == 0:
        return kernel(fixed)
    if r > n:
        return np.zeros(m)
    out = np.zeros(m)
    for idx in _subset_batches(n, r):
        sub = pts[idx]
        count = len(idx)
        step = max(1, chunk // count)
        for s in range(0, m, step):
            fb = fixed[s : s + step]
            mm = len(fb)
            tup = np.concatenate(
                [
                    np.broadcast_to(fb[:, None, :, :], (mm, count, i, d)),
                    np.broadcast_to(sub[None], (mm, count, r, d)),
                ],
                axis=2,
            ).reshape(mm * count, k, d)
            out[s : s + step] += kernel(tup).reshape(mm, count).sum(axis=1)
    return math.factorial(r) * out


def iterated_difference(kernel: UStatKernel, config: PointConfiguration, ys) -> float:
    """i-fold add-one-point difference of the U-statistic at the points ys.

    Equals k!/(k-i)! times the sum of f(ys, xs) over ordered (k-i)-tuples of
    distinct configuration points, and is identically 0 for i > k.
    """
    ys = np.asarray(ys, dtype=float)
    if ys.ndim == 1:
        ys = ys.reshape(1, -1)
    i = ys.shape[0]
    k = kernel.order
    if i > k:
        return 0.0
    perm = math.factorial(k) // math.factorial(k - i)
    return perm * float(_ordered_prefix_sums(kernel, config, ys[None])[0])


def difference(kernel: UStatKernel, config: PointConfiguration, y) -> float:
    """Add-one-point difference F(config + y) - F(config)."""
    return iterated_difference(kernel, config, np.asarray(y, dtype=float).reshape(1, -1))


# ---------------------------------------------------------------------------
# moments and chaos kernels


def expectation(kernel: UStatKernel, intensity: IntensityModel, integrator: Integrator, *, path=("expectation",)) -> Estimate:
    """E F = lam^k int f dtheta^k, by Monte Carlo."""
    est = integrator.integrate(kernel, intensity.window, kernel.order, path=path)
    scale = float(intensity.lam) ** kernel.order
    return Estimate(scale * est.value, scale * est.se, est.n)


def ou_generator(kernel: UStatKernel, config: PointConfiguration, intensity: IntensityModel, integrator: Integrator) -> Estimate:
    """Ornstein-Uhlenbeck generator L F at the configuration.

    L F = -k F + k int sum_{(k-1)-tuples} f(xs, z) dmu(z); the integral is
    estimated by Monte Carlo over z.
    """
    k = kernel.order
    F = evaluate(kernel, config)
    est = integrator.integrate(
        lambda zs: _ordered_prefix_sums(kernel, config, zs),
        intensity.window,
        1,
        path=("ou-generator",),
    )
    lam = float(intensity.lam)
    return Estimate(-k * F + k * lam * est.value, k * lam * est.se, est.n)


def ou_generator_direct(kernel: UStatKernel, config: PointConfiguration, intensity: IntensityModel, integrator: Integrator) -> Estimate:
    """L F through its definition: remove-one-point differences over the
    configuration plus the integrated add-one-point difference.

    Cross-validates :func:`ou_generator`; the two agree in distribution and,
    for fixed configurations, within Monte Carlo error.
    """
    F = evaluate(kernel, config)
    removal = math.fsum(evaluate(kernel, config.without_index(i)) - F for i in range(config.size))
    k = kernel.order
    est = integrator.integrate(
        lambda zs: k * _ordered_prefix_sums(kernel, config, zs),
        intensity.window,
        1,
        path=("ou-generator-direct",),
    )
    lam = float(intensity.lam)
    return Estimate(removal + lam * est.value, lam * est.se, est.n)


def ou_inverse(kernel: UStatKernel, config: PointConfiguration, intensity: IntensityModel, integrator: Integrator) -> Estimate:
    """Pseudo-inverse L^{-1}(F - E F) evaluated at the configuration.

    Uses the representation as a harmonic-weighted combination of partially
    integrated U-statistics of orders 1..k; for order k the integral is empty
    and the term is the exact U-statistic value.
    """
    k = kernel.order
    lam = float(intensity.lam)
    win = intensity.window
    theta = window_measure(win)
    mean_est = expectation(kernel, intensity, integrator, path=("ou-inverse", 0))
    harmonic = math.fsum(1.0 / m for m in range(1, k + 1))
    value = harmonic * mean_est.value
    var = (harmonic * mean_est.se) ** 2
    pts = config.points
    n = len(pts)
    for m in range(1, k + 1):
        if m == k:
            u_val, u_se = evaluate(kernel, config), 0.0
        elif m > n:
            u_val, u_se = 0.0, 0.0
        else:
            subs = np.array(list(itertools.combinations(range(n), m)), dtype=np.intp)
            rng = integrator.rng("ou-inverse", m)
            ys = integrator.draw(win, k - m, integrator.samples, rng)
            w = _cross_sums(kernel, pts[subs], ys)
            scale = math.factorial(m) * lam ** (k - m) * theta ** (k - m)
            u_val = scale * float(w.mean())
            u_se = scale * float(w.std(ddof=1)) / math.sqrt(len(w)) if len(w) > 1 else math.inf
        value -= u_val / m
        var += (u_se / m) ** 2
    return Estimate(value, math.sqrt(var), integrator.samples)


def _cross_sums(kernel: UStatKernel, subs: np.ndarray, ys: np.ndarray, chunk: int = 1 << 16) -> np.ndarray:
    """For each ys[j] (shape (n, r, d)), sum of f(sub, ys[j]) over subs (S, m, d)."""
    count, m, d = subs.shape
    n, r, _ = ys.shape
    out = np.zeros(n)
    step = max(1, chunk // max(count, 1))
    for s in range(0, n, step):
        yb = ys[s : s + step]
        nn = len(yb)
        tup = np.concatenate(
            [
                np.broadcast_to(subs[None], (nn, count, m, d)),
                np.broadcast_to(yb[:, None, :, :], (nn, count, r, d)),
            ],
            axis=2,
        ).reshape(nn * count, m + r, d)
        out[s : s + step] = kernel(tup).reshape(nn, count).sum(axis=1)
    return out


def chaos_kernel(kernel: UStatKernel, i: int, ys, intensity: IntensityModel, integrator: Integrator) -> Estimate:
    """Projection kernel f_i(ys) = C(k,i) int f(ys, xs) dmu^{k-i}(xs).

    Exact (zero standard error) for i = k, identically zero for i > k,
    Monte Carlo otherwise.
    """
    k = kernel.order
    if i < 1:
        raise ConfigError(f"chaos kernel index must be >= 1, got {i}")
    if i > k:
        return Estimate(0.0, 0.0, 0)
    ys = np.asarray(ys, dtype=float)
    if ys.ndim == 1:
        ys = ys.reshape(1, -1)
    if ys.shape[0] != i:
        raise ConfigError(f"need {i} points for chaos kernel index {i}, got {ys.shape[0]}")
    if i == k:
        return Estimate(float(kernel(ys[None])[0]), 0.0, 1)

    def fixed_fn(xs: np.ndarray) -> np.ndarray:
        m = xs.shape[0]
        tup = np.concatenate([np.broadcast_to(ys[None], (m, i, ys.shape[1])), xs], axis=1)
        return kernel(tup)

    est = integrator.integrate(fixed_fn, intensity.window, k - i, path=("chaos", i))
    c = math.comb(k, i) * float(intensity.lam) ** (k - i)
    return Estimate(c * est.value, c * est.se, est.n)


def chaos_kernel_map(kernel: UStatKernel, i: int, intensity: IntensityModel, integrator: Integrator) -> KernelEstimate:
    """The i-th chaos kernel as a reusable evaluator."""
    return KernelEstimate(i, lambda ys: chaos_kernel(kernel, i, ys, intensity, integrator))


# ---------------------------------------------------------------------------
# variance


def variance_terms(kernel: UStatKernel, window: Window, integrator: Integrator) -> list:
    """Rate-free variance terms T_i = i! C(k,i)^2 int (int f dtheta^{k-i})^2 dtheta^i.

    Var F = sum_i lam^(2k-i) T_i.  Inner squared integrals are estimated as
    the product of two independent inner replicates, which is unbiased; the
    i = k term needs no inner integral.  Index 0 of the returned list is T_1.
    """
    k = kernel.order
    theta = window_measure(window)
    n_out = integrator.samples
    n_in = integrator.samples
    terms = []
    for i in range(1, k + 1):
        rng_y = integrator.rng("variance", i, 0)
        scale = math.factorial(i) * math.comb(k, i) ** 2 * theta**i
        if i == k:
            pts = window.sample(rng_y, n_out * k).reshape(n_out, k, window.point_dim)
            v = kernel(pts) ** 2
        else:
            rng_a = integrator.rng("variance", i, 1)
            rng_b = integrator.rng("variance", i, 2)
            v = _inner_product_samples(kernel, window, integrator, i, n_out, n_in, rng_y, (rng_a, rng_b))
        if not np.all(np.isfinite(v)):
            raise IntegrationError(f"non-finite value in variance term {i}")
        se = scale * float(v.std(ddof=1)) / math.sqrt(n_out) if n_out > 1 else math.inf
        terms.append(Estimate(scale * float(v.mean()), se, n_out))
    return terms


def _inner_product_samples(kernel, window, integrator, i, n_out, n_in, rng_y, inner_rngs) -> np.ndarray:
    """Outer samples of prod_s (theta^(k-i) mean_x f(y, x_s)) over independent
    inner streams s; unbiased for (int f(y, .) dtheta^(k-i))^len(inner_rngs)."""
    k = kernel.order
    dim = window.point_dim
    r = k - i
    theta_r = window_measure(window) ** r
    ys = window.sample(rng_y, n_out * i).reshape(n_out, i, dim)
    factors = np.ones(n_out)
    if integrator.strata > 1:
        # per-outer-point inner batches keep each stratification balanced
        for rng in inner_rngs:
            means = np.empty(n_out)
            for j in range(n_out):
                xs = integrator.draw(window, r, n_in, rng)
                tup = np.concatenate([np.broadcast_to(ys[j], (len(xs), i, dim)), xs], axis=1)
                means[j] = kernel(tup).mean()
            factors *= theta_r * means
        return factors
    chunk = max(1, (1 << 18) // max(n_in, 1))
    for rng in inner_rngs:
        means = np.empty(n_out)
        for s in range(0, n_out, chunk):
            mm = min(chunk, n_out - s)
            xs = window.sample(rng, mm * n_in * r).reshape(mm, n_in, r, dim)
            tup = np.concatenate(
                [np.broadcast_to(ys[s : s + mm, None, :, :], (mm, n_in, i, dim)), xs],
                axis=2,
            ).reshape(mm * n_in, k, dim)
            means[s : s + mm] = kernel(tup).reshape(mm, n_in).mean(axis=1)
        factors *= theta_r * means
    return factors


def variance(kernel: UStatKernel, intensity: IntensityModel, integrator: Integrator) -> Estimate:
    """Variance of the U-statistic from the chaos decomposition."""
    terms = variance_terms(kernel, intensity.window, integrator)
    k = kernel.order
    lam = float(intensity.lam)
    value = math.fsum(lam ** (2 * k - i) * t.value for i, t in zip(range(1, k + 1), terms))
    se = combine_se(*(lam ** (2 * k - i) * t.se for i, t in zip(range(1, k + 1), terms)))
    return Estimate(value, se, integrator.samples)


def check_symmetry(kernel: UStatKernel, window: Window, seed: int = 0, trials: int = 64, tol: float = 1e-9) -> bool:
    """Spot-check the declared symmetry on random tuples and permutations."""
    rng = spawn_rng(seed, "symmetry")
    k = kernel.order
    pts = window.sample(rng, trials * k).reshape(trials, k, window.point_dim)
    base = kernel(pts)
    for _ in range(3):
        perm = rng.permutation(k)
        other = kernel(pts[:, perm, :])
        scale = np.maximum(1.0, np.abs(base))
        if np.any(np.abs(other - base) > tol * scale):
            return False
    return True
