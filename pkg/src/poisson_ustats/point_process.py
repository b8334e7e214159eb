"""Poisson point processes on bounded windows, and line processes hitting a disk.

The intensity measure always has the product form ``lambda * theta`` where
``theta`` is a fixed reference measure on the state space: Lebesgue measure on
a box or ball in R^d (d <= 3), or, for line processes, the standard isotropic
measure on the set of lines meeting a centred disk.  A line is parameterized
by ``(phi, p)`` as ``{x : x . (cos phi, sin phi) = p}``; the angle ``phi`` is
uniform on ``[0, pi)`` with density one (total angle mass pi) and the signed
offset ``p`` carries Lebesgue measure on ``[-r, r]``, so the measure of all
lines hitting the disk of radius r is ``2*pi*r``.

Sampling draws ``N ~ Poisson(lambda * theta(W))`` and then N i.i.d. points
from normalized ``theta``.  Configurations are simple (no repeated points),
ordered, and carry their seed for provenance.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field, replace
from typing import Optional, Union

import numpy as np

from ._streams import spawn_rng
from .errors import ConfigError, WindowError

__all__ = [
    "BoxWindow",
    "BallWindow",
    "LineWindow",
    "Window",
    "IntensityModel",
    "PointConfiguration",
    "window_measure",
    "sample_points",
    "sample_lines",
    "write_points_csv",
    "read_points_csv",
    "unit_ball_volume",
]

_MAX_DIM = 3


def unit_ball_volume(dim: int) -> float:
    """Lebesgue volume of the unit ball in R^dim for dim <= 3."""
    if dim == 1:
        return 2.0
    if dim == 2:
        return math.pi
    if dim == 3:
        return 4.0 * math.pi / 3.0
    raise WindowError(f"dimension {dim} not supported (need 1 <= d <= {_MAX_DIM})")


@dataclass(frozen=True)
class BoxWindow:
    """Axis-aligned box given by per-axis (low, high) bounds."""

    bounds: tuple

    def __post_init__(self):
        b = tuple((float(lo), float(hi)) for lo, hi in self.bounds)
        object.__setattr__(self, "bounds", b)
        if not 1 <= len(b) <= _MAX_DIM:
            raise WindowError(f"box dimension must be 1..{_MAX_DIM}, got {len(b)}")
        for lo, hi in b:
            if not (math.isfinite(lo) and math.isfinite(hi) and lo < hi):
                raise WindowError(f"degenerate box axis ({lo}, {hi})")

    @property
    def dimension(self) -> int:
        return len(self.bounds)

    @property
    def point_dim(self) -> int:
        return len(self.bounds)

    def measure(self) -> float:
        return float(np.prod([hi - lo for lo, hi in self.bounds]))

    def lows(self) -> np.ndarray:
        return np.array([lo for lo, _ in self.bounds])

    def highs(self) -> np.ndarray:
        return np.array([hi for _, hi in self.bounds])

    def contains(self, points: np.ndarray) -> np.ndarray:
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        return np.all((pts >= self.lows()) & (pts <= self.highs()), axis=-1)

    def from_unit(self, u: np.ndarray) -> np.ndarray:
        """Map uniform unit-cube variates (shape (..., d)) into the box."""
        return self.lows() + (self.highs() - self.lows()) * u

    def sample(self, rng: np.random.Generator, n: int) -> np.ndarray:
        return self.from_unit(rng.random((n, self.dimension)))


@dataclass(frozen=True)
class BallWindow:
    """Centred Euclidean ball of given radius in R^dim."""

    radius: float
    dimension: int = 2

    def __post_init__(self):
        object.__setattr__(self, "radius", float(self.radius))
        object.__setattr__(self, "dimension", int(self.dimension))
        if not (math.isfinite(self.radius) and self.radius > 0):
            raise WindowError(f"ball radius must be positive, got {self.radius}")
        if not 1 <= self.dimension <= _MAX_DIM:
            raise WindowError(f"ball dimension must be 1..{_MAX_DIM}")

    @property
    def point_dim(self) -> int:
        return self.dimension

    def measure(self) -> float:
        return unit_ball_volume(self.dimension) * self.radius**self.dimension

    def contains(self, points: np.ndarray) -> np.ndarray:
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        return np.linalg.norm(pts, axis=-1) <= self.radius

    # no from_unit: sampling is by rejection, so stratified drivers are not
    # available for ball windows

    def sample(self, rng: np.random.Generator, n: int) -> np.ndarray:
        out = np.empty((n, self.dimension))
        got = 0
        while got < n:
            m = max(16, int((n - got) / 0.5) + 8)
            cand = rng.uniform(-self.radius, self.radius, size=(m, self.dimension))
            keep = cand[np.linalg.norm(cand, axis=1) <= self.radius]
            take = min(len(keep), n - got)
            out[got : got + take] = keep[:take]
            got += take
        return out


@dataclass(frozen=True)
class LineWindow:
    """All lines meeting the centred disk of the given radius.

    State space points are (phi, p) pairs; see the module docstring for the
    measure normalization.
    """

    radius: float

    def __post_init__(self):
        object.__setattr__(self, "radius", float(self.radius))
        if not (math.isfinite(self.radius) and self.radius > 0):
            raise WindowError(f"disk radius must be positive, got {self.radius}")

    @property
    def point_dim(self) -> int:
        return 2

    def measure(self) -> float:
        return 2.0 * math.pi * self.radius

    def contains(self, params: np.ndarray) -> np.ndarray:
        pts = np.atleast_2d(np.asarray(params, dtype=float))
        phi, p = pts[..., 0], pts[..., 1]
        return (phi >= 0.0) & (phi < math.pi) & (np.abs(p) <= self.radius)

    def from_unit(self, u: np.ndarray) -> np.ndarray:
        u = np.asarray(u, dtype=float)
        out = np.empty_like(u)
        out[..., 0] = math.pi * u[..., 0]
        out[..., 1] = self.radius * (2.0 * u[..., 1] - 1.0)
        return out

    def sample(self, rng: np.random.Generator, n: int) -> np.ndarray:
        return self.from_unit(rng.random((n, 2)))


Window = Union[BoxWindow, BallWindow, LineWindow]


def window_measure(window: Window) -> float:
    """Reference measure theta(W) of the window."""
    value = window.measure()
    if not (math.isfinite(value) and value > 0):
        raise WindowError(f"window measure must be finite and positive, got {value}")
    return value


@dataclass(frozen=True)
class IntensityModel:
    """Intensity measure ``lambda * theta`` restricted to a window."""

    lam: float
    window: Window

    def __post_init__(self):
        object.__setattr__(self, "lam", float(self.lam))
        if not (math.isfinite(self.lam) and self.lam > 0):
            raise WindowError(f"intensity rate must be positive, got {self.lam}")
        window_measure(self.window)

    def mean_count(self) -> float:
        return self.lam * window_measure(self.window)

    def with_lam(self, lam: float) -> "IntensityModel":
        return replace(self, lam=lam)


@dataclass(frozen=True, eq=False)
class PointConfiguration:
    """Ordered, simple realization of a point process.

    ``kind`` is "spatial" for points in R^d and "lines" for (phi, p) pairs.
    """

    points: np.ndarray
    kind: str = "spatial"
    seed: Optional[int] = None
    window: Optional[Window] = field(default=None, repr=False)

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=float)
        if pts.ndim == 1:
            pts = pts.reshape(-1, 1)
        if pts.ndim != 2:
            raise ConfigError(f"points must be a (n, d) array, got shape {pts.shape}")
        if pts.size and not np.all(np.isfinite(pts)):
            raise ConfigError("configuration contains non-finite coordinates")
        if self.kind not in ("spatial", "lines"):
            raise ConfigError(f"unknown configuration kind {self.kind!r}")
        if len(pts) > 1:
            # the process is simple: exact duplicates are rejected
            uniq = np.unique(pts, axis=0)
            if len(uniq) != len(pts):
                raise ConfigError("configuration has repeated points")
        if self.window is not None and len(pts):
            if not np.all(self.window.contains(pts)):
                raise ConfigError("configuration has points outside its window")
        pts = pts.copy()
        pts.flags.writeable = False
        object.__setattr__(self, "points", pts)

    @property
    def size(self) -> int:
        return int(self.points.shape[0])

    @property
    def dim(self) -> int:
        return int(self.points.shape[1])

    def with_point(self, y) -> "PointConfiguration":
        y = np.asarray(y, dtype=float).reshape(1, -1)
        return PointConfiguration(
            np.concatenate([self.points, y], axis=0) if self.size else y,
            kind=self.kind,
            seed=self.seed,
            window=self.window,
        )

    def without_index(self, i: int) -> "PointConfiguration":
        return PointConfiguration(
            np.delete(self.points, i, axis=0),
            kind=self.kind,
            seed=self.seed,
            window=self.window,
        )


def _sample(intensity: IntensityModel, seed, kind: str) -> PointConfiguration:
    rng = seed if isinstance(seed, np.random.Generator) else spawn_rng(seed)
    mean = intensity.lam * window_measure(intensity.window)
    n = int(rng.poisson(mean))
    pts = intensity.window.sample(rng, n) if n else np.empty((0, intensity.window.point_dim))
    return PointConfiguration(
        pts,
        kind=kind,
        seed=seed if isinstance(seed, int) else None,
        window=intensity.window,
    )


def sample_points(intensity: IntensityModel, seed) -> PointConfiguration:
    """Sample a Poisson configuration on a box or ball window."""
    if isinstance(intensity.window, LineWindow):
        raise ConfigError("sample_points needs a spatial window; use sample_lines")
    return _sample(intensity, seed, "spatial")


def sample_lines(intensity: IntensityModel, seed) -> PointConfiguration:
    """Sample a Poisson line process as (phi, p) parameter pairs."""
    if not isinstance(intensity.window, LineWindow):
        raise ConfigError("sample_lines needs a LineWindow")
    return _sample(intensity, seed, "lines")


def _format(value: float) -> str:
    return f"{value:.17g}"


def write_points_csv(config: PointConfiguration, path) -> None:
    """Write a configuration as CSV with header x1..xd, or phi,p for lines."""
    if config.kind == "lines":
        header = ["phi", "p"]
    else:
        header = [f"x{i + 1}" for i in range(config.dim)]
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for row in config.points:
            writer.writerow([_format(v) for v in row])


def read_points_csv(path, window: Optional[Window] = None) -> PointConfiguration:
    """Read a configuration written by :func:`write_points_csv`."""
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise ConfigError(f"{path}: empty file, expected a header row")
        rows = [[float(v) for v in row] for row in reader if row]
    if header == ["phi", "p"]:
        kind = "lines"
    elif header == [f"x{i + 1}" for i in range(len(header))]:
        kind = "spatial"
    else:
        raise ConfigError(f"{path}: unrecognized header {header}")
    pts = np.array(rows, dtype=float) if rows else np.empty((0, len(header)))
    return PointConfiguration(pts, kind=kind, window=window)
