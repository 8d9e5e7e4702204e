"""Atomless nonnegative measures on an interval, accessed through cumulative masses.

Every measure answers ``mass(lo, hi)``, the measure of ``(lo, hi]`` clipped to
its interval, vectorized over numpy arrays. Analytic families use closed-form
primitives written in cancellation-free form so that masses of very thin cells
keep full relative precision.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field, replace
from typing import Callable

import numpy as np
from scipy import integrate, special

from .shapes import ConstShape, PowerShape, Shape

INF = math.inf
DIVERGENCE_THRESHOLD = 1e15


class DomainError(ValueError):
    """Argument outside the measure's interval."""


class ParameterError(ValueError):
    """Invalid exponent or family parameter."""


@dataclass(frozen=True)
class Interval:
    a: float = 0.0
    b: float = INF

    def __post_init__(self):
        if not self.a < self.b:
            raise ParameterError(f"interval needs a < b, got ({self.a}, {self.b})")
        if not math.isfinite(self.a):
            raise ParameterError("left endpoint must be finite")

    @property
    def length(self) -> float:
        return self.b - self.a

    def __iter__(self):
        yield self.a
        yield self.b


class Measure:
    """Base class. Subclasses implement ``_mass`` on already clipped bounds."""

    interval: Interval

    def mass(self, lo, hi):
        """Measure of (lo, hi] intersected with the interval; elementwise."""
        lo = np.maximum(np.asarray(lo, dtype=float), self.interval.a)
        hi = np.minimum(np.asarray(hi, dtype=float), self.interval.b)
        lo, hi = np.broadcast_arrays(lo, hi)
        out = np.zeros(lo.shape)
        ok = hi > lo
        if np.any(ok):
            with np.errstate(over="ignore", invalid="ignore", divide="ignore"):
                out[ok] = self._mass(lo[ok], hi[ok])
        return out if out.ndim else float(out)

    def _mass(self, lo: np.ndarray, hi: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def density(self, t):
        """Density with respect to Lebesgue measure, 0 outside the interval."""
        raise NotImplementedError

    @property
    def has_density(self) -> bool:
        return True

    def cumulative(self, t) -> float:
        t = float(t)
        a, b = self.interval
        if not (a < t <= b):
            raise DomainError(f"t={t} outside ({a}, {b}]")
        return float(self.mass(a, t))

    def tail(self, t) -> float:
        t = float(t)
        a, b = self.interval
        if not (a <= t < b):
            raise DomainError(f"t={t} outside [{a}, {b})")
        return float(self.mass(t, b))

    def total(self) -> float:
        return float(self.mass(*self.interval))

    def scaled(self, factor: float) -> "Measure":
        raise NotImplementedError

    def restricted(self, interval: Interval) -> "Measure":
        """The same density on the intersection with ``interval``."""
        a, b = max(self.interval.a, interval.a), min(self.interval.b, interval.b)
        if (a, b) == (self.interval.a, self.interval.b):
            return self
        return replace(self, interval=Interval(a, b))

    def reweighted(self, shape: Shape | None, power: float = 1.0) -> "Measure":
        """The measure shape(t)**power dm(t)."""
        if shape is None:
            return self
        if shape.is_const:
            return self.scaled(float(shape.pow(power)(1.0)))
        if not self.has_density:
            raise ParameterError("non-constant reweighting needs a measure with a density")
        w = shape.pow(power)
        return DensityRule(lambda t, d=self.density, w=w: w(t) * d(t), self.interval)

    def _inside(self, t):
        t = np.asarray(t, dtype=float)
        return (t > self.interval.a) & (t <= self.interval.b)


def _power_primitive_diff(e, c, lo, hi):
    """c * integral of t**(e-1) over (lo, hi], lo >= 0."""
    out = np.empty(lo.shape)
    z = lo == 0
    if np.any(z):
        out[z] = c * hi[z] ** e / e if e > 0 else INF
    nz = ~z
    if np.any(nz):
        l, h = lo[nz], hi[nz]
        ratio_log = np.where(np.isinf(h), INF, np.log1p((h - l) / l))
        if e == 0:
            out[nz] = c * ratio_log
        else:
            val = c / e * l**e * np.expm1(e * ratio_log)
            if e < 0:
                val = np.where(np.isinf(h), -c / e * l**e, val)
            out[nz] = val
    return out


@dataclass(frozen=True)
class PowerDensity(Measure):
    """Density c * t**alpha on an interval inside (0, inf)."""

    alpha: float
    c: float = 1.0
    interval: Interval = field(default_factory=Interval)

    def __post_init__(self):
        if self.interval.a < 0:
            raise ParameterError("power densities live on t > 0")
        if self.c <= 0:
            raise ParameterError("scale must be positive")

    def _mass(self, lo, hi):
        return _power_primitive_diff(self.alpha + 1.0, self.c, lo, hi)

    def density(self, t):
        t = np.asarray(t, dtype=float)
        with np.errstate(divide="ignore", invalid="ignore"):
            return np.where(self._inside(t), self.c * np.abs(t) ** self.alpha, 0.0)

    def scaled(self, factor):
        return replace(self, c=self.c * factor)

    def reweighted(self, shape, power=1.0):
        if isinstance(shape, PowerShape):
            return replace(self, alpha=self.alpha + shape.kappa * power, c=self.c * shape.c**power)
        return super().reweighted(shape, power)


@dataclass(frozen=True)
class ExpDensity(Measure):
    """Density c * exp(-rate * t); negative rates give growing weights."""

    rate: float
    c: float = 1.0
    interval: Interval = field(default_factory=Interval)

    def _mass(self, lo, hi):
        lam, c = self.rate, self.c
        if lam == 0:
            return c * (hi - lo)
        width = hi - lo
        core = -np.expm1(-lam * width) / lam
        out = c * np.exp(-lam * lo) * core
        if lam > 0:
            out = np.where(np.isinf(hi), c * np.exp(-lam * lo) / lam, out)
        else:
            out = np.where(np.isinf(hi), INF, out)
        return out

    def density(self, t):
        t = np.asarray(t, dtype=float)
        with np.errstate(over="ignore"):
            return np.where(self._inside(t), self.c * np.exp(-self.rate * t), 0.0)

    def scaled(self, factor):
        return replace(self, c=self.c * factor)

    def reweighted(self, shape, power=1.0):
        if isinstance(shape, PowerShape) and self.rate > 0 and self.interval.a >= 0:
            return GammaDensity(shape.kappa * power, self.rate, self.c * shape.c**power, self.interval)
        return super().reweighted(shape, power)


@dataclass(frozen=True)
class GammaDensity(Measure):
    """Density c * t**alpha * exp(-rate * t), rate > 0, on t > 0."""

    alpha: float
    rate: float
    c: float = 1.0
    interval: Interval = field(default_factory=Interval)

    def __post_init__(self):
        if self.rate <= 0:
            raise ParameterError("gamma density needs rate > 0")
        if self.interval.a < 0:
            raise ParameterError("gamma densities live on t > 0")

    def _mass(self, lo, hi):
        a, lam = self.alpha + 1.0, self.rate
        if a <= 0:
            if np.any(lo == 0):
                return np.where(lo == 0, INF, self._quad(lo, hi))
            return self._quad(lo, hi)
        scale = self.c * math.exp(special.gammaln(a)) / lam**a
        x0, x1 = lam * lo, lam * hi
        upper = x0 > a
        lower_part = special.gammainc(a, x1) - special.gammainc(a, x0)
        upper_part = special.gammaincc(a, x0) - special.gammaincc(a, x1)
        return scale * np.where(upper, upper_part, lower_part)

    def _quad(self, lo, hi):
        return np.array([_quad_mass(self.density, l, h) for l, h in zip(lo, hi)])

    def density(self, t):
        t = np.asarray(t, dtype=float)
        with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
            return np.where(self._inside(t), self.c * np.abs(t) ** self.alpha * np.exp(-self.rate * t), 0.0)

    def scaled(self, factor):
        return replace(self, c=self.c * factor)

    def reweighted(self, shape, power=1.0):
        if isinstance(shape, PowerShape):
            return replace(self, alpha=self.alpha + shape.kappa * power, c=self.c * shape.c**power)
        return super().reweighted(shape, power)


@dataclass(frozen=True, eq=False)
class TabulatedDensity(Measure):
    """Piecewise-linear density through (grid, values); zero off the grid."""

    grid: np.ndarray
    values: np.ndarray
    interval: Interval = field(default_factory=Interval)

    def __post_init__(self):
        g = np.asarray(self.grid, dtype=float)
        v = np.asarray(self.values, dtype=float)
        if g.ndim != 1 or g.shape != v.shape or g.size < 2:
            raise ParameterError("tabulated density needs matching 1-d grid and values")
        if np.any(np.diff(g) <= 0):
            raise ParameterError("tabulated grid must be strictly increasing")
        if np.any(v < 0):
            raise ParameterError("tabulated densities must be nonnegative")
        object.__setattr__(self, "grid", g)
        object.__setattr__(self, "values", v)
        cells = np.diff(g) * (v[1:] + v[:-1]) / 2
        object.__setattr__(self, "_cum", np.concatenate([[0.0], np.cumsum(cells)]))

    def _primitive(self, x):
        g, v = self.grid, self.values
        x = np.clip(x, g[0], g[-1])
        i = np.clip(np.searchsorted(g, x, side="right") - 1, 0, g.size - 2)
        dx = x - g[i]
        dx_cell = g[i + 1] - g[i]
        dens_x = v[i] + (v[i + 1] - v[i]) * dx / dx_cell
        return self._cum[i] + dx * (v[i] + dens_x) / 2

    def _mass(self, lo, hi):
        return self._primitive(hi) - self._primitive(lo)

    def density(self, t):
        t = np.asarray(t, dtype=float)
        return np.where(self._inside(t), np.interp(t, self.grid, self.values, left=0.0, right=0.0), 0.0)

    def scaled(self, factor):
        return TabulatedDensity(self.grid, self.values * factor, self.interval)

    def reweighted(self, shape, power=1.0):
        if shape is None:
            return self
        # approximation: the weight is interpolated linearly with the density
        return TabulatedDensity(self.grid, self.values * shape.pow(power)(self.grid), self.interval)


def _quad_mass(density, lo, hi):
    if not hi > lo:
        return 0.0
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        if math.isinf(hi):
            # split so that quad sees the whole tail once
            mid = max(2 * lo, lo + 1.0)
            head, _ = integrate.quad(lambda t: float(density(t)), lo, mid, limit=200)
            tail, _ = integrate.quad(lambda t: float(density(t)), mid, INF, limit=200)
            val = head + tail
        else:
            val, _ = integrate.quad(lambda t: float(density(t)), lo, hi, limit=200)
    if not math.isfinite(val) or val > DIVERGENCE_THRESHOLD:
        return INF
    return max(val, 0.0)


@dataclass(frozen=True, eq=False)
class DensityRule(Measure):
    """Density given by an evaluation rule; masses by adaptive quadrature."""

    fn: Callable
    interval: Interval = field(default_factory=Interval)
    label: str = "density"

    def _mass(self, lo, hi):
        return np.array([_quad_mass(self.density, l, h) for l, h in zip(lo.ravel(), hi.ravel())]).reshape(lo.shape)

    def density(self, t):
        t = np.asarray(t, dtype=float)
        inside = self._inside(t)
        out = np.zeros(t.shape)
        if np.any(inside):
            out[inside] = np.broadcast_to(np.asarray(self.fn(t[inside]), dtype=float), t[inside].shape)
        return out if out.ndim else float(out)

    def scaled(self, factor):
        return DensityRule(lambda t, f=self.fn: factor * np.asarray(f(t), dtype=float), self.interval, self.label)


@dataclass(frozen=True, eq=False)
class CumulativeRule(Measure):
    """Measure given directly by t -> measure of (a, t]; no density available."""

    fn: Callable
    interval: Interval = field(default_factory=Interval)
    label: str = "cumulative"

    def _mass(self, lo, hi):
        at_start = lo <= self.interval.a
        f_lo = np.where(at_start, 0.0, np.asarray(self.fn(lo), dtype=float))
        f_hi = np.asarray(self.fn(hi), dtype=float)
        return np.maximum(f_hi - f_lo, 0.0)

    @property
    def has_density(self):
        return False

    def density(self, t):
        raise ParameterError("cumulative-rule measures have no density")

    def scaled(self, factor):
        return CumulativeRule(lambda t, f=self.fn: factor * np.asarray(f(t), dtype=float), self.interval, self.label)


def lebesgue(interval: Interval | None = None) -> PowerDensity:
    return PowerDensity(0.0, 1.0, interval or Interval())


def weighted_p_norm(f, p: float, m: Measure) -> float:
    """(integral of f**p dm)**(1/p) for a step function f (possibly shaped)."""
    if not p > 0:
        raise ParameterError("p must be positive")
    return float(f.integral(m, p)) ** (1.0 / p)


def null_measure(interval: Interval | None = None) -> "CumulativeRule":
    """The zero measure."""
    return CumulativeRule(lambda t: np.zeros(np.shape(t)), interval or Interval(), "zero")
