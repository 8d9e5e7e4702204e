"""Step functions, distribution functions, decreasing rearrangements, f** and dilations.

A ``StepFunction`` is ``h = values[i]`` on ``(knots[i-1], knots[i]]`` (with
``knots[-1]`` read as ``start``) and ``tail`` on ``(knots[-1], b)``. An optional
``shape`` multiplies it pointwise, so ``k * h`` with ``h`` a step function is
represented exactly; integrals against the analytic measures stay closed-form.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from .measure import INF, Measure, lebesgue
from .shapes import Shape


class ContractError(ValueError):
    """Input violates an operation's contract (e.g. non-monotone f*)."""


@dataclass(frozen=True, eq=False)
class StepFunction:
    knots: np.ndarray
    values: np.ndarray
    start: float = 0.0
    tail: float = 0.0
    shape: Shape | None = None

    def __post_init__(self):
        knots = np.atleast_1d(np.asarray(self.knots, dtype=float))
        values = np.atleast_1d(np.asarray(self.values, dtype=float))
        if knots.shape != values.shape:
            raise ValueError("knots and values must have equal length")
        if knots.size and (knots[0] <= self.start or np.any(np.diff(knots) <= 0)):
            raise ValueError("knots must be strictly increasing and above start")
        if np.any(values < 0) or self.tail < 0:
            raise ValueError("step function values must be nonnegative")
        object.__setattr__(self, "knots", knots)
        object.__setattr__(self, "values", values)

    # -- evaluation -----------------------------------------------------------
    def _index(self, x):
        return np.searchsorted(self.knots, x, side="left")

    def levels(self, x):
        """The step part h(x) (without the shape factor)."""
        x = np.asarray(x, dtype=float)
        allv = np.append(self.values, self.tail)
        out = allv[self._index(x)]
        return np.where(x > self.start, out, 0.0)

    def __call__(self, x):
        h = self.levels(x)
        if self.shape is not None:
            with np.errstate(invalid="ignore"):
                h = np.where(h > 0, h * self.shape(np.asarray(x, dtype=float)), 0.0)
        return h if np.ndim(h) else float(h)

    @property
    def edges(self) -> np.ndarray:
        return np.concatenate([[self.start], self.knots])

    @property
    def is_nonincreasing(self) -> bool:
        allv = np.append(self.values, self.tail)
        return bool(np.all(np.diff(allv) <= 0))

    # -- integrals ------------------------------------------------------------
    def integral(self, m: Measure, power: float = 1.0, upto=None):
        """Integral of f**power dm over (start, upto] (whole line if ``upto`` is None).

        Exact: each piece contributes value**power times the mass of the piece
        under ``shape**power dm``. Vectorized over ``upto``.
        """
        mk = m.reweighted(self.shape, power) if self.shape is not None else m
        lefts = self.edges[:-1]
        vp = self.values**power
        piece = np.where(vp > 0, mk.mass(lefts, self.knots), 0.0) if self.knots.size else np.zeros(0)
        with np.errstate(invalid="ignore"):
            contrib = np.where(vp > 0, vp * piece, 0.0)
        cum = np.concatenate([[0.0], np.cumsum(contrib)])
        tailp = self.tail**power
        last = self.knots[-1] if self.knots.size else self.start
        if upto is None:
            extra = tailp * mk.mass(last, INF) if tailp > 0 else 0.0
            return float(cum[-1] + extra)
        x = np.asarray(upto, dtype=float)
        j = self._index(x)
        allvp = np.append(vp, tailp)
        left = np.append(lefts, last)[j]
        with np.errstate(invalid="ignore"):
            part = np.where(allvp[j] > 0, allvp[j] * mk.mass(left, np.maximum(x, left)), 0.0)
        out = np.where(x > self.start, cum[j] + part, 0.0)
        return out if out.ndim else float(out)

    # -- algebra --------------------------------------------------------------
    def scaled(self, c: float) -> "StepFunction":
        return StepFunction(self.knots, self.values * c, self.start, self.tail * c, self.shape)

    def with_levels(self, values, tail=None) -> "StepFunction":
        return StepFunction(self.knots, values, self.start, self.tail if tail is None else tail, self.shape)

    def __add__(self, other: "StepFunction") -> "StepFunction":
        if self.shape is not None or other.shape is not None:
            raise ContractError("literal addition is defined for pure step functions")
        if self.start != other.start:
            raise ContractError("step functions must share a start point")
        knots = np.union1d(self.knots, other.knots)
        return StepFunction(knots, self.levels(knots) + other.levels(knots), self.start, self.tail + other.tail)

    def dilated(self, s: float) -> "StepFunction":
        """sigma_s(f)(x) = f(x / s) for a pure step function starting at 0."""
        if self.shape is not None or self.start != 0:
            raise ContractError("horizontal dilation expects a pure step function on (0, inf)")
        return StepFunction(self.knots * s, self.values, 0.0, self.tail)


def indicator(t: float, start: float = 0.0, value: float = 1.0) -> StepFunction:
    return StepFunction([t], [value], start)


@dataclass(frozen=True)
class LevelSetFunction:
    """A function known through its level sets: value y_i on a set of mass m_i."""

    levels: tuple[tuple[float, float], ...] = field(default_factory=tuple)

    def __post_init__(self):
        lv = tuple((float(y), float(m)) for y, m in self.levels)
        for y, m in lv:
            if not (y > 0 and 0 < m < INF):
                raise ValueError(f"level ({y}, {m}) needs positive value and finite positive mass")
        object.__setattr__(self, "levels", lv)

    @classmethod
    def from_arrays(cls, values: Sequence[float], masses: Sequence[float]) -> "LevelSetFunction":
        return cls(tuple(zip(values, masses)))

    @property
    def values(self) -> np.ndarray:
        return np.array([y for y, _ in self.levels])

    @property
    def masses(self) -> np.ndarray:
        return np.array([m for _, m in self.levels])

    def power_integral(self, p: float) -> float:
        """Sum of y_i**p m_i, the integral of |f|**p."""
        return float(np.sum(self.values**p * self.masses)) if self.levels else 0.0


def distribution(f: LevelSetFunction, y):
    """lambda_f(y) = measure of {|f| > y}."""
    y = np.asarray(y, dtype=float)
    if not f.levels:
        return np.zeros(y.shape) if y.ndim else 0.0
    out = np.sum(np.where(f.values[None, :] > y.reshape(-1, 1), f.masses[None, :], 0.0), axis=1)
    return out.reshape(y.shape) if y.ndim else float(out[0])


def rearrangement(f: LevelSetFunction) -> StepFunction:
    """f* on (0, inf): values sorted descending, knots at accumulated masses."""
    if not f.levels:
        return StepFunction([], [], 0.0)
    vals, inv = np.unique(f.values, return_inverse=True)
    mass = np.bincount(inv, weights=f.masses)
    order = np.argsort(-vals)
    return StepFunction(np.cumsum(mass[order]), vals[order], 0.0)


def level_sets(g: StepFunction) -> LevelSetFunction:
    """Level sets of a pure one-dimensional step function under Lebesgue measure."""
    if g.shape is not None:
        raise ContractError("level sets need a pure step function")
    if g.tail > 0:
        raise ContractError("infinite-mass tail has no finite level sets")
    widths = np.diff(g.edges)
    keep = g.values > 0
    return LevelSetFunction.from_arrays(g.values[keep], widths[keep])


def maximal(fstar: StepFunction, t):
    """f**(t) = t^{-1} times the integral of f* over (0, t], exactly."""
    if fstar.shape is not None or not fstar.is_nonincreasing:
        raise ContractError("maximal() expects a nonincreasing pure step function")
    t = np.asarray(t, dtype=float)
    if np.any(t <= 0):
        raise ContractError("t must be positive")
    return fstar.integral(lebesgue(), 1.0, upto=t) / t


def dilate(f: LevelSetFunction, m: float, n: int = 1) -> LevelSetFunction:
    """sigma_m on R^n: every level set's mass scales by m**n."""
    if not m > 0:
        raise ValueError("dilation factor must be positive")
    return LevelSetFunction(tuple((y, mass * m**n) for y, mass in f.levels))


def random_level_set(rng: np.random.Generator, pieces: int | None = None) -> LevelSetFunction:
    n = int(pieces or rng.integers(1, 12))
    values = np.round(rng.exponential(2.0, n), 3) + 0.001
    masses = rng.exponential(1.0, n) + 1e-3
    return LevelSetFunction.from_arrays(values, masses)


def combine(parts: Iterable[StepFunction]) -> StepFunction:
    parts = list(parts)
    out = parts[0]
    for g in parts[1:]:
        out = out + g
    return out
