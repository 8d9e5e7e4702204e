"""Cones of k-monotone functions, their extremal families, and a seeded sampler."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from .grid import Coord, GridConfig, u_grid
from .measure import Interval, Measure, ParameterError
from .rearrange import StepFunction
from .shapes import ONE, ConstShape, Shape


class Variant(str, Enum):
    OMEGA = "omega"
    OMEGA_DOT = "omega_dot"


@dataclass(frozen=True)
class ConeSpec:
    """Functions g >= 0 on the interval with g/k nonincreasing and left-continuous.

    ``OMEGA_DOT`` additionally requires g/k -> 0 at the right endpoint.
    """

    interval: Interval = field(default_factory=Interval)
    k: Shape = ONE
    variant: Variant = Variant.OMEGA

    def endpoint_norm(self, p: float, beta: Measure) -> float:
        """||k chi_(a,b)|| in L_p(beta); infinite selects the dotted branch."""
        return float(beta.reweighted(self.k, p).mass(*self.interval)) ** (1.0 / p)


@dataclass(frozen=True)
class SamplerConfig:
    seed: int = 0
    pieces: int = 8
    grid: GridConfig = field(default_factory=GridConfig)

    def __post_init__(self):
        if self.pieces < 1:
            raise ParameterError("pieces must be >= 1")


def extremal(cone: ConeSpec, t: float) -> StepFunction:
    """k * chi_(a, t]; ``t == b`` encodes k * chi_(a, b) (Omega variant only)."""
    a, b = cone.interval
    if not (a < t <= b):
        raise ParameterError(f"t={t} outside ({a}, {b}]")
    shape = None if isinstance(cone.k, ConstShape) else cone.k
    c = cone.k.c if isinstance(cone.k, ConstShape) else 1.0
    if t == b:
        if cone.variant is Variant.OMEGA_DOT:
            raise ParameterError("the endpoint element is not in the dotted cone")
        return StepFunction([], [], a, tail=c, shape=shape)
    return StepFunction([t], [c], a, shape=shape)


def sampled_extremal(cone: ConeSpec, t: float, grid: np.ndarray) -> StepFunction:
    """k * chi_(a,t] with k frozen at the right end of each grid cell below t."""
    g = np.asarray(grid, dtype=float)
    g = g[(g > cone.interval.a) & (g < t)]
    knots = np.append(g, t)
    return StepFunction(knots, cone.k(knots) * np.ones_like(knots), cone.interval.a)


def _ratio_levels(g: StepFunction, cone: ConeSpec) -> np.ndarray:
    """g/k on consecutive pieces (tail last)."""
    if g.shape is not None and g.shape == cone.k:
        return np.append(g.values, g.tail)
    if g.shape is None and isinstance(cone.k, ConstShape):
        return np.append(g.values, g.tail) / cone.k.c
    # general case: compare g/k at the knots (right ends of the pieces)
    pts = g.knots
    ratio = np.asarray(g(pts), dtype=float) / np.asarray(cone.k(pts), dtype=float)
    if g.tail > 0:
        last = pts[-1] if pts.size else cone.interval.a + 1.0
        tail_val = g.tail * (float(g.shape(last)) if g.shape is not None else 1.0)
        ratio = np.append(ratio, tail_val / float(cone.k(last)))
    return ratio


def membership_check(g: StepFunction, cone: ConeSpec, atol: float = 0.0) -> bool:
    """g >= 0, g/k nonincreasing across knots, and g/k -> 0 at b for the dotted cone."""
    if g.start != cone.interval.a:
        return False
    if np.any(g.values < 0) or g.tail < 0:
        return False
    if g.knots.size and g.knots[-1] > cone.interval.b:
        return False
    r = _ratio_levels(g, cone)
    if r.size > 1 and np.any(np.diff(r) > atol * np.maximum(1.0, np.abs(r[:-1]))):
        return False
    if cone.variant is Variant.OMEGA_DOT and g.tail > 0:
        return False
    return True


def decompose(g: StepFunction) -> list[tuple[float, float]]:
    """Write a nonincreasing step h as sum of c_i chi_(a, t_i], c_i >= 0.

    The tail level pairs with t = b (returned as ``inf`` for unbounded b).
    """
    levels = np.append(g.values, g.tail)
    diffs = levels[:-1] - levels[1:]
    out = [(float(c), float(t)) for c, t in zip(diffs, g.knots)]
    if g.tail > 0:
        out.append((float(g.tail), math.inf))
    return out


def reconstruct(cone: ConeSpec, parts: list[tuple[float, float]]) -> StepFunction:
    knots = np.array([t for _, t in parts if math.isfinite(t) and t < cone.interval.b])
    coeffs = np.array([c for c, t in parts if math.isfinite(t) and t < cone.interval.b])
    tail = sum(c for c, t in parts if not (math.isfinite(t) and t < cone.interval.b))
    order = np.argsort(knots)
    knots, coeffs = knots[order], coeffs[order]
    levels = np.cumsum(coeffs[::-1])[::-1] + tail
    shape = None if isinstance(cone.k, ConstShape) else cone.k
    return StepFunction(knots, levels, cone.interval.a, tail, shape)


def sample(cone: ConeSpec, cfg: SamplerConfig, allow_tail: bool | None = None) -> StepFunction:
    """A random cone member k * h, h nonincreasing; deterministic given the seed.

    Knots are drawn uniformly in the grid coordinate (geometric in t) over the
    truncated interval; levels are reversed cumulative sums of exponential
    increments. The tail piece is only used for the Omega variant.
    """
    rng = np.random.default_rng(cfg.seed)
    return _sample(cone, cfg.pieces, cfg.grid, rng, allow_tail)


def _sample(cone, pieces, grid, rng, allow_tail=None, focus=None):
    """``focus = (u0, width)`` draws the knots normally around u0 instead of uniformly."""
    coord = Coord(cone.interval)
    us = u_grid(grid)
    if focus is None:
        u = np.sort(rng.uniform(us[0], us[-1], pieces))
    else:
        u = np.sort(np.clip(rng.normal(focus[0], focus[1], pieces), us[0], us[-1]))
    knots = np.unique(coord.to_t(u))
    inc = rng.exponential(1.0, knots.size)
    if allow_tail is None:
        allow_tail = cone.variant is Variant.OMEGA
    tail = float(rng.exponential(1.0)) if allow_tail and rng.random() < 0.25 else 0.0
    levels = np.cumsum(inc[::-1])[::-1] + tail
    shape = None if isinstance(cone.k, ConstShape) else cone.k
    if isinstance(cone.k, ConstShape):
        levels, tail = levels * cone.k.c, tail * cone.k.c
    return StepFunction(knots, levels, cone.interval.a, tail, shape)
