"""Monotone operators restricted to cones: identity, Hardy-type, kernel, dilation.

Each operator evaluates ``T[f](x)`` and the norm of ``T[f]`` in ``L_q(gamma)``.
Identity norms are exact; Hardy and dilation norms integrate a piecewise smooth
function with Gauss-Legendre cells split at the input's knots; kernel operators
are discretized on a fixed cell partition (kernel frozen per cell pair), which
makes them exact positive operators on their own.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .cone import ConeSpec, extremal
from .grid import CellRule, Coord, GridConfig, Running, integrate_values, quadrature, t_grid
from .measure import INF, Interval, Measure, ParameterError, weighted_p_norm
from .rearrange import StepFunction
from .shapes import PowerShape


def _qnorm(integral: float, q: float) -> float:
    return INF if integral == INF else max(integral, 0.0) ** (1.0 / q)


class Operator:
    name = "operator"
    #: convexity exponent used by the applicability test; linear operators count as r = 1
    r: float = 1.0

    def apply(self, f: StepFunction, x, interval: Interval | None = None, grid: GridConfig | None = None):
        raise NotImplementedError

    def y_norm(self, f: StepFunction, q: float, gamma: Measure, interval: Interval, grid: GridConfig) -> float:
        raise NotImplementedError

    def extremal_values(self, cone: ConeSpec, t: float, x, grid: GridConfig | None = None):
        return self.apply(extremal(cone, t), x, cone.interval, grid)

    def extremal_y_norm(self, cone: ConeSpec, t: float, q: float, gamma: Measure, grid: GridConfig) -> float:
        return self.y_norm(extremal(cone, t), q, gamma, cone.interval, grid)

    def extremal_y_norms(self, cone: ConeSpec, ts, q: float, gamma: Measure, grid: GridConfig) -> np.ndarray:
        return np.array([self.extremal_y_norm(cone, float(t), q, gamma, grid) for t in np.ravel(ts)])

    def to_dict(self) -> dict:
        return {"op": self.name}


@dataclass(frozen=True)
class Identity(Operator):
    name = "identity"

    def apply(self, f, x, interval=None, grid=None):
        return f(x)

    def y_norm(self, f, q, gamma, interval, grid):
        return weighted_p_norm(f, q, gamma)


@dataclass(frozen=True, eq=False)
class Hardy(Operator):
    """A[f](x) = (integral over (a, x] of f**r dmu)**(1/r)."""

    r: float = 1.0
    mu: Measure = None
    name = "hardy"

    def __post_init__(self):
        if not self.r > 0:
            raise ParameterError("r must be positive")
        if self.mu is None:
            raise ParameterError("Hardy operator needs a measure mu")
        object.__setattr__(self, "_profiles", {})

    def apply(self, f, x, interval=None, grid=None):
        g = f.integral(self.mu, self.r, upto=x)
        return _qnorm_arr(g, self.r)

    def y_norm(self, f, q, gamma, interval, grid):
        quad = quadrature(gamma, interval, grid, breaks=f.knots)
        expo = q / self.r
        inner = f.integral(self.mu, self.r, upto=quad.nodes) ** expo
        edges = f.integral(self.mu, self.r, upto=quad.edge_nodes) ** expo
        return _qnorm(integrate_values(quad, inner, edges), q)

    def psi_power(self, cone: ConeSpec, y):
        """Integral of k**r dmu over (a, y]."""
        mk = self.mu.reweighted(cone.k, self.r)
        return mk.mass(cone.interval.a, y)

    def extremal_values(self, cone, t, x, grid=None):
        # A[k chi_(a,t]](x) = Psi(min(x, t))
        x = np.asarray(x, dtype=float)
        return _qnorm_arr(self.psi_power(cone, np.minimum(x, t)), self.r)

    def _profile(self, cone, q, gamma, grid) -> Running:
        key = (id(cone), id(gamma), q, grid)
        hit = self._profiles.get(key)
        if hit is None:
            expo = q / self.r
            cr = CellRule(gamma, cone.interval, grid)
            hit = (cone, gamma, Running(cr, lambda x: self.psi_power(cone, x) ** expo))
            self._profiles[key] = hit
        return hit[2]

    def extremal_y_norms(self, cone, ts, q, gamma, grid):
        # ||F(., t)||_q^q = int_(a,t] Psi^q dgamma + Psi(t)^q gamma(t, b)
        ts = np.atleast_1d(np.asarray(ts, dtype=float))
        out = np.empty(ts.shape)
        end = ts >= cone.interval.b
        for i in np.flatnonzero(end):
            out[i] = self.y_norm(extremal(cone, float(ts[i])), q, gamma, cone.interval, grid)
        if np.any(~end):
            t = ts[~end]
            head = self._profile(cone, q, gamma, grid).upto(t)
            psi_q = self.psi_power(cone, t) ** (q / self.r)
            rest = np.asarray(gamma.mass(t, cone.interval.b), dtype=float)
            with np.errstate(invalid="ignore"):
                tail = np.where(psi_q > 0, psi_q * rest, 0.0)
            total = head + tail
            out[~end] = np.where(np.isinf(total), INF, np.maximum(total, 0.0) ** (1.0 / q))
        return out

    def extremal_y_norm(self, cone, t, q, gamma, grid):
        return float(self.extremal_y_norms(cone, [t], q, gamma, grid)[0])

    def to_dict(self):
        return {"op": self.name, "r": self.r}


def _qnorm_arr(g, r):
    g = np.asarray(g, dtype=float)
    out = np.where(np.isinf(g), INF, np.maximum(g, 0.0) ** (1.0 / r))
    return out if out.ndim else float(out)


class Kernel(Operator):
    """T[f](x) = (integral of K(x, tau) f(tau)**r dmu(tau))**(1/r), K >= 0 bounded.

    The kernel is frozen on a partition of the interval into ``cells`` pieces
    (geometric in the grid coordinate, plus the two edge cells): K(x, tau) is
    replaced by K(x_n, tau_m) for x in cell n and tau in cell m, with x_n the
    cell's coordinate midpoint. Inner integrals of f**r over cells are exact.
    """

    name = "kernel"

    def __init__(self, r: float, mu: Measure, kernel: Callable, cells: int = 256, label: str = "K"):
        if not r > 0:
            raise ParameterError("r must be positive")
        self.r = r
        self.mu = mu
        self.kernel = kernel
        self.cells = cells
        self.label = label
        self._cache: dict = {}

    def _partition(self, interval: Interval, grid: GridConfig | None):
        span = (grid or GridConfig()).span
        key = (interval, span)
        if key not in self._cache:
            cfg = GridConfig(points=self.cells, span=span, refine_iters=0)
            pts = t_grid(interval, cfg)
            coord = Coord(interval)
            u = coord.to_u(pts)
            reps = np.concatenate([[pts[0]], coord.to_t((u[:-1] + u[1:]) / 2), [pts[-1]]])
            edges = np.concatenate([[interval.a], pts, [interval.b]])
            xx, tt = np.meshgrid(reps, reps, indexing="ij")
            kmat = np.asarray(self.kernel(xx, tt), dtype=float) * np.ones_like(xx)
            if np.any(kmat < 0) or not np.all(np.isfinite(kmat)):
                raise ParameterError("kernel must be finite and nonnegative on the working grid")
            self._cache[key] = (edges, kmat)
        return self._cache[key]

    def _cell_values(self, f: StepFunction, interval: Interval, grid):
        edges, kmat = self._partition(interval, grid)
        g = f.integral(self.mu, self.r, upto=edges)
        dg = np.maximum(np.diff(g), 0.0)
        blown = np.isinf(dg)
        inner = kmat @ np.where(blown, 0.0, dg)
        if np.any(blown):
            inner = np.where(np.any(kmat[:, blown] > 0, axis=1), INF, inner)
        return edges, _qnorm_arr(inner, self.r)

    def apply(self, f, x, interval=None, grid=None):
        interval = interval or Interval(f.start)
        edges, vals = self._cell_values(f, interval, grid)
        x = np.asarray(x, dtype=float)
        idx = np.clip(np.searchsorted(edges, x, side="left") - 1, 0, vals.size - 1)
        out = vals[idx]
        return out if out.ndim else float(out)

    def y_norm(self, f, q, gamma, interval, grid):
        edges, vals = self._cell_values(f, interval, grid)
        masses = gamma.mass(edges[:-1], edges[1:])
        with np.errstate(invalid="ignore", over="ignore"):
            terms = np.where(vals > 0, vals**q * masses, 0.0)
        return _qnorm(float(np.sum(terms)), q)

    def to_dict(self):
        return {"op": self.name, "r": self.r, "kernel": self.label, "cells": self.cells}


@dataclass(frozen=True)
class Dilation(Operator):
    """sigma_m[f](x) = f(x / m) on the half line."""

    m: float = 1.0
    n: int = 1
    name = "dilation"

    def __post_init__(self):
        if not self.m > 0:
            raise ParameterError("dilation factor must be positive")

    def apply(self, f, x, interval=None, grid=None):
        return f(np.asarray(x, dtype=float) / self.m)

    def y_norm(self, f, q, gamma, interval, grid):
        if f.start == 0 and f.shape is None:
            return weighted_p_norm(f.dilated(self.m), q, gamma)
        if f.start == 0 and isinstance(f.shape, PowerShape):
            # k(x/m) = m**-kappa k(x) for power shapes
            pure = StepFunction(f.knots, f.values, 0.0, f.tail).dilated(self.m)
            moved = StepFunction(pure.knots, pure.values * self.m**-f.shape.kappa, 0.0,
                                 pure.tail * self.m**-f.shape.kappa, f.shape)
            return weighted_p_norm(moved, q, gamma)
        quad = quadrature(gamma, interval, grid, breaks=f.knots * self.m)
        inner = np.asarray(self.apply(f, quad.nodes), dtype=float) ** q
        edges = np.asarray(self.apply(f, quad.edge_nodes), dtype=float) ** q
        return _qnorm(integrate_values(quad, inner, edges), q)

    def to_dict(self):
        return {"op": self.name, "m": self.m, "n": self.n}


# -- l_rho-convexity of L_q -------------------------------------------------------

def lq_norm(y: np.ndarray, weights: np.ndarray, q: float) -> float:
    """(sum |y|**q w)**(1/q) for a function on a finite weighted set."""
    return float(np.sum(np.abs(y) ** q * weights)) ** (1.0 / q)


def l_rho_sides(ys: np.ndarray, weights: np.ndarray, rho: float, q: float) -> tuple[float, float]:
    """Left and right sides of the l_rho-convexity inequality in L_q.

    ``ys`` has one row per sequence element y_m.
    """
    combined = np.sum(np.abs(ys) ** rho, axis=0) ** (1.0 / rho)
    lhs = lq_norm(combined, weights, q)
    rhs = float(np.sum([lq_norm(y, weights, q) ** rho for y in ys])) ** (1.0 / rho)
    return lhs, rhs
