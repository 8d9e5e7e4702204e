"""Working grids, quadrature against measures, and one-parameter supremum search.

Points are uniform in a coordinate ``u``: ``t = a + exp(u)`` on ``(a, inf)`` and
``t = a + L / (1 + exp(-u))`` on a finite ``(a, b)`` of length ``L``, so the grid
is geometric towards every endpoint. ``u`` runs over ``[-span, span]``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Iterable

import numpy as np

from .measure import INF, Interval, Measure

GOLDEN = (math.sqrt(5.0) - 1.0) / 2.0
TINY = 1e-300


@dataclass(frozen=True)
class GridConfig:
    points: int = 2048
    span: float = 30.0
    refine_iters: int = 60
    nodes: int = 4

    def __post_init__(self):
        if self.points < 8 or self.span <= 0 or self.refine_iters < 0 or self.nodes < 1:
            raise ValueError("invalid grid configuration")

    def doubled(self) -> "GridConfig":
        return GridConfig(2 * self.points, self.span, self.refine_iters, self.nodes)

    def widened(self) -> "GridConfig":
        return GridConfig(2 * self.points, 2 * self.span, self.refine_iters, self.nodes)


class Coord:
    """Bijection between an interval and the real line."""

    def __init__(self, interval: Interval):
        self.a, self.b = interval.a, interval.b
        self.finite = math.isfinite(self.b)
        self.length = self.b - self.a

    def to_t(self, u):
        u = np.asarray(u, dtype=float)
        if not self.finite:
            with np.errstate(over="ignore"):
                return self.a + np.exp(u)
        # evaluate from the nearer endpoint to keep precision at both ends
        with np.errstate(over="ignore"):
            near_a = self.a + self.length / (1.0 + np.exp(-u))
            near_b = self.b - self.length / (1.0 + np.exp(u))
        return np.where(u <= 0, near_a, near_b)

    def to_u(self, t):
        t = np.asarray(t, dtype=float)
        with np.errstate(divide="ignore", invalid="ignore"):
            if not self.finite:
                return np.log(t - self.a)
            return np.log(t - self.a) - np.log(self.b - t)

    def dt_du(self, u):
        u = np.asarray(u, dtype=float)
        if not self.finite:
            with np.errstate(over="ignore"):
                return np.exp(u)
        s = 1.0 / (1.0 + np.exp(-u))
        return self.length * s * (1.0 - s)


def u_grid(cfg: GridConfig) -> np.ndarray:
    return np.linspace(-cfg.span, cfg.span, cfg.points)


def t_grid(interval: Interval, cfg: GridConfig) -> np.ndarray:
    return np.asarray(Coord(interval).to_t(u_grid(cfg)))


_GL_CACHE: dict[int, tuple[np.ndarray, np.ndarray]] = {}


def _gauss(n: int):
    if n not in _GL_CACHE:
        _GL_CACHE[n] = np.polynomial.legendre.leggauss(n)
    return _GL_CACHE[n]


@dataclass
class Quadrature:
    """Nodes and weights for integrals against a measure on the working grid.

    ``edge_mass`` holds the masses of ``(a, t_first]`` and ``(t_last, b)``,
    which are integrated by a single node at the adjacent grid edge.
    """

    nodes: np.ndarray
    weights: np.ndarray
    edge_nodes: np.ndarray
    edge_mass: np.ndarray
    probe_mass: np.ndarray


def _cell_edges(measure: Measure, interval: Interval, cfg: GridConfig, breaks: Iterable[float]) -> np.ndarray:
    coord = Coord(interval)
    base = u_grid(cfg)
    extra = [measure.interval.a, measure.interval.b, *breaks]
    extra = np.asarray([x for x in extra if interval.a < x < interval.b], dtype=float)
    if not extra.size:
        return base
    eu = coord.to_u(extra)
    eu = eu[(eu > base[0]) & (eu < base[-1])]
    return np.unique(np.concatenate([base, eu]))


class CellRule:
    """Composite Gauss-Legendre in ``u`` for one measure, with partial cells.

    Measures without a density get one node per cell carrying the cell's mass.
    """

    def __init__(self, measure: Measure, interval: Interval, cfg: GridConfig,
                 breaks: Iterable[float] = (), nodes: int | None = None):
        self.measure, self.interval, self.cfg = measure, interval, cfg
        self.coord = Coord(interval)
        self.edges = _cell_edges(measure, interval, cfg, breaks)
        self.h = 2.0 * cfg.span / (cfg.points - 1)
        self.nodes = nodes or cfg.nodes

    def rule(self, lo, hi) -> tuple[np.ndarray, np.ndarray]:
        """Nodes and weights, shape (cells, nodes), for cells [lo_i, hi_i] in u."""
        lo, hi = np.atleast_1d(np.asarray(lo, dtype=float)), np.atleast_1d(np.asarray(hi, dtype=float))
        coord, m = self.coord, self.measure
        if not m.has_density:
            t = coord.to_t((lo + hi) / 2.0)[:, None]
            return t, np.asarray(m.mass(coord.to_t(lo), coord.to_t(hi)), dtype=float)[:, None]
        xi, wi = _gauss(self.nodes)
        half, mid = (hi - lo) / 2.0, (hi + lo) / 2.0
        u = mid[:, None] + half[:, None] * xi[None, :]
        t = coord.to_t(u)
        w = half[:, None] * wi[None, :] * coord.dt_du(u) * m.density(t)
        return t, w

    def cells(self):
        return self.rule(self.edges[:-1], self.edges[1:])

    def between(self, fn: Callable, u0: float, u1: float) -> float:
        """Integral of fn dm over u in [u0, u1] with cells no wider than the grid step."""
        if not u1 > u0:
            return 0.0
        n = int(min(max(1, math.ceil((u1 - u0) / self.h)), 1 << 16))
        e = np.linspace(u0, u1, n + 1)
        t, w = self.rule(e[:-1], e[1:])
        with np.errstate(invalid="ignore", over="ignore"):
            return float(np.sum(np.where(w > 0, fn(t) * w, 0.0)))


def quadrature(
    measure: Measure,
    interval: Interval,
    cfg: GridConfig,
    breaks: Iterable[float] = (),
    nodes: int | None = None,
) -> Quadrature:
    """Composite Gauss-Legendre in ``u`` with cells split at ``breaks``."""
    cr = CellRule(measure, interval, cfg, breaks, nodes)
    t, w = cr.cells()
    edges, coord = cr.edges, cr.coord
    t_lo, t_hi = coord.to_t(edges[0]), coord.to_t(edges[-1])
    edge_nodes = np.array([t_lo, t_hi])
    edge_mass = np.array([measure.mass(interval.a, t_lo), measure.mass(t_hi, interval.b)])
    # masses of the next unit of u beyond each edge, for divergence probes
    probe = np.array([
        measure.mass(coord.to_t(edges[0] - 1.0), t_lo),
        measure.mass(t_hi, coord.to_t(edges[-1] + 1.0)),
    ])
    return Quadrature(t.ravel(), w.ravel(), edge_nodes, edge_mass, probe)


def _atom(val: float, mass: float, probe: float, body: float, rel_probe: float = 1e-6) -> float:
    """Contribution of an edge piece integrated by one node (see integrate_values)."""
    if val == 0 or mass == 0:
        return 0.0
    if math.isfinite(mass):
        return val * mass
    return INF if val * probe > rel_probe * max(body, TINY) else 0.0


class Running:
    """P(t) = integral of fn dm over (a, t] and Q(t) over (t, b), for any t.

    Whole cells come from prefix sums of one composite rule; the cell holding
    ``t`` (or the stretch outside the grid) is integrated on the fly. Pieces
    beyond the outermost nodes are edge atoms as in ``integrate_values``.
    """

    OUTSIDE = 8.0

    def __init__(self, cr: CellRule, fn: Callable):
        self.cr, self.fn = cr, fn
        t, w = cr.cells()
        with np.errstate(invalid="ignore", over="ignore"):
            cell = np.sum(np.where(w > 0, fn(t) * w, 0.0), axis=1)
        self.prefix = np.concatenate([[0.0], np.cumsum(cell)])
        self.suffix = np.concatenate([np.cumsum(cell[::-1])[::-1], [0.0]])
        body = float(self.prefix[-1])
        self.body = body
        self.left = self._edge_atom(cr.edges[0], -1.0, body)
        self.right = self._edge_atom(cr.edges[-1], 1.0, body)

    def _edge_atom(self, u: float, side: float, body: float) -> float:
        coord, m, iv = self.cr.coord, self.cr.measure, self.cr.interval
        t, far = coord.to_t(u), coord.to_t(u + side)
        val = float(self.fn(np.array([t]))[0])
        if side < 0:
            return _atom(val, m.mass(iv.a, t), m.mass(far, t), body)
        return _atom(val, m.mass(t, iv.b), m.mass(t, far), body)

    def _partial(self, lo, hi):
        t, w = self.cr.rule(lo, hi)
        with np.errstate(invalid="ignore", over="ignore"):
            return np.sum(np.where(w > 0, self.fn(t) * w, 0.0), axis=1)

    def upto(self, t):
        t = np.atleast_1d(np.asarray(t, dtype=float))
        edges, u = self.cr.edges, self.cr.coord.to_u(t)
        out = np.empty(t.shape)
        inside = (u >= edges[0]) & (u <= edges[-1])
        j = np.clip(np.searchsorted(edges, u[inside], side="right") - 1, 0, edges.size - 2)
        out[inside] = self.left + self.prefix[j] + self._partial(edges[j], u[inside])
        for i in np.flatnonzero(~inside):
            if u[i] < edges[0]:
                lo = u[i] - self.OUTSIDE
                atom = self._edge_atom(lo, -1.0, self.body)
                out[i] = atom + self.cr.between(self.fn, lo, u[i])
            else:
                out[i] = self.left + self.prefix[-1] + self.cr.between(self.fn, edges[-1], u[i])
        return out

    def beyond(self, t):
        t = np.atleast_1d(np.asarray(t, dtype=float))
        edges, u = self.cr.edges, self.cr.coord.to_u(t)
        out = np.empty(t.shape)
        inside = (u >= edges[0]) & (u <= edges[-1])
        j = np.clip(np.searchsorted(edges, u[inside], side="left"), 1, edges.size - 1)
        out[inside] = self.right + self.suffix[j] + self._partial(u[inside], edges[j])
        for i in np.flatnonzero(~inside):
            if u[i] < edges[0]:
                out[i] = self.right + self.suffix[0] + self.cr.between(self.fn, u[i], edges[0])
            else:
                hi = u[i] + self.OUTSIDE
                atom = self._edge_atom(hi, 1.0, self.body)
                out[i] = atom + self.cr.between(self.fn, u[i], hi)
        return out


def integrate_values(q: Quadrature, interior: np.ndarray, edges: np.ndarray, rel_probe: float = 1e-6) -> float:
    """Sum interior values against the weights, plus the two edge atoms.

    An edge atom with infinite mass counts as divergent only if the integrand
    still carries weight over the adjacent unit of ``u`` (relative to the
    interior integral); otherwise it is dropped as truncation.
    """
    with np.errstate(invalid="ignore", over="ignore"):
        body = float(np.sum(np.where(q.weights > 0, interior * q.weights, 0.0)))
    if not math.isfinite(body):
        return INF
    total = body
    for val, mass, probe in zip(edges, q.edge_mass, q.probe_mass):
        if val == 0 or mass == 0:
            continue
        if math.isfinite(mass):
            total += val * mass
        elif val * probe > rel_probe * max(body, TINY):
            return INF
    return total


def golden_max(f: Callable[[float], float], lo: float, hi: float, iters: int) -> tuple[float, float]:
    """Golden-section search for a maximum of ``f`` on ``[lo, hi]``."""
    c = hi - GOLDEN * (hi - lo)
    d = lo + GOLDEN * (hi - lo)
    fc, fd = f(c), f(d)
    best_x, best_f = (c, fc) if fc >= fd else (d, fd)
    for _ in range(iters):
        if fc >= fd:
            hi, d, fd = d, c, fc
            c = hi - GOLDEN * (hi - lo)
            fc = f(c)
        else:
            lo, c, fc = c, d, fd
            d = lo + GOLDEN * (hi - lo)
            fd = f(d)
        for x, fx in ((c, fc), (d, fd)):
            if fx > best_f:
                best_x, best_f = x, fx
    return best_x, best_f


@dataclass
class SupResult:
    value: float
    arg: float
    index: int
    at_edge: bool
    grid_values: np.ndarray
    grid: np.ndarray


def _clean(v):
    v = float(v)
    return v if not math.isnan(v) else -INF


def grid_sup(
    fun: Callable[[float], float],
    interval: Interval,
    cfg: GridConfig,
    values: np.ndarray | None = None,
    probe_edges: bool = True,
) -> SupResult:
    """Supremum of ``fun`` over the open interval via grid scan plus refinement.

    ``fun`` returns NaN where it is undefined (excluded points). When the best
    grid point is an edge, the limit is probed further out in ``u``; strictly
    growing probes that keep growing by a factor are reported as divergence.
    """
    coord = Coord(interval)
    us = u_grid(cfg)
    ts = coord.to_t(us)
    if values is None:
        values = np.array([_clean(fun(t)) for t in ts])
    else:
        values = np.where(np.isnan(values), -INF, np.asarray(values, dtype=float))
    if not np.any(np.isfinite(values) | (values == INF)):
        return SupResult(-INF, float("nan"), -1, False, values, ts)
    j = int(np.argmax(values))
    best_u, best = us[j], values[j]
    if best == INF:
        return SupResult(INF, float(ts[j]), j, j in (0, len(us) - 1), values, ts)
    g = lambda u: _clean(fun(float(coord.to_t(u))))
    if cfg.refine_iters:
        lo_u = us[max(j - 1, 0)]
        hi_u = us[min(j + 1, len(us) - 1)]
        u_star, f_star = golden_max(g, lo_u, hi_u, cfg.refine_iters)
        if f_star > best:
            best_u, best = u_star, f_star
    at_edge = j in (0, len(us) - 1)
    if at_edge and probe_edges:
        step = -1.0 if j == 0 else 1.0
        probes = []
        for k in (1, 2, 4):
            u = us[j] + step * k * cfg.span
            t = float(coord.to_t(u))
            if t <= interval.a or t >= interval.b:
                break
            probes.append((u, g(u)))
        finite = [(u, v) for u, v in probes if math.isfinite(v)]
        chain = [values[j]] + [v for _, v in finite]
        if any(v == INF for _, v in probes) or (
            len(chain) >= 3 and chain[0] > 0 and all(b > 1.2 * a for a, b in zip(chain, chain[1:]))
        ):
            return SupResult(INF, float(coord.to_t(us[j])), j, True, values, ts)
        for u, v in finite:
            if v > best:
                best_u, best = u, v
    return SupResult(float(best), float(coord.to_t(best_u)), j, at_edge, values, ts)
