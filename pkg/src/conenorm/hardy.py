"""Two-sided estimates for the Hardy-type operator A_{r mu} on the cone Omega_k.

For p <= min(q, r) the norm is exactly J_pqr. Otherwise it is comparable,
up to an unknown constant c(p, q, r), to B = (E**r + F**r)**(1/r).

Stieltjes integrals are trapezoid sums on a grid uniform in the working
coordinate. The grid is doubled until the result moves by less than
``rtol``, and the last pair is Richardson-extrapolated. The left end of the
grid truncates the integral. A second evaluation on a doubled span decides
whether that truncation hides a divergence.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.special import logsumexp

from .cone import ConeSpec, Variant
from .grid import CellRule, Coord, GridConfig, Running, grid_sup, u_grid
from .measure import INF, DIVERGENCE_THRESHOLD, Interval, Measure, ParameterError, lebesgue
from .normcalc import NormProblem, NormReport
from .operators import Hardy
from .shapes import ONE, Shape


class PreconditionError(ValueError):
    """beta is not in N_p(k)."""


@dataclass(frozen=True)
class StieltjesConfig:
    points: int = 4097
    max_points: int = 1 << 16
    rtol: float = 5e-3
    span: float = 30.0
    #: relative growth under span doubling that counts as divergence
    divergence_rtol: float = 1e-3


@dataclass(frozen=True, eq=False)
class HardyProblem:
    p: float
    q: float
    r: float
    gamma: Measure
    k: Shape = ONE
    beta: Measure = field(default_factory=lebesgue)
    mu: Measure = field(default_factory=lebesgue)
    b: float = INF

    def __post_init__(self):
        if not (self.p > 0 and self.q > 0 and self.r > 0):
            raise ParameterError("p, q and r must be positive")

    @property
    def interval(self) -> Interval:
        return Interval(0.0, self.b)

    @property
    def exact_regime(self) -> bool:
        return self.p <= min(self.q, self.r)

    @property
    def sigma(self) -> float | None:
        p, r = self.p, self.r
        return p * r / (p - r) if p > r else None

    @property
    def s(self) -> float | None:
        p, q = self.p, self.q
        return p * q / (p - q) if p > q else None

    def as_norm_problem(self) -> NormProblem:
        cone = ConeSpec(self.interval, self.k, Variant.OMEGA)
        return NormProblem(Hardy(self.r, self.mu), cone, self.p, self.beta, self.q, self.gamma)


def _pow(x, e):
    x = np.asarray(x, dtype=float)
    with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
        return np.where(np.isinf(x), INF if e > 0 else 0.0, np.maximum(x, 0.0) ** e)


def psi(prob: HardyProblem, tau):
    """Psi_r(tau) = (int_(0,tau] k**r dmu)**(1/r)."""
    m = prob.mu.reweighted(prob.k, prob.r).mass(0.0, tau)
    return _pow(m, 1.0 / prob.r) if np.ndim(m) else float(_pow(m, 1.0 / prob.r))


def omega_kp(prob: HardyProblem, t):
    """omega_kp(t) = (int_(0,t] k**p dbeta)**(1/p)."""
    m = prob.beta.reweighted(prob.k, prob.p).mass(0.0, t)
    return _pow(m, 1.0 / prob.p) if np.ndim(m) else float(_pow(m, 1.0 / prob.p))


def w_q(prob: HardyProblem, t):
    """W_q(t) = gamma((t, b))**(1/q)."""
    m = prob.gamma.mass(t, prob.b)
    return _pow(m, 1.0 / prob.q) if np.ndim(m) else float(_pow(m, 1.0 / prob.q))


def check_np_k(prob: HardyProblem, grid: GridConfig | None = None) -> None:
    """Verify omega_kp > 0, omega_kp(+0) = 0 and omega_kp(b-0) = inf at far grid edges."""
    grid = grid or GridConfig()
    coord = Coord(prob.interval)
    near0, mid, nearb = coord.to_t(np.array([-2 * grid.span, 0.0, 2 * grid.span]))
    w0, wm, wb = (omega_kp(prob, x) for x in (near0, mid, nearb))
    if not wm > 0 or not omega_kp(prob, coord.to_t(-grid.span)) > 0:
        raise PreconditionError("omega_kp must be positive on (0, b)")
    if not np.isfinite(wm):
        raise PreconditionError("omega_kp must be finite on (0, b)")
    if not w0 <= 1e-8 * wm:
        raise PreconditionError(f"omega_kp(+0) = 0 fails: omega({near0:.3g}) = {w0:.6g}")
    if not (wb == INF or wb >= 1e8 * wm):
        raise PreconditionError(f"omega_kp(b-0) = inf fails: omega({nearb:.6g}) = {wb:.6g}")


# -- Stieltjes machinery --------------------------------------------------------------

def _nodes(prob: HardyProblem, points: int, span: float) -> np.ndarray:
    return np.asarray(Coord(prob.interval).to_t(u_grid(GridConfig(points, span, 0))))


def trapezoid_stieltjes(f: np.ndarray, g: np.ndarray) -> np.ndarray:
    """Cell terms (f_i + f_{i+1})/2 * |g_{i+1} - g_i|, with 0 * inf read as 0."""
    dg = np.abs(np.diff(g))
    fm = 0.5 * (f[1:] + f[:-1])
    with np.errstate(invalid="ignore"):
        terms = np.where((fm == 0) | (dg == 0), 0.0, fm * dg)
    return np.nan_to_num(terms, nan=0.0, posinf=INF)


def log_trapezoid_stieltjes(lf: np.ndarray, lg: np.ndarray) -> np.ndarray:
    """Logs of the trapezoid cell terms, given log f and log g for a monotone g."""
    with np.errstate(invalid="ignore", over="ignore", divide="ignore"):
        lfm = np.logaddexp(lf[1:], lf[:-1]) - math.log(2.0)
        hi, lo = np.maximum(lg[1:], lg[:-1]), np.minimum(lg[1:], lg[:-1])
        ldg = hi + np.log1p(-np.exp(lo - hi))
        terms = np.where(np.isneginf(lfm) | np.isneginf(ldg), -np.inf, lfm + ldg)
    return np.nan_to_num(terms, nan=-np.inf, posinf=np.inf, neginf=-np.inf)


def log_stieltjes_cells(lf: np.ndarray, lg: np.ndarray) -> np.ndarray:
    """Logs of cell integrals of f d|g| with f and g log-linear across each cell.

    Exact for power laws in the grid coordinate, which keeps huge exponents
    (where f and g change by many orders per cell) free of trapezoid bias.
    Cells with an infinite endpoint fall back to the trapezoid terms.
    """
    out = log_trapezoid_stieltjes(lf, lg)
    ok = np.isfinite(lf[1:]) & np.isfinite(lf[:-1]) & np.isfinite(lg[1:]) & np.isfinite(lg[:-1])
    with np.errstate(divide="ignore", invalid="ignore"):
        a0, a1 = (lf + lg)[:-1][ok], (lf + lg)[1:][ok]
        dl = np.abs(lg[1:] - lg[:-1])[ok]
        x = np.abs(a1 - a0)
        shape = np.where(x > 1e-12, np.log(-np.expm1(-x) / np.where(x > 0, x, 1.0)), -0.5 * x)
        out[ok] = np.where(dl > 0, np.log(dl) + np.maximum(a0, a1) + shape, -np.inf)
    return out


def _log(x):
    with np.errstate(divide="ignore"):
        return np.log(np.asarray(x, dtype=float))


def _rich(fine: float, coarse: float) -> float:
    if not (math.isfinite(fine) and math.isfinite(coarse)):
        return fine
    return fine + (fine - coarse) / 3.0


def _log_rich(fine: float, coarse: float) -> float:
    if not (math.isfinite(fine) and math.isfinite(coarse)):
        return fine
    arg = (1.0 - math.exp(coarse - fine)) / 3.0
    return fine + math.log1p(arg) if arg > -1.0 else fine


def refined_total(builder, cfg: StieltjesConfig, log: bool = False) -> tuple[float, dict]:
    """Evaluate ``builder(points, span)`` under grid doubling, then test the span.

    Points stay nested (2n - 1), so the last two values share every coarse node.
    With ``log`` the builder returns log totals and so does this function; the
    caller then applies the divergence threshold to whatever root it takes.
    """
    pts = cfg.points
    prev = builder(pts, cfg.span)
    while True:
        nxt = 2 * pts - 1
        cur = builder(nxt, cfg.span)
        pts = nxt
        if log:
            done = cur == prev or (math.isfinite(cur) and abs(cur - prev) <= cfg.rtol)
        else:
            done = (cur == prev) or (math.isfinite(cur) and abs(cur - prev) <= cfg.rtol * abs(cur))
        if done or 2 * pts - 1 > cfg.max_points:
            break
        prev = cur
    value = _log_rich(cur, prev) if log else _rich(cur, prev)
    info = {"points": pts, "converged": bool(done), "coarse": prev, "fine": cur}
    if math.isfinite(value):
        wide = builder(2 * pts - 1, 2 * cfg.span)
        info["wide_span"] = wide
        if log:
            grew = not wide < INF or wide > cur + math.log1p(cfg.divergence_rtol)
        else:
            grew = not math.isfinite(wide) or wide > cur * (1 + cfg.divergence_rtol) + 1e-300
        if grew:
            value = INF
    if not log and value > DIVERGENCE_THRESHOLD:
        value = INF
    return value, info


def _root_of_log(val: float, s: float) -> float:
    if val == INF or val / s > math.log(DIVERGENCE_THRESHOLD):
        return INF
    return math.exp(val / s)


class RunningStieltjes:
    """x -> integral over (0, x] of f dg with g nondecreasing along the nodes.

    The node table uses trapezoid sums on ``xs`` and on every other node, and
    Richardson-extrapolates on the shared (even) nodes. ``head(x)`` estimates
    the piece below the first node. Off-node points add one local trapezoid
    with substeps, so the running value is defined for every x.
    """

    def __init__(self, f, g, xs: np.ndarray, coord: Coord, head=None, sub: int = 4):
        self.f, self.g, self.coord, self.head, self.sub = f, g, coord, head, sub
        fv, gv = f(xs), g(xs)
        fine = np.concatenate([[0.0], np.cumsum(trapezoid_stieltjes(fv, gv))])[::2]
        coarse = np.concatenate([[0.0], np.cumsum(trapezoid_stieltjes(fv[::2], gv[::2]))])
        with np.errstate(invalid="ignore"):
            table = np.where(np.isfinite(fine) & np.isfinite(coarse), fine + (fine - coarse) / 3.0, fine)
        self.xs = xs[::2]
        self.us = coord.to_u(self.xs)
        h0 = float(head(self.xs[:1])[0]) if head is not None else 0.0
        self.table = h0 + table

    def _piece(self, x0: float, x1: float) -> float:
        u0, u1 = self.coord.to_u(x0), self.coord.to_u(x1)
        n = max(self.sub, int(math.ceil(abs(u1 - u0) / (self.us[1] - self.us[0]) * self.sub)))
        x = self.coord.to_t(np.linspace(u0, u1, n + 1))
        return float(np.sum(trapezoid_stieltjes(self.f(x), self.g(x))))

    def _pieces(self, x0: np.ndarray, x1: np.ndarray) -> np.ndarray:
        """Vectorized local trapezoids over [x0_i, x1_i], each inside one table cell."""
        frac = np.linspace(0.0, 1.0, self.sub + 1)[None, :]
        u0, u1 = self.coord.to_u(x0)[:, None], self.coord.to_u(x1)[:, None]
        x = self.coord.to_t(u0 + (u1 - u0) * frac)
        fv, gv = self.f(x), self.g(x)
        dg = np.abs(np.diff(gv, axis=1))
        fm = 0.5 * (fv[:, 1:] + fv[:, :-1])
        with np.errstate(invalid="ignore"):
            terms = np.where((fm == 0) | (dg == 0), 0.0, fm * dg)
        return np.sum(np.nan_to_num(terms, nan=0.0), axis=1)

    def __call__(self, x):
        x = np.atleast_1d(np.asarray(x, dtype=float))
        out = np.empty(x.shape)
        j = np.searchsorted(self.xs, x, side="right") - 1
        inside = (j >= 0) & (x <= self.xs[-1])
        ji = j[inside]
        xi = x[inside]
        val = self.table[ji].copy()
        off = xi != self.xs[ji]
        if np.any(off):
            val[off] += self._pieces(self.xs[ji][off], xi[off])
        out[inside] = val
        for i in np.flatnonzero(~inside):
            if j[i] < 0:
                out[i] = float(self.head(x[i:i + 1])[0]) if self.head is not None else 0.0
            else:
                out[i] = self.table[-1] + self._piece(self.xs[-1], x[i])
        return out


# -- J_pqr ----------------------------------------------------------------------------

def _layer_cake(prob: HardyProblem, xs: np.ndarray) -> RunningStieltjes:
    # int Psi(min(t, tau))**q dgamma(tau) = int_(0,t] gamma((tau, b)) d[Psi**q](tau)
    tail = lambda x: np.asarray(prob.gamma.mass(x, prob.b), dtype=float)
    psi_q = lambda x: _pow(psi(prob, x), prob.q)
    head = lambda x: np.where(psi_q(x) > 0, tail(x) * psi_q(x), 0.0)
    return RunningStieltjes(tail, psi_q, xs, Coord(prob.interval), head=head)


def j_pqr(prob: HardyProblem, grid: GridConfig | None = None, points: int = 1 << 14) -> NormReport:
    """sup_t (int Psi_r(min(t, tau))**q dgamma)**(1/q) / omega_kp(t)."""
    grid = grid or GridConfig()
    xs = _nodes(prob, 2 * points - 1, grid.span)
    run = _layer_cake(prob, xs)
    cfg = GridConfig(points, grid.span, grid.refine_iters, grid.nodes)

    def ratio(x):
        om = omega_kp(prob, x)
        num = _pow(run(x), 1.0 / prob.q)
        with np.errstate(invalid="ignore", divide="ignore"):
            return np.where(om < 1e-300, np.nan, np.where(np.isinf(om), 0.0, num / om))

    res = grid_sup(lambda t: float(ratio(np.array([t]))[0]), prob.interval, cfg, values=ratio(run.xs))
    if res.index < 0:
        raise PreconditionError("omega_kp vanishes on the whole grid")
    return NormReport(res.value, res.arg, branch="J_pqr", applicability=prob.exact_regime,
                      attained_in_limit=res.at_edge, details={"points": points})


# -- V_pr, E_pqr, F_pqr ------------------------------------------------------------------

class Section3:
    """Node tables of the Section-3 functions on one grid."""

    def __init__(self, prob: HardyProblem, points: int, span: float):
        self.prob = prob
        self.coord = Coord(prob.interval)
        self.xs = _nodes(prob, points, span)
        self.h = 2.0 * span / (points - 1)
        self.psi = psi(prob, self.xs)
        self.omega = omega_kp(prob, self.xs)
        self._running_g = None
        self._v_int = None
        self.span = span

    # V_pr ------------------------------------------------------------------
    def ratio_po(self, x):
        om = omega_kp(self.prob, x)
        with np.errstate(invalid="ignore", divide="ignore"):
            return np.where(om < 1e-300, 0.0, np.where(np.isinf(om), 0.0, _pow(psi(self.prob, x), 1.0) / om))

    def v_int(self) -> RunningStieltjes:
        if self._v_int is None:
            sig = self.prob.sigma
            f = lambda x: _pow(psi(self.prob, x), sig)
            # -d[omega**-sigma] as an increasing integrator
            g = lambda x: -_pow(np.where(omega_kp(self.prob, x) < 1e-300, 0.0, omega_kp(self.prob, x)), -sig)
            self._v_int = RunningStieltjes(f, g, self.xs, self.coord)
        return self._v_int

    def V(self, x):
        x = np.atleast_1d(np.asarray(x, dtype=float))
        prob = self.prob
        if prob.p <= prob.r:
            table = np.maximum.accumulate(self.ratio_po(self.xs))
            j = np.searchsorted(self.xs, x, side="right") - 1
            prev = np.where(j >= 0, table[np.clip(j, 0, None)], 0.0)
            return np.maximum(prev, self.ratio_po(x))
        sig = prob.sigma
        total = self.v_int()(x) + _pow(self.ratio_po(x), sig)
        return _pow(total, 1.0 / sig)

    def V_nodes(self):
        return self.V(self.xs)

    # E_pqr ------------------------------------------------------------------
    def G(self, x):
        """int_(0,x] Psi**q dgamma."""
        if self._running_g is None:
            cfg = GridConfig(max(8, (self.xs.size - 1) // 4 + 1), self.span, 0)
            e = self.prob.q
            self._running_g = Running(CellRule(self.prob.gamma, self.prob.interval, cfg),
                                      lambda t: _pow(psi(self.prob, t), e))
        return self._running_g.upto(x)

    def W(self, x):
        return w_q(self.prob, np.atleast_1d(np.asarray(x, dtype=float)))


def v_pr(prob: HardyProblem, t, cfg: StieltjesConfig | None = None):
    """V_pr(t); for p > r infinite when the integral diverges at the origin."""
    cfg = cfg or StieltjesConfig()
    t_arr = np.atleast_1d(np.asarray(t, dtype=float))
    if prob.p <= prob.r:
        out = Section3(prob, cfg.points, cfg.span).V(t_arr)
    else:
        out = np.empty(t_arr.shape)
        for i, ti in enumerate(t_arr):
            val, _ = refined_total(lambda n, sp: float(Section3(prob, n, sp).V(ti)[0]) ** prob.sigma, cfg)
            out[i] = _pow(val, 1.0 / prob.sigma)
    return out if np.ndim(t) else float(out[0])


def _sup_over(prob, fun, span, points=4097) -> tuple[float, float, bool]:
    gcfg = GridConfig(points, span)
    xs = np.asarray(Coord(prob.interval).to_t(u_grid(gcfg)))
    res = grid_sup(lambda t: float(fun(np.array([t]))[0]), prob.interval, gcfg, values=fun(xs))
    return res.value, res.arg, res.at_edge


def e_pqr(prob: HardyProblem, cfg: StieltjesConfig | None = None) -> float:
    cfg = cfg or StieltjesConfig()
    q = prob.q
    if prob.p <= q:
        sec = Section3(prob, cfg.points, cfg.span)

        def fun(x):
            om = omega_kp(prob, x)
            with np.errstate(invalid="ignore", divide="ignore"):
                return np.where(om < 1e-300, np.nan, _pow(sec.G(x), 1.0 / q) / om)

        return _sup_over(prob, fun, cfg.span, cfg.points)[0]
    s = prob.s

    def builder(n, span):
        sec = Section3(prob, n, span)
        lg = (s / q) * _log(sec.G(sec.xs))
        lo = -s * _log(np.where(sec.omega < 1e-300, 0.0, sec.omega))
        body = logsumexp(log_stieltjes_cells(lg, lo))
        # omega(b-) = inf, so the stretch beyond the last node contributes G**(s/q) omega(x_N)**-s
        return float(np.logaddexp(body, lg[-1] + lo[-1]))

    val, _ = refined_total(builder, cfg, log=True)
    return _root_of_log(val, s)


def f_pqr(prob: HardyProblem, cfg: StieltjesConfig | None = None, form: str = "dw") -> float:
    """F_pqr; for p > q, form "dw" integrates against -d[W**s] and "dv" is the by-parts twin against d[V**s]."""
    cfg = cfg or StieltjesConfig()
    q = prob.q
    if prob.p <= q:
        sec = Section3(prob, cfg.points, cfg.span)
        return _sup_over(prob, lambda x: np.nan_to_num(sec.V(x) * sec.W(x), nan=0.0), cfg.span, cfg.points)[0]
    s = prob.s
    log_total = (s / q) * float(_log(prob.gamma.total()))

    def logs(n, span):
        sec = Section3(prob, n, span)
        return s * _log(sec.V_nodes()), s * _log(sec.W(sec.xs))

    def by_w(n, span):
        lv, lw = logs(n, span)
        parts = [logsumexp(log_stieltjes_cells(lv, lw))]
        if lv[0] > -INF and lw[0] < log_total:
            # mass of gamma below the first node, weighted by V(x_0)**s
            parts.append(lv[0] + log_total + math.log1p(-math.exp(lw[0] - log_total)))
        if lw[-1] > -INF:
            parts.append(lv[-1] + lw[-1])
        return float(logsumexp(parts))

    def by_v(n, span):
        lv, lw = logs(n, span)
        # V(0) = 0 convention: the jump up to V(x_0) sits at the origin with weight W(x_0)
        return float(np.logaddexp(logsumexp(log_stieltjes_cells(lw, lv)), lw[0] + lv[0]))

    val, _ = refined_total(by_w if form == "dw" else by_v, cfg, log=True)
    return _root_of_log(val, s)


@dataclass
class HardyBounds:
    exact: float | None
    lower: float
    upper_shape: float
    e: float | None = None
    f: float | None = None
    e_plus_f: float | None = None
    regime: str = ""
    details: dict = field(default_factory=dict)


def hardy_bounds(prob: HardyProblem, grid: GridConfig | None = None,
                 cfg: StieltjesConfig | None = None) -> HardyBounds:
    """Exact value for p <= min(q, r); otherwise the bound shape B and E + F.

    J_pqr is the supremum over the extremal family, so it is a valid lower
    bound in every regime.
    """
    check_np_k(prob, grid)
    j = j_pqr(prob, grid)
    if prob.exact_regime:
        return HardyBounds(j.value, j.value, j.value, regime="exact", details={"arg_sup": j.arg_sup})
    e, f = e_pqr(prob, cfg), f_pqr(prob, cfg)
    r = prob.r
    if e == INF or f == INF:
        b = INF
    else:
        b = (e**r + f**r) ** (1.0 / r)
    return HardyBounds(None, j.value, b, e, f, e + f, regime="two-sided", details={"arg_sup": j.arg_sup})
