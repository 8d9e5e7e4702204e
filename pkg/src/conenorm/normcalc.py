"""Closed-form norm calculators built on the extremal-family reduction.

Every quantity here is a supremum over one real parameter ``t``. It is found by
a scan over the geometric working grid, golden-section refinement around the
best grid point, and limit probes when the best point sits at a grid edge.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field
from typing import Callable

import numpy as np

from .cone import ConeSpec, Variant, extremal
from .grid import CellRule, GridConfig, Running, SupResult, grid_sup, integrate_values, quadrature, t_grid
from .measure import INF, Interval, Measure, ParameterError, lebesgue, weighted_p_norm
from .operators import Operator
from .rearrange import LevelSetFunction, StepFunction, rearrangement
from .shapes import ONE, ConstShape, Shape

TINY_DENOMINATOR = 1e-300


class DegenerateError(ValueError):
    """Every candidate ratio has a vanishing or undefined denominator."""


@dataclass(frozen=True)
class NormProblem:
    """||T||_cone for X = L_p(beta) and Y = L_q(gamma).

    ``x_norm`` optionally replaces the L_p(beta) norm of the domain by a
    user callback; its concavity and order continuity are not checked.
    """

    operator: Operator
    cone: ConeSpec
    p: float
    beta: Measure
    q: float
    gamma: Measure
    x_norm: Callable[[StepFunction], float] | None = None

    def __post_init__(self):
        if not (self.p > 0 and self.q > 0):
            raise ParameterError("p and q must be positive")
        # both spaces live on the cone's interval
        object.__setattr__(self, "beta", self.beta.restricted(self.cone.interval))
        object.__setattr__(self, "gamma", self.gamma.restricted(self.cone.interval))

    @property
    def applicable(self) -> bool:
        return self.p <= min(self.q, self.operator.r)

    def domain_norm(self, g: StepFunction) -> float:
        if self.x_norm is not None:
            return float(self.x_norm(g))
        return weighted_p_norm(g, self.p, self.beta)

    def extremal_x_norms(self, t) -> np.ndarray:
        """||k chi_(a,t]||_X for an array of t."""
        t = np.asarray(t, dtype=float)
        if self.x_norm is not None:
            return np.array([self.domain_norm(extremal(self.cone, float(s))) for s in t.ravel()]).reshape(t.shape)
        mk = self.beta.reweighted(self.cone.k, self.p)
        return np.asarray(mk.mass(self.cone.interval.a, t), dtype=float) ** (1.0 / self.p)


@dataclass
class NormReport:
    value: float
    arg_sup: float
    endpoint_included: bool = False
    branch: str = ""
    applicability: bool = True
    attained_in_limit: bool = False
    details: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return asdict(self)


def _ratio(num, den):
    num, den = np.asarray(num, dtype=float), np.asarray(den, dtype=float)
    with np.errstate(divide="ignore", invalid="ignore"):
        out = np.where(den < TINY_DENOMINATOR, np.nan, num / den)
    return np.where(np.isinf(den) & np.isfinite(num), 0.0, out)


def _sup(vec: Callable[[np.ndarray], np.ndarray], interval: Interval, grid: GridConfig, probe_edges=True) -> SupResult:
    """grid_sup for a vectorized objective."""
    values = np.asarray(vec(t_grid(interval, grid)), dtype=float)
    return grid_sup(lambda t: float(vec(np.array([t]))[0]), interval, grid, values=values, probe_edges=probe_edges)


def _check_found(res: SupResult, what: str):
    if res.index < 0:
        raise DegenerateError(f"{what}: denominator vanishes everywhere on the working grid")


# -- reduction to the extremal family ----------------------------------------------

def extremal_ratio(prob: NormProblem, t: float, grid: GridConfig) -> float:
    den = float(prob.extremal_x_norms(np.array([t]))[0])
    if den < TINY_DENOMINATOR:
        return math.nan
    num = prob.operator.extremal_y_norm(prob.cone, t, prob.q, prob.gamma, grid)
    return float(_ratio(num, den))


def restriction_norm(prob: NormProblem, grid: GridConfig | None = None) -> NormReport:
    """sup over t of ||T[k chi_(a,t]]||_Y / ||k chi_(a,t]||_X, plus the endpoint element.

    The endpoint ``k chi_(a,b)`` competes only for the undotted cone and only
    when its X-norm is finite; otherwise the undotted norm equals the dotted one.
    """
    grid = grid or GridConfig()
    cone, op = prob.cone, prob.operator

    def vec(ts):
        ts = np.asarray(ts, dtype=float)
        den = prob.extremal_x_norms(ts)
        num = np.full(ts.shape, np.nan)
        ok = den >= TINY_DENOMINATOR
        if np.any(ok):
            num[ok] = op.extremal_y_norms(cone, ts[ok], prob.q, prob.gamma, grid)
        return _ratio(num, den)

    res = _sup(vec, cone.interval, grid)
    if prob.x_norm is not None:
        end_norm = prob.domain_norm(extremal(cone, cone.interval.b)) if cone.variant is Variant.OMEGA else INF
    else:
        end_norm = cone.endpoint_norm(prob.p, prob.beta)
    endpoint_value = None
    if cone.variant is Variant.OMEGA_DOT:
        branch = "dotted"
    elif not math.isfinite(end_norm):
        branch = "endpoint-infinite"
    else:
        branch = "endpoint"
        if end_norm >= TINY_DENOMINATOR:
            num = op.extremal_y_norm(cone, cone.interval.b, prob.q, prob.gamma, grid)
            endpoint_value = float(_ratio(num, end_norm))
    if res.index < 0 and endpoint_value is None:
        raise DegenerateError("all extremal elements have zero X-norm")
    value, arg, won = res.value, res.arg, False
    if endpoint_value is not None and endpoint_value > value:
        value, arg, won = endpoint_value, cone.interval.b, True
    return NormReport(
        value=float(value),
        arg_sup=float(arg),
        endpoint_included=won,
        branch=branch,
        applicability=prob.applicable,
        attained_in_limit=bool(res.at_edge and not won),
        details={"interior_sup": float(res.value), "endpoint_value": endpoint_value,
                 "endpoint_x_norm": float(end_norm), "grid_points": grid.points, "span": grid.span},
    )


# -- associate norms ---------------------------------------------------------------

def associate_norm(f: StepFunction, k: Shape = ONE, p: float = 1.0, grid: GridConfig | None = None) -> NormReport:
    """B_k(f, p) = sup_t (int_(0,t] f k) / (int_(0,t] k**p)**(1/p) on (0, inf)."""
    if not 0 < p <= 1:
        raise ParameterError("the cone associate norm needs 0 < p <= 1")
    grid = grid or GridConfig()
    leb = lebesgue()
    num_m = leb.reweighted(k, 1.0)
    den_m = leb.reweighted(k, p)

    def vec(ts):
        num = f.integral(num_m, 1.0, upto=ts)
        den = np.asarray(den_m.mass(0.0, ts), dtype=float) ** (1.0 / p)
        return _ratio(num, den)

    res = _sup(vec, Interval(), grid)
    _check_found(res, "associate norm")
    return NormReport(res.value, res.arg, branch="cone-associate", attained_in_limit=res.at_edge,
                      details={"p": p})


def _sup_value(f: StepFunction) -> float:
    if f.shape is not None and not isinstance(f.shape, ConstShape):
        raise ParameterError("the sup norm is implemented for pure step functions")
    c = f.shape.c if isinstance(f.shape, ConstShape) else 1.0
    return c * float(max(np.max(f.values, initial=0.0), f.tail))


def classical_associate(f: StepFunction, p: float) -> float:
    """Associate norm of L_p on the whole half line: infinite for p < 1."""
    if not p > 0:
        raise ParameterError("p must be positive")
    if p < 1:
        nonzero = f.tail > 0 or np.any(f.values > 0)
        return INF if nonzero else 0.0
    if p == 1:
        return _sup_value(f)
    if math.isinf(p):
        return weighted_p_norm(f, 1.0, lebesgue())
    return weighted_p_norm(f, p / (p - 1.0), lebesgue())


def grid_associate(f: StepFunction, p: float, cells: int, right: float | None = None) -> float:
    """The L_p associate norm of f restricted to g constant on ``cells`` equal cells of (0, right].

    For p <= 1 the supremum of the linear functional over the unit quasi-ball
    is attained at a normalized cell indicator, giving max_i (int_cell f) / h**(1/p).
    For p > 1 it is the discrete dual norm of the cell averages.
    """
    right = right if right is not None else float(f.knots[-1])
    edges = np.linspace(0.0, right, cells + 1)
    h = right / cells
    mass = np.diff(f.integral(lebesgue(), 1.0, upto=edges))
    if p <= 1:
        return float(np.max(mass) / h ** (1.0 / p))
    pp = p / (p - 1.0)
    return float(np.sum((mass / h) ** pp * h) ** (1.0 / pp))


# -- dilations and the quasi-triangle constant ---------------------------------------

def dilation_norm(v: Measure, p: float, n: int = 1, m: float = 2.0, grid: GridConfig | None = None) -> NormReport:
    """||sigma_m|| on Lambda_{p,v}(R^n) = sup_tau (V(m**n tau) / V(tau))**(1/p)."""
    if not (p > 0 and m > 0 and n >= 1):
        raise ParameterError("need p > 0, m > 0 and n >= 1")
    grid = grid or GridConfig()
    factor = float(m) ** n

    def vec(ts):
        num = np.asarray(v.mass(0.0, factor * ts), dtype=float)
        den = np.asarray(v.mass(0.0, ts), dtype=float)
        r = _ratio(num, den)
        with np.errstate(invalid="ignore"):
            return np.where(np.isnan(r), np.nan, r ** (1.0 / p))

    res = _sup(vec, Interval(), grid)
    _check_found(res, "dilation norm")
    branch = "delta2" if res.value < INF else "delta2-fails"
    return NormReport(res.value, res.arg, branch=branch, attained_in_limit=res.at_edge,
                      details={"m": m, "n": n, "p": p})


def quasi_triangle_constant(v: Measure, p: float, n: int = 1, grid: GridConfig | None = None) -> float:
    c = dilation_norm(v, p, n, 2.0 ** (1.0 / n), grid).value
    return c * 2.0 ** (1.0 / p - 1.0) if p < 1 else c


# -- Lorentz norms and embeddings -----------------------------------------------------

def lorentz_lambda_norm(f: LevelSetFunction, p: float, v: Measure) -> float:
    return weighted_p_norm(rearrangement(f), p, v)


def mean_maximal(fstar: StepFunction, r: float, mu: Measure, t):
    """f**_{r,mu}(t) = (M(t)**-1 int_(0,t] (f*)**r dmu)**(1/r)."""
    t = np.asarray(t, dtype=float)
    num = fstar.integral(mu, r, upto=t)
    den = np.asarray(mu.mass(0.0, t), dtype=float)
    with np.errstate(divide="ignore", invalid="ignore"):
        out = np.where(den > TINY_DENOMINATOR, np.maximum(num, 0.0) / den, np.nan) ** (1.0 / r)
    return out if out.ndim else float(out)


def lorentz_gamma_norm(f: LevelSetFunction, q: float, r: float, gamma: Measure, mu: Measure,
                       grid: GridConfig | None = None) -> float:
    if not f.levels:
        return 0.0
    grid = grid or GridConfig()
    fs = rearrangement(f)
    quad = quadrature(gamma, Interval(), grid, breaks=fs.knots)
    inner = np.nan_to_num(mean_maximal(fs, r, mu, quad.nodes)) ** q
    # below the grid, f** is the top value of f*
    edges = np.array([fs.values[0], float(np.nan_to_num(mean_maximal(fs, r, mu, quad.edge_nodes[1])))]) ** q
    total = integrate_values(quad, inner, edges)
    return INF if total == INF else total ** (1.0 / q)


def lambda_embedding(v: Measure, w: Measure, p: float, q: float, grid: GridConfig | None = None) -> NormReport:
    """A_pq = sup_t W(t)**(1/q) / V(t)**(1/p), the norm of Lambda_{p,v} into Lambda_{q,w}."""
    grid = grid or GridConfig()

    def vec(ts):
        num = np.asarray(w.mass(0.0, ts), dtype=float) ** (1.0 / q)
        den = np.asarray(v.mass(0.0, ts), dtype=float) ** (1.0 / p)
        return _ratio(num, den)

    res = _sup(vec, Interval(), grid)
    _check_found(res, "lambda embedding")
    return NormReport(res.value, res.arg, branch="lambda-lambda", applicability=p <= q,
                      attained_in_limit=res.at_edge, details={"p": p, "q": q})


class WQR:
    """W_qr(t) = int (M(min(t, tau)) / M(tau))**(q/r) dgamma(tau).

    Split as gamma(0, t] + M(t)**(q/r) I(t) with I(t) the gamma-integral of
    M**(-q/r) over (t, inf); I is a running integral on the gamma grid.
    """

    def __init__(self, gamma: Measure, mu: Measure, q: float, r: float, grid: GridConfig):
        self.gamma, self.mu, self.e = gamma, mu, q / r
        self._tail = Running(CellRule(gamma, Interval(), grid), self._m_pow)

    def _m_pow(self, x):
        m = np.asarray(self.mu.mass(0.0, x), dtype=float)
        with np.errstate(divide="ignore"):
            return np.where(m > 0, m ** -self.e, INF)

    def __call__(self, t):
        t = np.atleast_1d(np.asarray(t, dtype=float))
        tail = self._tail.beyond(t)
        mt = np.asarray(self.mu.mass(0.0, t), dtype=float)
        with np.errstate(invalid="ignore"):
            part = np.where(tail > 0, mt**self.e * tail, 0.0)
        return np.asarray(self.gamma.mass(0.0, t), dtype=float) + part


def gamma_embedding(v: Measure, gamma: Measure, mu: Measure, p: float, q: float, r: float,
                    grid: GridConfig | None = None) -> NormReport:
    """sup_t W_qr(t)**(1/q) V(t)**(-1/p), with the endpoint t = inf when V(inf) < inf."""
    grid = grid or GridConfig()
    W = WQR(gamma, mu, q, r, grid)

    def vec(ts):
        den = np.asarray(v.mass(0.0, ts), dtype=float) ** (1.0 / p)
        return _ratio(W(ts) ** (1.0 / q), den)

    res = _sup(vec, Interval(), grid)
    wq_end = float(W(t_grid(Interval(), grid)[-1:])[0])
    _check_found(res, "gamma embedding")
    v_total = v.total()
    endpoint_value = None
    value, arg, won = res.value, res.arg, False
    if math.isfinite(v_total) and v_total > 0:
        endpoint_value = gamma.total() ** (1.0 / q) / v_total ** (1.0 / p)
        if endpoint_value > value:
            value, arg, won = endpoint_value, INF, True
    return NormReport(value, arg, endpoint_included=won, branch="lambda-gamma",
                      applicability=p <= min(q, r), attained_in_limit=res.at_edge and not won,
                      details={"endpoint_value": endpoint_value, "interior_sup": res.value,
                               "w_grid_end": wq_end})
