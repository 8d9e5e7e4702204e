"""Acceptance criteria, one test per criterion; each prints a single PASS/FAIL line."""

import math

import numpy as np

from conenorm.cone import ConeSpec
from conenorm.grid import GridConfig, t_grid
from conenorm.hardy import HardyProblem, PreconditionError, check_np_k, hardy_bounds, j_pqr
from conenorm.measure import ExpDensity, GammaDensity, Interval, PowerDensity, lebesgue
from conenorm.normcalc import (WQR, NormProblem, associate_norm, dilation_norm, gamma_embedding, grid_associate,
                               lambda_embedding, lorentz_gamma_norm, lorentz_lambda_norm, quasi_triangle_constant,
                               restriction_norm)
from conenorm.operators import Identity, Kernel, l_rho_sides
from conenorm.oracle import OracleConfig, brute_norm
from conenorm.rearrange import (StepFunction, dilate, indicator, level_sets, maximal,
                                random_level_set, rearrangement)
from conenorm.shapes import ONE, PowerShape

from conftest import FAST_ORACLE, random_exact_hardy

LEB = lebesgue()
GRID = GridConfig()


def _rel(a, b):
    return abs(a - b) / abs(b)


# -- problem generators -------------------------------------------------------------

def _shape(rng, lo=-0.3, hi=0.8):
    return ONE if rng.random() < 0.5 else PowerShape(float(rng.uniform(lo, hi)))


def _kappa(k):
    return 0.0 if k is ONE else k.kappa


def random_exact_identity(rng) -> NormProblem:
    """Identity L_p(beta) -> L_q(gamma) with p <= min(q, 1) and an interior supremum."""
    while True:
        p = rng.uniform(0.5, 1.0)
        q = p * rng.uniform(1.0, 2.0)
        k = _shape(rng)
        g = rng.uniform(-0.5, 1.5)
        gap = rng.uniform(0.2, 0.8)
        b = p * ((g + 1) / q - gap) - 1
        if b > -0.9 and _kappa(k) * p + b > -0.7 and _kappa(k) * q + g > -0.7:
            return NormProblem(Identity(), ConeSpec(k=k), p, PowerDensity(b), q,
                               GammaDensity(g, rng.uniform(0.5, 2.0)))


_KERNELS = [lambda x, t: np.exp(-np.abs(x - t)), lambda x, t: 1.0 / (1.0 + (x - t) ** 2)]


def random_exact_kernel(rng) -> NormProblem:
    """Kernel operator with p <= min(q, r), gamma of finite mass, and X-norms dominating near 0."""
    while True:
        p = rng.uniform(0.5, 1.5)
        r = min(p * rng.uniform(1.0, 2.0), 2.5)
        q = p * rng.uniform(1.0, 2.0)
        k = _shape(rng, 0.0, 0.8)
        b = p * (1.0 / r - rng.uniform(0.1, 0.3)) - 1
        if b > -0.9:
            op = Kernel(r, LEB, _KERNELS[int(rng.integers(2))], cells=128)
            return NormProblem(op, ConeSpec(k=k), p, PowerDensity(b), q, ExpDensity(rng.uniform(0.5, 2.0)))


def random_exact(rng, i: int) -> NormProblem:
    kind = i % 3
    if kind == 0:
        return random_exact_identity(rng)
    if kind == 1:
        return random_exact_hardy(rng).as_norm_problem()
    return random_exact_kernel(rng)


def random_bound_hardy(rng) -> tuple[HardyProblem, object]:
    """A Hardy problem with p > min(q, r) whose bound shape is finite."""
    while True:
        q, r = rng.uniform(0.5, 2.0), rng.uniform(0.5, 2.0)
        p = min(q, r) * rng.uniform(1.1, 2.0)
        k = _shape(rng, 0.0, 0.6)
        am = rng.uniform(-0.5, 1.0)
        growth = (_kappa(k) * r + am + 1) / r
        ab = p * (growth - _kappa(k)) - 1 - rng.uniform(0.0, 0.5)
        if ab <= -0.7 or _kappa(k) * p + ab <= -0.7:
            continue
        prob = HardyProblem(p, q, r, ExpDensity(rng.uniform(0.3, 3.0)), k, PowerDensity(ab), PowerDensity(am))
        try:
            check_np_k(prob)
            bounds = hardy_bounds(prob)
        except PreconditionError:
            continue
        if math.isfinite(bounds.upper_shape) and math.isfinite(bounds.lower) and bounds.lower > 0:
            return prob, bounds


# -- criteria -----------------------------------------------------------------------

def test_01_dilation_norm(criterion):
    worst = 0.0
    for m in (0.5, 2, 3):
        for n in (1, 2, 3):
            for alpha in (0, 1, 2):
                for p in (0.5, 1, 2):
                    got = dilation_norm(PowerDensity(float(alpha)), p, n, m, GRID).value
                    worst = max(worst, _rel(got, m ** (n * (alpha + 1) / p)))
    criterion(1, worst <= 1e-6, f"81 cases, worst relative error {worst:.2e}")


def test_02_lambda_embedding(criterion):
    half = lambda_embedding(LEB, PowerDensity(1.0), 1, 2, GRID).value
    same = [lambda_embedding(v, v, p, p, GRID).value
            for v in (LEB, PowerDensity(1.0), PowerDensity(-0.5), ExpDensity(1.0)) for p in (0.5, 1, 2)]
    err = _rel(half, 1 / math.sqrt(2))
    ok = err <= 1e-6 and all(s == 1.0 for s in same)
    criterion(2, ok, f"1/sqrt2 error {err:.2e}; v=w,p=q values {sorted(set(same))}")


def test_03_hardy_exact_example(criterion):
    rep = j_pqr(HardyProblem(1, 1, 1, ExpDensity(1.0)), GRID)
    criterion(3, abs(rep.value - 1.0) <= 1e-4 and rep.attained_in_limit,
              f"J = {rep.value:.10f}, attained in the limit: {rep.attained_in_limit}")


def test_04_cross_path(criterion):
    rng = np.random.default_rng(4)
    errs = []
    for _ in range(20):
        prob = random_exact_hardy(rng)
        a = j_pqr(prob, GRID).value
        b = restriction_norm(prob.as_norm_problem(), GRID).value
        errs.append(_rel(a, b))
    criterion(4, max(errs) <= 1e-6, f"20 problems, worst relative gap {max(errs):.2e}")


def test_07_rearrangement_suite(criterion):
    rng = np.random.default_rng(7)
    worst_eq, bad_max, worst_dil = 0.0, 0, 0.0
    t = np.geomspace(1e-3, 1e3, 400)
    for _ in range(1000):
        f = random_level_set(rng)
        fs = rearrangement(f)
        for p in (0.5, 1, 2, 3):
            lhs = f.power_integral(p)
            worst_eq = max(worst_eq, _rel(fs.integral(LEB, p), lhs))
        ff = maximal(fs, t)
        if np.any(ff < fs(t) - 1e-12) or np.any(np.diff(ff) > 1e-12) or np.any(np.diff(t * ff) < -1e-12):
            bad_max += 1
        m, n = float(rng.choice([0.5, 2.0, 3.0])), int(rng.integers(1, 4))
        moved = rearrangement(dilate(f, m, n))
        ref = fs.dilated(m**n)
        same_levels = np.array_equal(moved.values, ref.values)
        worst_dil = max(worst_dil, float(np.max(np.abs(moved.knots / ref.knots - 1))) if same_levels else math.inf)
    ok = worst_eq <= 1e-12 and bad_max == 0 and worst_dil <= 1e-14
    criterion(7, ok, f"equimeasurability {worst_eq:.1e}; maximal-function violations {bad_max}; "
                     f"dilation knot gap {worst_dil:.1e}")


def test_08_associate_norm(criterion):
    one = associate_norm(StepFunction([1e6], [1.0]), ONE, 1.0, GRID).value
    half = associate_norm(StepFunction([], [], tail=1.0, shape=PowerShape(1.0)), ONE, 0.5, GRID).value
    inf = associate_norm(indicator(1.0), ONE, 0.5, GRID).value
    examples = abs(one - 1) <= 1e-9 and abs(half - 0.5) <= 1e-9 and inf == math.inf
    f = StepFunction([1.0], [1.0], shape=PowerShape(1.0))
    contrast = []
    for p in (0.6, 0.8):
        series = [grid_associate(f, p, cells) for cells in (16, 64, 256, 1024)]
        grows = all(b > a for a, b in zip(series, series[1:])) and series[-1] > 2 * series[0]
        bk = [associate_norm(f, ONE, p, GridConfig(points=n)).value for n in (512, 1024, 2048, 4096)]
        contrast.append((p, grows, max(bk) - min(bk), series))
    ok = examples and all(g and spread <= 1e-6 for _, g, spread, _ in contrast)
    detail = "; ".join(f"p={p}: classical {s[0]:.3g}->{s[-1]:.3g}, B_k spread {spread:.1e}"
                       for p, _, spread, s in contrast)
    criterion(8, ok, f"examples (1, 1/2, inf) = ({one:.6g}, {half:.6g}, {inf}); {detail}")


def _random_level_sets(rng, count):
    return [random_level_set(rng) for _ in range(count)]


def test_09_sandwich(criterion):
    rng = np.random.default_rng(9)
    cases = [(PowerDensity(-0.5), 1.0, 1.0), (PowerDensity(-0.5), 1.0, 2.0), (ExpDensity(1.0), 2.0, 2.0),
             (PowerDensity(0.5), 1.0, 1.5)]
    worst_low, worst_high, count = math.inf, -math.inf, 0
    for v, p, r in cases:
        jnorm = gamma_embedding(v, v, LEB, p, p, r, GRID).value
        for f in _random_level_sets(rng, 25):
            lam = lorentz_lambda_norm(f, p, v)
            gam = lorentz_gamma_norm(f, p, r, v, LEB, GRID)
            worst_low = min(worst_low, gam / lam - 1)
            worst_high = max(worst_high, gam / (jnorm * lam) - 1)
            count += 1
    ok = worst_low >= -1e-12 and worst_high <= 1e-9
    criterion(9, ok, f"{count} functions; min(Gamma/Lambda)-1 = {worst_low:.2e}, "
                     f"max(Gamma/(J Lambda))-1 = {worst_high:.2e}")


def _lambda_norm(g: StepFunction, p, v):
    return lorentz_lambda_norm(level_sets(g), p, v)


def _random_step(rng):
    n = int(rng.integers(1, 8))
    knots = np.cumsum(rng.exponential(1.0, n))
    return StepFunction(knots, rng.exponential(1.0, n))


def test_10_quasi_triangle(criterion):
    rng = np.random.default_rng(10)
    violations, tight = 0, 0.0
    for p in (0.5, 1.0, 2.0):
        for alpha in (0.0, 1.0, -0.5):
            v = PowerDensity(alpha)
            c = quasi_triangle_constant(v, p, 1, GRID)
            for _ in range(200):
                f, g = _random_step(rng), _random_step(rng)
                lhs = _lambda_norm(f + g, p, v)
                rhs = c * (_lambda_norm(f, p, v) + _lambda_norm(g, p, v))
                violations += lhs > rhs * (1 + 1e-12)
                if p == 1.0 and alpha == 0.0:
                    tight = max(tight, lhs / rhs)
    # for p = 1 and v = 1 the norm is the L_1 norm, so lhs / rhs is 1/2 for every pair
    criterion(10, violations == 0 and tight >= 0.9,
              f"violations {violations}; best ratio at p=1, v=1 is {tight:.6f} (need >= 0.9)")


def test_11_l_rho_convexity(criterion):
    rng = np.random.default_rng(11)
    worst = -math.inf
    pairs = [(rho, q) for rho in (0.5, 1, 2) for q in (0.5, 1, 2) if rho <= q]
    for i in range(1000):
        rho, q = pairs[i % len(pairs)]
        size = int(rng.integers(2, 30))
        ys = rng.exponential(1.0, (int(rng.integers(2, 6)), size)) * (rng.random((1, size)) < 0.7)
        lhs, rhs = l_rho_sides(ys, rng.exponential(1.0, size), rho, q)
        worst = max(worst, lhs - rhs)
    found = 0
    for _ in range(200):
        for rho, q in ((1, 0.5), (2, 1), (2, 0.5)):
            ys = np.eye(3) * rng.exponential(1.0, (3, 1))
            lhs, rhs = l_rho_sides(ys, np.ones(3), rho, q)
            found += lhs > rhs + 1e-10
    criterion(11, worst <= 1e-10 and found > 0,
              f"1000 sequences, max(lhs-rhs) = {worst:.2e}; rho > q violations found: {found}")


def test_12_w_qr_limit(criterion):
    worst_drop, worst_end = -math.inf, 0.0
    for gamma in (ExpDensity(1.0), GammaDensity(0.5, 2.0), PowerDensity(-2.0, interval=Interval(1.0, math.inf))):
        for q, r in ((1, 1), (2, 1), (1, 2), (0.5, 1.5)):
            w = WQR(gamma, LEB, q, r, GRID)
            iv = gamma.interval
            t = t_grid(iv, GRID)
            vals = w(t)
            worst_drop = max(worst_drop, float(np.max(-np.diff(vals) / np.maximum(vals[1:], 1e-300))))
            worst_end = max(worst_end, _rel(vals[-1], gamma.total()))
    criterion(12, worst_drop <= 1e-12 and worst_end <= 1e-6,
              f"largest relative decrease {max(worst_drop, 0):.1e}; grid-end gap to total mass {worst_end:.1e}")


def test_05_oracle_exactness(criterion):
    rng = np.random.default_rng(5)
    rows = []
    for i in range(20):
        prob = random_exact(rng, i)
        closed = restriction_norm(prob, GRID).value
        rep = brute_norm(prob, FAST_ORACLE, GRID)
        rows.append((type(prob.operator).__name__, rep.best_ratio / closed, rep.extremal_margin))
    low = min(r for _, r, _ in rows)
    high = max(r for _, r, _ in rows)
    margin = max(m for _, _, m in rows)
    ok = low >= 1 - 1e-3 and high <= 1 + 1e-9 and margin <= 1e-12
    kinds = sorted({k for k, _, _ in rows})
    criterion(5, ok, f"20 problems ({', '.join(kinds)}); oracle/closed in [{low:.8f}, {high:.12f}]; "
                     f"largest sample excess over extremals {margin:.1e}")


def test_06_oracle_one_sided(criterion):
    rng = np.random.default_rng(6)
    coarse = OracleConfig(samples=150, hill_climb_steps=50, extremal_points=256, quad_points=256)
    fine = OracleConfig(samples=150, hill_climb_steps=50, extremal_points=512, quad_points=512)
    worst_exact, worst_bound, worst_drift = -math.inf, 0.0, 1.0
    for i in range(20):
        prob = random_exact(rng, i)
        closed = restriction_norm(prob, GRID).value
        rep = brute_norm(prob, coarse, GRID)
        worst_exact = max(worst_exact, max(rep.sample_best, rep.extremal_best) / closed - 1)
    for _ in range(30):
        hp, bounds = random_bound_hardy(rng)
        prob = hp.as_norm_problem()
        a = brute_norm(prob, coarse, GRID).best_ratio / bounds.upper_shape
        b = brute_norm(prob, fine, GRID.doubled()).best_ratio / bounds.upper_shape
        worst_bound = max(worst_bound, a, b)
        worst_drift = max(worst_drift, b / a, a / b)
    ok = worst_exact <= 1e-9 and worst_bound <= 20 and worst_drift < 2
    criterion(6, ok, f"20 exact + 30 bound-regime problems; max excess over exact {worst_exact:.1e}; "
                     f"max oracle/B {worst_bound:.4f}; grid-doubling drift factor {worst_drift:.6f}")
