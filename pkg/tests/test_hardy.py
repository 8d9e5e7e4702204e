import math

import numpy as np
import pytest
from scipy import integrate, optimize, special

from conenorm.grid import GridConfig
from conenorm.hardy import (HardyProblem, PreconditionError, check_np_k, e_pqr, f_pqr, hardy_bounds, j_pqr,
                            omega_kp, psi, v_pr)
from conenorm.measure import ExpDensity, PowerDensity, lebesgue, null_measure
from conenorm.normcalc import restriction_norm
from conenorm.shapes import PowerShape

from conftest import random_exact_hardy

EXP = ExpDensity(1.0)


def _g32(t):
    """int_0^t tau**0.5 e**-tau."""
    return special.gammainc(1.5, t) * special.gamma(1.5)


def test_psi_and_omega_examples():
    assert psi(HardyProblem(1, 1, 1, EXP), 2.0) == pytest.approx(2.0)
    assert psi(HardyProblem(1, 1, 2, EXP), 4.0) == pytest.approx(2.0)
    assert psi(HardyProblem(1, 1, 1, EXP, k=PowerShape(1.0)), 2.0) == pytest.approx(2.0)
    assert omega_kp(HardyProblem(1, 1, 1, EXP), 3.0) == pytest.approx(3.0)
    assert omega_kp(HardyProblem(2, 2, 2, EXP), 4.0) == pytest.approx(2.0)
    assert omega_kp(HardyProblem(1, 1, 1, EXP), 1e-20) < 1e-19


def test_j_on_the_exponential_example():
    rep = j_pqr(HardyProblem(1, 1, 1, EXP))
    assert rep.value == pytest.approx(1.0, abs=1e-4)
    assert rep.attained_in_limit


def test_zero_gamma_gives_zero():
    z = HardyProblem(1, 1, 1, null_measure())
    assert j_pqr(z).value == 0.0
    assert e_pqr(z) == 0.0
    assert f_pqr(HardyProblem(2, 1, 1, null_measure())) == 0.0
    b = hardy_bounds(HardyProblem(2, 1, 1, null_measure()))
    assert b.upper_shape == 0.0


def test_v_pr_examples():
    np.testing.assert_allclose(v_pr(HardyProblem(1, 1, 1, EXP), np.array([0.5, 2.0])), 1.0)
    # p > r with Psi/omega = c: the integral of Psi**sigma d[-omega**-sigma] diverges at 0
    assert v_pr(HardyProblem(2, 2, 1, EXP, beta=PowerDensity(1.0)), 1.0) == math.inf


def test_e_matches_dense_scan():
    value = e_pqr(HardyProblem(1, 1, 1, EXP))
    t = np.geomspace(1e-3, 50, 200001)
    assert value == pytest.approx(np.max((1 - np.exp(-t) * (1 + t)) / t), rel=1e-6)


def test_e_dual_branch_matches_quadrature():
    # p = 2, q = 1, r = 2: omega = t**0.5, s = 2, E**2 = int G**2 t**-2 dt
    ref = integrate.quad(lambda t: _g32(t) ** 2 / t**2, 0, np.inf, limit=500)[0] ** 0.5
    assert e_pqr(HardyProblem(2, 1, 2, EXP)) == pytest.approx(ref, rel=1e-6)


def test_e_is_continuous_across_p_equals_q():
    below = e_pqr(HardyProblem(1.0, 1.0, 2.0, EXP))
    ref = -optimize.minimize_scalar(lambda t: -_g32(t) / t, bounds=(0.1, 5), method="bounded",
                                    options={"xatol": 1e-12}).fun
    assert below == pytest.approx(ref, rel=1e-9)
    for p in (1 - 1e-4, 1 + 1e-4):
        assert e_pqr(HardyProblem(p, 1.0, 2.0, EXP)) == pytest.approx(below, rel=1e-3)


def test_both_f_forms_agree():
    prob = HardyProblem(2, 1, 2, EXP, mu=PowerDensity(1.0))
    assert f_pqr(prob) == pytest.approx(0.5, rel=1e-6)
    assert f_pqr(prob, form="dv") == pytest.approx(0.5, rel=1e-6)


def test_exact_regime_bounds_collapse():
    b = hardy_bounds(HardyProblem(1, 1, 1, EXP))
    assert b.exact == b.lower == b.upper_shape
    assert b.regime == "exact"


def test_two_sided_regime_keeps_j_below_b():
    b = hardy_bounds(HardyProblem(2, 1, 2, EXP, mu=PowerDensity(1.0)))
    assert b.exact is None and b.lower <= b.upper_shape
    assert b.e_plus_f == pytest.approx(float(b.e) + float(b.f))


def test_precondition_failures():
    with pytest.raises(PreconditionError):
        check_np_k(HardyProblem(1, 1, 1, EXP, beta=PowerDensity(-2.0)))
    with pytest.raises(PreconditionError):
        # finite total beta mass: omega does not blow up at infinity
        check_np_k(HardyProblem(1, 1, 1, EXP, beta=ExpDensity(1.0)))


@pytest.mark.parametrize("seed", range(5))
def test_two_paths_agree(seed):
    prob = random_exact_hardy(np.random.default_rng(seed))
    a = j_pqr(prob).value
    b = restriction_norm(prob.as_norm_problem(), GridConfig()).value
    assert a == pytest.approx(b, rel=1e-6)
