import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from conenorm.cone import ConeSpec, SamplerConfig, Variant, sample
from conenorm.grid import GridConfig
from conenorm.measure import INF, ExpDensity, Interval, PowerDensity, lebesgue
from conenorm.normcalc import (WQR, NormProblem, associate_norm, classical_associate, dilation_norm,
                               gamma_embedding, grid_associate, lambda_embedding, lorentz_gamma_norm,
                               lorentz_lambda_norm, quasi_triangle_constant, restriction_norm)
from conenorm.operators import Hardy, Identity, Kernel
from conenorm.rearrange import LevelSetFunction, StepFunction, indicator
from conenorm.shapes import PowerShape

LEB = lebesgue()


def test_identity_into_exponential_weight():
    rep = restriction_norm(NormProblem(Identity(), ConeSpec(), 1, LEB, 1, ExpDensity(1.0)))
    assert rep.value >= 0.9999 and rep.value <= 1 + 1e-12
    assert rep.attained_in_limit and rep.applicability


@pytest.mark.parametrize("variant", list(Variant))
def test_identity_equal_spaces(variant):
    cone = ConeSpec(Interval(0, 3.0), PowerShape(0.5), variant)
    rep = restriction_norm(NormProblem(Identity(), cone, 2, PowerDensity(1.0), 2, PowerDensity(1.0)))
    assert rep.value == pytest.approx(1.0, rel=1e-12)


def test_hardy_on_unit_interval():
    iv = Interval(0.0, 1.0)
    rep = restriction_norm(NormProblem(Hardy(1.0, lebesgue(iv)), ConeSpec(iv), 1, lebesgue(iv), 1, lebesgue(iv)))
    assert rep.value == pytest.approx(1.0, abs=1e-6)
    assert rep.branch == "endpoint" and rep.details["endpoint_value"] == pytest.approx(0.5)


def test_inapplicable_is_flagged():
    rep = restriction_norm(NormProblem(Identity(), ConeSpec(), 2, LEB, 1, ExpDensity(1.0)))
    assert not rep.applicability


def test_associate_examples():
    assert associate_norm(StepFunction([1e6], [1.0]), p=1).value == pytest.approx(1.0)
    ramp = StepFunction([], [], tail=1.0, shape=PowerShape(1.0))
    assert associate_norm(ramp, p=0.5).value == pytest.approx(0.5, rel=1e-9)
    assert associate_norm(indicator(1.0), p=0.5).value == INF


def test_classical_associate_examples():
    assert classical_associate(indicator(1.0), 0.5) == INF
    assert classical_associate(indicator(1.0), 2) == pytest.approx(1.0)
    assert classical_associate(indicator(1.0, value=3.0), 1) == 3.0


def test_grid_associate_grows_for_small_p():
    f = StepFunction([1.0], [1.0], shape=PowerShape(1.0))
    series = [grid_associate(f, 0.6, n) for n in (8, 32, 128, 512)]
    assert all(b > a for a, b in zip(series, series[1:]))


def test_dilation_examples():
    assert dilation_norm(LEB, 2, 1, 3).value == pytest.approx(math.sqrt(3), rel=1e-9)
    assert dilation_norm(PowerDensity(1.0), 1, 2, 2).value == pytest.approx(16.0, rel=1e-9)
    assert dilation_norm(ExpDensity(1.0), 1.5, 2, 1.0).value == pytest.approx(1.0, rel=1e-9)


def test_quasi_triangle_examples():
    assert quasi_triangle_constant(LEB, 2) == pytest.approx(math.sqrt(2), rel=1e-9)
    assert quasi_triangle_constant(LEB, 1) == pytest.approx(2.0, rel=1e-9)
    v = PowerDensity(2.0)
    assert quasi_triangle_constant(v, 1) == pytest.approx(dilation_norm(v, 1, 1, 2).value, rel=1e-12)


def test_lambda_embedding_examples():
    assert lambda_embedding(LEB, LEB, 2, 2).value == pytest.approx(1.0, rel=1e-12)
    assert lambda_embedding(LEB, PowerDensity(1.0), 1, 2).value == pytest.approx(1 / math.sqrt(2), rel=1e-9)
    rep = lambda_embedding(LEB, LEB, 2, 1)
    assert rep.value == INF and not rep.applicability


def test_lorentz_norms():
    assert lorentz_lambda_norm(LevelSetFunction(((1, 1),)), 1, LEB) == pytest.approx(1.0)
    assert lorentz_lambda_norm(LevelSetFunction(((3, 1), (1, 2))), 1, LEB) == pytest.approx(5.0)
    assert lorentz_lambda_norm(LevelSetFunction(((1, 1),)), 2, PowerDensity(1.0)) == pytest.approx(math.sqrt(0.5))
    assert lorentz_gamma_norm(LevelSetFunction(()), 1, 1, LEB, LEB) == 0.0


def test_w_qr_limit_is_total_mass():
    w = WQR(ExpDensity(2.0), LEB, 1.0, 1.0, GridConfig())
    t = np.geomspace(1e-6, 1e6, 200)
    vals = w(t)
    assert np.all(np.diff(vals) >= -1e-12)
    assert w(1e13) == pytest.approx(0.5, rel=1e-6)


def test_gamma_embedding_example():
    v = PowerDensity(-0.5)
    rep = gamma_embedding(v, v, LEB, 1, 1, 1)
    assert rep.value == pytest.approx(2.0, rel=1e-6)


PROBLEMS = [
    NormProblem(Identity(), ConeSpec(), 1, LEB, 2, PowerDensity(1.0)),
    NormProblem(Hardy(1.0, LEB), ConeSpec(k=PowerShape(0.5)), 1, PowerDensity(0.5), 1.5, ExpDensity(1.0)),
    NormProblem(Kernel(1.0, LEB, lambda x, t: np.exp(-np.abs(x - t)), cells=64), ConeSpec(), 1, LEB, 1,
                ExpDensity(1.0)),
]


@pytest.mark.parametrize("prob", PROBLEMS, ids=["identity", "hardy", "kernel"])
def test_cone_members_never_beat_the_closed_form(prob):
    grid = GridConfig(points=1024)
    value = restriction_norm(prob, grid).value
    qgrid = GridConfig(points=512)
    for seed in range(60):
        g = sample(prob.cone, SamplerConfig(seed=seed, pieces=1 + seed % 8, grid=qgrid))
        den = prob.domain_norm(g)
        if not math.isfinite(den):
            continue
        ratio = prob.operator.y_norm(g, prob.q, prob.gamma, prob.cone.interval, qgrid) / den
        assert ratio <= value * (1 + 1e-9)


@settings(max_examples=25, deadline=None)
@given(alpha=st.floats(-0.5, 2), p=st.sampled_from([0.5, 1, 2]), m=st.floats(0.5, 4), n=st.integers(1, 3))
def test_dilation_matches_power_law(alpha, p, m, n):
    rep = dilation_norm(PowerDensity(alpha), p, n, m, GridConfig(points=256))
    assert rep.value == pytest.approx(m ** (n * (alpha + 1) / p), rel=1e-6)


@settings(max_examples=25, deadline=None)
@given(alpha=st.floats(-0.5, 2), p=st.sampled_from([0.5, 1, 2]), m=st.floats(0.2, 5), n=st.integers(1, 2))
def test_dilation_products(alpha, p, m, n):
    grid = GridConfig(points=256)
    up = dilation_norm(ExpDensity(1.0) if alpha > 1.5 else PowerDensity(alpha), p, n, m, grid).value
    down = dilation_norm(ExpDensity(1.0) if alpha > 1.5 else PowerDensity(alpha), p, n, 1 / m, grid).value
    assert up * down >= 1 - 1e-12


@settings(max_examples=25, deadline=None)
@given(a=st.floats(-0.5, 2), b=st.floats(-0.5, 2), p=st.sampled_from([0.5, 1, 2]), q=st.sampled_from([0.5, 1, 2]))
def test_lambda_embedding_products(a, b, p, q):
    grid = GridConfig(points=256)
    there = lambda_embedding(PowerDensity(a), PowerDensity(b), p, q, grid).value
    back = lambda_embedding(PowerDensity(b), PowerDensity(a), q, p, grid).value
    if math.isfinite(there) and math.isfinite(back):
        assert there * back >= 1 - 1e-9
