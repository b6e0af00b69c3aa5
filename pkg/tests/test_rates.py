import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import integrate

from wavegec.errors import DomainError, OutOfScopeError, PreconditionError
from wavegec.rates import (
    NON_DECREASING,
    NON_INCREASING,
    ClassParams,
    check_osc_integral,
    classify_power,
    envelope_trend,
    exp_growth_constants,
    fast_growth_profile,
    osc_integral,
    osc_integral_bound,
    power_G,
    power_lambda3,
    power_profile,
    power_tail_integral,
    profile_from_json,
    table_profile,
)


def test_class_params_default_limit_is_midpoint():
    params = ClassParams(t0=1.0, lambda1=1.0, lambda2=4.0)
    assert params.c_inf == 2.5


def test_class_params_rejects_bad_ordering():
    with pytest.raises(PreconditionError):
        ClassParams(t0=0.0, lambda1=3.0, lambda2=2.0)
    with pytest.raises(PreconditionError):
        ClassParams(t0=0.0, lambda1=1.0, lambda2=2.0, c_inf=5.0)


def test_power_cumulative_matches_quadrature():
    for beta in (0.1, 0.2, 0.5, 0.75):
        for t in (2.0, 17.0, 400.0):
            ref, _ = integrate.quad(lambda s: s ** (-2 * beta), 1.0, t)
            assert power_G(beta, 1.0, t) == pytest.approx(ref, rel=1e-10)


def test_power_cumulative_log_case_is_continuous():
    near = power_G(0.5 - 1e-9, 1.0, 50.0)
    assert near == pytest.approx(math.log(50.0), rel=1e-7)


def test_growth_envelope_closed_form():
    prof = power_profile(0.2, -0.2, 1.0)
    for t in (3.0, 100.0, 1e6):
        expected = (t**0.6 - 1.0) / 0.6 * t**-0.2
        assert prof.M(t) == pytest.approx(expected, rel=1e-12)


def test_growth_envelope_of_log_case():
    prof = power_profile(0.5, 0.0, 1.0)
    assert prof.M(math.e**3) == pytest.approx(3.0, rel=1e-12)


def test_envelope_saturates_when_product_peaks():
    # 2 beta < 1 but 1 - 2 beta + alpha < 0: G S rises then falls
    prof = power_profile(0.3, -0.6, 1.0)
    peak = (0.6 / 0.2) ** (1 / 0.4)
    values = [prof.M(t) for t in (peak, 2 * peak, 100 * peak)]
    assert values[0] == pytest.approx(values[1]) == pytest.approx(values[2])


def test_classification_examples():
    assert classify_power(0.5, -0.1).summary() == "GEC"
    assert classify_power(0.2, -0.2).summary() == "growth exponent 0.2"
    assert classify_power(0.5, 0.0).summary() == "GEC fails, M ~ log t"
    assert classify_power(0.6, 0.0).gec
    assert not classify_power(0.4, 0.0).gec


def test_classification_rejects_growing_stabilization():
    with pytest.raises(OutOfScopeError):
        classify_power(0.2, 0.1)


@given(st.floats(0.0, 1.5), st.floats(-1.5, 0.0))
def test_classification_agrees_with_envelope_growth(beta, alpha):
    cls = classify_power(beta, alpha)
    if cls.kind == "growth":
        assert cls.exponent > 0
        assert cls.exponent == pytest.approx(0.5 * (1 + alpha) - beta)
    elif cls.kind == "GEC":
        assert 2 * beta >= 1 + alpha


def test_power_lambda3_bounds_three_derivatives():
    beta, t0 = 0.2, 1.0
    lam3 = power_lambda3(beta, t0)
    prof = power_profile(beta, -0.2, t0)
    ts = np.geomspace(t0, 1e4, 500)
    gam = prof.gamma(ts)
    for d in prof.gamma_derivatives:
        assert np.all(np.abs(d(ts)) <= lam3 * gam * (1 + 1e-12))
    assert lam3 == pytest.approx(0.2 * 1.2 * 2.2)


def test_power_profile_monotonicity_flag():
    assert power_profile(0.2, -0.2, 1.0).gamma_monotonicity == NON_INCREASING
    assert power_profile(-0.2, -0.2, 1.0).gamma_monotonicity == NON_DECREASING


def test_power_profile_rejects_bad_input():
    with pytest.raises(OutOfScopeError):
        power_profile(0.2, 0.3, 1.0)
    with pytest.raises(DomainError):
        power_profile(0.2, -0.2, 0.0)


def test_fast_growth_cumulative_closed_form():
    prof = fast_growth_profile()
    for t in (0.5, 1.0, 2.0):
        ref, _ = integrate.quad(lambda s: float(prof.g(s)), 0.0, t)
        assert prof.G(t) == pytest.approx(ref, rel=1e-9)


def test_table_profile_envelope_against_closed_form():
    ts = np.geomspace(1.0, 1e3, 300)
    prof = table_profile(1.0, np.column_stack([ts, ts**-0.2]), np.column_stack([ts, ts**-0.2]))
    exact = power_profile(0.2, -0.2, 1.0)
    for t in (5.0, 50.0, 500.0):
        assert prof.M(t) == pytest.approx(exact.M(t), rel=1e-3)


def test_profile_from_json_power():
    params, prof = profile_from_json(
        {"t0": 1, "lambda1": 1, "lambda2": 4, "gamma": {"form": "power", "beta": 0.2},
         "stab": {"form": "power", "alpha": -0.2}}
    )
    assert params.lambda3 == pytest.approx(power_lambda3(0.2, 1.0))
    assert prof.M(10.0) == pytest.approx(power_profile(0.2, -0.2, 1.0).M(10.0))


def test_profile_from_json_rejects_missing_fields():
    with pytest.raises(PreconditionError):
        profile_from_json({"t0": 1, "lambda1": 1})


def test_envelope_trend_detects_growth_and_saturation():
    assert envelope_trend(power_profile(0.2, -0.2, 1.0), 1e6)["trend"] == "growing"
    assert envelope_trend(power_profile(0.7, -0.2, 1.0), 1e6)["trend"] == "bounded"


def test_exp_growth_constants_exponential():
    # g = e^t, lambda4 = 1: G(1) = e - 1, so Gamma1 = e/(e-1)
    consts = exp_growth_constants(np.exp, 1.0, 0.0, dg=np.exp)
    assert consts.gamma1 == pytest.approx(math.e / (math.e - 1.0))
    assert consts.gamma2 == pytest.approx(math.exp(consts.gamma1))


def test_exp_growth_constants_rejects_violation():
    with pytest.raises(PreconditionError):
        exp_growth_constants(lambda t: np.exp(3 * np.asarray(t)), 1.0, 0.0)


@settings(max_examples=20, deadline=None)
@given(st.floats(0.05, 2.0), st.floats(0.0, 3.0), st.floats(0.0, 5.0))
def test_exp_growth_conclusions(rate, t0, shift):
    decay = lambda t: np.exp(-rate * (np.asarray(t) - t0))  # noqa: E731
    g = lambda t: decay(t) + shift  # noqa: E731
    G = lambda t: (1.0 - decay(t)) / rate + shift * (np.asarray(t) - t0)  # noqa: E731
    consts = exp_growth_constants(g, rate, t0, dg=lambda t: -rate * decay(t))
    ts = t0 + 1.0 + np.geomspace(1e-6, 1e3, 1000)
    assert np.all(g(ts) <= consts.gamma1 * G(ts) * (1 + 1e-12))
    assert np.all(G(ts + 1.0) <= consts.gamma2 * G(ts) * (1 + 1e-12))


def test_osc_integral_bound_below_quadrature():
    g = lambda t: np.asarray(t) ** -0.4  # noqa: E731
    value, bound = check_osc_integral(g, 2.0, 300.0, 7.0)
    assert value >= bound
    ref, _ = integrate.quad(lambda s: s**-0.4 * math.sin(7 * s) ** 2, 2.0, 300.0, limit=2000)
    assert value == pytest.approx(ref, rel=1e-9)


def test_osc_integral_rejects_bad_rate():
    with pytest.raises(DomainError):
        osc_integral_bound(np.exp, 0.0, 1.0, 0.0)
    with pytest.raises(DomainError):
        osc_integral(np.exp, 0.0, 1.0, -1.0)


@settings(max_examples=40, deadline=None)
@given(st.floats(0.0, 1.0), st.floats(1.0, 50.0), st.floats(0.5, 40.0), st.floats(0.1, 2.0))
def test_osc_bound_dominated(alpha, length, ell, decay):
    g = lambda t: np.exp(-decay * np.asarray(t))  # noqa: E731
    value = osc_integral(g, alpha, alpha + length, ell)
    assert value >= osc_integral_bound(g, alpha, alpha + length, ell) - 1e-12


def test_power_tail_integral():
    assert power_tail_integral(2.0, 3.0, 2.0) == pytest.approx(0.25)
    assert power_tail_integral(1.0, 1.0, 2.0) == math.inf
