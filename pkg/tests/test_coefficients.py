import json
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from wavegec.coefficients import (
    ConstantModulation,
    CutoffModulation,
    CutoffShape,
    GluedBlock,
    coefficient_from_dict,
    computation_bound_check,
    export_csv,
    finite_difference_check,
    inverse_time_modulation,
    lambda6_from_lambda3,
    make_constant,
    make_custom,
    make_cutoff,
    make_dgcs,
    make_glued,
    make_no_way,
    verify_membership,
)
from wavegec.errors import DomainError, PreconditionError, VerificationImpossibleError
from wavegec.rates import ClassParams, power_profile


def test_explicit_example_value_at_one():
    expected = 1 - math.sin(2) / 4 + math.sin(1) ** 2 / 8 - math.sin(1) ** 4 / 64
    assert float(make_no_way().c(1.0)) == pytest.approx(expected, abs=1e-15)


def test_explicit_example_domain():
    with pytest.raises(DomainError):
        make_no_way().c(0.5)


def test_explicit_example_matches_resonant_form():
    # m = lambda = 1 with eps = 1/t is the explicit example
    dgcs = make_dgcs(1.0, 1.0, inverse_time_modulation())
    ts = np.linspace(1.0, 50.0, 2001)
    ref = make_no_way()
    for attr in ("c", "dc", "ddc"):
        assert np.allclose(getattr(dgcs, attr)(ts), getattr(ref, attr)(ts), atol=1e-13)


@pytest.mark.parametrize("coeff", [
    make_no_way(),
    make_dgcs(1.3, 2.0, 0.4),
    make_dgcs(1.0, 5.0, inverse_time_modulation()),
])
def test_derivatives_agree_with_finite_differences(coeff):
    ts = np.linspace(1.5, 20.0, 500)
    assert finite_difference_check(coeff, ts) < 1e-6


def test_cutoff_derivative_maxima():
    shape = make_cutoff(0.0, 10.0)
    maxima = shape.derivative_maxima()
    assert maxima[0] == pytest.approx(1.0)
    assert maxima[1] == pytest.approx(140 / 64, rel=1e-6)
    assert max(maxima) < 100


def test_cutoff_shape_is_smooth_plateau():
    shape = CutoffShape(0.0, 10.0)
    assert shape(np.array([-1.0, 0.0, 5.0, 10.0, 11.0])).tolist() == [0, 0, 1, 0, 0]
    for order in range(1, 4):
        assert abs(float(shape(np.array([1.0]), order)[0])) < 1e-12
    with pytest.raises(PreconditionError):
        CutoffShape(0.0, 2.0)


def test_cutoff_modulation_vanishes_outside():
    prof = power_profile(0.2, -0.2, 1.0)
    mod = CutoffModulation(0.5, 10.0, CutoffShape(5.0, 30.0), prof)
    ts = np.array([1.0, 4.9, 30.1, 100.0])
    for arr in mod.derivs(ts):
        assert np.all(arr == 0)
    inside = mod(np.array([10.0]))[0]
    assert inside == pytest.approx(0.5 / 10.0 * 10.0**-0.4)
    with pytest.raises(PreconditionError):
        CutoffModulation(1.5, 10.0, CutoffShape(5.0, 30.0), prof)


def test_constant_coefficient():
    coeff = make_constant(2.5)
    assert coeff.abs_deviation_integral(0.0, 100.0) == 0.0
    assert coeff.tail_integral(3.0) == 0.0
    with pytest.raises(PreconditionError):
        make_constant(0.0)


def test_resonant_deviation_integral_by_quadrature():
    coeff = make_dgcs(1.0, 3.0, 0.2)
    from scipy import integrate

    ref, _ = integrate.quad(lambda s: abs(float(coeff.c(s)) - 1.0), 0.0, 10.0, limit=500)
    assert coeff.abs_deviation_integral(0.0, 10.0) == pytest.approx(ref, rel=1e-7)


def test_glued_blocks_and_round_trip(tmp_path):
    prof = power_profile(0.2, -0.2, 1.0)
    mod = CutoffModulation(0.3, 8.0, CutoffShape(4.0, 40.0), prof)
    block = make_dgcs(math.sqrt(2.5), 8.0, mod, domain=(4.0, 40.0))
    glued = make_glued(2.5, [GluedBlock(4.0, 40.0, block)], 1.0)
    ts = np.array([2.0, 10.0, 39.0, 45.0])
    assert glued.c(ts)[0] == 2.5 and glued.c(ts)[3] == 2.5
    assert glued.c(ts)[1] == pytest.approx(float(block.c(10.0)))
    assert glued.oscillation_on(41.0, 100.0) == 0.0
    rebuilt = coefficient_from_dict(json.loads(glued.to_json()))
    assert np.array_equal(rebuilt.c(ts), glued.c(ts))
    path = tmp_path / "c.csv"
    export_csv(glued, ts, str(path))
    lines = path.read_text().splitlines()
    assert lines[0] == "t,c,dc,ddc" and len(lines) == 5


def test_glued_rejects_overlap():
    a = make_dgcs(1.0, 1.0, 0.0)
    with pytest.raises(PreconditionError):
        make_glued(1.0, [GluedBlock(0.0, 5.0, a), GluedBlock(4.0, 8.0, a)], 0.0)


def test_membership_of_explicit_example_cannot_be_decided():
    params = ClassParams(t0=1.0, lambda1=0.5, lambda2=1.5)
    with pytest.raises(VerificationImpossibleError):
        verify_membership(make_custom(np.sin, np.cos, np.sin, 1.0, (0.0, math.inf)),
                          power_profile(0.5, 0.0, 1.0), params)


def test_membership_of_constant():
    params = ClassParams(t0=1.0, lambda1=1.0, lambda2=4.0)
    report = verify_membership(make_constant(2.5), power_profile(0.2, -0.2, 1.0), params)
    assert report.passed and report.hyperbolic_margin == pytest.approx(1.5)


def test_lambda6_formula():
    assert lambda6_from_lambda3(1.0) == 8.0


def test_computation_bound_of_constant_modulation():
    # with eps = e constant the second derivative dominates:
    # c'' = e lam sin(2 lam t) - e^2 (12 s^2 c^2 - 4 s^4) / 64
    lam, e = 10.0, 0.5
    coeff = make_dgcs(1.0, lam, e)
    ratio, ok = computation_bound_check(coeff, lambda t: e + 0 * t, lam, 1.0, 1.0, window=(0.0, 5.0))
    ts = np.linspace(0.0, 5.0, 2_000_001)
    s, co = np.sin(lam * ts), np.cos(lam * ts)
    ddc = e * lam * np.sin(2 * lam * ts) - e * e * (12 * s * s * co * co - 4 * s**4) / 64
    exact = np.max(np.abs(ddc)) / e
    # a grid maximum can only fall short of the true one
    assert ok and exact * (1 - 1e-4) <= ratio <= exact * (1 + 1e-9)


@settings(max_examples=25, deadline=None)
@given(st.floats(0.5, 3.0), st.floats(0.5, 20.0), st.floats(-0.5, 0.5))
def test_resonant_majorants_dominate(m, lam, eps):
    coeff = make_dgcs(m, lam, ConstantModulation(eps))
    ts = np.linspace(0.0, 10.0, 3001)
    dev, d1, d2 = coeff.majorants(ts)
    slack = 1e-12 * (1 + m * m * lam * lam)
    assert np.all(np.abs(coeff.c(ts) - m * m) <= dev + slack)
    assert np.all(np.abs(coeff.dc(ts)) <= d1 + slack)
    assert np.all(np.abs(coeff.ddc(ts)) <= d2 + slack * lam)
