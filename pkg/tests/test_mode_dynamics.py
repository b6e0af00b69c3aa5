import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import integrate, special

from wavegec.coefficients import inverse_time_modulation, make_constant, make_dgcs, make_no_way
from wavegec.errors import DomainError, PreconditionError, ResourceError
from wavegec.mode_dynamics import (
    IntegratorConfig,
    ModeState,
    closed_form_dgcs,
    closed_form_no_way,
    dgcs_exponent_integral,
    integrate_mode,
    kowaleskian_energy,
    no_way_exponent_integral,
    propagate,
    residual,
    rotation,
    tarama_energy,
    tarama_valid,
)


def test_energy_formulas():
    state = ModeState(0.0, 1.0, 2.0, 3.0)
    assert kowaleskian_energy(state, 4.0) == pytest.approx(20.0)
    # c' / (2 c^(3/2)) u v = 8 / 16 * 2
    assert tarama_energy(state, 4.0, 8.0) == pytest.approx(21.0)


def test_tarama_validity_threshold():
    coeff = make_dgcs(1.0, 2.0, 0.5)
    ts = np.linspace(0.0, 5.0, 200)
    needed = np.max(np.abs(coeff.dc(ts)) / (2 * coeff.c(ts) ** 1.5))
    assert np.all(tarama_valid(needed * 1.001, coeff, ts))
    assert not np.all(tarama_valid(needed * 0.9, coeff, ts))


def test_resonant_pair_derivative_after_one_period():
    # m = lam = 1, eps = 0.1: the exponent after 2 pi is 0.1 pi / 8
    _, dw = closed_form_dgcs(1.0, 1.0, 0.1, 0.0, 2 * math.pi)
    assert dw == pytest.approx(math.exp(0.0125 * math.pi), rel=1e-13)


def test_closed_forms_solve_their_equations():
    coeff = make_dgcs(1.0, 50.0, 0.1)
    ts = np.linspace(0.1, 9.9, 4001)
    w = lambda t: closed_form_dgcs(1.0, 50.0, 0.1, 0.0, t)[0]  # noqa: E731
    assert residual(w, coeff.c, 50.0, ts) < 1e-8
    ts = np.linspace(1.1, 99.0, 4001)
    w = lambda t: closed_form_no_way(t)[0]  # noqa: E731
    assert residual(w, make_no_way().c, 1.0, ts) < 1e-8


def test_explicit_example_exponent_against_quadrature():
    for t in (2.0, 30.0):
        ref, _ = integrate.quad(lambda s: math.sin(s) ** 2 / s, 1.0, t, limit=200)
        assert float(no_way_exponent_integral(t)) == pytest.approx(ref, rel=1e-11)


def test_long_exponent_integral_uses_cosine_route():
    # eps = 1/t, m = 1, lam = 1000 over [1, 700]: beyond 2e5 half periods
    w = 1000.0
    value = dgcs_exponent_integral(1.0, w, inverse_time_modulation(), 1.0, 700.0)
    exact = 0.5 * math.log(700.0) - 0.5 * (special.sici(2 * w * 700.0)[1] - special.sici(2 * w)[1])
    assert value == pytest.approx(exact, rel=1e-9)


def test_integrator_reproduces_resonant_closed_form():
    coeff = make_dgcs(1.0, 50.0, 0.1)
    u0, v0 = closed_form_dgcs(1.0, 50.0, 0.1, 0.0, 0.0)
    trace = integrate_mode(coeff, 50.0, ModeState(0.0, float(u0), float(v0), 50.0), 10.0)
    u1, v1 = closed_form_dgcs(1.0, 50.0, 0.1, 0.0, 10.0)
    assert trace.u[-1] == pytest.approx(float(u1), rel=1e-6, abs=1e-9)
    assert trace.v[-1] == pytest.approx(float(v1), rel=1e-6)
    assert trace.route == "compiled"


def test_compiled_and_general_routes_agree():
    coeff = make_no_way()
    state = ModeState(1.0, 0.3, -0.2, 7.0)
    fast = integrate_mode(coeff, 7.0, state, 30.0)
    slow = integrate_mode(coeff, 7.0, state, 30.0, IntegratorConfig(compiled=False))
    assert slow.route == "general"
    assert fast.u[-1] == pytest.approx(slow.u[-1], rel=1e-6, abs=1e-8)
    assert fast.v[-1] == pytest.approx(slow.v[-1], rel=1e-6, abs=1e-8)


def test_backward_integration_returns_to_start():
    coeff = make_dgcs(1.2, 5.0, 0.3)
    state = ModeState(0.0, 1.0, 0.5, 5.0)
    fwd = integrate_mode(coeff, 5.0, state, 12.0).final
    back = integrate_mode(coeff, 5.0, fwd, 0.0).final
    assert back.u == pytest.approx(1.0, rel=1e-7)
    assert back.v == pytest.approx(0.5, rel=1e-7)


def test_requests_outside_limits_are_refused():
    coeff = make_no_way()
    with pytest.raises(DomainError):
        integrate_mode(coeff, 1.0, ModeState(1.0, 0.0, 1.0, 1.0), 0.5)
    with pytest.raises(ResourceError):
        integrate_mode(coeff, 2e4, ModeState(1.0, 0.0, 1.0, 2e4), 2.0)
    with pytest.raises(PreconditionError):
        IntegratorConfig(eta=5)


def test_rotation_is_exact_for_constant_speed():
    mats, _ = propagate(make_constant(2.0), 3.0, 0.0, [0.7, 5.0])
    assert np.allclose(mats[1], rotation(3.0, 2.0, 5.0), atol=1e-14)


@settings(max_examples=20, deadline=None)
@given(st.floats(0.5, 2.0), st.floats(1.0, 30.0), st.floats(-0.4, 0.4))
def test_fundamental_matrix_has_unit_determinant(m, lam, eps):
    coeff = make_dgcs(m, lam, eps)
    mats, _ = propagate(coeff, lam, 0.0, [3.0, 6.0])
    assert np.allclose(np.linalg.det(mats), 1.0, atol=1e-7)


@settings(max_examples=20, deadline=None)
@given(st.floats(0.1, 4.0), st.floats(0.5, 50.0), st.floats(-1, 1), st.floats(-1, 1))
def test_energy_conserved_at_constant_speed(c, lam, u, v):
    if abs(u) + abs(v) < 1e-3:
        return
    state = ModeState(0.0, u, v, lam)
    end = propagate(make_constant(c), lam, 0.0, [17.0])[0][0] @ np.array([u, v])
    after = kowaleskian_energy(ModeState(17.0, end[0], end[1], lam), c)
    assert after == pytest.approx(kowaleskian_energy(state, c), rel=1e-12)
