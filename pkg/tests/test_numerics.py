import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from nilwillmore.numerics import (
    CancellationError,
    Event,
    OdeState,
    QuadratureError,
    QuadratureResult,
    StepBudgetExhausted,
    StepSizeUnderflow,
    cumulative_integral,
    fd_weights,
    finite_difference,
    grid_derivative,
    integrate_interval,
    integrate_semi_infinite,
    ode_solve,
    sample_derivative,
)

# 10^7-panel midpoint sum of the H = 1/2 area integrand on [0, 10], computed once
AREA_HALF_TRUNCATED = 10.242786680429257


def _area_integrand_half(r):
    d = (r * r - 1) ** 2 + (r * r + 1) ** 2
    return 32 * r * (1 + r * r) ** 2 / d**2


# -- quadrature --------------------------------------------------------------

def test_quadrature_result_invariants():
    with pytest.raises(ValueError):
        QuadratureResult(1.0, -1.0, 1)
    with pytest.raises(ValueError):
        QuadratureResult(1.0, 0.0, 0)


def test_integrate_constant():
    res = integrate_interval(lambda x: np.ones_like(x), 0.0, 1.0, tol=1e-12)
    assert res.value == pytest.approx(1.0, abs=1e-15)
    assert res.err_estimate >= 0 and res.evaluations >= 1


def test_integrate_sin():
    res = integrate_interval(np.sin, 0.0, np.pi, tol=1e-12)
    assert abs(res.value - 2.0) <= max(1e-12, res.err_estimate)


def test_integrate_area_integrand_against_riemann_sum():
    res = integrate_interval(_area_integrand_half, 0.0, 10.0, tol=1e-12)
    assert res.value == pytest.approx(AREA_HALF_TRUNCATED, abs=1e-8)


def test_integrate_scalar_only_callable():
    res = integrate_interval(lambda x: math.exp(x), 0.0, 1.0, tol=1e-12)
    assert res.value == pytest.approx(math.e - 1, abs=1e-12)


def test_integrate_empty_interval_and_bad_args():
    assert integrate_interval(np.sin, 1.0, 1.0).value == 0.0
    with pytest.raises(ValueError):
        integrate_interval(np.sin, 1.0, 0.0)
    with pytest.raises(ValueError):
        integrate_interval(np.sin, 0.0, 1.0, tol=0.0)


def test_integrate_nonconvergence_carries_partial():
    with pytest.raises(QuadratureError) as info:
        integrate_interval(lambda x: np.abs(x - 0.3) ** -0.5, 0.0, 1.0, tol=1e-14, max_intervals=5)
    assert info.value.partial is not None
    assert np.isfinite(info.value.partial.value)


def test_semi_infinite_rational_examples():
    assert integrate_semi_infinite(lambda r: 2 * r / (1 + r * r) ** 2, tol=1e-12).value == pytest.approx(1.0, abs=1e-11)
    assert integrate_semi_infinite(lambda r: 4 * r / (1 + r * r) ** 3, tol=1e-12).value == pytest.approx(1.0, abs=1e-11)


def test_semi_infinite_area_at_half():
    res = integrate_semi_infinite(_area_integrand_half, tol=1e-12)
    assert res.value == pytest.approx((8 * np.pi + 4 * np.pi**2) / (2 * np.pi), abs=1e-10)


def test_semi_infinite_nan_names_abscissa():
    def f(r):
        return np.where(np.abs(r - 2.0) < 0.5, np.nan, 1.0 / (1 + r * r))

    with pytest.raises(QuadratureError) as info:
        integrate_semi_infinite(f)
    assert info.value.abscissa is not None
    assert abs(info.value.abscissa - 2.0) < 0.5
    assert repr(info.value.abscissa) in str(info.value)


@settings(max_examples=60)
@given(coeffs=st.lists(st.floats(-3, 3), min_size=1, max_size=21),
       a=st.floats(-2, 0), width=st.floats(0.1, 3))
def test_quadrature_exact_on_polynomials(coeffs, a, width):
    b = a + width
    p = np.polynomial.Polynomial(coeffs)
    exact = p.integ()(b) - p.integ()(a)
    res = integrate_interval(p, a, b, tol=1e-10)
    scale = np.polynomial.Polynomial(np.abs(coeffs)).integ()(max(abs(a), abs(b))) + 1
    assert abs(res.value - exact) <= 1e-12 * scale


# -- ODE ------------------------------------------------------------------------

def test_ode_exponential():
    tr = ode_solve(lambda s, y: y, OdeState(0.0, [1.0]), 1.0, tol=1e-12)
    assert tr.final.y[0] == pytest.approx(math.e, abs=1e-10)
    assert tr.final.s == 1.0


def test_ode_circle_closes():
    rhs = lambda s, y: np.array([np.cos(y[2]), np.sin(y[2]), 1.0])
    tr = ode_solve(rhs, OdeState(0.0, [0.0, 0.0, 0.0]), 2 * np.pi, tol=1e-12)
    assert np.hypot(tr.final.y[0], tr.final.y[1]) < 1e-10


def test_ode_dense_output_matches_solution():
    tr = ode_solve(lambda s, y: -y, OdeState(0.0, [1.0]), 3.0, tol=1e-11)
    s = np.linspace(0, 3, 101)
    np.testing.assert_allclose(tr(s)[:, 0], np.exp(-s), atol=1e-9)
    with pytest.raises(ValueError):
        tr(3.5)


def test_ode_terminal_event():
    tr = ode_solve(lambda s, y: np.array([1.0]), OdeState(0.0, [0.0]), 10.0,
                   events=[Event(lambda s, y: y[0] - 0.5)])
    assert tr.terminated
    assert tr.event_s[0] == pytest.approx(0.5, abs=1e-14)
    assert tr.final.s == pytest.approx(0.5, abs=1e-14)


def test_ode_is_bit_reproducible():
    rhs = lambda s, y: np.array([y[1], -np.sin(y[0])])
    a = ode_solve(rhs, OdeState(0.0, [1.0, 0.0]), 20.0, tol=1e-10)
    b = ode_solve(rhs, OdeState(0.0, [1.0, 0.0]), 20.0, tol=1e-10)
    assert np.array_equal(a.s, b.s) and np.array_equal(a.y, b.y)


def test_ode_step_size_underflow_at_blowup():
    with pytest.raises(StepSizeUnderflow) as info:
        ode_solve(lambda s, y: y * y, OdeState(0.0, [1.0]), 2.0, tol=1e-10)
    assert info.value.state.s < 1.0


def test_ode_budget_exhausted():
    with pytest.raises(StepBudgetExhausted):
        ode_solve(lambda s, y: np.cos(50 * s) * np.ones(1), OdeState(0.0, [0.0]), 100.0, max_steps=5)


def test_ode_state_validation():
    with pytest.raises(ValueError):
        OdeState(0.0, [np.nan])
    with pytest.raises(ValueError):
        ode_solve(lambda s, y: y, OdeState(1.0, [1.0]), 0.5)


# -- finite differences ------------------------------------------------------------

def test_fd_quadratic_is_exact():
    assert finite_difference(lambda x: x * x, 3.0, order=2, step=1e-3) == pytest.approx(6.0, abs=1e-9)


def test_fd_sin_at_zero():
    step = 1e-3
    assert abs(finite_difference(np.sin, 0.0, order=2, step=step) - 1.0) < step**2


@pytest.mark.parametrize("order", [2, 4])
def test_fd_convergence_order(order):
    errs = [abs(finite_difference(np.exp, 0.5, order=order, step=h) - np.exp(0.5)) for h in (0.1, 0.05)]
    assert abs(np.log2(errs[0] / errs[1]) - order) < 0.2


def test_fd_jacobian_shape():
    J = finite_difference(lambda v: np.array([v[0] * v[1], v[0] + v[1], np.sin(v[0])]), [1.0, 2.0], order=4)
    np.testing.assert_allclose(J, [[2, 1], [1, 1], [np.cos(1.0), 0]], atol=1e-10)


def test_fd_detects_cancellation():
    with pytest.raises(CancellationError):
        finite_difference(lambda x: 1e6 + np.sin(x), 0.3, order=2, step=1e-13)


def test_fd_rejects_bad_arguments():
    with pytest.raises(ValueError):
        finite_difference(np.sin, 0.0, step=0.0)
    with pytest.raises(ValueError):
        finite_difference(np.sin, 0.0, order=3)


def test_fd_weights_central():
    np.testing.assert_allclose(fd_weights((-1, 0, 1), 1), [-0.5, 0, 0.5], atol=1e-15)
    np.testing.assert_allclose(fd_weights((-2, -1, 0, 1, 2), 1), [1 / 12, -2 / 3, 0, 2 / 3, -1 / 12], atol=1e-14)


@pytest.mark.parametrize("order", [2, 4])
def test_grid_derivative_order(order):
    errs = []
    for n in (41, 81):
        x = np.linspace(0, 1, n)
        d = grid_derivative(np.sin(3 * x), x[1] - x[0], axis=0, order=order)
        half = order // 2
        assert np.all(np.isnan(d[:half])) and np.all(np.isnan(d[-half:]))
        errs.append(np.nanmax(np.abs(d - 3 * np.cos(3 * x))[::(n - 1) // 40]))
    assert abs(np.log2(errs[0] / errs[1]) - order) < 0.3


def test_grid_derivative_propagates_nan():
    f = np.arange(20, dtype=float)
    f[10] = np.nan
    d = grid_derivative(f, 1.0, axis=0, order=2)
    assert np.isnan(d[9]) and np.isnan(d[11]) and d[5] == pytest.approx(1.0)


def test_sample_derivative_exact_on_quartic():
    x = np.linspace(0, 2, 21)
    d = sample_derivative(x**4 - x, x[1] - x[0], order=4)
    np.testing.assert_allclose(d, 4 * x**3 - 1, atol=1e-10)


def test_sample_derivative_periodic():
    x = np.linspace(0, 2 * np.pi, 65)[:-1]
    d = sample_derivative(np.sin(x), x[1] - x[0], order=4, periodic=True)
    assert np.max(np.abs(d - np.cos(x))) < 1e-5


def test_cumulative_integral_exact_on_cubics():
    x = np.linspace(-1, 2, 31)
    f = 2 * x**3 - x + 0.5
    F = 0.5 * x**4 - 0.5 * x**2 + 0.5 * x
    np.testing.assert_allclose(cumulative_integral(f, x[1] - x[0]), F - F[0], atol=1e-13)
    with pytest.raises(ValueError):
        cumulative_integral([1.0, 2.0], 0.1)
