import math

import mpmath
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from balanced_flow import (DivergentIntegralError, DomainError, QuadSettings, choose_cutoff,
                           compute_I, compute_I_many, integral_ratio, log_f,
                           log_xfprime_over_f, make_reference)
from balanced_flow.quadrature import _u

TRUNC = QuadSettings(tail_mode="truncated")


def _mp_series(lam, x, start=0, weight=False):
    total = mpmath.mpf(0)
    for i in range(start, len(lam)):
        term = mpmath.e ** mpmath.mpf(lam[i]) * mpmath.mpf(x) ** i
        total += term * i if weight else term
    return total


def test_log_f_reference_frozen_tail(ref60):
    # the analytic tail makes f = e^x exactly
    assert log_f(ref60, 10.0) == pytest.approx(10.0, abs=1e-9)


def test_log_f_reference_truncated_matches_extended_precision(ref60):
    with mpmath.workdps(50):
        oracle = float(mpmath.log(_mp_series(ref60.values, 10)))
    assert abs(log_f(ref60, 10.0, "truncated") - oracle) < 1e-9
    # truncated tail sum_{i>60} 10^i / i! is far below 1e-9
    assert abs(oracle - 10.0) < 1e-9


def test_log_f_small_polynomial():
    lam = np.array([0.0, math.log(2), 0.0])
    assert log_f(lam, 3.0, "truncated") == pytest.approx(math.log(16), rel=1e-15)


def test_log_f_at_zero(rng):
    lam = rng.normal(size=12)
    assert log_f(lam, 0.0, "truncated") == lam[0]


def test_log_f_domain():
    with pytest.raises(DomainError):
        log_f(np.zeros(6), -1.0)


def test_u_reference(ref60):
    with mpmath.workdps(50):
        lam = ref60.values
        oracle = float(_mp_series(lam, 5, 1, weight=True) / _mp_series(lam, 5))
    assert log_xfprime_over_f(ref60, 5.0, "truncated") == pytest.approx(oracle, abs=1e-8)
    assert log_xfprime_over_f(ref60, 5.0) == pytest.approx(5.0, abs=1e-8)


def test_u_square():
    # f = (1 + x)^2 so u = 2x / (1 + x)
    lam = np.array([0.0, math.log(2), 0.0])
    assert log_xfprime_over_f(lam, 1.0, "truncated") == pytest.approx(1.0, rel=1e-14)
    assert log_xfprime_over_f(lam, 1e-12, "truncated") == pytest.approx(0.0, abs=1e-11)
    with pytest.raises(DomainError):
        log_xfprime_over_f(lam, 0.0)


@pytest.mark.parametrize("i", [0, 1, 5, 12, 20])
def test_I_reference_is_one(ref60, i):
    est = compute_I(ref60, i)
    assert est.value == pytest.approx(1.0, abs=1e-8)
    assert est.abs_error <= est.value * 1e-10 + 1e-14
    assert est.panels >= 1 and est.cutoff > 0


def test_I_square():
    est = compute_I(np.array([0.0, math.log(2), 0.0]), 0, TRUNC)
    assert est.value == pytest.approx(1.0, rel=1e-12)


def test_I_divergent():
    with pytest.raises(DivergentIntegralError):
        compute_I(np.zeros(2), 0, TRUNC)
    with pytest.raises(DivergentIntegralError):
        compute_I(make_reference(10), 9)


def test_I_against_mpmath_quad(rng):
    lam = make_reference(12).values + rng.uniform(-0.5, 0.5, 13)
    for i in (0, 3, 7, 10):
        with mpmath.workdps(30):
            oracle = mpmath.quad(lambda x: mpmath.e ** lam[i] * x ** i / _mp_series(lam, x),
                                 [0, 1, 10, 50, mpmath.inf])
        assert compute_I(lam, i, TRUNC).value == pytest.approx(float(oracle), rel=1e-9)


def test_ratio_reference():
    ref = make_reference(80)
    assert integral_ratio(ref, 0.5).value == pytest.approx(2.0, abs=1e-7)
    assert integral_ratio(ref, 0.9).value == pytest.approx(10.0, abs=1e-6)


def test_ratio_at_zero_is_I0(rng):
    lam = make_reference(30).values + rng.uniform(-0.3, 0.3, 31)
    assert integral_ratio(lam, 0.0).value == pytest.approx(compute_I(lam, 0).value, rel=1e-9)


def test_ratio_domain(ref40):
    for s in (1.0, 1.5, -0.1):
        with pytest.raises(DomainError):
            integral_ratio(ref40, s)
    with pytest.raises(DivergentIntegralError):
        integral_ratio(ref40, 0.5, TRUNC)


def test_cutoff(ref60):
    xs = np.linspace(0.01, 40, 4000)
    log_g = ref60.values[5] + 5 * np.log(xs) - np.array([log_f(ref60, x) for x in xs])
    peak = xs[np.argmax(log_g)]
    assert peak == pytest.approx(5.0, abs=0.02)
    X = choose_cutoff(ref60, 5)
    assert 5 < X < np.inf
    assert ref60.values[5] + 5 * math.log(X) - log_f(ref60, X) < log_g.max() - 46
    assert choose_cutoff(ref60, 0) > 46
    assert np.isfinite(choose_cutoff(ref60, 58))
    assert np.isfinite(choose_cutoff(make_reference(10), 8, TRUNC))


def test_error_honesty(rng):
    lam = make_reference(40).values.copy()
    lam[:21] += rng.uniform(-0.3, 0.3, 21)
    for i in (0, 4, 15):
        coarse = compute_I(lam, i, QuadSettings(rel_tol=1e-6))
        fine = compute_I(lam, i, QuadSettings(rel_tol=5e-7))
        assert abs(coarse.value - fine.value) <= coarse.abs_error + 1e-15


def test_generating_function_consistency(rng):
    N = 40
    for _ in range(3):
        lam = make_reference(N).values.copy()
        lam[:21] += rng.uniform(-0.3, 0.3, 21)
        I = compute_I_many(lam, np.arange(N - 1))[0]
        for s in (0.0, 0.3, 0.7, 0.95):
            series = float(np.sum(I * s ** np.arange(N - 1)))
            tail = s ** (N - 1) * I.max() / (1 - s)
            gap = integral_ratio(lam, s).value - series
            assert -1e-9 * series <= gap <= tail + 1e-9 * series


perturbation = arrays(np.float64, 21, elements=st.floats(-0.5, 0.5))


@settings(max_examples=30, deadline=None)
@given(perturbation, st.floats(1e-3, 100), st.floats(1e-3, 100))
def test_u_monotone(delta, a, b):
    if abs(a - b) < 1e-6 * max(a, b):
        return
    lam = make_reference(40).values.copy()
    lam[:21] += delta
    x1, x2 = min(a, b), max(a, b)
    u = _u(lam, np.array([x1, x2]), "frozen_exp")
    assert u[0] < u[1]


@settings(max_examples=20, deadline=None)
@given(perturbation, st.floats(-30, 30), st.integers(0, 15))
def test_I_constant_shift_invariant(delta, c, i):
    lam = make_reference(40).values.copy()
    lam[:21] += delta
    a = compute_I(lam, i).value
    b = compute_I(lam + c, i).value
    assert b == pytest.approx(a, rel=1e-9)
