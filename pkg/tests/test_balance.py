import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from balanced_flow import (ResidualVector, ShapeError, comparison_bounds, default_window,
                           energy, make_reference, perturbed_residual, residual)


def _vec(entries, beta=0.0):
    entries = np.asarray(entries, dtype=float)
    I = entries + 1.0
    I[0] -= beta
    return ResidualVector(entries, I, beta)


def test_residual_reference_beta(ref40):
    F = residual(ref40, 0.25)
    assert F.window == default_window(40) == 20
    expected = np.zeros(21)
    expected[0] = 0.25
    np.testing.assert_allclose(F.entries, expected, atol=1e-9)


@pytest.mark.parametrize("M", [0, 5, 20, 38])
def test_fixed_point(ref40, M):
    assert residual(ref40, 0.0, M).linf() < 10 * 1e-10


def test_constant_shift_still_balanced(ref40):
    assert residual(ref40.values + 7.5, 0.0).linf() < 1e-9


def test_window_too_large(ref40):
    with pytest.raises(ShapeError):
        residual(ref40, 0.0, 39)
    with pytest.raises(ValueError):
        residual(ref40, 1.0)


def test_perturbed_residual():
    F = _vec([1.0, 1.0, 1.0])
    np.testing.assert_allclose(perturbed_residual(F, 0.5).entries, [1.0, 0.5, 0.25])
    assert np.array_equal(perturbed_residual(F, 1.0).entries, F.entries)
    G = _vec([0.25, 0.0, 0.0, 0.0], beta=0.25)
    np.testing.assert_array_equal(perturbed_residual(G, 0.5).entries, G.entries)


def test_energy_examples(ref40):
    F = residual(ref40, 0.25)
    for s in (0.5, 0.9, 1.0):
        rep = energy(F, s)
        assert rep.E_s == pytest.approx(0.0625, abs=1e-9)
        assert rep.H_s == pytest.approx(0.25, abs=1e-9)
        assert rep.G_s == pytest.approx(1.0, abs=1e-9)
    zero = energy(_vec(np.zeros(5)), 0.7)
    assert zero.E == zero.E_s == zero.H_s == 0.0


@given(arrays(np.float64, st.integers(1, 30), elements=st.floats(-2, 2)),
       st.floats(0.01, 1.0), st.floats(0, 0.99))
def test_norm_sandwich(entries, s, beta):
    rep = energy(_vec(entries, beta), s)
    assert rep.H_s ** 2 <= rep.E_s * (1 + 1e-12) + 1e-300
    assert rep.E_s <= rep.E * (1 + 1e-12)


def test_delta_structure(rng):
    lam = make_reference(40).values + np.r_[rng.uniform(-0.3, 0.3, 21), np.zeros(20)]
    a = residual(lam, 0.0)
    b = residual(lam, 0.6)
    np.testing.assert_array_equal(a.entries[1:], b.entries[1:])
    assert b.entries[0] - a.entries[0] == pytest.approx(0.6, abs=1e-15)


def test_comparison_trivial(ref40):
    same = comparison_bounds(ref40, ref40, 3)
    assert same.ratio == 1.0 and same.fdiff_actual == 0.0
    shifted = comparison_bounds(ref40, ref40.values + 0.4, 3)
    assert shifted.ratio == pytest.approx(1.0, abs=1e-12)
    assert shifted.distance == pytest.approx(0.4)


@settings(max_examples=40, deadline=None)
@given(arrays(np.float64, 21, elements=st.floats(-0.5, 0.5)),
       arrays(np.float64, 21, elements=st.floats(-0.1, 0.1)),
       st.integers(0, 10))
def test_lipschitz_comparisons(base, bump, i):
    ref = make_reference(40).values
    lam = ref.copy()
    lam[:21] += base
    other = lam.copy()
    other[:21] += bump
    cb = comparison_bounds(lam, other, i)
    d = cb.distance
    slack = 1e-9
    assert np.exp(-2 * d) - slack <= cb.ratio <= np.exp(2 * d) + slack
    assert cb.fdiff_actual <= cb.fdiff_bound + slack
