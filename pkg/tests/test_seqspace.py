import math

import mpmath
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from balanced_flow import (CoefficientSequence, InvalidTruncationError, ReferenceSequence,
                           ShapeError, extend_with_reference, make_reference, normalize,
                           shifted_norm)

finite = st.floats(-50, 50, allow_nan=False, allow_infinity=False)
sequences = arrays(np.float64, st.integers(5, 40), elements=finite)


def test_reference_small():
    ref = make_reference(4)
    assert isinstance(ref, ReferenceSequence)
    expected = [0.0, 0.0, -math.log(2), -math.log(6), -math.log(24)]
    np.testing.assert_allclose(ref.values, expected, rtol=1e-15)
    assert ref.values[0] == 0.0 and ref.values[1] == 0.0


def test_reference_matches_big_int_factorial():
    ref = make_reference(60)
    for i in (10, 25, 50, 60):
        with mpmath.workdps(40):
            exact = -mpmath.log(mpmath.mpf(math.factorial(i)))
        assert abs(ref.values[i] - float(exact)) <= 1e-10 * abs(float(exact))


def test_reference_nonincreasing():
    assert np.all(np.diff(make_reference(200).values[1:]) <= 0)


@pytest.mark.parametrize("N", [0, 1, 3])
def test_reference_rejects_short(N):
    with pytest.raises(InvalidTruncationError):
        make_reference(N)


@pytest.mark.parametrize("M,N", [(4, 10), (20, 40), (39, 80)])
def test_reference_prefix(M, N):
    assert np.array_equal(make_reference(N).values[: M + 1], make_reference(M).values)


def test_sequence_validation():
    with pytest.raises(ValueError):
        CoefficientSequence(np.array([0.0, 1.0, np.nan, 0.0, 0.0]))
    with pytest.raises(InvalidTruncationError):
        CoefficientSequence(np.zeros(3))
    seq = CoefficientSequence(np.zeros(6))
    assert seq.trunc_order == 5 and len(seq) == 6
    with pytest.raises(ValueError):
        seq.values[0] = 1.0


def test_shifted_norm_examples(ref40):
    lam = ref40.values.copy()
    assert shifted_norm(lam, ref40, 2) == 0 and shifted_norm(lam, ref40, np.inf) == 0
    lam[0] += 1.0
    assert shifted_norm(lam, ref40, np.inf) == 1.0
    lam = ref40.values.copy()
    lam[0] += 3.0
    lam[1] += 4.0
    assert shifted_norm(lam, ref40, 2) == pytest.approx(5.0, rel=1e-15)
    with pytest.raises(ShapeError):
        shifted_norm(lam[:-1], ref40)


def test_normalize_example():
    out = normalize(np.array([1.0, 0.5, -0.2]))
    np.testing.assert_allclose(out, [0.0, -0.5, -1.2])
    assert out[0] == 0.0


def test_normalize_keeps_type(ref40):
    assert isinstance(normalize(CoefficientSequence(ref40.values + 2.0)), CoefficientSequence)


@given(sequences, finite)
def test_normalize_idempotent_and_shift_invariant(lam, c):
    once = normalize(lam)
    assert once[0] == 0.0
    np.testing.assert_array_equal(normalize(once), once)
    np.testing.assert_allclose(normalize(lam + c), once, atol=1e-12)


@given(sequences)
def test_inf_norm_below_two_norm(lam):
    ref = np.zeros_like(lam)
    assert shifted_norm(lam, ref, np.inf) <= shifted_norm(lam, ref, 2) * (1 + 1e-15)


@settings(max_examples=25)
@given(arrays(np.float64, st.integers(5, 20), elements=finite), st.integers(20, 60))
def test_extend_fills_from_reference(lam, N):
    out = extend_with_reference(lam, N)
    ref = make_reference(N).values
    assert out.trunc_order == N
    np.testing.assert_array_equal(out.values[: lam.size], lam)
    np.testing.assert_array_equal(out.values[lam.size:], ref[lam.size:])
