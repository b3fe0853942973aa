"""Truncated coefficient sequences, the Gaussian reference sequence and
shifted norms.

A sequence ``lam`` stores ``lam[i] = log |a_i|^2`` for the embedding
``z -> [a_0 : a_1 z : a_2 z^2 : ...]``.  Values are always kept in the log
domain; ``exp(lam[i])`` underflows for the reference sequence around i=170.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import gammaln

from .exceptions import InvalidTruncationError, ShapeError

MIN_TRUNCATION = 4


def _frozen(values) -> np.ndarray:
    arr = np.array(values, dtype=float, copy=True)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class CoefficientSequence:
    """Immutable truncated sequence ``(lam_0, ..., lam_N)``."""

    values: np.ndarray

    def __post_init__(self):
        arr = _frozen(self.values)
        if arr.ndim != 1:
            raise ShapeError(f"expected a 1-d sequence, got shape {arr.shape}")
        if arr.size - 1 < MIN_TRUNCATION:
            raise InvalidTruncationError(
                f"truncation order N={arr.size - 1} < {MIN_TRUNCATION}")
        if not np.all(np.isfinite(arr)):
            raise ValueError("sequence entries must be finite")
        object.__setattr__(self, "values", arr)

    @property
    def trunc_order(self) -> int:
        return self.values.size - 1

    def __len__(self):
        return self.values.size

    def __array__(self, dtype=None, copy=None):
        if dtype is None:
            return self.values
        return self.values.astype(dtype)

    def __eq__(self, other):
        if not isinstance(other, CoefficientSequence):
            return NotImplemented
        return np.array_equal(self.values, other.values)

    def __hash__(self):
        return hash(self.values.tobytes())

    def __repr__(self):
        return f"{type(self).__name__}(N={self.trunc_order})"


class ReferenceSequence(CoefficientSequence):
    """The explicit beta=0 solution ``lam_i = -log Gamma(i+1)``, i.e. f = e^x."""


def as_array(lam) -> np.ndarray:
    """Plain float array view of a sequence or array-like."""
    if isinstance(lam, CoefficientSequence):
        return lam.values
    return np.asarray(lam, dtype=float)


def make_reference(N: int) -> ReferenceSequence:
    if int(N) != N or N < MIN_TRUNCATION:
        raise InvalidTruncationError(f"N must be an integer >= {MIN_TRUNCATION}, got {N}")
    return ReferenceSequence(reference_values(N))


def reference_values(N: int) -> np.ndarray:
    """``-log Gamma(i+1)`` for i=0..N without the N >= 4 restriction."""
    i = np.arange(int(N) + 1, dtype=float)
    vals = -gammaln(i + 1.0)
    # Gamma(1) = Gamma(2) = 1; pin so the invariant holds bit-exactly
    vals[: min(2, vals.size)] = 0.0
    return vals


def shifted_norm(lam, ref, p=2) -> float:
    """``||lam - ref||_p`` over the stored indices, p in {2, inf}."""
    a, b = as_array(lam), as_array(ref)
    if a.shape != b.shape:
        raise ShapeError(f"length mismatch: {a.size} vs {b.size}")
    diff = a - b
    if p == 2:
        # scaled so tiny entries do not underflow when squared
        big = float(np.max(np.abs(diff))) if diff.size else 0.0
        if big == 0.0:
            return 0.0
        return big * float(np.sqrt(np.sum((diff / big) ** 2)))
    if p in (np.inf, "inf", float("inf")):
        return float(np.max(np.abs(diff))) if diff.size else 0.0
    raise ValueError(f"unsupported norm p={p!r}; use 2 or inf")


def normalize(lam):
    """Shift so that entry 0 is exactly zero.

    Returns the same kind of object it was given (sequence or array).
    """
    arr = as_array(lam)
    out = arr - arr[0]
    if isinstance(lam, CoefficientSequence):
        return CoefficientSequence(out)
    return out


def extend_with_reference(lam, N: int) -> CoefficientSequence:
    """Pad ``lam`` to order N, filling missing entries from the reference."""
    arr = as_array(lam)
    if arr.size - 1 > N:
        raise ShapeError(f"cannot shrink a sequence of order {arr.size - 1} to {N}")
    full = reference_values(N)
    full[: arr.size] = arr
    return CoefficientSequence(full)
