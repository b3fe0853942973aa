"""Residual map, its s-damped variant and the energy functionals.

``F_i(lam) = I_i(lam) - 1 + beta * [i == 0]``; a sequence is balanced when
every F_i vanishes.  Residuals are only formed on an active window
``0..M`` with ``M <= N - 2``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .exceptions import QuadratureAccuracyError, ShapeError
from .quadrature import DEFAULT_QUAD, QuadSettings, compute_I_many
from .seqspace import as_array


def default_window(N: int) -> int:
    return N // 2


def _check_beta(beta):
    if not 0.0 <= beta < 1.0:
        raise ValueError(f"beta must lie in [0, 1), got {beta}")


def _check_s(s):
    if not 0.0 < s <= 1.0:
        raise ValueError(f"s must lie in (0, 1], got {s}")


@dataclass(frozen=True, eq=False)
class ResidualVector:
    """Residual entries on the window 0..M.

    ``entries`` holds ``s**i * F_i``; ``integrals`` always keeps the raw
    ``I_i`` so unweighted quantities can be rebuilt at any s.
    """

    entries: np.ndarray
    integrals: np.ndarray
    beta: float
    s: float = 1.0
    abs_errors: np.ndarray | None = None

    @property
    def window(self) -> int:
        return self.entries.size - 1

    @property
    def unweighted(self) -> np.ndarray:
        F = self.integrals - 1.0
        F[0] += self.beta
        return F

    def linf(self) -> float:
        return float(np.max(np.abs(self.entries)))

    def l2(self) -> float:
        return float(np.sqrt(np.sum(self.entries ** 2)))


@dataclass(frozen=True)
class EnergyReport:
    E: float
    E_s: float
    G_s: float
    H_s: float


@dataclass(frozen=True)
class ComparisonBounds:
    ratio: float
    fdiff_bound: float
    fdiff_actual: float
    distance: float


def residual(lam, beta: float, M: int | None = None,
             q: QuadSettings = DEFAULT_QUAD) -> ResidualVector:
    """``F_i = I_i - 1 + beta*[i == 0]`` for i = 0..M (default M = N // 2)."""
    _check_beta(beta)
    arr = as_array(lam)
    N = arr.size - 1
    if M is None:
        M = default_window(N)
    if not 0 <= M <= N - 2:
        raise ShapeError(f"window M={M} must satisfy 0 <= M <= N-2 = {N - 2}")
    try:
        I, err, _, _ = compute_I_many(arr, np.arange(M + 1), q)
    except QuadratureAccuracyError as exc:
        raise QuadratureAccuracyError(
            f"residual entry {exc.index}: {exc}", estimate=exc.estimate, index=exc.index
        ) from exc
    F = I - 1.0
    F[0] += beta
    return ResidualVector(F, I, float(beta), 1.0, err)


def perturbed_residual(F: ResidualVector, s: float) -> ResidualVector:
    """Damp entry i by ``s**i``; weights compose with any already applied."""
    _check_s(s)
    if not np.all(np.isfinite(F.entries)):
        raise ValueError("residual entries must be finite")
    w = s ** np.arange(F.entries.size, dtype=float)
    return ResidualVector(F.entries * w, F.integrals, F.beta, F.s * s, F.abs_errors)


def energy(F: ResidualVector, s: float) -> EnergyReport:
    """E, E_s, G_s = max s^i I_i and H_s = max s^i |F_i| over the window."""
    _check_s(s)
    raw = F.unweighted
    w = s ** np.arange(raw.size, dtype=float)
    sq = raw * raw
    return EnergyReport(
        E=float(np.sum(sq)),
        E_s=float(np.sum(w * sq)),
        G_s=float(np.max(w * F.integrals)),
        H_s=float(np.max(w * np.abs(raw))),
    )


def comparison_bounds(lam, lam_other, i: int,
                      q: QuadSettings = DEFAULT_QUAD) -> ComparisonBounds:
    """Quantities in the two-sided comparison of ``I_i`` at nearby sequences.

    With ``d = ||lam - lam_other||_inf`` one expects
    ``exp(-2d) <= ratio <= exp(2d)`` and ``fdiff_actual <= fdiff_bound``.
    The beta term cancels in ``|F_i(lam) - F_i(lam_other)|``.
    """
    a, b = as_array(lam), as_array(lam_other)
    if a.shape != b.shape:
        raise ShapeError(f"length mismatch: {a.size} vs {b.size}")
    Ia = compute_I_many(a, [i], q)[0][0]
    Ib = compute_I_many(b, [i], q)[0][0]
    d = float(np.max(np.abs(a - b)))
    return ComparisonBounds(
        ratio=float(Ia / Ib),
        fdiff_bound=float(np.expm1(2.0 * d) * Ia),
        fdiff_actual=float(abs(Ia - Ib)),
        distance=d,
    )
