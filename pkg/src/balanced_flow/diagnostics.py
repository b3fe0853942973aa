"""Numerical checks of the balance identity and the a priori inequalities.

None of these certify anything; they evaluate both sides of known
inequalities by quadrature and report signed margins, so a negative
margin beyond quadrature tolerance points at a bug or a truncation
artefact.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.special import gammaln

from .balance import default_window, residual
from .exceptions import BalancedFlowError
from .quadrature import (DEFAULT_QUAD, QuadSettings, _u, compute_I_many,
                         integral_ratio, integrate_decaying)
from .seqspace import as_array, normalize, reference_values

DEFAULT_S_GRID = (0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9)


@dataclass
class BalanceReport:
    """Generating-function identity ``int f(sx)/f(x) dx = 1/(1-s) - beta``.

    Relative errors are measured against ``1/(1-s)``.  ``tail_allowance``
    is the relative size of ``s**(N-1) * sup_i I_i / (1-s)``, the part of
    the series the stored entries cannot pin down; ``max_rel_err`` is the
    largest error left after subtracting it.
    """

    beta: float
    s_grid: list
    lhs: list
    rhs: list
    rel_err: list
    tail_allowance: list
    max_rel_err: float
    raw_max_rel_err: float
    window_note: str
    failures: dict = field(default_factory=dict)

    def passed(self, tol: float) -> bool:
        return not self.failures and self.max_rel_err < tol

    def to_dict(self) -> dict:
        return {
            "beta": self.beta,
            "s_grid": list(self.s_grid),
            "lhs": list(self.lhs),
            "rhs": list(self.rhs),
            "rel_err": list(self.rel_err),
            "tail_allowance": list(self.tail_allowance),
            "max_rel_err": self.max_rel_err,
            "raw_max_rel_err": self.raw_max_rel_err,
            "window_note": self.window_note,
            "failures": {str(k): v for k, v in self.failures.items()},
        }


def verify_balance(lam, beta: float, s_grid=DEFAULT_S_GRID,
                   q: QuadSettings = DEFAULT_QUAD) -> BalanceReport:
    arr = as_array(lam)
    N = arr.size - 1
    if any(not 0.0 <= s < 1.0 for s in s_grid):
        raise ValueError("every s in the grid must satisfy 0 <= s < 1")
    sup_I = float(np.max(compute_I_many(arr, np.arange(N - 1), q)[0]))
    lhs, rhs, rel, tail, failures = [], [], [], [], {}
    for s in s_grid:
        r = 1.0 / (1.0 - s) - beta
        allowance = s ** (N - 1) * sup_I if s > 0 else 0.0
        try:
            value = integral_ratio(arr, s, q).value
        except BalancedFlowError as exc:
            failures[s] = str(exc)
            value = float("nan")
        lhs.append(value)
        rhs.append(r)
        rel.append(abs(value - r) * (1.0 - s))
        tail.append(allowance)
    excess = [max(0.0, e - a) for e, a in zip(rel, tail) if np.isfinite(e)]
    raw = [e for e in rel if np.isfinite(e)]
    return BalanceReport(
        beta=float(beta),
        s_grid=[float(s) for s in s_grid],
        lhs=lhs,
        rhs=rhs,
        rel_err=rel,
        tail_allowance=tail,
        max_rel_err=max(excess) if excess else float("nan"),
        raw_max_rel_err=max(raw) if raw else float("nan"),
        window_note=(f"tail allowance s^{N - 1} * sup_(i<={N - 2}) I_i / (1-s), "
                     f"sup I = {sup_I:.12g}"),
        failures=failures,
    )


@dataclass(frozen=True)
class SandwichMargin:
    t: float
    lower: float
    middle: float
    upper: float
    abs_error: float

    @property
    def lower_margin(self) -> float:
        return self.middle - self.lower

    @property
    def upper_margin(self) -> float:
        return self.upper - self.middle


def check_sandwich(lam, t_grid, q: QuadSettings = DEFAULT_QUAD) -> list:
    """Evaluate ``(1-t) int f((1-t)x)/f(x)  <=  int exp(-t u(x))  <=
    int f(x/(1+t))/f(x)`` for each t in (0, 1)."""
    arr = as_array(lam)
    out = []
    for t in t_grid:
        if not 0.0 < t < 1.0:
            raise ValueError(f"t must lie in (0, 1), got {t}")
        lo = integral_ratio(arr, 1.0 - t, q)
        hi = integral_ratio(arr, 1.0 / (1.0 + t), q)
        mid = integrate_decaying(lambda x, t=t: -t * _u(arr, x, q.tail_mode), q,
                                 1.0 / t, f"exp(-t u) at t={t}")
        out.append(SandwichMargin(
            t=float(t),
            lower=(1.0 - t) * lo.value,
            middle=mid.value,
            upper=hi.value,
            abs_error=(1.0 - t) * lo.abs_error + mid.abs_error + hi.abs_error,
        ))
    return out


@dataclass(frozen=True)
class Lambda2Check:
    applicable: bool
    bound: float
    value: float

    @property
    def margin(self) -> float:
        return self.bound - self.value if self.applicable else float("nan")


def check_lambda2(lam, beta: float, q: QuadSettings = DEFAULT_QUAD,
                  F0: float | None = None) -> Lambda2Check:
    """``exp(lam_2 / 2) <= pi / (2 (1 - beta + F_0))`` on the normalized sequence.

    Non-normalized input is normalized first.  ``F0`` may be supplied to
    skip the quadrature.
    """
    arr = normalize(as_array(lam))
    if F0 is None:
        F0 = float(residual(arr, beta, 0, q).entries[0])
    denom = 1.0 - beta + F0
    value = float(np.exp(arr[2] / 2.0))
    if denom <= 0:
        return Lambda2Check(False, float("inf"), value)
    return Lambda2Check(True, float(np.pi / (2.0 * denom)), value)


@dataclass(frozen=True)
class GrowthReport:
    rates: np.ndarray
    rate_max: float
    rate_min: float
    c9_like: float

    def to_dict(self) -> dict:
        return {"rates": self.rates.tolist(), "rate_max": self.rate_max,
                "rate_min": self.rate_min, "c9_like": self.c9_like}


def check_growth(lam, M: int | None = None) -> GrowthReport:
    """Fit the envelope ``lam_i + log Gamma(i+1) ~ rate * (i+1)`` on 0..M.

    ``rate_min`` plays the role of the log of the lower-envelope base,
    ``-rate_max`` that of the upper one.  ``c9_like`` is
    ``max_{1<=i<=M} exp(lam_i / i)``, the smallest base with
    ``exp(lam_i) <= C**i`` on the window.  No thresholds are applied.
    """
    arr = normalize(as_array(lam))
    if M is None:
        M = default_window(arr.size - 1)
    i = np.arange(M + 1, dtype=float)
    rates = (arr[: M + 1] + gammaln(i + 1.0)) / (i + 1.0)
    c9 = float(np.max(np.exp(arr[1: M + 1] / i[1:]))) if M >= 1 else float("nan")
    return GrowthReport(rates, float(rates.max()), float(rates.min()), c9)


@dataclass(frozen=True)
class DriftCheck:
    ok: bool
    residual_failures: list
    drift_failures: list
    worst_residual_margin: float
    worst_drift_margin: float


def check_drift(traj, beta: float, slack: float = 1e-6) -> DriftCheck:
    """``||F||_2 <= beta`` and ``||lam(t) - ref||_2 <= beta t`` at every sample."""
    N = traj.config.N
    ref = reference_values(N)
    bad_F, bad_d = [], []
    worst_F = worst_d = float("inf")
    for k, smp in enumerate(traj.samples):
        mF = beta + slack - smp.l2_F
        md = beta * smp.t + slack - float(np.linalg.norm(smp.lam - ref))
        worst_F, worst_d = min(worst_F, mF), min(worst_d, md)
        if mF < 0:
            bad_F.append(k)
        if md < 0:
            bad_d.append(k)
    return DriftCheck(not bad_F and not bad_d, bad_F, bad_d, worst_F, worst_d)


def check_u_monotone(lam, n_probes: int = 1000, rng=None, x_max: float = 200.0,
                     tail_mode: str = "frozen_exp") -> float:
    """Smallest ``u(x2) - u(x1)`` over random pairs ``0 < x1 < x2``."""
    rng = np.random.default_rng(rng)
    arr = as_array(lam)
    a = rng.uniform(1e-3, x_max, n_probes)
    b = rng.uniform(1e-3, x_max, n_probes)
    x1, x2 = np.minimum(a, b), np.maximum(a, b)
    keep = x2 > x1 * (1.0 + 1e-9)
    return float(np.min(_u(arr, x2[keep], tail_mode) - _u(arr, x1[keep], tail_mode)))


@dataclass
class BoundsReport:
    u_monotone_ok: bool
    u_worst_margin: float
    sandwich_ok: bool
    sandwich_worst_margin: float
    lambda2_ok: bool
    lambda2_margin: float
    growth: GrowthReport
    drift_ok: bool | None = None
    drift: DriftCheck | None = None

    def to_dict(self) -> dict:
        d = {
            "u_monotone_ok": self.u_monotone_ok,
            "u_worst_margin": self.u_worst_margin,
            "sandwich_ok": self.sandwich_ok,
            "sandwich_worst_margin": self.sandwich_worst_margin,
            "lambda2_ok": self.lambda2_ok,
            "lambda2_margin": self.lambda2_margin,
            "growth": self.growth.to_dict(),
            "drift_ok": self.drift_ok,
        }
        if self.drift is not None:
            d["drift_worst_residual_margin"] = self.drift.worst_residual_margin
            d["drift_worst_margin"] = self.drift.worst_drift_margin
        return d


def bounds_report(lam, beta: float, q: QuadSettings = DEFAULT_QUAD, traj=None,
                  t_grid=(0.1, 0.3, 0.5, 0.7, 0.9), n_probes: int = 1000,
                  seed: int = 0) -> BoundsReport:
    tol = 10.0 * q.rel_tol
    u_margin = check_u_monotone(lam, n_probes, seed, tail_mode=q.tail_mode)
    sandwich = check_sandwich(lam, t_grid, q)
    s_margin = min(min(m.lower_margin / max(m.middle, 1.0),
                       m.upper_margin / max(m.middle, 1.0)) for m in sandwich)
    l2 = check_lambda2(lam, beta, q)
    drift = check_drift(traj, beta) if traj is not None else None
    return BoundsReport(
        u_monotone_ok=u_margin > 0,
        u_worst_margin=u_margin,
        sandwich_ok=s_margin >= -tol,
        sandwich_worst_margin=s_margin,
        lambda2_ok=(not l2.applicable) or l2.margin >= 0,
        lambda2_margin=l2.margin,
        growth=check_growth(lam),
        drift_ok=None if drift is None else drift.ok,
        drift=drift,
    )
