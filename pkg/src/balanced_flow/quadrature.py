"""Log-domain evaluation of the associated series and its density integrals.

For a coefficient sequence ``lam`` the associated series is
``f(x) = sum_i exp(lam[i]) x**i``.  Everything here works with
``log f`` so that neither ``exp(lam[i])`` nor ``x**i`` is ever formed.

Two tail models are supported for the entries beyond the stored order N:

``"truncated"``
    f is the degree-N polynomial.  Only ``I_i`` with ``i <= N - 2`` are
    finite and ``integral_ratio`` diverges.
``"frozen_exp"``
    the missing entries are the reference entries ``-log Gamma(i+1)``
    shifted by the same constant as entry N, so that
    ``f = poly_N + exp(lam[N] - ref[N]) * (e^x - sum_{i<=N} x^i/i!)``.
    The reference sequence then reproduces ``f = e^x`` exactly and
    adding a constant to every entry rescales f as a whole.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from functools import lru_cache

import numpy as np
from scipy.special import gammainc, gammaln

from .exceptions import DivergentIntegralError, DomainError, QuadratureAccuracyError
from .seqspace import as_array

TAIL_MODES = ("truncated", "frozen_exp")


@dataclass(frozen=True)
class QuadSettings:
    rel_tol: float = 1e-10
    abs_tol: float = 1e-14
    panel_budget: int = 4096
    cutoff_nats: float = 46.0
    tail_mode: str = "frozen_exp"
    order: int = 20

    def __post_init__(self):
        if not self.rel_tol > 0 or not self.abs_tol >= 0:
            raise ValueError("rel_tol must be > 0 and abs_tol >= 0")
        if self.panel_budget < 1:
            raise ValueError("panel_budget must be >= 1")
        if not self.cutoff_nats > 0:
            raise ValueError("cutoff_nats must be > 0")
        if self.tail_mode not in TAIL_MODES:
            raise ValueError(f"tail_mode must be one of {TAIL_MODES}")
        if self.order < 15:
            raise ValueError("Gauss-Legendre order must be >= 15")

    def tightened(self, factor: float = 100.0) -> "QuadSettings":
        return replace(self, rel_tol=self.rel_tol / factor)


DEFAULT_QUAD = QuadSettings()


@dataclass(frozen=True)
class QuadratureEstimate:
    value: float
    abs_error: float
    panels: int
    cutoff: float


# ---------------------------------------------------------------------------
# series evaluation

def _tail_anchor(lam: np.ndarray) -> float:
    N = lam.size - 1
    return float(lam[N] + gammaln(N + 1.0))


def _logsumexp_rows(terms: np.ndarray) -> np.ndarray:
    """log(sum(exp(terms), axis=0)) with max shift; -inf columns stay -inf."""
    m = np.max(terms, axis=0)
    safe = np.where(np.isfinite(m), m, 0.0)
    with np.errstate(under="ignore"):
        s = np.sum(np.exp(terms - safe), axis=0)
    with np.errstate(divide="ignore"):
        return safe + np.log(s)


def _power_terms(lam: np.ndarray, x: np.ndarray, start: int = 0) -> np.ndarray:
    """Matrix of ``lam[i] + i log x`` for i >= start, shape (N+1-start, n)."""
    i = np.arange(start, lam.size, dtype=float)
    with np.errstate(divide="ignore", invalid="ignore"):
        logx = np.log(x)
        ilogx = i[:, None] * logx[None, :]
    if start == 0:
        # 0 * log(0) is the constant term, not nan
        ilogx[0] = 0.0
    return lam[start:, None] + ilogx


def _log_f(lam: np.ndarray, x: np.ndarray, tail_mode: str) -> np.ndarray:
    terms = _power_terms(lam, x)
    if tail_mode == "frozen_exp":
        N = lam.size - 1
        with np.errstate(divide="ignore"):
            tail = _tail_anchor(lam) + x + np.log(gammainc(N + 1.0, x))
        terms = np.vstack([terms, tail[None, :]])
    return _logsumexp_rows(terms)


def _log_xfprime(lam: np.ndarray, x: np.ndarray, tail_mode: str) -> np.ndarray:
    """log(x f'(x)) for x > 0."""
    i = np.arange(1, lam.size, dtype=float)
    terms = np.log(i)[:, None] + _power_terms(lam, x, start=1)
    if tail_mode == "frozen_exp":
        N = lam.size - 1
        with np.errstate(divide="ignore"):
            tail = _tail_anchor(lam) + np.log(x) + x + np.log(gammainc(float(N), x))
        terms = np.vstack([terms, tail[None, :]])
    return _logsumexp_rows(terms)


def _u(lam: np.ndarray, x: np.ndarray, tail_mode: str) -> np.ndarray:
    return np.exp(_log_xfprime(lam, x, tail_mode) - _log_f(lam, x, tail_mode))


def _check_tail_mode(tail_mode):
    if tail_mode not in TAIL_MODES:
        raise ValueError(f"tail_mode must be one of {TAIL_MODES}")


def log_f(lam, x, tail_mode: str = "frozen_exp"):
    """``log f(x)``; at x = 0 this is exactly ``lam[0]``."""
    _check_tail_mode(tail_mode)
    arr = as_array(lam)
    xa = np.asarray(x, dtype=float)
    if np.any(xa < 0) or np.any(np.isnan(xa)):
        raise DomainError("log_f is defined for x >= 0")
    out = _log_f(arr, np.atleast_1d(xa).ravel(), tail_mode).reshape(xa.shape)
    return float(out) if out.ndim == 0 else out


def log_xfprime_over_f(lam, x, tail_mode: str = "frozen_exp"):
    """``u(x) = x f'(x) / f(x)``, evaluated through log-sum-exp.

    ``u`` is strictly increasing for positive-coefficient series; it tends
    to 0 as x -> 0+.
    """
    _check_tail_mode(tail_mode)
    arr = as_array(lam)
    xa = np.asarray(x, dtype=float)
    if np.any(~(xa > 0)):
        raise DomainError("u(x) requires x > 0")
    out = _u(arr, np.atleast_1d(xa).ravel(), tail_mode).reshape(xa.shape)
    return float(out) if out.ndim == 0 else out


# ---------------------------------------------------------------------------
# peak location and cutoff

def _check_index(lam: np.ndarray, i: int):
    N = lam.size - 1
    if i < 0:
        raise ValueError(f"index must be >= 0, got {i}")
    if i > N - 2:
        raise DivergentIntegralError(
            f"I_{i} requested but only indices <= N-2 = {N - 2} are integrable")


def _peak(lam: np.ndarray, i: int, tail_mode: str, rtol: float = 1e-5) -> float:
    """Maximiser of ``i log x - log f(x)``: the root of u(x) = i.

    Only used for panel placement and the cutoff search, where the
    log-integrand is flat to second order, so a loose rtol suffices.
    """
    if i == 0:
        return 0.0
    hi = 1.0
    while _u(lam, np.array([hi]), tail_mode)[0] < i:
        hi *= 2.0
        if hi > 1e300:
            raise DomainError(f"could not bracket u(x) = {i}")
    lo = 0.0
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if _u(lam, np.array([mid]), tail_mode)[0] < i:
            lo = mid
        else:
            hi = mid
        if hi - lo <= rtol * hi:
            break
    return 0.5 * (lo + hi)


def _doubling_cutoff(log_g, peak: float, nats: float) -> float:
    top = log_g(np.array([peak]))[0] if peak > 0 else log_g(np.array([0.0]))[0]
    X = max(2.0 * peak, 1.0)
    # the remainder beyond X is about X * g(X) for every decay we meet here
    while log_g(np.array([X]))[0] + np.log(X) > top - nats:
        X *= 2.0
        if X > 1e300:
            raise DivergentIntegralError("integrand does not decay")
    return X


def _log_density(lam: np.ndarray, idx: np.ndarray, tail_mode: str):
    def log_g(x):
        with np.errstate(divide="ignore", invalid="ignore"):
            logx = np.log(x)
            ilogx = idx[:, None] * logx[None, :]
        ilogx[idx == 0] = 0.0
        return lam[idx][:, None] + ilogx - _log_f(lam, x, tail_mode)[None, :]
    return log_g


def choose_cutoff(lam, i: int, q: QuadSettings = DEFAULT_QUAD) -> float:
    """Upper limit X_max for I_i: the integrand (times X) sits at least
    ``q.cutoff_nats`` below its peak there."""
    arr = as_array(lam)
    _check_index(arr, i)
    peak = _peak(arr, i, q.tail_mode)
    log_g = _log_density(arr, np.array([i]), q.tail_mode)
    return _doubling_cutoff(lambda x: log_g(x)[0], peak, q.cutoff_nats)


# ---------------------------------------------------------------------------
# adaptive Gauss-Legendre engine

@lru_cache(maxsize=None)
def _gl_rule(order: int):
    nodes, weights = np.polynomial.legendre.leggauss(order)
    nodes.setflags(write=False)
    weights.setflags(write=False)
    return nodes, weights


def _panel_sums(log_g, a: np.ndarray, b: np.ndarray, order: int):
    """Whole-panel and two-half-panel Gauss-Legendre sums, shape (k, P)."""
    t, w = _gl_rule(order)
    m = 0.5 * (a + b)
    los = np.concatenate([a, a, m])
    his = np.concatenate([b, m, b])
    half = 0.5 * (his - los)
    x = (0.5 * (his + los))[:, None] + half[:, None] * t[None, :]
    vals = np.exp(log_g(x.ravel()))
    vals = vals.reshape(vals.shape[0], los.size, order)
    sums = np.einsum("kpn,n->kp", vals, w) * half[None, :]
    P = a.size
    return sums[:, :P], sums[:, P:2 * P] + sums[:, 2 * P:]


def _adaptive(log_g, breaks: np.ndarray, q: QuadSettings, extra_err=None):
    """Integrate exp(log_g) for k integrands over a shared panel set.

    Panels whose error share is too large are bisected until every
    integrand meets ``max(abs_tol, rel_tol*|value|)`` or the panel budget
    runs out.  Returns (values, errors, panel_count, ok).
    """
    a = breaks[:-1].astype(float)
    b = breaks[1:].astype(float)
    whole, halves = _panel_sums(log_g, a, b, q.order)
    k = whole.shape[0]
    extra = np.zeros(k) if extra_err is None else np.asarray(extra_err, dtype=float)
    while True:
        err = np.abs(whole - halves)
        values = halves.sum(axis=1)
        errors = err.sum(axis=1) + extra
        tol = np.maximum(q.abs_tol, q.rel_tol * np.abs(values))
        failing = errors > tol
        if not failing.any():
            return values, errors, a.size, True
        if a.size >= q.panel_budget:
            return values, errors, a.size, False
        share = (err[failing] / tol[failing, None]).max(axis=0)
        split = share * a.size > 1.0
        room = q.panel_budget - a.size
        if split.sum() > room:
            worst = np.argsort(-share, kind="stable")[:room]
            split = np.zeros_like(split)
            split[worst] = True
        sa, sb = a[split], b[split]
        sm = 0.5 * (sa + sb)
        na = np.concatenate([sa, sm])
        nb = np.concatenate([sm, sb])
        nw, nh = _panel_sums(log_g, na, nb, q.order)
        keep = ~split
        a = np.concatenate([a[keep], na])
        b = np.concatenate([b[keep], nb])
        whole = np.concatenate([whole[:, keep], nw], axis=1)
        halves = np.concatenate([halves[:, keep], nh], axis=1)
        order = np.argsort(a, kind="stable")
        a, b = a[order], b[order]
        whole, halves = whole[:, order], halves[:, order]


def _breakpoints(peak: float, cutoff: float) -> np.ndarray:
    """Panels of width ~sqrt(x) across the bulk, doubling beyond it."""
    bulk_end = min(cutoff, peak + 10.0 * np.sqrt(peak + 1.0) + 10.0)
    pts = [0.0]
    x = 0.0
    while x < bulk_end:
        x = min(x + max(1.0, 0.75 * np.sqrt(x)), bulk_end)
        pts.append(x)
    while x < cutoff:
        x = min(2.0 * x, cutoff)
        pts.append(x)
    return np.array(pts)


def compute_I_many(lam, indices, q: QuadSettings = DEFAULT_QUAD):
    """``I_i(lam)`` for several indices on one adaptive panel set.

    Returns (values, abs_errors, panels, cutoff).  Raises
    QuadratureAccuracyError (tagged with the worst index) if the budget
    is exhausted.
    """
    arr = as_array(lam)
    idx = np.asarray(indices, dtype=int)
    if idx.size == 0:
        return np.zeros(0), np.zeros(0), 0, 0.0
    for i in (int(idx.min()), int(idx.max())):
        _check_index(arr, i)
    log_g = _log_density(arr, idx, q.tail_mode)
    top = int(idx.max())
    peak = _peak(arr, top, q.tail_mode)
    cutoff = _doubling_cutoff(lambda x: log_g(x)[int(np.argmax(idx))], peak, q.cutoff_nats)
    if idx.min() != top:
        low = int(np.argmin(idx))
        low_peak = _peak(arr, int(idx[low]), q.tail_mode)
        cutoff = max(cutoff, _doubling_cutoff(lambda x: log_g(x)[low], low_peak, q.cutoff_nats))
    rest = np.exp(log_g(np.array([cutoff]))[:, 0]) * cutoff
    values, errors, panels, ok = _adaptive(log_g, _breakpoints(peak, cutoff), q, rest)
    if not ok:
        tol = np.maximum(q.abs_tol, q.rel_tol * np.abs(values))
        worst = int(idx[np.argmax(errors / tol)])
        raise QuadratureAccuracyError(
            f"I_{worst}: tolerance not reached with {panels} panels",
            estimate=QuadratureEstimate(float(values[np.argmax(errors / tol)]),
                                        float(errors.max()), panels, cutoff),
            index=worst)
    return values, errors, panels, cutoff


def compute_I(lam, i: int, q: QuadSettings = DEFAULT_QUAD) -> QuadratureEstimate:
    """``I_i = int_0^inf exp(lam_i) x^i / f(x) dx``."""
    values, errors, panels, cutoff = compute_I_many(lam, [int(i)], q)
    return QuadratureEstimate(float(values[0]), float(errors[0]), panels, cutoff)


def integrate_decaying(log_g, q: QuadSettings = DEFAULT_QUAD, scale: float = 1.0,
                       label: str = "integral") -> QuadratureEstimate:
    """Integrate a non-increasing ``exp(log_g(x))`` over [0, inf).

    ``log_g`` maps a 1-d array of x to log integrand values; ``scale`` is
    the expected decay length, used to seed the panels.
    """
    def rows(x):
        return log_g(x)[None, :]

    cutoff = _doubling_cutoff(log_g, 0.0, q.cutoff_nats)
    pts = [0.0]
    x = min(1.0, scale)
    while x < cutoff:
        pts.append(x)
        x *= 2.0
    pts.append(cutoff)
    rest = np.exp(log_g(np.array([cutoff]))) * cutoff
    values, errors, panels, ok = _adaptive(rows, np.array(pts), q, rest)
    est = QuadratureEstimate(float(values[0]), float(errors[0]), panels, cutoff)
    if not ok:
        raise QuadratureAccuracyError(
            f"{label}: tolerance not reached with {panels} panels", estimate=est)
    return est


def integral_ratio(lam, s: float, q: QuadSettings = DEFAULT_QUAD) -> QuadratureEstimate:
    """``int_0^inf f(s x) / f(x) dx`` for 0 <= s < 1."""
    if not 0.0 <= s < 1.0:
        raise DomainError(f"integral_ratio needs 0 <= s < 1, got {s}")
    if q.tail_mode == "truncated":
        raise DivergentIntegralError(
            "f(sx)/f(x) tends to s^N for a polynomial f; the integral diverges")
    arr = as_array(lam)

    def log_g(x):
        return _log_f(arr, s * x, q.tail_mode) - _log_f(arr, x, q.tail_mode)

    return integrate_decaying(log_g, q, 1.0 / (1.0 - s), f"integral_ratio(s={s})")
