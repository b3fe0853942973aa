"""Gradient flow ``d lam_i/dt = -s**i F_i(lam)`` on the active window.

Entries above the window keep zero velocity.  Time stepping uses the
Dormand-Prince 5(4) embedded pair with first-same-as-last reuse; on top of
the usual local error test a step is rejected whenever it raises the
weighted energy ``E_s`` by more than ``ode_rel_tol * (1 + E_s)``, since
the exact flow dissipates it.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field, replace

import numpy as np

from .balance import (EnergyReport, ResidualVector, default_window, energy,
                      residual)
from .exceptions import FalseConvergenceError, ShapeError, StepFailure
from .quadrature import DEFAULT_QUAD, QuadSettings
from .seqspace import (CoefficientSequence, as_array, make_reference,
                       normalize, reference_values, shifted_norm)

log = logging.getLogger(__name__)

MIN_STEP = 1e-12

# Dormand-Prince 5(4) tableau; the field is autonomous so the nodes c_j are unused
_A = [
    [],
    [1 / 5],
    [3 / 40, 9 / 40],
    [44 / 45, -56 / 15, 32 / 9],
    [19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729],
    [9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656],
    [35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84],
]
_B5 = np.array([35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84, 0.0])
_B4 = np.array([5179 / 57600, 0.0, 7571 / 16695, 393 / 640, -92097 / 339200,
                187 / 2100, 1 / 40])
_E = _B5 - _B4


@dataclass(frozen=True)
class FlowConfig:
    beta: float
    s: float = 0.95
    N: int = 40
    M: int | None = None
    t_max: float = 2000.0
    f_tol: float = 1e-6
    ode_rel_tol: float = 1e-8
    quad: QuadSettings = DEFAULT_QUAD
    initial: CoefficientSequence | None = None

    def __post_init__(self):
        if not 0.0 <= self.beta < 1.0:
            raise ValueError(f"beta must lie in [0, 1), got {self.beta}")
        if not 0.0 < self.s <= 1.0:
            raise ValueError(f"s must lie in (0, 1], got {self.s}")
        if self.M is None:
            object.__setattr__(self, "M", default_window(self.N))
        if not 0 <= self.M <= self.N - 2:
            raise ShapeError(f"window M={self.M} must satisfy 0 <= M <= N-2")
        if not self.t_max > 0 or not self.f_tol > 0 or not self.ode_rel_tol > 0:
            raise ValueError("t_max, f_tol and ode_rel_tol must be positive")
        init = self.initial
        if init is None:
            init = make_reference(self.N)
        elif not isinstance(init, CoefficientSequence):
            init = CoefficientSequence(init)
        if init.trunc_order != self.N:
            raise ShapeError(f"initial sequence has order {init.trunc_order}, config N={self.N}")
        object.__setattr__(self, "initial", init)


@dataclass(frozen=True)
class FlowSample:
    t: float
    lam: np.ndarray
    energy: EnergyReport
    F: np.ndarray

    @property
    def linf_F(self) -> float:
        return float(np.max(np.abs(self.F)))

    @property
    def l2_F(self) -> float:
        return float(np.sqrt(np.sum(self.F ** 2)))


@dataclass
class FlowTrajectory:
    config: FlowConfig
    samples: list = field(default_factory=list)
    status: str = "time_out"
    # per accepted step: (t, E_s, E, linf_F)
    step_log: list = field(default_factory=list)
    rejected_steps: int = 0
    message: str = ""

    @property
    def final(self) -> FlowSample:
        return self.samples[-1]

    @property
    def times(self) -> np.ndarray:
        return np.array([smp.t for smp in self.samples])

    def lam_matrix(self) -> np.ndarray:
        return np.array([smp.lam for smp in self.samples])

    def energy_decay_rate(self) -> float:
        """Finite-difference dE_s/dt over the last two accepted steps."""
        if len(self.step_log) < 2:
            return 0.0
        (t0, e0, _, _), (t1, e1, _, _) = self.step_log[-2], self.step_log[-1]
        return (e1 - e0) / (t1 - t0) if t1 > t0 else 0.0


@dataclass(frozen=True)
class StepResult:
    lam_next: np.ndarray
    h_used: float
    h_next: float
    err_est: float
    residual: ResidualVector
    rejections: int


def _velocity(F: ResidualVector, s: float, N: int) -> np.ndarray:
    v = np.zeros(N + 1)
    M = F.window
    v[: M + 1] = -(s ** np.arange(M + 1, dtype=float)) * F.unweighted
    return v


def initial_step(lam0, beta: float, s: float, q: QuadSettings = DEFAULT_QUAD,
                 M: int | None = None) -> float:
    """First trial step ``1 / (3 H_s + 100 G_s)`` evaluated at ``lam0``."""
    rep = energy(residual(lam0, beta, M, q), s)
    return 1.0 / (3.0 * rep.H_s + 100.0 * rep.G_s)


def step(lam, h: float, cfg: FlowConfig, F0: ResidualVector | None = None) -> StepResult:
    """Advance one accepted step, retrying with smaller h as needed.

    ``F0`` is the residual at ``lam`` if the caller already has it.
    """
    if not h > 0:
        raise ValueError("step size must be positive")
    y = np.array(as_array(lam), dtype=float)
    N, M, s, q = cfg.N, cfg.M, cfg.s, cfg.quad
    rtol = cfg.ode_rel_tol
    if F0 is None:
        F0 = residual(y, cfg.beta, M, q)
    E0 = energy(F0, s).E_s
    k1 = _velocity(F0, s, N)
    rejections = 0
    while True:
        if h < MIN_STEP:
            raise StepFailure(f"step size underflow (h={h:.3e})", last_state=y)
        ks = [k1]
        for j in range(1, 6):
            yj = y + h * sum(a * k for a, k in zip(_A[j], ks))
            ks.append(_velocity(residual(yj, cfg.beta, M, q), s, N))
        y_new = y + h * sum(b * k for b, k in zip(_B5[:6], ks))
        F_new = residual(y_new, cfg.beta, M, q)
        ks.append(_velocity(F_new, s, N))
        err_vec = h * sum(e * k for e, k in zip(_E, ks))
        scale = rtol + rtol * np.maximum(np.abs(y), np.abs(y_new))
        err = float(np.sqrt(np.mean((err_vec[: M + 1] / scale[: M + 1]) ** 2)))
        if err <= 1.0:
            E1 = energy(F_new, s).E_s
            if E1 <= E0 + rtol * (1.0 + E0):
                factor = 5.0 if err == 0.0 else min(5.0, max(0.2, 0.9 * err ** -0.2))
                return StepResult(y_new, h, h * factor, err, F_new, rejections)
            rejections += 1
            h *= 0.5
            continue
        rejections += 1
        h *= max(0.2, 0.9 * err ** -0.2)


def _sample(t, lam, F: ResidualVector, s) -> FlowSample:
    arr = np.array(lam, dtype=float)
    arr.setflags(write=False)
    return FlowSample(float(t), arr, energy(F, s), F.unweighted)


def _sample_marks(t_max: float, per_decade: int = 8, start: float = 1e-2):
    marks = []
    t = start
    while t < t_max:
        marks.append(t)
        t *= 10.0 ** (1.0 / per_decade)
    return marks


def integrate(cfg: FlowConfig, t_eval=None, stop_on_convergence: bool = True) -> FlowTrajectory:
    """Integrate from ``cfg.initial`` until ``||F||_inf < f_tol`` or t_max.

    Without ``t_eval`` samples are taken at geometrically spaced times
    (the first accepted step past each mark) plus both endpoints.  With
    ``t_eval`` steps are clipped to land on those times exactly and only
    they (and t=0) are sampled.
    """
    traj = FlowTrajectory(cfg)
    lam = np.array(cfg.initial.values, dtype=float)
    F = residual(lam, cfg.beta, cfg.M, cfg.quad)
    t = 0.0
    traj.samples.append(_sample(t, lam, F, cfg.s))
    e0 = traj.samples[0].energy
    traj.step_log.append((t, e0.E_s, e0.E, traj.samples[0].linf_F))
    if stop_on_convergence and np.max(np.abs(F.unweighted)) < cfg.f_tol:
        traj.status = "converged"
        return traj

    if t_eval is not None:
        targets = [float(x) for x in np.asarray(t_eval, dtype=float) if 0.0 < x <= cfg.t_max]
        exact = True
    else:
        targets = _sample_marks(cfg.t_max)
        exact = False
    targets.append(cfg.t_max)
    next_target = 0

    h = 1.0 / (3.0 * e0.H_s + 100.0 * e0.G_s)
    while t < cfg.t_max:
        h = min(h, cfg.t_max - t)
        if exact:
            h = min(h, targets[next_target] - t)
        try:
            res = step(lam, h, cfg, F)
        except StepFailure as exc:
            traj.status = "step_failure"
            traj.message = str(exc)
            traj.samples.append(_sample(t, lam, F, cfg.s))
            exc.trajectory = traj
            raise
        lam, F = res.lam_next, res.residual
        traj.rejected_steps += res.rejections
        t_new = t + res.h_used
        if exact and abs(t_new - targets[next_target]) <= 1e-12 * max(1.0, t_new):
            t_new = targets[next_target]
        t = t_new
        h = res.h_next
        rep = energy(F, cfg.s)
        linf = float(np.max(np.abs(F.unweighted)))
        traj.step_log.append((t, rep.E_s, rep.E, linf))
        converged = stop_on_convergence and linf < cfg.f_tol
        due = False
        while next_target < len(targets) and t >= targets[next_target]:
            next_target += 1
            due = True
        if due or converged or t >= cfg.t_max:
            traj.samples.append(_sample(t, lam, F, cfg.s))
        if converged:
            traj.status = "converged"
            break
    else:
        traj.status = "time_out"
    log.debug("flow beta=%s s=%s finished: %s at t=%.4g after %d steps",
              cfg.beta, cfg.s, traj.status, t, len(traj.step_log) - 1)
    return traj


def converged_sequence(traj: FlowTrajectory, q: QuadSettings | None = None,
                       factor: float = 100.0):
    """Normalized final state plus a residual recomputed at tighter tolerance.

    Returns ``(sequence, residual_vector)``.
    """
    if traj.status != "converged":
        raise ValueError(f"trajectory status is {traj.status!r}, not 'converged'")
    cfg = traj.config
    q = (q or cfg.quad).tightened(factor)
    lam = normalize(CoefficientSequence(traj.final.lam))
    F = residual(lam, cfg.beta, cfg.M, q)
    linf = float(np.max(np.abs(F.unweighted)))
    if linf > 10.0 * cfg.f_tol:
        raise FalseConvergenceError(
            f"recomputed residual {linf:.3e} exceeds 10*f_tol={10 * cfg.f_tol:.1e}",
            residual_linf=linf)
    return lam, F


@dataclass
class SweepResult:
    s_values: list
    trajectories: list
    # distances[k][i] = max_t |lam_i^{s_k}(t) - lam_i^{s_{k+1}}(t)|
    distances: list
    failures: dict
    times: np.ndarray

    def sup_distances(self) -> list:
        return [float(np.max(d)) for d in self.distances]


def s_sweep(cfg: FlowConfig, s_list, horizon: float = 5.0, window: int = 10,
            n_grid: int = 51) -> SweepResult:
    """Integrate the same problem for several s on a shared grid over [0, horizon]."""
    s_values = [float(s) for s in s_list]
    if any(b <= a for a, b in zip(s_values, s_values[1:])):
        raise ValueError("s_list must be strictly increasing")
    if any(not 0.0 < s < 1.0 for s in s_values):
        raise ValueError("sweep values of s must lie in (0, 1)")
    window = min(window, cfg.M)
    grid = np.linspace(0.0, horizon, n_grid)
    trajectories, failures = [], {}
    for s in s_values:
        run_cfg = replace(cfg, s=s, t_max=horizon)
        try:
            trajectories.append(integrate(run_cfg, t_eval=grid[1:], stop_on_convergence=False))
        except StepFailure as exc:
            failures[s] = str(exc)
            trajectories.append(exc.trajectory)
    distances = []
    for k in range(len(s_values) - 1):
        a, b = trajectories[k], trajectories[k + 1]
        if s_values[k] in failures or s_values[k + 1] in failures:
            distances.append(np.full(window + 1, np.nan))
            continue
        la, lb = a.lam_matrix(), b.lam_matrix()
        n = min(la.shape[0], lb.shape[0])
        distances.append(np.max(np.abs(la[:n, : window + 1] - lb[:n, : window + 1]), axis=0))
    return SweepResult(s_values, trajectories, distances, failures, grid)


def drift(lam, N: int) -> float:
    """``||lam - ref||_2`` against the reference of order N."""
    return shifted_norm(lam, reference_values(N), 2)
