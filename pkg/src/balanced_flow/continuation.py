"""Reaching large beta by restarting the flow from converged solutions.

Starting inside the directly solvable range, each stage takes the
previous stage's normalized solution as initial value and raises beta
along ``beta_{n+1} = (1 + beta_n - delta) / 2`` until the target is hit.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np

from .diagnostics import DEFAULT_S_GRID, BalanceReport, verify_balance
from .exceptions import FalseConvergenceError, StageFailure, UnreachableTargetError
from .flow import FlowConfig, FlowTrajectory, converged_sequence, integrate
from .quadrature import DEFAULT_QUAD
from .seqspace import CoefficientSequence, normalize

log = logging.getLogger(__name__)

DEFAULT_DELTA = 0.05


def beta_schedule(delta: float, beta_target: float, beta_start: float | None = None) -> list:
    if not delta > 0:
        raise ValueError(f"delta must be positive, got {delta}")
    if beta_target >= 1.0 - delta:
        raise UnreachableTargetError(
            f"beta_target={beta_target} is not below the fixed point 1 - delta = {1 - delta}")
    if beta_start is None:
        beta_start = min(beta_target, 0.4)
    if not 0.0 <= beta_start <= beta_target:
        raise ValueError("need 0 <= beta_start <= beta_target")
    sched = [float(beta_start)]
    while sched[-1] < beta_target:
        nxt = (1.0 + sched[-1] - delta) / 2.0
        sched.append(min(nxt, float(beta_target)))
    return sched


def max_schedule_length(delta: float, beta_target: float, beta_start: float) -> int:
    gap0 = 1.0 - delta - beta_start
    gap1 = 1.0 - delta - beta_target
    steps = math.ceil(math.log2(gap0 / gap1))
    # the ratio can round to 1 when the target sits just above the start
    if beta_target > beta_start:
        steps = max(steps, 1)
    return steps + 1


@dataclass(frozen=True)
class ContinuationPlan:
    beta_target: float
    delta: float = DEFAULT_DELTA
    beta_start: float | None = None
    # FlowConfig fields shared by every stage (N, M, s, t_max, f_tol, ...)
    flow: dict = field(default_factory=dict)
    # per-stage overrides keyed by stage number
    stage_overrides: dict = field(default_factory=dict)
    s_grid: tuple = DEFAULT_S_GRID

    @property
    def schedule(self) -> list:
        return beta_schedule(self.delta, self.beta_target, self.beta_start)


@dataclass
class StageReport:
    beta: float
    trajectory: FlowTrajectory
    start_energy: float
    expected_start_energy: float
    solution: CoefficientSequence | None = None
    residual_linf: float | None = None


@dataclass
class ContinuationResult:
    solution: CoefficientSequence
    stages: list
    balance: BalanceReport | None

    @property
    def schedule(self) -> list:
        return [st.beta for st in self.stages]


def continue_solve(plan: ContinuationPlan) -> ContinuationResult:
    """Run the stages in order; every stage must converge before the next."""
    sched = plan.schedule
    if sched[0] > 0.5 - plan.delta + 1e-12:
        raise ValueError(
            f"first stage beta={sched[0]} lies outside the direct range beta <= 1/2 - delta")
    current = None
    prev_beta = 0.0
    stages = []
    for n, beta in enumerate(sched):
        opts = dict(plan.flow)
        opts.update(plan.stage_overrides.get(n, {}))
        cfg = FlowConfig(beta=beta, initial=None if current is None else normalize(current),
                         **opts)
        traj = integrate(cfg)
        report = StageReport(beta, traj, traj.samples[0].energy.E, (beta - prev_beta) ** 2)
        stages.append(report)
        log.info("stage %d beta=%.6g status=%s t=%.4g", n, beta, traj.status, traj.final.t)
        if traj.status != "converged":
            raise StageFailure(
                f"stage {n} (beta={beta}) ended with status {traj.status}",
                last_result=stages[-2].solution if n else None, stages=stages)
        try:
            sol, F = converged_sequence(traj)
        except FalseConvergenceError as exc:
            raise StageFailure(f"stage {n} (beta={beta}): {exc}",
                               last_result=stages[-2].solution if n else None,
                               stages=stages) from exc
        report.solution = sol
        report.residual_linf = float(np.max(np.abs(F.unweighted)))
        current, prev_beta = sol, beta
    quad = plan.flow.get("quad", DEFAULT_QUAD)
    balance = verify_balance(current, sched[-1], plan.s_grid, quad)
    return ContinuationResult(current, stages, balance)

