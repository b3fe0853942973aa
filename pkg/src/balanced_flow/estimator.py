"""scikit-learn style wrappers around the flow and the continuation driver.

``fit`` takes no training data: the "data" of the problem is the parameter
beta.  An optional ``X`` supplies the initial coefficient sequence.  After
fitting, ``transform`` maps points x >= 0 to the per-index densities
``e^{lam_i} x^i / f(x)`` whose integrals the solver balances.
"""

from __future__ import annotations

import warnings

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.exceptions import ConvergenceWarning
from sklearn.utils.validation import check_array, check_is_fitted

from .continuation import DEFAULT_DELTA, ContinuationPlan, continue_solve
from .diagnostics import DEFAULT_S_GRID, verify_balance
from .flow import FlowConfig, converged_sequence, integrate
from .quadrature import QuadSettings, _log_f, _power_terms
from .seqspace import CoefficientSequence, normalize


def _points(x) -> np.ndarray:
    arr = check_array(x, ensure_2d=False, dtype=np.float64)
    if arr.ndim == 2:
        if arr.shape[1] != 1:
            raise ValueError(f"expected points of shape (n,) or (n, 1), got {arr.shape}")
        arr = arr[:, 0]
    if np.any(arr < 0):
        raise ValueError("points must be nonnegative")
    return arr


class _FlowParams(BaseEstimator):
    def _quad(self) -> QuadSettings:
        return QuadSettings(rel_tol=self.rel_tol, abs_tol=self.abs_tol,
                            panel_budget=self.panel_budget, cutoff_nats=self.cutoff_nats,
                            tail_mode=self.tail_mode)

    def _flow_kwargs(self) -> dict:
        return dict(s=self.s, N=self.n_terms, M=self.window, t_max=self.t_max,
                    f_tol=self.f_tol, ode_rel_tol=self.ode_rel_tol, quad=self._quad())

    def score_samples(self, x) -> np.ndarray:
        """log f(x) for the fitted sequence."""
        check_is_fitted(self, "coef_")
        return _log_f(self.coef_, _points(x), self.tail_mode)

    def transform(self, x) -> np.ndarray:
        """Densities ``e^{lam_i} x^i / f(x)`` for i in the window, shape (n, M+1)."""
        check_is_fitted(self, "coef_")
        pts = _points(x)
        terms = _power_terms(self.coef_, pts)[: self.window_ + 1].T
        return np.exp(terms - _log_f(self.coef_, pts, self.tail_mode)[:, None])

    def balance_report(self, s_grid=DEFAULT_S_GRID):
        check_is_fitted(self, "coef_")
        return verify_balance(self.coef_, self.beta_fitted_, s_grid, self._quad())


class BalancedEmbedding(TransformerMixin, _FlowParams):
    """Solve for one beta by running the flow to convergence.

    Parameters mirror the run configuration; ``n_terms`` is the truncation
    order N and ``window`` the active window M (default N // 2).

    Attributes
    ----------
    coef_ : normalized sequence lambda (lambda_0 = 0), length N + 1
    trajectory_ : the FlowTrajectory of the run
    residual_ : residual vector rechecked at tighter quadrature, or None
    status_ : "converged" or "time_out"
    """

    def __init__(self, beta=0.3, s=0.95, n_terms=40, window=None, t_max=2000.0,
                 f_tol=1e-6, ode_rel_tol=1e-8, rel_tol=1e-10, abs_tol=1e-14,
                 panel_budget=4096, cutoff_nats=46.0, tail_mode="frozen_exp"):
        self.beta = beta
        self.s = s
        self.n_terms = n_terms
        self.window = window
        self.t_max = t_max
        self.f_tol = f_tol
        self.ode_rel_tol = ode_rel_tol
        self.rel_tol = rel_tol
        self.abs_tol = abs_tol
        self.panel_budget = panel_budget
        self.cutoff_nats = cutoff_nats
        self.tail_mode = tail_mode

    def fit(self, X=None, y=None):
        initial = None
        if X is not None:
            initial = CoefficientSequence(check_array(X, ensure_2d=False).ravel())
        cfg = FlowConfig(beta=self.beta, initial=initial, **self._flow_kwargs())
        traj = integrate(cfg)
        self.trajectory_ = traj
        self.status_ = traj.status
        self.window_ = cfg.M
        self.beta_fitted_ = float(self.beta)
        if traj.status == "converged":
            sol, self.residual_ = converged_sequence(traj)
            self.coef_ = np.asarray(sol, dtype=float)
        else:
            warnings.warn(f"flow stopped at t={traj.final.t:.4g} without converging "
                          f"(||F||_inf = {traj.final.linf_F:.3g})", ConvergenceWarning)
            self.residual_ = None
            self.coef_ = np.asarray(normalize(traj.final.lam), dtype=float)
        return self


class BetaContinuation(TransformerMixin, _FlowParams):
    """Reach large beta by restarting from converged solutions at smaller beta.

    Attributes
    ----------
    coef_ : normalized sequence at the target beta
    stages_ : list of StageReport
    schedule_ : betas visited
    balance_ : BalanceReport at the target
    """

    def __init__(self, beta=0.9, delta=DEFAULT_DELTA, beta_start=None, s=0.95, n_terms=40,
                 window=None, t_max=2000.0, f_tol=1e-6, ode_rel_tol=1e-8, rel_tol=1e-10,
                 abs_tol=1e-14, panel_budget=4096, cutoff_nats=46.0, tail_mode="frozen_exp",
                 s_grid=DEFAULT_S_GRID):
        self.beta = beta
        self.delta = delta
        self.beta_start = beta_start
        self.s = s
        self.n_terms = n_terms
        self.window = window
        self.t_max = t_max
        self.f_tol = f_tol
        self.ode_rel_tol = ode_rel_tol
        self.rel_tol = rel_tol
        self.abs_tol = abs_tol
        self.panel_budget = panel_budget
        self.cutoff_nats = cutoff_nats
        self.tail_mode = tail_mode
        self.s_grid = s_grid

    def fit(self, X=None, y=None):
        if X is not None:
            raise ValueError("continuation always starts from the reference sequence")
        plan = ContinuationPlan(beta_target=self.beta, delta=self.delta,
                                beta_start=self.beta_start, flow=self._flow_kwargs(),
                                s_grid=tuple(self.s_grid))
        result = continue_solve(plan)
        self.stages_ = result.stages
        self.schedule_ = result.schedule
        self.balance_ = result.balance
        self.coef_ = np.asarray(result.solution, dtype=float)
        self.window_ = result.stages[-1].trajectory.config.M
        self.beta_fitted_ = float(self.beta)
        return self
