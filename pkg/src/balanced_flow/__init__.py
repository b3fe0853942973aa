"""Balanced embeddings of the complex plane computed by gradient flow.

The state is the sequence ``lam_i = log|a_i|^2`` of an entire function
``f(x) = sum_i e^{lam_i} x^i``; a sequence is (beta, 1)-balanced when

    I_i(lam) = int_0^inf e^{lam_i} x^i / f(x) dx = 1 - beta * [i == 0]

for every i.  The flow ``dlam_i/dt = -s^i (I_i - 1 + beta [i == 0])``
drives any start toward such a sequence; continuation in beta reaches
every beta < 1.
"""

from .balance import (ComparisonBounds, EnergyReport, ResidualVector, comparison_bounds,
                      default_window, energy, perturbed_residual, residual)
from .config import RunConfig, parse_config
from .continuation import (ContinuationPlan, ContinuationResult, StageReport, beta_schedule,
                           continue_solve)
from .diagnostics import (BalanceReport, BoundsReport, bounds_report, check_drift,
                          check_growth, check_lambda2, check_sandwich, check_u_monotone,
                          verify_balance)
from .estimator import BalancedEmbedding, BetaContinuation
from .exceptions import (BalancedFlowError, ConfigValidationError, DivergentIntegralError,
                         DomainError, FalseConvergenceError, InvalidTruncationError,
                         QuadratureAccuracyError, ShapeError, SnapshotError, StageFailure,
                         StepFailure, UnreachableTargetError)
from .flow import (FlowConfig, FlowTrajectory, converged_sequence, initial_step, integrate,
                   s_sweep, step)
from .quadrature import (DEFAULT_QUAD, QuadratureEstimate, QuadSettings, choose_cutoff,
                         compute_I, compute_I_many, integral_ratio, log_f, log_xfprime_over_f)
from .seqspace import (CoefficientSequence, ReferenceSequence, extend_with_reference,
                       make_reference, normalize, reference_values, shifted_norm)

__version__ = "0.1.0"
