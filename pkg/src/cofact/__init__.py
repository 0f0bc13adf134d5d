"""Low-rank composite factorization solvers and experiment harness.

Solves  min_{U, V}  f(U V^T) + lam * sum_i [theta(||U_i||) + theta(||V_i||)]
                    + (mu/2) * (||U||_F^2 + ||V||_F^2)

over factor pairs U (n x r), V (m x r), where f is a smooth data-fit term
(one-bit matrix completion likelihoods or a masked quadratic) and theta is
one of six column penalties with closed-form proximal maps.  Two solvers are
provided: an alternating minimization method whose block subproblems are
made closed-form by SVD subspace correction (``run_pama``), and a
line-search proximal alternating linearized minimization baseline
(``run_palm``).
"""

from ._kernels import BACKEND as kernel_backend
from .diagnostics import (
    DiagnosticReport,
    balance_gap,
    objective_eval,
    schatten_factorization_check,
    schatten_l2p_check,
    stationarity_residual,
)
from .linalg import colspace_gap
from .losses import (
    MaskedQuadraticLoss,
    ObservationSet,
    OneBitLaplaceLoss,
    OneBitLogisticLoss,
    make_loss,
    phi_cdf,
)
from .palm import PalmConfig, run_palm
from .pama import PamaConfig, PamaState, TraceRecord, load_state, run_pama, save_state
from .thresholds import (
    ThetaSpec,
    parse_theta,
    prox_column,
    prox_theta_scalar,
    theta_derivative,
    theta_eval,
    vartheta_eval,
)

__version__ = "0.1.0"

__all__ = [
    "BACKEND",
    "DiagnosticReport",
    "MaskedQuadraticLoss",
    "ObservationSet",
    "OneBitLaplaceLoss",
    "OneBitLogisticLoss",
    "PalmConfig",
    "PamaConfig",
    "PamaState",
    "ThetaSpec",
    "TraceRecord",
    "balance_gap",
    "colspace_gap",
    "kernel_backend",
    "load_state",
    "make_loss",
    "objective_eval",
    "parse_theta",
    "phi_cdf",
    "prox_column",
    "prox_theta_scalar",
    "run_palm",
    "run_pama",
    "save_state",
    "schatten_factorization_check",
    "schatten_l2p_check",
    "stationarity_residual",
    "theta_derivative",
    "theta_eval",
    "vartheta_eval",
]
