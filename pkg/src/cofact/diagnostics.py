"""Computable certificates for factor pairs.

Everything here works on plain arrays and a loss object: the composite
objective, a first-order stationarity residual, the Gram balance gap, column
space containment gaps, and the spectral-vs-column norm comparisons used as
randomized property checks.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .linalg import colspace_gap, column_rank
from .thresholds import ThetaSpec, theta_derivative, vartheta_eval

__all__ = [
    "DiagnosticReport",
    "balance_gap",
    "colspace_gap",
    "diagnostic_report",
    "objective_eval",
    "schatten_factorization_check",
    "schatten_l2p_check",
    "stationarity_residual",
]


def objective_eval(loss, theta: ThetaSpec, lam: float, mu: float, U, V) -> float:
    """f(U V^T) + lam*[vartheta(U) + vartheta(V)] + (mu/2)(||U||^2 + ||V||^2)."""
    U = np.asarray(U, dtype=float)
    V = np.asarray(V, dtype=float)
    fval = loss.value(U @ V.T)
    reg = lam * (vartheta_eval(theta, U) + vartheta_eval(theta, V))
    ridge = 0.5 * mu * (np.linalg.norm(U) ** 2 + np.linalg.norm(V) ** 2)
    return float(fval + reg + ridge)


def _side_residual(theta, lam, mu, grad_times_other, W):
    """Stationarity pieces for one factor; returns (sq_norm, zero_ok).

    Nonzero columns contribute the squared norm of
    grad-part + mu*col + lam*theta'(||col||)*col/||col||; for exactly-zero
    columns membership of the negative gradient part in the subdifferential
    is certified only where the penalty admits a simple test (always for
    theta1, a norm bound for theta3), otherwise flagged uncertified.
    """
    sq = 0.0
    certified = True
    norms = np.linalg.norm(W, axis=0)
    for j in range(W.shape[1]):
        if norms[j] > 0.0:
            res = grad_times_other[:, j] + mu * W[:, j] + lam * theta_derivative(
                theta, norms[j]
            ) * W[:, j] / norms[j]
            sq += float(res @ res)
        else:
            if theta.kind == 1:
                continue
            if theta.kind == 3:
                if np.linalg.norm(grad_times_other[:, j]) > lam + 1e-12:
                    certified = False
            else:
                certified = False
    return sq, certified


def stationarity_residual(loss, theta: ThetaSpec, lam: float, mu: float, U, V):
    """First-order residual at (U, V) and a zero-column certificate flag.

    Returns ``(residual, certified)``: the Frobenius norm over nonzero
    columns of both blocks' stationarity equations, and whether every
    exactly-zero column passed its subdifferential membership test.
    """
    U = np.asarray(U, dtype=float)
    V = np.asarray(V, dtype=float)
    G = loss.gradient(U @ V.T)
    sq_u, ok_u = _side_residual(theta, lam, mu, G @ V, U)
    sq_v, ok_v = _side_residual(theta, lam, mu, G.T @ U, V)
    return float(np.sqrt(sq_u + sq_v)), bool(ok_u and ok_v)


def balance_gap(U, V):
    """(||U^T U - V^T V||_F, nonzero-column index sets match)."""
    U = np.asarray(U, dtype=float)
    V = np.asarray(V, dtype=float)
    gap = float(np.linalg.norm(U.T @ U - V.T @ V))
    match = bool(
        np.array_equal(np.linalg.norm(U, axis=0) > 0, np.linalg.norm(V, axis=0) > 0)
    )
    return gap, match


def schatten_l2p_check(X, p: float, rel_tol: float = 1e-9) -> bool:
    """Whether sum(sigma_i^p) <= sum(||X_j||^p) holds up to relative slack."""
    if not 0 < p <= 1:
        raise ValueError("p must lie in (0, 1]")
    X = np.asarray(X, dtype=float)
    sing = np.linalg.svd(X, compute_uv=False)
    lhs = float(np.sum(sing ** p))
    rhs = float(np.sum(np.linalg.norm(X, axis=0) ** p))
    return lhs <= rhs + rel_tol * max(1.0, abs(rhs))


def _clamped_singular_values(X, rank_rel=1e-12):
    sigma = np.linalg.svd(np.asarray(X, dtype=float), compute_uv=False)
    if sigma.size and sigma[0] > 0:
        sigma = np.where(sigma > rank_rel * sigma[0], sigma, 0.0)
    return sigma


def schatten_witness(X, p: float, d: int):
    """Balanced SVD factor pair (U, V) with X = U V^T and the common value
    ``sum_j ||U_j||^(2p) = sum_j ||V_j||^(2p) = sum(sigma^p)``.

    Singular values below 1e-12 * sigma_max are treated as exact zeros.
    """
    X = np.asarray(X, dtype=float)
    P, sigma, Qt = np.linalg.svd(X, full_matrices=False)
    if d > sigma.size:
        raise ValueError("d exceeds the thin SVD width")
    if sigma.size and sigma[0] > 0:
        sigma = np.where(sigma > 1e-12 * sigma[0], sigma, 0.0)
    root = np.sqrt(sigma[:d])
    return P[:, :d] * root, Qt[:d].T * root


def _l2p_2p(W, p):
    # column 2p-power sum; the exponent pairing that balances the witness
    return float(np.sum(np.linalg.norm(W, axis=0) ** (2.0 * p)))


def schatten_factorization_check(X, p: float, d: int, n_alternatives: int = 100, rng=None,
                                 rel_tol: float = 1e-9) -> bool:
    """Balanced-SVD witness attains 2*sum(sigma^p) and beats random refactorizations.

    Checks the witness value against the spectral quantity to ``rel_tol``
    relative, then compares with ``n_alternatives`` random invertible
    recombinations (U R, V R^{-T}) of the same product.
    """
    if not 0 < p <= 1:
        raise ValueError("p must lie in (0, 1]")
    X = np.asarray(X, dtype=float)
    if np.linalg.matrix_rank(X) > d:
        raise ValueError("rank(X) must not exceed d")
    sing = _clamped_singular_values(X)
    target = 2.0 * float(np.sum(sing[sing > 0] ** p))
    Ub, Vb = schatten_witness(X, p, d)
    witness = _l2p_2p(Ub, p) + _l2p_2p(Vb, p)
    if abs(witness - target) > rel_tol * max(1.0, abs(target)):
        return False
    rng = np.random.default_rng(rng)
    for _ in range(n_alternatives):
        while True:
            R = rng.standard_normal((d, d))
            if abs(np.linalg.det(R)) > 1e-6:
                break
        alt = _l2p_2p(Ub @ R, p) + _l2p_2p(Vb @ np.linalg.inv(R).T, p)
        if alt < witness - rel_tol * max(1.0, abs(witness)):
            return False
    return True


@dataclass
class DiagnosticReport:
    """One-shot certificate bundle for a factor pair."""

    objective: float
    stationarity_residual: float
    zero_column_flag: bool  # True when a zero column could NOT be certified
    balance_gap: float
    rank: int
    colspace_gaps: list = field(default_factory=list)

    CSV_COLUMNS = (
        "objective",
        "stationarity_residual",
        "zero_column_flag",
        "balance_gap",
        "rank",
        "colspace_gaps",
    )

    def csv_row(self) -> str:
        gaps = ";".join(f"{g:.17g}" for g in self.colspace_gaps)
        return (
            f"{self.objective:.17g},{self.stationarity_residual:.17g},"
            f"{int(self.zero_column_flag)},{self.balance_gap:.17g},{self.rank},{gaps}"
        )


def diagnostic_report(loss, theta: ThetaSpec, lam: float, mu: float, U, V,
                      colspace_gaps=()) -> DiagnosticReport:
    resid, certified = stationarity_residual(loss, theta, lam, mu, U, V)
    gap, _ = balance_gap(U, V)
    return DiagnosticReport(
        objective=objective_eval(loss, theta, lam, mu, U, V),
        stationarity_residual=resid,
        zero_column_flag=not certified,
        balance_gap=gap,
        rank=column_rank(np.asarray(U, dtype=float)),
        colspace_gaps=list(colspace_gaps),
    )
