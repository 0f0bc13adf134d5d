"""Proximal alternating minimization with SVD subspace correction.

Each outer iteration majorizes the smooth term at the current corrected pair
using the gradient Lipschitz constant, minimizes in U (closed form,
columnwise prox), re-factors ``U_new @ diag(dbar)`` by a thin SVD so the V
subproblem is again closed form, minimizes in V, re-factors once more, and
decays the two proximal parameters geometrically toward their floors.

State bookkeeping uses orthonormal frames and diagonal scales:

* ``Uhat = Phat * dhat``,  ``Vhat = Rhat * dhat``  (after the U correction)
* ``Ubar = Rbar * dbar``,  ``Vbar = Pbar * dbar``  (after the V correction)

with ``Rhat = Pbar_prev @ Qhat`` and ``Rbar = Phat @ Qbar``.  The observed
products ``Xhat = Uhat @ Vhat.T`` and ``Xbar = Ubar @ Vbar.T`` are either
materialized densely or evaluated only on the observation set, controlled by
``PamaConfig.products``; both paths agree to float rounding.

With ``validate=True`` every iteration asserts the provable invariants: the
two-step descent chain with quadratic margin, the column-space inclusion
chains, the refactorization identities, and the Gram balance of corrected
pairs.  A violation raises :class:`InvariantViolation` (it indicates an
implementation bug, not a data problem).
"""

from __future__ import annotations

import time
from dataclasses import dataclass, replace

import numpy as np

from .linalg import (
    colspace_gap,
    column_rank,
    frob_prod,
    frob_prod_diff,
    orth_gaussian,
    thin_svd,
)
from .thresholds import ThetaSpec, prox_column, vartheta_eval

DESCENT_TOL = 1e-8
COLSPACE_TOL = 1e-8
BALANCE_TOL = 1e-8
IDENTITY_TOL = 1e-10
DENSE_ENTRY_LIMIT = 4_000_000


class InvariantViolation(RuntimeError):
    """A per-iteration certificate failed beyond tolerance."""


@dataclass
class PamaConfig:
    lam: float
    theta: ThetaSpec
    r: int
    mu: float = 1e-8
    gamma1_0: float = 1e-2
    gamma2_0: float = 1e-2
    varrho: float = 0.8
    gamma1_min: float = 1e-8
    gamma2_min: float = 1e-8
    max_iter: int = 200
    eps1: float = 5e-4
    eps2: float = 1e-3
    seed: int = 0
    products: str = "auto"  # dense | omega | auto
    validate: bool = True

    def __post_init__(self):
        if not self.lam > 0:
            raise ValueError("lam must be positive")
        if not self.mu > 0:
            raise ValueError("mu must be positive")
        if not 0.0 < self.varrho < 1.0:
            raise ValueError("varrho must lie in (0, 1)")
        for name in ("gamma1_0", "gamma2_0", "gamma1_min", "gamma2_min"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")
        if self.products not in ("dense", "omega", "auto"):
            raise ValueError("products must be dense/omega/auto")


@dataclass
class PamaState:
    """Full per-iteration tuple; factor matrices derive from frames."""

    k: int
    U: np.ndarray
    V: np.ndarray
    Phat: np.ndarray
    Qhat: np.ndarray
    dhat: np.ndarray
    Rhat: np.ndarray
    Pbar: np.ndarray
    Qbar: np.ndarray
    dbar: np.ndarray
    Rbar: np.ndarray
    gamma1: float
    gamma2: float

    @property
    def Uhat(self):
        return self.Phat * self.dhat

    @property
    def Vhat(self):
        return self.Rhat * self.dhat

    @property
    def Ubar(self):
        return self.Rbar * self.dbar

    @property
    def Vbar(self):
        return self.Pbar * self.dbar


@dataclass
class TraceRecord:
    k: int
    objective: float
    obj_mid: float
    step_u: float
    step_v: float
    rank: int
    rel_change: float
    seconds: float
    balance_gap: float = np.nan
    colspace_gap_ubar: float = np.nan
    colspace_gap_u: float = np.nan
    colspace_gap_vhat: float = np.nan
    colspace_gap_v: float = np.nan
    gamma1: float = np.nan
    gamma2: float = np.nan
    alpha_u: float = np.nan
    alpha_v: float = np.nan


TRACE_COLUMNS = (
    "k",
    "objective",
    "obj_mid",
    "step_u",
    "step_v",
    "rank",
    "rel_change",
    "seconds",
    "balance_gap",
)


def trace_to_csv(records, path):
    """Write the solver-independent trace schema."""
    with open(path, "w", encoding="ascii") as fh:
        fh.write(",".join(TRACE_COLUMNS) + "\n")
        for rec in records:
            vals = []
            for col in TRACE_COLUMNS:
                v = getattr(rec, col)
                vals.append(str(v) if col in ("k", "rank") else f"{v:.17g}")
            fh.write(",".join(vals) + "\n")


@dataclass
class SolveResult:
    U: np.ndarray
    V: np.ndarray
    trace: list
    stop_reason: str
    seconds: float
    solver: str
    state: PamaState | None = None

    @property
    def rank(self):
        return column_rank(self.U)

    def product(self):
        return self.U @ self.V.T


def init_frames(n: int, m: int, r: int, seed) -> tuple[np.ndarray, np.ndarray]:
    """Seeded orthonormal starting frames, shared by both solvers.

    Stream: one ``default_rng(seed)``, n-by-r Gaussian drawn first (row
    frame), then the m-by-r one.
    """
    rng = np.random.default_rng(seed)
    return orth_gaussian(rng, n, r), orth_gaussian(rng, m, r)


def init_state(n: int, m: int, config: PamaConfig) -> PamaState:
    """Initial frames from the seeded generator, unit diagonal scales."""
    r = config.r
    if not 1 <= r <= min(n, m):
        raise ValueError(f"rank budget r={r} outside [1, {min(n, m)}]")
    Phat, Pbar = init_frames(n, m, r, config.seed)
    eye = np.eye(r)
    ones = np.ones(r)
    return PamaState(
        k=0,
        U=Phat.copy(),
        V=Pbar.copy(),
        Phat=Phat,
        Qhat=eye.copy(),
        dhat=ones.copy(),
        Rhat=Pbar.copy(),
        Pbar=Pbar,
        Qbar=eye.copy(),
        dbar=ones.copy(),
        Rbar=Phat.copy(),
        gamma1=config.gamma1_0,
        gamma2=config.gamma2_0,
    )


def _resolve_mode(products: str, shape) -> str:
    if products != "auto":
        return products
    return "dense" if shape[0] * shape[1] <= DENSE_ENTRY_LIMIT else "omega"


def _grad_times(loss, A, B, M, mode, transpose=False):
    """(grad f(A B^T)) @ M, or its transpose applied to M."""
    if mode == "dense":
        G = loss.gradient(A @ B.T)
        return (G.T if transpose else G) @ M
    Gs = loss.gradient_sparse(loss.products(A, B))
    if transpose:
        Gs = Gs.T.tocsr()
    return np.asarray(Gs @ M)


def objective_value(loss, theta, lam, mu, A, B, mode="dense") -> float:
    """Full objective at a factor pair under the chosen product path."""
    if mode == "dense":
        fval = loss.value(A @ B.T)
    else:
        fval = loss.value_at_entries(loss.products(A, B))
    reg = lam * (vartheta_eval(theta, A) + vartheta_eval(theta, B))
    ridge = 0.5 * mu * (np.linalg.norm(A) ** 2 + np.linalg.norm(B) ** 2)
    return float(fval + reg + ridge)


def _prox_block(theta, lam, target, scale):
    """Columnwise prox: minimize 0.5*||target_i - x*scale_i||^2 + lam*theta(||x||)."""
    out = np.zeros_like(target)
    for i in range(target.shape[1]):
        col = target[:, i]
        if np.any(col):
            out[:, i] = prox_column(theta, lam, float(scale[i]), col)
    return out


def u_step(state: PamaState, loss, config: PamaConfig, mode=None) -> np.ndarray:
    """Closed-form minimizer of the majorized U subproblem at (Ubar, Vbar)."""
    mode = mode or _resolve_mode(config.products, loss.shape)
    Lf = loss.lipschitz
    d = state.dbar
    lam_diag = np.sqrt(Lf * d ** 2 + config.mu + state.gamma1)
    W = _grad_times(loss, state.Ubar, state.Vbar, state.Pbar, mode)
    G = ((Lf * d ** 2 + state.gamma1) * state.Rbar - W) * (d / lam_diag)
    return _prox_block(config.theta, config.lam, G, lam_diag)


def v_step(state: PamaState, loss, config: PamaConfig, mode=None) -> np.ndarray:
    """Closed-form minimizer of the majorized V subproblem at (Uhat, Vhat)."""
    mode = mode or _resolve_mode(config.products, loss.shape)
    Lf = loss.lipschitz
    d = state.dhat
    delta = np.sqrt(Lf * d ** 2 + config.mu + state.gamma2)
    W = _grad_times(loss, state.Uhat, state.Vhat, state.Phat, mode, transpose=True)
    H = ((Lf * d ** 2 + state.gamma2) * state.Rhat - W) * (d / delta)
    return _prox_block(config.theta, config.lam, H, delta)


def _check_refactor_identity(P, sigma, Q, B, what):
    recon_err = float(np.linalg.norm((P * sigma) @ Q.T - B))
    scale = 1.0 + float(np.linalg.norm(sigma))
    if recon_err > IDENTITY_TOL * scale:
        raise InvariantViolation(f"{what} refactorization identity gap {recon_err:.3e} exceeds tolerance")


def subspace_correct_u(U_new: np.ndarray, state: PamaState, validate=True) -> PamaState:
    """Thin-SVD re-factorization after the U step; updates the hat quantities."""
    B = U_new * state.dbar
    Phat, sigma, Qhat = thin_svd(B)
    if validate:
        _check_refactor_identity(Phat, sigma, Qhat, B, "U")
    return replace(
        state,
        U=U_new,
        Phat=Phat,
        Qhat=Qhat,
        dhat=np.sqrt(sigma),
        Rhat=state.Pbar @ Qhat,
    )


def subspace_correct_v(V_new: np.ndarray, state: PamaState, validate=True) -> PamaState:
    """Thin-SVD re-factorization after the V step; updates the bar quantities."""
    B = V_new * state.dhat
    Pbar, sigma, Qbar = thin_svd(B)
    if validate:
        _check_refactor_identity(Pbar, sigma, Qbar, B, "V")
    return replace(
        state,
        V=V_new,
        Pbar=Pbar,
        Qbar=Qbar,
        dbar=np.sqrt(sigma),
        Rbar=state.Phat @ Qbar,
    )


def decay_gammas(state: PamaState, config: PamaConfig) -> PamaState:
    """Geometric decay of both proximal parameters, floored."""
    return replace(
        state,
        gamma1=max(config.gamma1_min, config.varrho * state.gamma1),
        gamma2=max(config.gamma2_min, config.varrho * state.gamma2),
    )


def should_stop(trace: list, config: PamaConfig) -> str | None:
    """Stop rule on the trace of corrected-pair objectives.

    Fires when the iteration count exceeds ``max_iter``, when the relative
    product change drops to ``eps1``, or (from iteration 9 on) when the
    objective moved by at most ``eps2`` relatively over the last 9 lags.
    """
    rec = trace[-1]
    k = rec.k
    if k > config.max_iter:
        return "max_iter"
    if k >= 1 and rec.rel_change <= config.eps1:
        return "x_change"
    if k >= 9 and len(trace) > 9:
        cur = rec.objective
        lagged = max(abs(cur - trace[-1 - i].objective) for i in range(1, 10))
        if lagged / max(1.0, abs(cur)) <= config.eps2:
            return "objective_stall"
    return None


def _validate_iteration(prev_obj, obj_mid, obj, step_u, step_v, gmin, rec, state, U_new, V_new, Vbar_prev):
    if prev_obj - obj_mid - 0.5 * gmin * step_u ** 2 < -DESCENT_TOL:
        raise InvariantViolation(
            f"descent (first half) violated at k={rec.k}: "
            f"{prev_obj:.12g} < {obj_mid:.12g} + margin"
        )
    if prev_obj - obj - 0.5 * gmin * (step_u ** 2 + step_v ** 2) < -DESCENT_TOL:
        raise InvariantViolation(f"descent (full step) violated at k={rec.k}")
    if obj - obj_mid > DESCENT_TOL:
        raise InvariantViolation(f"objective increased within iteration k={rec.k}")
    gram_u = state.Ubar.T @ state.Ubar
    bal = float(np.linalg.norm(gram_u - state.Vbar.T @ state.Vbar))
    rec.balance_gap = bal
    if bal > BALANCE_TOL * (1.0 + float(np.linalg.norm(gram_u))):
        raise InvariantViolation(f"corrected pair out of balance at k={rec.k}: {bal:.3e}")
    rec.colspace_gap_ubar = colspace_gap(state.Ubar, state.Uhat)
    rec.colspace_gap_u = colspace_gap(state.Uhat, U_new)
    rec.colspace_gap_vhat = colspace_gap(state.Vhat, Vbar_prev)
    rec.colspace_gap_v = colspace_gap(state.Vbar, V_new)
    worst = max(rec.colspace_gap_ubar, rec.colspace_gap_u, rec.colspace_gap_vhat, rec.colspace_gap_v)
    if worst > COLSPACE_TOL:
        raise InvariantViolation(f"column-space inclusion gap {worst:.3e} at k={rec.k}")


def run_pama(loss, config: PamaConfig, observer=None) -> SolveResult:
    """Iterate the corrected alternating minimization until a stop rule fires.

    ``observer(state, record)`` is called after every completed iteration.
    """
    n, m = loss.shape
    mode = _resolve_mode(config.products, loss.shape)
    state = init_state(n, m, config)
    gmin = min(config.gamma1_min, config.gamma2_min)

    def objective(A, B):
        return objective_value(loss, config.theta, config.lam, config.mu, A, B, mode)

    t_start = time.perf_counter()
    obj = objective(state.Ubar, state.Vbar)
    trace = [
        TraceRecord(
            k=0,
            objective=obj,
            obj_mid=np.nan,
            step_u=np.nan,
            step_v=np.nan,
            rank=column_rank(state.Ubar),
            rel_change=np.nan,
            seconds=0.0,
            gamma1=state.gamma1,
            gamma2=state.gamma2,
        )
    ]
    stop = None
    while stop is None:
        t0 = time.perf_counter()
        prev_obj = obj
        Ubar_prev, Vbar_prev = state.Ubar, state.Vbar

        U_new = u_step(state, loss, config, mode)
        step_u = float(np.linalg.norm(U_new - Ubar_prev))
        state = subspace_correct_u(U_new, state, validate=config.validate)
        obj_mid = objective(state.Uhat, state.Vhat)

        V_new = v_step(state, loss, config, mode)
        step_v = float(np.linalg.norm(V_new - state.Vhat))
        state = subspace_correct_v(V_new, state, validate=config.validate)

        state = decay_gammas(state, config)
        state = replace(state, k=state.k + 1)

        obj = objective(state.Ubar, state.Vbar)
        denom = frob_prod(state.Ubar, state.Vbar)
        rel = frob_prod_diff(state.Ubar, state.Vbar, Ubar_prev, Vbar_prev) / max(denom, 1e-300)

        rec = TraceRecord(
            k=state.k,
            objective=obj,
            obj_mid=obj_mid,
            step_u=step_u,
            step_v=step_v,
            rank=column_rank(state.Ubar),
            rel_change=rel,
            seconds=time.perf_counter() - t0,
            gamma1=state.gamma1,
            gamma2=state.gamma2,
        )
        if config.validate:
            _validate_iteration(
                prev_obj, obj_mid, obj, step_u, step_v, gmin, rec, state, U_new, V_new, Vbar_prev
            )
        trace.append(rec)
        if observer is not None:
            observer(state, rec)
        stop = should_stop(trace, config)

    return SolveResult(
        U=state.Ubar.copy(),
        V=state.Vbar.copy(),
        trace=trace,
        stop_reason=stop,
        seconds=time.perf_counter() - t_start,
        solver="pama",
        state=state,
    )


_STATE_FIELDS = ("U", "V", "Phat", "Qhat", "dhat", "Rhat", "Pbar", "Qbar", "dbar", "Rbar")


def save_state(state: PamaState, path) -> None:
    """Checkpoint the full state tuple to a versioned .npz container."""
    np.savez(
        path,
        version=np.int64(1),
        k=np.int64(state.k),
        gamma1=np.float64(state.gamma1),
        gamma2=np.float64(state.gamma2),
        **{name: getattr(state, name) for name in _STATE_FIELDS},
    )


def load_state(path) -> PamaState:
    with np.load(path) as data:
        version = int(data["version"])
        if version != 1:
            raise ValueError(f"unsupported checkpoint version {version}")
        fields = {name: data[name] for name in _STATE_FIELDS}
        return PamaState(
            k=int(data["k"]),
            gamma1=float(data["gamma1"]),
            gamma2=float(data["gamma2"]),
            **fields,
        )
