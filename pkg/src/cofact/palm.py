"""Line-search proximal alternating linearized minimization baseline.

Each outer iteration takes a proximal gradient step in U and then in V.  The
per-block step size starts from a Barzilai-Borwein curvature estimate
(gradient-difference quotient clamped into [alpha_min, alpha_max]; 1 on the
first iteration, previous value on a zero denominator) and is inflated by
varrho1/varrho2 until the smooth part satisfies the quadratic
sufficient-decrease test

    F(new block) <= F(old) + <grad, step> + (alpha/2) * ||step||_F^2 .

By default each block subproblem carries the full nonsmooth part
(lam * column penalty + (mu/2)*||.||^2), so an accepted step decreases the
composite objective; ``smooth_only=True`` drops those terms from the update
(plain gradient step on the quadratic model), matching the bare line-search
scheme this baseline is derived from, and then no monotonicity is asserted.
"""

from __future__ import annotations

import time
from dataclasses import dataclass

import numpy as np

from .linalg import column_rank, frob_prod, frob_prod_diff
from .pama import (
    DESCENT_TOL,
    InvariantViolation,
    SolveResult,
    TraceRecord,
    _grad_times,
    _prox_block,
    _resolve_mode,
    init_frames,
    objective_value,
)
from .thresholds import ThetaSpec

MAX_BACKTRACKS = 100


@dataclass
class PalmConfig:
    lam: float
    theta: ThetaSpec
    r: int
    mu: float = 1e-8
    varrho1: float = 5.0
    varrho2: float = 5.0
    alpha_min: float = 1e-10
    alpha_max: float = 1e10
    max_iter: int = 200
    eps3: float = 5e-4
    eps4: float = 1e-3
    seed: int = 0
    products: str = "auto"
    validate: bool = True
    smooth_only: bool = False

    def __post_init__(self):
        if not self.lam > 0:
            raise ValueError("lam must be positive")
        if not (self.varrho1 > 1 and self.varrho2 > 1):
            raise ValueError("backtracking factors must exceed 1")
        if not 0 < self.alpha_min < self.alpha_max:
            raise ValueError("need 0 < alpha_min < alpha_max")
        if self.products not in ("dense", "omega", "auto"):
            raise ValueError("products must be dense/omega/auto")


def partial_grad_u(loss, U, V, mode="dense"):
    """Gradient of F(U, V) = f(U V^T) in U: grad f(U V^T) @ V."""
    return _grad_times(loss, U, V, V, mode)


def partial_grad_v(loss, U, V, mode="dense"):
    """Gradient of F(U, V) in V: grad f(U V^T)^T @ U."""
    return _grad_times(loss, U, V, U, mode, transpose=True)


def bb_initial_step(grad_cur, grad_prev, fac_cur, fac_prev, fallback, config: PalmConfig) -> float:
    """Clamped gradient-difference quotient; ``fallback`` on a zero step."""
    denom = float(np.linalg.norm(fac_cur - fac_prev))
    if denom == 0.0:
        alpha = fallback
    else:
        alpha = float(np.linalg.norm(grad_cur - grad_prev)) / denom
    return min(max(alpha, config.alpha_min), config.alpha_max)


def palm_block_update(factor, grad, alpha, config: PalmConfig) -> np.ndarray:
    """Proximal gradient step on one block at step size 1/alpha."""
    W = factor - grad / alpha
    if config.smooth_only:
        return W
    gamma = np.sqrt(alpha + config.mu)
    scale = np.full(factor.shape[1], gamma)
    return _prox_block(config.theta, config.lam, (alpha / gamma) * W, scale)


def _smooth_value(loss, A, B, mode):
    if mode == "dense":
        return loss.value(A @ B.T)
    return loss.value_at_entries(loss.products(A, B))


def _line_search(loss, fixed, factor, grad, alpha0, inflate, config, mode, side):
    """Inflate alpha until the smooth sufficient-decrease test accepts."""
    if side == "u":
        F_old = _smooth_value(loss, factor, fixed, mode)
    else:
        F_old = _smooth_value(loss, fixed, factor, mode)
    alpha = alpha0
    for _ in range(MAX_BACKTRACKS + 1):
        new = palm_block_update(factor, grad, alpha, config)
        diff = new - factor
        model = F_old + float(np.sum(grad * diff)) + 0.5 * alpha * float(np.linalg.norm(diff) ** 2)
        if side == "u":
            F_new = _smooth_value(loss, new, fixed, mode)
        else:
            F_new = _smooth_value(loss, fixed, new, mode)
        if F_new <= model + 1e-12 * max(1.0, abs(model)):
            return new, alpha
        alpha = alpha * inflate
    raise RuntimeError(
        f"{side}-block line search exceeded {MAX_BACKTRACKS} inflations "
        f"(alpha={alpha:.3e}); the block gradient is inconsistent with the loss"
    )


def palm_should_stop(trace, config: PalmConfig) -> str | None:
    rec = trace[-1]
    if rec.k > config.max_iter:
        return "max_iter"
    if rec.k >= 1 and rec.rel_change <= config.eps3:
        return "x_change"
    if rec.k >= 9 and len(trace) > 9:
        cur = rec.objective
        lagged = max(abs(cur - trace[-1 - i].objective) for i in range(1, 10))
        if lagged / max(1.0, abs(cur)) <= config.eps4:
            return "objective_stall"
    return None


def run_palm(loss, config: PalmConfig, observer=None) -> SolveResult:
    """Alternate BB-seeded, backtracked proximal block steps until a stop rule fires."""
    n, m = loss.shape
    if not 1 <= config.r <= min(n, m):
        raise ValueError(f"rank budget r={config.r} outside [1, {min(n, m)}]")
    mode = _resolve_mode(config.products, loss.shape)
    U, V = init_frames(n, m, config.r, config.seed)

    def objective(A, B):
        return objective_value(loss, config.theta, config.lam, config.mu, A, B, mode)

    t_start = time.perf_counter()
    obj = objective(U, V)
    trace = [
        TraceRecord(
            k=0,
            objective=obj,
            obj_mid=np.nan,
            step_u=np.nan,
            step_v=np.nan,
            rank=column_rank(U),
            rel_change=np.nan,
            seconds=0.0,
        )
    ]
    U_prev = V_prev = None
    alpha_u = alpha_v = 1.0
    gv_after_update = None  # grad_V F(U^{k}, V^{k-1}) cached from the last V step
    stop = None
    while stop is None:
        t0 = time.perf_counter()
        prev_obj = obj

        gu = partial_grad_u(loss, U, V, mode)
        gv_at_pair = partial_grad_v(loss, U, V, mode)
        if U_prev is None:
            alpha_u = min(max(1.0, config.alpha_min), config.alpha_max)
        else:
            gu_prev = partial_grad_u(loss, U_prev, V, mode)
            alpha_u = bb_initial_step(gu, gu_prev, U, U_prev, alpha_u, config)
        U_new, alpha_u = _line_search(loss, V, U, gu, alpha_u, config.varrho1, config, mode, "u")
        obj_mid = objective(U_new, V)

        gv = partial_grad_v(loss, U_new, V, mode)
        if V_prev is None:
            alpha_v = min(max(1.0, config.alpha_min), config.alpha_max)
        else:
            alpha_v = bb_initial_step(gv_at_pair, gv_after_update, V, V_prev, alpha_v, config)
        V_new, alpha_v = _line_search(loss, U_new, V, gv, alpha_v, config.varrho2, config, mode, "v")

        step_u = float(np.linalg.norm(U_new - U))
        step_v = float(np.linalg.norm(V_new - V))
        U_prev, V_prev = U, V
        gv_after_update = gv
        U, V = U_new, V_new

        obj = objective(U, V)
        denom = frob_prod(U, V)
        rel = frob_prod_diff(U, V, U_prev, V_prev) / max(denom, 1e-300)
        rec = TraceRecord(
            k=trace[-1].k + 1,
            objective=obj,
            obj_mid=obj_mid,
            step_u=step_u,
            step_v=step_v,
            rank=column_rank(U),
            rel_change=rel,
            seconds=time.perf_counter() - t0,
            alpha_u=alpha_u,
            alpha_v=alpha_v,
        )
        if config.validate and not config.smooth_only:
            if obj_mid - prev_obj > DESCENT_TOL:
                raise InvariantViolation(f"U block increased the objective at k={rec.k}")
            if obj - obj_mid > DESCENT_TOL:
                raise InvariantViolation(f"V block increased the objective at k={rec.k}")
        trace.append(rec)
        if observer is not None:
            observer((U, V), rec)
        stop = palm_should_stop(trace, config)

    return SolveResult(
        U=U.copy(),
        V=V.copy(),
        trace=trace,
        stop_reason=stop,
        seconds=time.perf_counter() - t_start,
        solver="palm",
    )
