"""Self-contained property suites behind ``cofact check``.

Each suite returns a list of (name, ok, detail) tuples; the CLI prints one
line per check and fails the process if any check fails.  These are smoke
versions of the full test suite, sized to run in seconds.
"""

from __future__ import annotations

import numpy as np

from .diagnostics import schatten_factorization_check, schatten_l2p_check
from .experiments import ExperimentConfig, NoiseSpec, build_instance, lambda_scale
from .losses import make_loss
from .pama import PamaConfig, run_pama
from .thresholds import ThetaSpec, prox_theta_scalar, theta_eval, parse_theta


def _spec_for(kind, rng):
    if kind == 6:
        return ThetaSpec(6, a=1.5 + 3.0 * rng.random(), rho=0.2 + 2.0 * rng.random())
    return ThetaSpec(kind)


def check_prox(seed=0, trials=500, grid=20_001):
    """Scalar prox vs a grid search over [0, s+1] for every penalty."""
    rng = np.random.default_rng(seed)
    results = []
    for kind in range(1, 7):
        worst = 0.0
        ok = True
        for _ in range(trials):
            spec = _spec_for(kind, rng)
            nu = 10.0 ** rng.uniform(-4, 2)
            s = 10.0 * rng.random()
            x = prox_theta_scalar(spec, nu, s)
            pts = np.linspace(0.0, s + 1.0, grid)
            costs = (pts - s) ** 2 / (2 * nu) + theta_eval(spec, pts)
            gap = (x - s) ** 2 / (2 * nu) + theta_eval(spec, x) - costs.min()
            worst = max(worst, gap)
            if gap > 1e-9:
                ok = False
        results.append((f"prox theta{kind} vs grid oracle", ok, f"worst cost gap {worst:.2e}"))
    return results


def check_grad(seed=0, instances=10):
    """Finite-difference gradient checks for both one-bit losses."""
    rng = np.random.default_rng(seed)
    results = []
    for kind in ("logistic", "laplace"):
        worst = 0.0
        for _ in range(instances):
            cfg = ExperimentConfig(n=12, m=9, r_star=2, sample_rate=0.5,
                                   noise=NoiseSpec(kind=kind), seed=int(rng.integers(2**31)))
            truth, obs, _ = build_instance(cfg, 0)
            loss = make_loss(kind, obs, b=cfg.noise.b)
            X = rng.standard_normal(truth.shape)
            G = loss.gradient(X)
            for _ in range(12):
                i = int(rng.integers(truth.shape[0]))
                j = int(rng.integers(truth.shape[1]))
                h = 1e-6 * (1.0 + abs(X[i, j]))
                Xp, Xm = X.copy(), X.copy()
                Xp[i, j] += h
                Xm[i, j] -= h
                fd = (loss.value(Xp) - loss.value(Xm)) / (2 * h)
                denom = max(1e-8, abs(fd))
                worst = max(worst, abs(fd - G[i, j]) / denom)
        results.append((f"{kind} gradient vs finite differences", worst <= 1e-5,
                        f"worst rel err {worst:.2e}"))
    return results


def check_descent(seed=0, problems=3):
    """Full solver runs with all per-iteration certificates asserted."""
    rng = np.random.default_rng(seed)
    results = []
    for p in range(problems):
        theta = ["theta1", "theta2", "theta3"][p % 3]
        cfg = ExperimentConfig(n=40, m=40, r_star=2, rank_multiplier=3, sample_rate=0.5,
                               theta=theta, seed=int(rng.integers(2**31)))
        truth, obs, solver_seed = build_instance(cfg, 0)
        lam = 0.2 * lambda_scale(obs)
        loss = make_loss("logistic", obs)
        try:
            result = run_pama(loss, PamaConfig(lam=lam, theta=parse_theta(theta), r=cfg.r,
                                               seed=solver_seed, validate=True))
            objs = [rec.objective for rec in result.trace]
            mono = all(b <= a + 1e-8 for a, b in zip(objs, objs[1:]))
            results.append((f"descent chain run {p} ({theta})", mono,
                            f"{len(objs) - 1} iterations, stop={result.stop_reason}"))
        except Exception as exc:  # invariant violations surface here
            results.append((f"descent chain run {p} ({theta})", False, str(exc)))
    return results


def check_norms(seed=0, trials=200):
    """Spectral-vs-column norm inequality and the factorization witness."""
    rng = np.random.default_rng(seed)
    results = []
    ok = True
    for _ in range(trials):
        X = rng.standard_normal((8, 6))
        p = rng.choice([0.5, 2.0 / 3.0, 1.0])
        if not schatten_l2p_check(X, p):
            ok = False
    results.append(("spectral p-sum <= column p-sum", ok, f"{trials} random 8x6 draws"))
    ok = True
    for _ in range(20):
        L = rng.standard_normal((6, 3))
        R = rng.standard_normal((5, 3))
        if not schatten_factorization_check(L @ R.T, 0.5, 3, n_alternatives=20, rng=rng):
            ok = False
    results.append(("balanced SVD witness minimality", ok, "20 rank-3 instances"))
    return results


SUITES = {
    "prox": check_prox,
    "grad": check_grad,
    "descent": check_descent,
    "norms": check_norms,
}
