"""Benchmark of the observation kernels: compiled extension vs numpy.

Times the gather-product, the per-entry loss/gradient kernels and the
gradient scatter on one synthetic workload per backend, and reports the
largest cross-backend result difference.
"""

from __future__ import annotations

import time

import numpy as np

from ._kernels import backends


def _time(fn, repeat):
    best = np.inf
    result = None
    for _ in range(repeat):
        t0 = time.perf_counter()
        result = fn()
        best = min(best, time.perf_counter() - t0)
    return best, result


def run_bench(n=2000, m=2000, r=30, n_obs=1_600_000, b=2.0, repeat=5, seed=0, out=print):
    rng = np.random.default_rng(seed)
    U = rng.standard_normal((n, r))
    V = rng.standard_normal((m, r))
    rows = rng.integers(0, n, n_obs)
    cols = rng.integers(0, m, n_obs)
    signs = np.where(rng.random(n_obs) < 0.5, 1.0, -1.0)
    w = np.einsum("tq,tq->t", U[rows], V[cols])
    target = rng.standard_normal(n_obs)

    table = backends()
    out(f"kernel benchmark: n={n} m={m} r={r} observations={n_obs} repeat={repeat}")
    out(f"backends available: {', '.join(table)}")

    cases = {
        "pair_dot": lambda mod: mod.pair_dot(U, V, rows, cols),
        "logistic_value": lambda mod: mod.logistic_value(w, signs),
        "logistic_grad": lambda mod: mod.logistic_grad(w, signs),
        "laplace_value": lambda mod: mod.laplace_value(w, signs, b),
        "laplace_grad": lambda mod: mod.laplace_grad(w, signs, b),
        "quadratic_grad": lambda mod: mod.quadratic_grad(w, target),
        "scatter_add": None,  # needs a fresh output buffer per call
    }

    rows_out = []
    for name, call in cases.items():
        times = {}
        values = {}
        for backend, mod in table.items():
            if name == "scatter_add":
                def run(mod=mod):
                    buf = np.zeros((n, m))
                    mod.scatter_add(buf, rows, cols, w)
                    return buf
                times[backend], values[backend] = _time(run, repeat)
            else:
                times[backend], values[backend] = _time(lambda c=call, mod=mod: c(mod), repeat)
        diff = 0.0
        if len(values) == 2:
            a, c = values.values()
            diff = float(np.max(np.abs(np.asarray(a) - np.asarray(c))))
        rows_out.append((name, times, diff))

    for name, times, diff in rows_out:
        cells = "  ".join(f"{backend}: {sec * 1e3:9.3f} ms" for backend, sec in times.items())
        if "python" in times and "compiled" in times:
            cells += f"  speedup: {times['python'] / times['compiled']:5.2f}x"
        out(f"{name:>15}  {cells}  max|diff|={diff:.2e}")
    return rows_out
