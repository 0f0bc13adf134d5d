"""Synthetic one-bit recovery experiments and the regularization sweep.

A sweep cell is (solver, c_lambda, instance).  Each instance redraws the
ground truth, the observations and the solver starting frames from seeds
derived deterministically from the base seed, and both solvers share an
instance's data and starting point so curves are comparable.  lambda is set
per instance as ``c_lambda * max_j ||Y_j||`` where Y holds the observed
signs (zeros at unobserved entries, last duplicate wins).

Outputs: ``runs.csv`` (one row per cell), ``averages.csv`` (mean over
instances), deterministic companions of both with the wall-time column
dropped (same-seed reruns reproduce those byte for byte), and
``manifest.txt`` with the resolved configuration and derived seeds.
"""

from __future__ import annotations

import dataclasses
import json
import os
from dataclasses import dataclass, field

import numpy as np

from . import __version__ as _version
from ._kernels import BACKEND as _backend
from .losses import ObservationSet, make_loss, phi_cdf
from .palm import PalmConfig, run_palm
from .pama import PamaConfig, run_pama
from .thresholds import parse_theta

DESK_PRESET = dict(n=300, m=300, r_star=5)
PAPER_PRESET = dict(n=2000, m=2000, r_star=10)
DEFAULT_GRID = (0.0125, 0.025, 0.05, 0.1, 0.2, 0.4, 0.8, 1.6, 3.2)


@dataclass
class NoiseSpec:
    kind: str = "logistic"  # logistic | laplace
    b: float = 2.0

    def __post_init__(self):
        if self.kind not in ("logistic", "laplace"):
            raise ValueError(f"unknown noise kind {self.kind!r}")
        if not self.b > 0:
            raise ValueError("laplace scale b must be positive")


@dataclass
class ExperimentConfig:
    n: int = 300
    m: int = 300
    r_star: int = 5
    rank_multiplier: int = 3
    sample_rate: float = 0.4
    noise: NoiseSpec = field(default_factory=NoiseSpec)
    c_lambda_grid: tuple = DEFAULT_GRID
    instances: int = 5
    solver: str = "both"  # pama | palm | both
    theta: str = "theta1"
    mu: float = 1e-8
    max_iter: int = 200
    eps_change: float = 5e-4
    eps_objective: float = 1e-3
    seed: int = 0
    products: str = "auto"
    validate: bool = True
    out_dir: str = "sweep_out"

    def __post_init__(self):
        if not 0 < self.sample_rate <= 1:
            raise ValueError("sample_rate must lie in (0, 1]")
        if self.solver not in ("pama", "palm", "both"):
            raise ValueError("solver must be pama/palm/both")
        if isinstance(self.noise, dict):
            self.noise = NoiseSpec(**self.noise)
        parse_theta(self.theta)  # fail fast on a bad penalty string

    @property
    def r(self) -> int:
        return self.rank_multiplier * self.r_star

    @classmethod
    def from_file(cls, path) -> "ExperimentConfig":
        with open(path, "r", encoding="utf-8") as fh:
            raw = json.load(fh)
        if "c_lambda_grid" in raw:
            raw["c_lambda_grid"] = tuple(raw["c_lambda_grid"])
        return cls(**raw)

    def to_dict(self) -> dict:
        out = dataclasses.asdict(self)
        out["c_lambda_grid"] = list(self.c_lambda_grid)
        return out


def generate_truth(n: int, m: int, r_star: int, rng: np.random.Generator) -> np.ndarray:
    """Rank-r_star product of two uniform(-1/2, 1/2) factors."""
    if r_star > min(n, m):
        raise ValueError("r_star exceeds min(n, m)")
    left = rng.uniform(-0.5, 0.5, size=(n, r_star))
    right = rng.uniform(-0.5, 0.5, size=(m, r_star))
    return left @ right.T


def sample_observations(truth: np.ndarray, sample_rate: float, noise: NoiseSpec,
                        rng: np.random.Generator) -> ObservationSet:
    """Uniform-with-replacement index draws; each gets an independent sign
    that is +1 with probability phi(truth at the index)."""
    if not 0 < sample_rate <= 1:
        raise ValueError("sample_rate must lie in (0, 1]")
    n, m = truth.shape
    count = int(round(sample_rate * n * m))
    rows = rng.integers(0, n, size=count)
    cols = rng.integers(0, m, size=count)
    probs = phi_cdf(noise.kind, truth[rows, cols], b=noise.b)
    signs = np.where(rng.random(count) < probs, 1.0, -1.0)
    return ObservationSet(n, m, rows, cols, signs)


def lambda_scale(obs: ObservationSet) -> float:
    """max over columns of the Euclidean norm of the observed-sign matrix."""
    Y = obs.sign_matrix()
    return float(np.linalg.norm(Y, axis=0).max())


def relative_error(X_out: np.ndarray, truth: np.ndarray) -> float:
    denom = float(np.linalg.norm(truth))
    if denom == 0.0:
        raise ValueError("truth matrix must be nonzero")
    return float(np.linalg.norm(X_out - truth)) / denom


def instance_seeds(base_seed: int, instance: int) -> tuple:
    """(data seed sequence, solver seed) for one instance, derived stably."""
    data_ss = np.random.SeedSequence([int(base_seed), int(instance), 0])
    solver_seed = int(np.random.SeedSequence([int(base_seed), int(instance), 1]).generate_state(1)[0])
    return data_ss, solver_seed


def build_instance(config: ExperimentConfig, instance: int):
    """(truth, observations, solver seed) for one sweep instance."""
    data_ss, solver_seed = instance_seeds(config.seed, instance)
    rng = np.random.default_rng(data_ss)
    truth = generate_truth(config.n, config.m, config.r_star, rng)
    obs = sample_observations(truth, config.sample_rate, config.noise, rng)
    return truth, obs, solver_seed


def _make_loss(config: ExperimentConfig, obs: ObservationSet):
    return make_loss(config.noise.kind, obs, b=config.noise.b)


def solve_cell(config: ExperimentConfig, solver: str, lam: float, obs: ObservationSet,
               solver_seed: int):
    theta = parse_theta(config.theta)
    loss = _make_loss(config, obs)
    common = dict(
        lam=lam, theta=theta, r=config.r, mu=config.mu, max_iter=config.max_iter,
        seed=solver_seed, products=config.products, validate=config.validate,
    )
    if solver == "pama":
        cfg = PamaConfig(eps1=config.eps_change, eps2=config.eps_objective, **common)
        return run_pama(loss, cfg)
    cfg = PalmConfig(eps3=config.eps_change, eps4=config.eps_objective, **common)
    return run_palm(loss, cfg)


@dataclass
class SweepRow:
    solver: str
    c_lambda: float
    instance: int
    re: float
    rank: int
    time_s: float
    iters: int
    objective: float


RUNS_HEADER = "solver,c_lambda,instance,re,rank,time_s,iters,objective"
AVG_HEADER = "solver,c_lambda,re,rank,time_s,iters,objective"


def _fmt(x: float) -> str:
    return f"{x:.17g}"


def _write_rows(path, header, rows, drop_time=False):
    cols = header.split(",")
    if drop_time:
        cols = [c for c in cols if c != "time_s"]
    with open(path, "w", encoding="ascii") as fh:
        fh.write(",".join(cols) + "\n")
        for row in rows:
            cells = []
            for c in cols:
                v = row[c]
                cells.append(_fmt(v) if isinstance(v, float) else str(v))
            fh.write(",".join(cells) + "\n")


def run_sweep(config: ExperimentConfig, progress=None) -> list[SweepRow]:
    """Run every (solver, c_lambda, instance) cell and write the CSV bundle."""
    solvers = ["pama", "palm"] if config.solver == "both" else [config.solver]
    os.makedirs(config.out_dir, exist_ok=True)

    rows = []
    for instance in range(config.instances):
        truth, obs, solver_seed = build_instance(config, instance)
        scale = lambda_scale(obs)
        for c_lam in config.c_lambda_grid:
            lam = c_lam * scale
            for solver in solvers:
                result = solve_cell(config, solver, lam, obs, solver_seed)
                row = SweepRow(
                    solver=solver,
                    c_lambda=float(c_lam),
                    instance=instance,
                    re=relative_error(result.product(), truth),
                    rank=result.rank,
                    time_s=result.seconds,
                    iters=result.trace[-1].k,
                    objective=result.trace[-1].objective,
                )
                rows.append(row)
                if progress is not None:
                    progress(row)

    rows.sort(key=lambda r: (r.solver, r.c_lambda, r.instance))
    run_dicts = [dataclasses.asdict(r) for r in rows]

    averages = []
    for solver in solvers:
        for c_lam in sorted(config.c_lambda_grid):
            group = [r for r in rows if r.solver == solver and r.c_lambda == float(c_lam)]
            averages.append(
                dict(
                    solver=solver,
                    c_lambda=float(c_lam),
                    re=float(np.mean([g.re for g in group])),
                    rank=float(np.mean([g.rank for g in group])),
                    time_s=float(np.mean([g.time_s for g in group])),
                    iters=float(np.mean([g.iters for g in group])),
                    objective=float(np.mean([g.objective for g in group])),
                )
            )
    averages.sort(key=lambda r: (r["solver"], r["c_lambda"]))

    out = config.out_dir
    _write_rows(os.path.join(out, "runs.csv"), RUNS_HEADER, run_dicts)
    _write_rows(os.path.join(out, "averages.csv"), AVG_HEADER, averages)
    _write_rows(os.path.join(out, "runs_deterministic.csv"), RUNS_HEADER, run_dicts, drop_time=True)
    _write_rows(os.path.join(out, "averages_deterministic.csv"), AVG_HEADER, averages, drop_time=True)
    _write_manifest(config, solvers)
    return rows


def _write_manifest(config: ExperimentConfig, solvers):
    lines = [
        f"cofact {_version} (kernel backend: {_backend})",
        "resolved config:",
        json.dumps(config.to_dict(), indent=2, sort_keys=True),
        f"solvers: {','.join(solvers)}",
        "instance seeding: every instance redraws truth, observations and the",
        "shared solver starting frames; derived seeds below.",
    ]
    for instance in range(config.instances):
        _, solver_seed = instance_seeds(config.seed, instance)
        lines.append(f"instance {instance}: solver_seed={solver_seed}")
    lines.append("lambda rule: lambda = c_lambda * max_j ||Y_j|| per instance")
    with open(os.path.join(config.out_dir, "manifest.txt"), "w", encoding="utf-8") as fh:
        fh.write("\n".join(lines) + "\n")
