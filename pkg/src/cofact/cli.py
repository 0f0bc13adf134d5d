"""Command line interface: solve one instance, sweep a lambda grid, run
property suites, or benchmark the kernels."""

from __future__ import annotations

import argparse
import sys

from . import __version__
from .bench import run_bench
from .checks import SUITES
from .experiments import (
    DESK_PRESET,
    PAPER_PRESET,
    ExperimentConfig,
    NoiseSpec,
    build_instance,
    lambda_scale,
    relative_error,
    run_sweep,
)
from .pama import save_state, trace_to_csv


def _add_problem_args(p):
    p.add_argument("--n", type=int, default=DESK_PRESET["n"])
    p.add_argument("--m", type=int, default=DESK_PRESET["m"])
    p.add_argument("--r-star", type=int, default=DESK_PRESET["r_star"])
    p.add_argument("--rank-multiplier", type=int, default=3)
    p.add_argument("--sr", type=float, default=0.4, help="sample rate in (0, 1]")
    p.add_argument("--b", type=float, default=2.0, help="laplace noise scale")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--max-iter", type=int, default=200)
    p.add_argument("--eps-change", type=float, default=5e-4,
                   help="relative product-change stopping tolerance")
    p.add_argument("--eps-objective", type=float, default=1e-3,
                   help="9-lag relative objective-stall tolerance")
    p.add_argument("--products", choices=("auto", "dense", "omega"), default="auto")
    p.add_argument("--no-validate", action="store_true",
                   help="skip the per-iteration invariant assertions")


def _build_config(args, noise_kind):
    return ExperimentConfig(
        n=args.n,
        m=args.m,
        r_star=args.r_star,
        rank_multiplier=args.rank_multiplier,
        sample_rate=args.sr,
        noise=NoiseSpec(kind=noise_kind, b=args.b),
        theta=args.theta,
        seed=args.seed,
        max_iter=args.max_iter,
        products=args.products,
        validate=not args.no_validate,
    )


def cmd_solve(args):
    from .losses import make_loss
    from .palm import PalmConfig, run_palm
    from .pama import PamaConfig, run_pama
    from .thresholds import parse_theta

    noise_kind = "logistic" if args.loss == "quadratic" else args.loss
    config = _build_config(args, noise_kind)
    truth, obs, solver_seed = build_instance(config, args.instance)
    loss = make_loss(args.loss, obs, b=args.b, target=truth if args.loss == "quadratic" else None)
    lam = args.lam if args.lam is not None else args.c_lambda * lambda_scale(obs)

    common = dict(lam=lam, theta=parse_theta(args.theta), r=config.r, mu=args.mu,
                  max_iter=args.max_iter, seed=solver_seed, products=args.products,
                  validate=not args.no_validate)
    if args.solver == "pama":
        result = run_pama(loss, PamaConfig(eps1=args.eps_change, eps2=args.eps_objective,
                                           **common))
    else:
        result = run_palm(loss, PalmConfig(eps3=args.eps_change, eps4=args.eps_objective,
                                           smooth_only=args.palm_smooth_only, **common))

    re = relative_error(result.product(), truth)
    final = result.trace[-1]
    print(
        f"{args.solver}: iters={final.k} objective={final.objective:.6g} "
        f"rank={result.rank} re={re:.4f} time={result.seconds:.2f}s "
        f"stop={result.stop_reason} lambda={lam:.6g}"
    )
    if args.out:
        trace_to_csv(result.trace, args.out)
        print(f"trace written to {args.out}")
    if args.checkpoint and result.state is not None:
        save_state(result.state, args.checkpoint)
        print(f"state written to {args.checkpoint}")
    return 0


def cmd_sweep(args):
    if args.config:
        config = ExperimentConfig.from_file(args.config)
    else:
        config = ExperimentConfig()
    overrides = {}
    if args.paper_scale:
        overrides.update(PAPER_PRESET)
    if args.out:
        overrides["out_dir"] = args.out
    if args.seed is not None:
        overrides["seed"] = args.seed
    if overrides:
        raw = config.to_dict()
        raw.update(overrides)
        config = ExperimentConfig(**raw)

    def progress(row):
        if not args.quiet:
            print(
                f"  {row.solver} c_lambda={row.c_lambda:g} instance={row.instance}: "
                f"re={row.re:.4f} rank={row.rank} iters={row.iters} time={row.time_s:.2f}s"
            )

    print(f"sweep: {config.n}x{config.m}, r*={config.r_star}, r={config.r}, "
          f"SR={config.sample_rate}, noise={config.noise.kind}, theta={config.theta}, "
          f"{config.instances} instances, grid={list(config.c_lambda_grid)}")
    run_sweep(config, progress=progress)
    print(f"wrote runs.csv / averages.csv (+deterministic companions, manifest.txt) in {config.out_dir}")
    return 0


def cmd_check(args):
    failures = 0
    for name, ok, detail in SUITES[args.suite](seed=args.seed):
        print(f"[{'PASS' if ok else 'FAIL'}] {name}: {detail}")
        failures += 0 if ok else 1
    return 1 if failures else 0


def cmd_bench(args):
    run_bench(n=args.n, m=args.m, r=args.rank, n_obs=args.obs, repeat=args.repeat)
    return 0


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="cofact",
                                     description="low-rank composite factorization toolkit")
    parser.add_argument("--version", action="version", version=f"cofact {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("solve", help="generate one synthetic instance and solve it")
    p.add_argument("--loss", choices=("logistic", "laplace", "quadratic"), default="logistic")
    p.add_argument("--theta", default="theta1", help='penalty, e.g. theta1 or "theta6(a=3,rho=1.5)"')
    p.add_argument("--solver", choices=("pama", "palm"), default="pama")
    p.add_argument("--lambda", dest="lam", type=float, default=None,
                   help="absolute regularization weight (overrides --c-lambda)")
    p.add_argument("--c-lambda", type=float, default=0.2,
                   help="lambda as a multiple of the observed-sign column-norm scale")
    p.add_argument("--mu", type=float, default=1e-8)
    p.add_argument("--instance", type=int, default=0)
    p.add_argument("--out", default=None, help="trace CSV path")
    p.add_argument("--checkpoint", default=None, help="solver state .npz path")
    p.add_argument("--palm-smooth-only", action="store_true",
                   help="PALM block updates minimize only the smooth quadratic model")
    _add_problem_args(p)
    p.set_defaults(func=cmd_solve)

    p = sub.add_parser("sweep", help="lambda-grid experiment with CSV outputs")
    p.add_argument("--config", default=None, help="JSON file mirroring ExperimentConfig")
    p.add_argument("--out", default=None, help="output directory override")
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--paper-scale", action="store_true",
                   help="2000x2000, r*=10 preset (long running)")
    p.add_argument("--quiet", action="store_true")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("check", help="run a property suite")
    p.add_argument("--suite", choices=sorted(SUITES), required=True)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_check)

    p = sub.add_parser("bench", help="compare kernel backends")
    p.add_argument("--n", type=int, default=1000)
    p.add_argument("--m", type=int, default=1000)
    p.add_argument("--rank", type=int, default=30)
    p.add_argument("--obs", type=int, default=400_000)
    p.add_argument("--repeat", type=int, default=5)
    p.set_defaults(func=cmd_bench)

    args = parser.parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
