import json

import numpy as np
import pytest

from cofact.experiments import (
    AVG_HEADER,
    RUNS_HEADER,
    ExperimentConfig,
    NoiseSpec,
    build_instance,
    generate_truth,
    instance_seeds,
    lambda_scale,
    relative_error,
    run_sweep,
    sample_observations,
)


def small_config(tmp_path, **kw):
    base = dict(
        n=24, m=20, r_star=2, rank_multiplier=3, sample_rate=0.5,
        c_lambda_grid=(0.05, 0.4, 1.6), instances=2, solver="both",
        theta="theta1", seed=123, max_iter=40, out_dir=str(tmp_path / "out"),
    )
    base.update(kw)
    return ExperimentConfig(**base)


def test_generate_truth_contract():
    rng = np.random.default_rng(0)
    M = generate_truth(8, 6, 1, rng)
    assert np.linalg.matrix_rank(M) == 1
    rng2 = np.random.default_rng(5)
    M2 = generate_truth(30, 25, 4, rng2)
    assert np.linalg.matrix_rank(M2) == 4
    # factor entries live in [-1/2, 1/2], so products are bounded by r*/4
    assert np.max(np.abs(M2)) <= 4 * 0.25
    assert np.array_equal(generate_truth(8, 6, 2, np.random.default_rng(9)),
                          generate_truth(8, 6, 2, np.random.default_rng(9)))
    with pytest.raises(ValueError):
        generate_truth(4, 3, 5, rng)


def test_sample_observations_count_and_signs():
    rng = np.random.default_rng(1)
    M = generate_truth(10, 10, 2, rng)
    obs = sample_observations(M, 0.4, NoiseSpec("logistic"), rng)
    assert len(obs) == 40
    assert set(np.unique(obs.signs)) <= {-1.0, 1.0}
    with pytest.raises(ValueError):
        sample_observations(M, 0.0, NoiseSpec("logistic"), rng)
    # strongly positive entries give +1 with probability near 1
    big = np.full((5, 5), 50.0)
    obs = sample_observations(big, 1.0, NoiseSpec("logistic"), np.random.default_rng(2))
    assert np.all(obs.signs == 1.0)


def test_sample_observations_sign_frequency_monte_carlo():
    # 1e5 draws at truth 0: empirical +1 frequency within 0.5 +/- 0.01
    rng = np.random.default_rng(3)
    M = np.zeros((100, 1000))
    obs = sample_observations(M, 1.0, NoiseSpec("logistic"), rng)
    freq = np.mean(obs.signs == 1.0)
    assert abs(freq - 0.5) < 0.01
    obs = sample_observations(M, 1.0, NoiseSpec("laplace", b=2.0), np.random.default_rng(4))
    assert abs(np.mean(obs.signs == 1.0) - 0.5) < 0.01


def test_relative_error_values():
    rng = np.random.default_rng(4)
    M = rng.standard_normal((6, 5))
    assert relative_error(M, M) == 0.0
    assert relative_error(np.zeros_like(M), M) == pytest.approx(1.0)
    assert relative_error(2 * M, M) == pytest.approx(1.0)
    with pytest.raises(ValueError):
        relative_error(M, np.zeros_like(M))


def test_lambda_scale_last_duplicate_wins():
    from cofact.losses import ObservationSet

    obs = ObservationSet(2, 2, [0, 0, 1], [0, 0, 0], [1.0, -1.0, 1.0])
    Y = obs.sign_matrix()
    assert Y[0, 0] == -1.0
    assert lambda_scale(obs) == pytest.approx(np.sqrt(2.0))


def test_instance_seeds_stable_and_distinct():
    a = instance_seeds(7, 0)
    b = instance_seeds(7, 0)
    assert a[1] == b[1]
    assert instance_seeds(7, 1)[1] != a[1]
    t0, o0, s0 = build_instance(ExperimentConfig(n=10, m=10, r_star=2, seed=7), 0)
    t1, o1, s1 = build_instance(ExperimentConfig(n=10, m=10, r_star=2, seed=7), 1)
    assert not np.array_equal(t0, t1)
    assert s0 != s1


def test_config_roundtrip_and_validation(tmp_path):
    cfg = small_config(tmp_path, solver="pama")
    raw = cfg.to_dict()
    path = tmp_path / "cfg.json"
    path.write_text(json.dumps(raw))
    back = ExperimentConfig.from_file(path)
    assert back == cfg
    assert back.r == back.rank_multiplier * back.r_star
    with pytest.raises(ValueError):
        ExperimentConfig(sample_rate=1.5)
    with pytest.raises(ValueError):
        ExperimentConfig(solver="gd")
    with pytest.raises(ValueError):
        ExperimentConfig(theta="theta9")


def test_run_sweep_outputs(tmp_path):
    cfg = small_config(tmp_path)
    rows = run_sweep(cfg)
    # 2 solvers x 3 c_lambda x 2 instances
    assert len(rows) == 12
    out = tmp_path / "out"
    runs = (out / "runs.csv").read_text().splitlines()
    assert runs[0] == RUNS_HEADER
    assert len(runs) == 13
    for solver in ("pama", "palm"):
        for c in cfg.c_lambda_grid:
            group = [r for r in rows if r.solver == solver and r.c_lambda == c]
            assert len(group) == cfg.instances
    avgs = (out / "averages.csv").read_text().splitlines()
    assert avgs[0] == AVG_HEADER
    assert len(avgs) == 1 + 2 * len(cfg.c_lambda_grid)
    # averages are the arithmetic means of the matching rows
    import csv

    with open(out / "averages.csv") as fh:
        for rec in csv.DictReader(fh):
            group = [r for r in rows
                     if r.solver == rec["solver"] and r.c_lambda == float(rec["c_lambda"])]
            assert float(rec["re"]) == pytest.approx(np.mean([g.re for g in group]), abs=1e-12)
            assert float(rec["iters"]) == pytest.approx(np.mean([g.iters for g in group]), abs=1e-12)
    assert (out / "manifest.txt").exists()
    det = (out / "runs_deterministic.csv").read_text().splitlines()
    assert det[0] == RUNS_HEADER.replace(",time_s", "")


def test_run_sweep_deterministic_companions_identical(tmp_path):
    cfg1 = small_config(tmp_path, out_dir=str(tmp_path / "a"), instances=1,
                        c_lambda_grid=(0.1, 0.8), max_iter=25)
    cfg2 = small_config(tmp_path, out_dir=str(tmp_path / "b"), instances=1,
                        c_lambda_grid=(0.1, 0.8), max_iter=25)
    run_sweep(cfg1)
    run_sweep(cfg2)
    for name in ("runs_deterministic.csv", "averages_deterministic.csv", "manifest.txt"):
        a = (tmp_path / "a" / name).read_text().replace(str(tmp_path / "a"), "PATH")
        b = (tmp_path / "b" / name).read_text().replace(str(tmp_path / "b"), "PATH")
        assert a == b
