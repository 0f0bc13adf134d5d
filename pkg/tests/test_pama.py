import math

import numpy as np
import pytest

from cofact.losses import MaskedQuadraticLoss, ObservationSet, OneBitLogisticLoss
from cofact.pama import (
    PamaConfig,
    PamaState,
    decay_gammas,
    init_state,
    load_state,
    objective_value,
    run_pama,
    save_state,
    should_stop,
    subspace_correct_u,
    subspace_correct_v,
    trace_to_csv,
    u_step,
    v_step,
)
from cofact.thresholds import ThetaSpec



def full_obs(n, m):
    rows, cols = np.divmod(np.arange(n * m, dtype=np.int64), m)
    return ObservationSet(n, m, rows, cols, np.ones(n * m))


def quad_loss(target, obs=None):
    n, m = target.shape
    return MaskedQuadraticLoss(obs or full_obs(n, m), target)


def desk_problem(seed, n=30, m=24, r=6, sr=0.5):
    rng = np.random.default_rng(seed)
    truth = rng.uniform(-0.5, 0.5, (n, 2)) @ rng.uniform(-0.5, 0.5, (m, 2)).T
    count = int(sr * n * m)
    rows = rng.integers(0, n, count)
    cols = rng.integers(0, m, count)
    from cofact.losses import phi_cdf

    probs = phi_cdf("logistic", truth[rows, cols])
    signs = np.where(rng.random(count) < probs, 1.0, -1.0)
    return OneBitLogisticLoss(ObservationSet(n, m, rows, cols, signs))


def test_init_state_contract():
    cfg = PamaConfig(lam=1.0, theta=ThetaSpec(1), r=2, seed=5)
    st = init_state(5, 4, cfg)
    assert np.array_equal(st.dbar, np.ones(2))
    assert np.array_equal(st.Qbar, np.eye(2))
    assert np.allclose(st.Phat.T @ st.Phat, np.eye(2), atol=1e-12)
    assert np.allclose(st.Pbar.T @ st.Pbar, np.eye(2), atol=1e-12)
    assert np.array_equal(st.Ubar, st.Phat)
    assert np.array_equal(st.Vbar, st.Pbar)
    st2 = init_state(5, 4, cfg)
    assert np.array_equal(st.Phat, st2.Phat) and np.array_equal(st.Pbar, st2.Pbar)
    with pytest.raises(ValueError):
        init_state(5, 4, PamaConfig(lam=1.0, theta=ThetaSpec(1), r=5))


def test_u_step_scalar_closed_form():
    # 1x1 problem, everything observed, quadratic pull toward 0
    target = np.zeros((1, 1))
    loss = quad_loss(target)
    lam, mu, g1 = 0.1, 1e-8, 1e-2
    cfg = PamaConfig(lam=lam, theta=ThetaSpec(2), r=1, mu=mu, gamma1_0=g1, seed=0)
    st = init_state(1, 1, cfg)
    one = np.ones((1, 1))
    st = PamaState(k=0, U=one, V=one, Phat=one, Qhat=one, dhat=np.ones(1), Rhat=one,
                   Pbar=one, Qbar=one, dbar=np.ones(1), Rbar=one, gamma1=g1, gamma2=g1)
    U = u_step(st, loss, cfg, mode="dense")
    lam_d = math.sqrt(1.0 + mu + g1)
    G = g1 / lam_d
    expected = G * lam_d / (lam_d ** 2 + 2 * lam)
    assert U[0, 0] == pytest.approx(expected, rel=1e-12)
    # grid confirmation on the 1-d subproblem 0.5*(G - u*lam_d)^2 + lam*u^2
    grid = np.linspace(-1, 1, 400_001)
    costs = 0.5 * (G - grid * lam_d) ** 2 + lam * grid ** 2
    assert abs(grid[np.argmin(costs)] - expected) < 1e-5


def test_u_step_fixed_point_when_gradient_vanishes():
    # target equals the current product, penalties negligible: U V_bar^T stays put
    rng = np.random.default_rng(3)
    n, m, r = 12, 9, 3
    cfg = PamaConfig(lam=1e-12, theta=ThetaSpec(1), r=r, mu=1e-12,
                     gamma1_0=1e-12, gamma2_0=1e-12, seed=1)
    st = init_state(n, m, cfg)
    # nontrivial diagonal state: run one correction pass on a random U
    st = subspace_correct_u(rng.standard_normal((n, r)), st)
    st = subspace_correct_v(rng.standard_normal((m, r)), st)
    target = st.Ubar @ st.Vbar.T
    loss = quad_loss(target)
    assert np.linalg.norm(loss.gradient(target)) == 0.0
    U = u_step(st, loss, cfg, mode="dense")
    assert np.linalg.norm(U @ st.Vbar.T - target) <= 1e-8


def test_u_step_zero_columns():
    target = np.zeros((4, 3))
    loss = quad_loss(target)
    cfg = PamaConfig(lam=1.0, theta=ThetaSpec(1), r=2, seed=0)
    st = init_state(4, 3, cfg)
    # zero diagonal makes every prox target column vanish
    st_zero = PamaState(k=0, U=st.U, V=st.V, Phat=st.Phat, Qhat=st.Qhat, dhat=st.dhat,
                        Rhat=st.Rhat, Pbar=st.Pbar, Qbar=st.Qbar, dbar=np.zeros(2),
                        Rbar=st.Rbar, gamma1=0.0 + 1e-2, gamma2=1e-2)
    assert np.all(u_step(st_zero, loss, cfg, mode="dense") == 0.0)


def test_v_step_huge_lambda_zeroes_everything():
    loss = desk_problem(0)
    cfg = PamaConfig(lam=1e6, theta=ThetaSpec(1), r=4, seed=2)
    st = init_state(*loss.shape, cfg)
    st = subspace_correct_u(u_step(st, loss, cfg, mode="dense"), st)
    V = v_step(st, loss, cfg, mode="dense")
    assert np.all(V == 0.0)


def test_subspace_correct_u_identities():
    rng = np.random.default_rng(8)
    n, m, r = 10, 7, 3
    cfg = PamaConfig(lam=1.0, theta=ThetaSpec(2), r=r, seed=4)
    st = init_state(n, m, cfg)
    st = subspace_correct_v(rng.standard_normal((m, r)), st)  # random diagonal dbar
    U_new = rng.standard_normal((n, r))
    Vbar_before = st.Vbar
    st2 = subspace_correct_u(U_new, st)
    # singular values sorted nonincreasing, nonnegative
    assert np.all(np.diff(st2.dhat) <= 1e-15)
    assert np.all(st2.dhat >= 0)
    # product identity: Uhat Vhat^T == U_new Vbar_old^T
    lhs = st2.Uhat @ st2.Vhat.T
    rhs = U_new @ Vbar_before.T
    assert np.linalg.norm(lhs - rhs) <= 1e-10 * (1 + np.linalg.norm(lhs))
    # zero input collapses everything
    st3 = subspace_correct_u(np.zeros((n, r)), st)
    assert np.all(st3.dhat == 0.0) and np.all(st3.Uhat == 0.0)


def test_subspace_correct_v_identities():
    rng = np.random.default_rng(9)
    n, m, r = 9, 11, 3
    cfg = PamaConfig(lam=1.0, theta=ThetaSpec(2), r=r, seed=4)
    st = init_state(n, m, cfg)
    st = subspace_correct_u(rng.standard_normal((n, r)), st)
    V_new = rng.standard_normal((m, r))
    Uhat_before = st.Uhat
    st2 = subspace_correct_v(V_new, st)
    lhs = st2.Ubar @ st2.Vbar.T
    rhs = Uhat_before @ V_new.T
    assert np.linalg.norm(lhs - rhs) <= 1e-10 * (1 + np.linalg.norm(lhs))
    # corrected pair is balanced: both Grams equal diag(dbar^2)
    gram_u = st2.Ubar.T @ st2.Ubar
    gram_v = st2.Vbar.T @ st2.Vbar
    assert np.linalg.norm(gram_u - gram_v) <= 1e-10 * (1 + np.linalg.norm(gram_u))
    assert np.allclose(np.diag(gram_v), st2.dbar ** 2, atol=1e-12)


def test_rank_one_correct_v():
    rng = np.random.default_rng(10)
    n, m = 6, 5
    cfg = PamaConfig(lam=1.0, theta=ThetaSpec(2), r=1, seed=4)
    st = init_state(n, m, cfg)
    st = subspace_correct_u(rng.standard_normal((n, 1)), st)
    V_new = rng.standard_normal((m, 1))
    st2 = subspace_correct_v(V_new, st)
    assert st2.dbar[0] ** 2 == pytest.approx(np.linalg.norm(V_new) * st.dhat[0], rel=1e-12)
    direction = V_new[:, 0] / np.linalg.norm(V_new)
    assert np.allclose(np.abs(st2.Pbar[:, 0]), np.abs(direction), atol=1e-12)


def test_decay_gammas():
    cfg = PamaConfig(lam=1.0, theta=ThetaSpec(1), r=2, gamma1_0=1e-2, varrho=0.8,
                     gamma1_min=1e-8, gamma2_min=1e-8)
    st = init_state(5, 5, cfg)
    st = decay_gammas(st, cfg)
    assert st.gamma1 == pytest.approx(8e-3, rel=1e-15)
    floor_state = PamaState(**{**st.__dict__, "gamma1": 1e-8, "gamma2": 1e-8})
    dec = decay_gammas(floor_state, cfg)
    assert dec.gamma1 == 1e-8 and dec.gamma2 == 1e-8
    # geometric decay reaches the floor after log(floor/initial)/log(varrho) steps
    k_floor = math.ceil(math.log(1e-8 / 1e-2) / math.log(0.8))
    s = init_state(5, 5, cfg)
    for _ in range(k_floor + 1):
        s = decay_gammas(s, cfg)
    assert s.gamma1 == 1e-8


class _Rec:
    def __init__(self, k, objective, rel_change):
        self.k = k
        self.objective = objective
        self.rel_change = rel_change


def test_should_stop_rules():
    cfg = PamaConfig(lam=1.0, theta=ThetaSpec(1), r=2, max_iter=200, eps1=5e-4, eps2=1e-3)
    assert should_stop([_Rec(201, 1.0, 0.5)], cfg) == "max_iter"
    assert should_stop([_Rec(200, 1.0, 0.5)], cfg) is None
    assert should_stop([_Rec(3, 1.0, 0.0)], cfg) == "x_change"
    assert should_stop([_Rec(5, 1.0, 0.5)], cfg) is None
    flat = [_Rec(k, 100.0 + 1e-9 * k, 0.5) for k in range(12)]
    assert should_stop(flat, cfg) == "objective_stall"
    moving = [_Rec(k, 100.0 + 10.0 * k, 0.5) for k in range(12)]
    assert should_stop(moving, cfg) is None


def als_rank1_oracle(target, iters=400):
    """Unregularized rank-1 alternating least squares on a fully observed matrix."""
    rng = np.random.default_rng(0)
    u = rng.standard_normal(target.shape[0])
    for _ in range(iters):
        v = target.T @ u / (u @ u)
        u = target @ v / (v @ v)
    return np.outer(u, v)


def test_run_recovers_rank_one_truth():
    rng = np.random.default_rng(21)
    truth = np.outer(rng.standard_normal(10), rng.standard_normal(8))
    loss = quad_loss(truth)
    cfg = PamaConfig(lam=1e-4, theta=ThetaSpec(1), r=3, seed=3, max_iter=300,
                     eps1=1e-9, eps2=0.0, validate=True)
    result = run_pama(loss, cfg)
    assert result.rank == 1
    re = np.linalg.norm(result.product() - truth) / np.linalg.norm(truth)
    assert re <= 1e-2
    oracle = als_rank1_oracle(truth)
    re_oracle = np.linalg.norm(oracle - truth) / np.linalg.norm(truth)
    assert re <= re_oracle + 1e-2


def test_run_huge_lambda_returns_zero():
    loss = desk_problem(1)
    cfg = PamaConfig(lam=1e7, theta=ThetaSpec(1), r=5, seed=0)
    result = run_pama(loss, cfg)
    assert np.all(result.U == 0.0) and np.all(result.V == 0.0)
    assert result.rank == 0


@pytest.mark.parametrize("kind", [1, 2, 3])
def test_run_invariants_and_descent(kind):
    loss = desk_problem(40 + kind)
    lam = 0.2 * np.linalg.norm(loss.obs.sign_matrix(), axis=0).max()
    cfg = PamaConfig(lam=lam, theta=ThetaSpec(kind), r=6, seed=kind, validate=True)
    seen = []
    result = run_pama(loss, cfg, observer=lambda st, rec: seen.append(rec.k))
    objs = [rec.objective for rec in result.trace]
    assert all(b <= a + 1e-8 for a, b in zip(objs, objs[1:]))
    assert seen == [rec.k for rec in result.trace[1:]]
    # step norms shrink on convergent runs
    if result.stop_reason == "x_change":
        last = result.trace[-1]
        assert last.step_u <= 10 * cfg.eps1 * np.linalg.norm(result.U) + 1e-12
    # boundedness via the ridge coercivity bound
    bound = math.sqrt(2 * objs[0] / cfg.mu) + 1.0
    assert max(np.linalg.norm(rec_state) for rec_state in [np.linalg.norm(result.U)]) <= bound


def test_run_modes_agree():
    loss = desk_problem(60)
    lam = 0.3 * np.linalg.norm(loss.obs.sign_matrix(), axis=0).max()
    kw = dict(lam=lam, theta=ThetaSpec(3), r=5, seed=9, max_iter=25)
    res_dense = run_pama(loss, PamaConfig(products="dense", **kw))
    res_omega = run_pama(loss, PamaConfig(products="omega", **kw))
    assert res_dense.trace[-1].k == res_omega.trace[-1].k
    assert np.allclose(res_dense.U, res_omega.U, rtol=1e-9, atol=1e-10)
    assert np.allclose(res_dense.V, res_omega.V, rtol=1e-9, atol=1e-10)
    for a, b in zip(res_dense.trace, res_omega.trace):
        assert a.objective == pytest.approx(b.objective, rel=1e-10)


def test_objective_value_modes_agree():
    loss = desk_problem(61)
    rng = np.random.default_rng(0)
    A = rng.standard_normal((loss.shape[0], 4))
    B = rng.standard_normal((loss.shape[1], 4))
    v1 = objective_value(loss, ThetaSpec(2), 0.5, 1e-8, A, B, "dense")
    v2 = objective_value(loss, ThetaSpec(2), 0.5, 1e-8, A, B, "omega")
    assert v1 == pytest.approx(v2, rel=1e-10)


def test_determinism_same_seed():
    loss = desk_problem(70)
    cfg = PamaConfig(lam=1.0, theta=ThetaSpec(1), r=4, seed=11, max_iter=40)
    r1 = run_pama(loss, cfg)
    r2 = run_pama(loss, cfg)
    assert np.array_equal(r1.U, r2.U) and np.array_equal(r1.V, r2.V)
    for a, b in zip(r1.trace, r2.trace):
        assert a.objective == b.objective and a.rank == b.rank


def test_index_sets_stabilize():
    loss = desk_problem(80)
    lam = 0.4 * np.linalg.norm(loss.obs.sign_matrix(), axis=0).max()
    cfg = PamaConfig(lam=lam, theta=ThetaSpec(1), r=6, seed=2)
    snapshots = []

    def observer(st, rec):
        def nz(W):
            norms = np.linalg.norm(W, axis=0)
            top = norms.max()
            return frozenset(np.flatnonzero(norms > 1e-10 * max(top, 1e-300)))

        snapshots.append((nz(st.U), nz(st.V), nz(st.Uhat), nz(st.Vhat), nz(st.Ubar), nz(st.Vbar)))

    run_pama(loss, cfg, observer=observer)
    for sets in snapshots[-5:]:
        assert len(set(sets)) == 1


def test_checkpoint_roundtrip(tmp_path):
    loss = desk_problem(90)
    cfg = PamaConfig(lam=1.0, theta=ThetaSpec(2), r=4, seed=7, max_iter=10)
    result = run_pama(loss, cfg)
    path = tmp_path / "state.npz"
    save_state(result.state, path)
    back = load_state(path)
    assert back.k == result.state.k
    assert back.gamma1 == result.state.gamma1
    for name in ("U", "V", "Phat", "Qhat", "dhat", "Rhat", "Pbar", "Qbar", "dbar", "Rbar"):
        assert np.array_equal(getattr(back, name), getattr(result.state, name))


def test_trace_csv(tmp_path):
    loss = desk_problem(91)
    cfg = PamaConfig(lam=1.0, theta=ThetaSpec(1), r=3, seed=1, max_iter=5)
    result = run_pama(loss, cfg)
    path = tmp_path / "trace.csv"
    trace_to_csv(result.trace, path)
    lines = path.read_text().splitlines()
    assert lines[0] == "k,objective,obj_mid,step_u,step_v,rank,rel_change,seconds,balance_gap"
    assert len(lines) == len(result.trace) + 1
