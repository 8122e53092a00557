import numpy as np
import pytest

from sigsde.config import bundled_config
from sigsde.driving_moments import expected_signature_bm_time
from sigsde.estimator import (
    EstimationConfig,
    RootSet,
    SolverConfig,
    assemble_system,
    empirical_moments,
    empirical_sample,
    mirror,
    model_polys,
    nonident_demo,
    run_experiment,
    select_estimate,
    solve_system,
)
from sigsde.mpoly import MPoly
from sigsde.picard_poly import PicardPolynomials, q_bound
from sigsde.sde_model import Theta, Trajectory, simulate_batch


def traj(path):
    path = np.asarray(path, dtype=float)
    grid = np.arange(len(path)) * 0.1
    return Trajectory(grid, None, np.column_stack([grid, path]), 2, 1)


def exp1_system(words, moments, r=3):
    cfg = bundled_config(1)
    est = cfg.estimation(words)
    drv = expected_signature_bm_time(1, cfg.T, max(q_bound(r, len(w)) for w in est.words))
    return cfg, est, assemble_system(est, moments, cfg.theta, drv)


# ---------------------------------------------------------------- moments

def test_empirical_moments_examples():
    assert empirical_moments([traj([0.5, 0.5, 0.5])], [(1,)], 1) == pytest.approx([0.0])
    got = empirical_moments([traj([0.0, 1.0]), traj([0.0, 3.0])], [(1,)], 1)
    assert got == pytest.approx([2.0])
    with pytest.raises(ValueError):
        empirical_moments([], [(1,)], 1)
    with pytest.raises(ValueError):
        empirical_moments([traj([0.0, 1.0])], [(1, 1)], 1)


def test_empirical_moments_skip_aborted():
    bad = traj([0.0, 100.0])
    bad.aborted = True
    got = empirical_moments([traj([0.0, 1.0]), bad], [(1,)], 1)
    assert got == pytest.approx([1.0])


def test_empirical_moment_matches_model_within_standard_error():
    cfg = bundled_config(1)
    batch = simulate_batch(cfg.theta, cfg.T, cfg.dt, 2000, seed=1, values=cfg.true_params)
    x = empirical_sample(batch, [(1, 1)], 2)[:, 0]
    se = x.std(ddof=1) / np.sqrt(len(x))
    tab = PicardPolynomials(cfg.theta, cfg.true_params)
    model = tab.moment_poly(4, (1, 1), expected_signature_bm_time(1, cfg.T, q_bound(4, 2)))
    assert abs(x.mean() - model) <= 3 * se


# ---------------------------------------------------------------- systems

def test_assemble_pure_drift_scalar():
    th = Theta(1, 0, 1, num_unknowns=1)
    th.add_term(1, 0, (), 1.0, unknown=0)
    T, mhat = 0.2, 0.37
    est = EstimationConfig(words=[(1,)], r=1, T=T, dt=0.01)
    (p,) = assemble_system(est, [mhat], th, expected_signature_bm_time(0, T, 1))
    assert p == MPoly(1, {(1,): T, (0,): -mhat})
    roots = solve_system([p])
    assert roots[0] == pytest.approx([mhat / T], abs=1e-12)


def test_assemble_validation():
    cfg = bundled_config(1)
    est = cfg.estimation("W2")
    drv = expected_signature_bm_time(1, cfg.T, 7)
    with pytest.raises(ValueError):
        assemble_system(est, [0.0, 0.0], cfg.theta, drv)
    with pytest.raises(ValueError):
        assemble_system(est, [0.0] * 3, cfg.theta, expected_signature_bm_time(1, cfg.T, 3))
    with pytest.raises(ValueError):
        EstimationConfig(words=[(1,), (1,)])


@pytest.mark.parametrize("words", ["W1", "W2"])
def test_truth_is_root_and_degree_bound(words):
    cfg = bundled_config(1)
    est = cfg.estimation(words)
    drv = expected_signature_bm_time(1, cfg.T, 7)
    base = model_polys(est, cfg.theta, drv)
    rng = np.random.default_rng(8)
    for theta0 in rng.uniform(-5, 5, (3, 3)):
        polys = assemble_system(est, [p(theta0) for p in base], cfg.theta, drv)
        for w, p in zip(est.words, polys):
            assert p.degree <= q_bound(est.r, len(w))
        best = select_estimate(solve_system(polys), theta0)
        assert np.abs(best - theta0).max() < 1e-8


def test_published_truth_is_a_degenerate_root():
    # with theta2 = 0 the r=3 moments do not see theta3: a line of exact roots
    cfg = bundled_config(1)
    est = cfg.estimation("W2")
    drv = expected_signature_bm_time(1, cfg.T, 7)
    base = model_polys(est, cfg.theta, drv)
    exact = [p(cfg.true_params) for p in base]
    for t3 in (-3.0, 0.0, 4.0, 11.0):
        assert max(abs(p([-1.0, 0.0, t3]) - c) for p, c in zip(base, exact)) < 1e-15


# ---------------------------------------------------------------- solver

def test_solver_examples():
    x = MPoly.var(1, 0)
    roots = solve_system([x * x - 1])
    assert sorted(r[0] for r in roots) == pytest.approx([-1.0, 1.0])
    a, b = MPoly.var(2, 0), MPoly.var(2, 1)
    roots = solve_system([a + b - 3, a - b - 1])
    assert len(roots) == 1 and roots[0] == pytest.approx([2.0, 1.0])


def test_solver_no_roots_and_errors():
    x = MPoly.var(1, 0)
    roots = solve_system([x * x + 1])
    assert len(roots) == 0 and roots.converged == 0
    with pytest.raises(ValueError):
        solve_system([x, x])
    with pytest.raises(ValueError):
        SolverConfig(tol=0)


def test_solver_residuals_recheck_independently():
    cfg, est, polys = exp1_system("W2", [0.182, 0.0167, 0.00107])
    roots = solve_system(polys)
    assert len(roots) >= 2
    for p in roots:
        assert max(abs(q(p)) for q in polys) <= 10 * est.solver.tol


def test_experiment_one_roots_and_mirror():
    cfg = bundled_config(1)
    est = cfg.estimation("W2")
    rep = run_experiment(est, cfg.theta, cfg.true_params, 1)
    rs = rep.roots[0]
    best = rep.estimates[0]
    assert np.all(np.abs(best - [-0.9956, 0.0413, 4.5703]) <= [0.05, 0.1, 1.2])
    twin = mirror(best, cfg.theta)
    assert twin[1] == -best[1] and twin[2] == -best[2] and twin[0] == best[0]
    assert np.abs(rs.points - twin).max(axis=1).min() < 1e-6
    assert best[2] > 0


def test_mirror_points_are_roots():
    cfg = bundled_config(1)
    drv = expected_signature_bm_time(1, cfg.T, 7)
    for words in ("W1", "W2"):
        est = cfg.estimation(words)
        rep = run_experiment(est, cfg.theta, cfg.true_params, 2)
        base = model_polys(est, cfg.theta, drv)
        for t in range(2):
            polys = [p - c for p, c in zip(base, rep.moments[t])]
            twin = mirror(rep.estimates[t], cfg.theta)
            assert max(abs(p(twin)) for p in polys) <= 10 * est.solver.tol


def test_select_estimate_examples():
    assert select_estimate([[1.1], [-0.9]], [1.0]) == pytest.approx([1.1])
    assert select_estimate([[3.0, 4.0]], [0.0, 0.0]) == pytest.approx([3.0, 4.0])
    pair = [[-1.0, -0.04, -4.5], [-1.0, 0.04, 4.5]]
    assert select_estimate(pair, [-1, 0, 4]) == pytest.approx([-1.0, 0.04, 4.5])
    rs = RootSet(np.array([[0.0], [2.0]]), np.array([1e-12, 1e-14]), 2, 2)
    assert select_estimate(rs, [1.0]) == pytest.approx([2.0])
    assert select_estimate([[2.0], [0.0]], [1.0]) == pytest.approx([0.0])
    with pytest.raises(ValueError):
        select_estimate([], [0.0])


# ---------------------------------------------------------------- experiments

def test_pure_drift_estimates_exactly():
    th = Theta(2, 1, 2, num_unknowns=2)
    th.add_term(1, 0, (), 1.0, unknown=0).add_term(2, 0, (), 1.0, unknown=1)
    est = EstimationConfig(words=[(1,), (2,)], r=2, N=50, T=0.2, dt=0.01)
    rep = run_experiment(est, th, [0.7, -1.3], 3)
    assert np.abs(rep.estimates - [0.7, -1.3]).max() < 1e-9
    assert rep.std == pytest.approx([0.0, 0.0], abs=1e-9)


def test_report_csv(tmp_path):
    cfg = bundled_config(1)
    rep = run_experiment(cfg.estimation("W2", N=200), cfg.theta, cfg.true_params, 2)
    rep.write_csv(tmp_path)
    roots = (tmp_path / "roots.csv").read_text().splitlines()
    assert roots[0] == "trial,root_id,theta1,theta2,theta3,residual,selected"
    assert sum(line.endswith(",1") for line in roots[1:]) == 2
    summary = (tmp_path / "summary.csv").read_text().splitlines()
    assert summary[0] == "component,true,mean,std" and len(summary) == 6
    assert (tmp_path / "moments.csv").read_text().count("\n") == 1 + 2 * 3


def test_std_shrinks_with_sample_size():
    cfg = bundled_config(1)
    stds = {}
    for N in (200, 2000):
        rep = run_experiment(cfg.estimation("W2", N=N), cfg.theta, cfg.true_params, 8)
        stds[N] = rep.std
    assert np.all(stds[2000] <= stds[200])


def test_empty_trials_are_excluded():
    th = Theta(1, 0, 1, num_unknowns=1)
    th.add_term(1, 0, (), 1.0, unknown=0)
    solver = SolverConfig(starts=0, max_iter=1)
    est = EstimationConfig(words=[(1,)], r=1, N=5, T=0.2, dt=0.01, solver=solver)
    rep = run_experiment(est, th, [3.0], 2)
    assert rep.empty_trials == [0, 1]
    assert np.isnan(rep.mean).all()


# ---------------------------------------------------------------- non-identifiability

def test_nonident_identical_systems():
    assert nonident_demo(1.0, seed=3, identical=True).distance == 0.0


def test_nonident_short_horizon():
    res = nonident_demo(0.3, seed=0)
    assert res.distance <= 0.1
    assert np.array_equal(res.path_a[:, 0], res.path_b[:, 0])
    assert res.path_a.shape == (301, 4)
