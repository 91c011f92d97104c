import numpy as np
import pytest

from redgp._random import child_seeds, make_rng
from redgp.errors import NumericalError
from redgp.gp import lml_and_grad
from redgp.kernel import KernelHyperparams
from redgp.optimizer import (RestartSchedule, _draw_init, _Objective, lbfgs_maximize,
                             multi_restart_fit, select_top)


def smooth_problem(n=20, seed=0):
    rng = np.random.default_rng(seed)
    X = rng.uniform(-2, 2, size=(n, 2))
    S = rng.dirichlet(np.ones(2), n)
    r = np.sin(X[:, 0]) * 0.5 + 0.05 * rng.normal(size=n)
    return X, S, r


class TestLbfgs:
    def test_quadratic(self):
        x, f, rep = lbfgs_maximize(lambda t: (-(t[0] - 3) ** 2, np.array([-2 * (t[0] - 3)])), [0.0])
        assert abs(x[0] - 3) < 1e-6
        assert f >= rep.initial_value

    def test_rosenbrock(self):
        def f(t):
            a, b = t
            v = (1 - a) ** 2 + 100 * (b - a * a) ** 2
            g = np.array([-2 * (1 - a) - 400 * a * (b - a * a), 200 * (b - a * a)])
            return -v, -g
        x, _, rep = lbfgs_maximize(f, [-1.2, 1.0])
        np.testing.assert_allclose(x, [1.0, 1.0], atol=1e-4)
        assert rep.converged

    def test_already_optimal(self):
        x, f, rep = lbfgs_maximize(lambda t: (-(t[0] - 3) ** 2, np.array([-2 * (t[0] - 3)])), [3.0])
        assert rep.iterations <= 2
        assert abs(f - 0.0) <= 1e-12 and x[0] == 3.0

    def test_non_finite_start(self):
        with pytest.raises(NumericalError):
            lbfgs_maximize(lambda t: (np.nan, np.zeros(1)), [0.0])

    def test_non_finite_region_backtracks(self):
        # objective undefined beyond t > 1; the optimum of -(t-3)^2 on the
        # feasible side is at the boundary, and the search must stay finite
        def f(t):
            if t[0] > 1:
                raise NumericalError("outside domain")
            return -(t[0] - 3) ** 2, np.array([-2 * (t[0] - 3)])
        x, val, rep = lbfgs_maximize(f, [0.0])
        assert x[0] <= 1 and np.isfinite(val) and val >= rep.initial_value


class TestSchedule:
    def test_defaults(self):
        s = RestartSchedule()
        assert (s.num_restarts, s.staged_count, s.joint_count, s.max_iterations) == (20, 10, 10, 1000)
        assert s.init_signal_var_range == (0.0, 1.0) and s.init_lengthscale_range == (0.0, 10.0)

    def test_invalid(self):
        with pytest.raises(ValueError):
            RestartSchedule(num_restarts=2, staged_count=3)
        with pytest.raises(ValueError):
            RestartSchedule(init_lengthscale_range=(1.0, 1.0))

    def test_initial_draws_in_range(self):
        rng = make_rng(0)
        s = RestartSchedule()
        for _ in range(200):
            p = np.exp(_draw_init(rng, 3, 2, s))
            assert 0 < p[0] <= 1 and 0 < p[4] <= 1
            assert np.all((p[1:4] > 0) & (p[1:4] <= 10)) and np.all((p[5:7] > 0) & (p[5:7] <= 10))
            assert 1e-4 <= p[-1] <= 1


class TestMultiRestart:
    def test_most_restarts_converge(self):
        X, S, r = smooth_problem()
        models, report = multi_restart_fit(X, S, r, RestartSchedule(seed=1))
        assert sum(rr.converged for rr in report.restarts) >= 18
        assert len(models) == len(report.completed)
        kinds = [rr.kind for rr in report.restarts]
        assert kinds == ["staged"] * 10 + ["joint"] * 10

    def test_monotone_and_stationary(self):
        X, S, r = smooth_problem(seed=2)
        models, report = multi_restart_fit(X, S, r, RestartSchedule(num_restarts=6, staged_count=3, seed=2))
        for rr in report.restarts:
            for ph in rr.phases:
                assert ph.final_value >= ph.initial_value - 1e-12
        best = max(range(len(models)), key=lambda j: models[j].lml)
        rr = report.restarts[report.completed[best]]
        if rr.converged:
            lml, g = lml_and_grad(models[best].hp, X, S, r)
            assert np.abs(g).max() < 1e-4 * (1 + abs(lml))

    def test_single_joint_restart(self):
        X, S, r = smooth_problem()
        models, report = multi_restart_fit(X, S, r, RestartSchedule(num_restarts=1, staged_count=0))
        assert len(models) == 1 and report.restarts[0].kind == "joint"
        assert [p.name for p in report.restarts[0].phases] == ["joint"]

    def test_deterministic(self):
        X, S, r = smooth_problem()
        sched = RestartSchedule(num_restarts=4, staged_count=2, seed=7)
        a = multi_restart_fit(X, S, r, sched)[1].to_dict()
        b = multi_restart_fit(X, S, r, sched)[1].to_dict()
        assert a == b

    def test_staged_hand_off(self):
        # phase 2 starts from phase 1's input-kernel optimum with the output
        # kernel switched on at its freshly drawn initial values
        X, S, r = smooth_problem()
        sched = RestartSchedule(num_restarts=1, staged_count=1, seed=3)
        _, report = multi_restart_fit(X, S, r, sched)
        ph1, ph2 = report.restarts[0].phases
        assert (ph1.name, ph2.name) == ("phase1_input", "phase2_joint")
        theta = _draw_init(make_rng(child_seeds(3, 2)[0]), 2, 2, sched)
        mask = np.zeros(theta.size, bool)
        mask[:3] = True
        mask[-1] = True
        obj = _Objective(X, S, r, "exact")
        x, f1, _ = lbfgs_maximize(obj.restricted(theta, mask, False), theta[mask])
        assert f1 == ph1.final_value
        theta[mask] = x
        lml2 = lml_and_grad(KernelHyperparams.from_log(theta, 2, 2), X, S, r)[0]
        assert ph2.initial_value == pytest.approx(lml2, rel=1e-12)

    def test_input_only(self):
        X, S, r = smooth_problem()
        models, report = multi_restart_fit(X, S, r, RestartSchedule(num_restarts=2, staged_count=0,
                                                                    output_kernel=False))
        assert all(not m.hp.output_kernel_enabled for m in models)
        assert all(rr.kind == "input_only" for rr in report.restarts)

    def test_sparse_mode(self):
        X, S, r = smooth_problem(n=60)
        models, report = multi_restart_fit(X, S, r, RestartSchedule(num_restarts=2, staged_count=1),
                                           mode="sparse", inducing_count=15)
        assert len(report.inducing_indices) == 15
        assert all(m.P == 15 for m in models)

    def test_too_few_rows(self):
        with pytest.raises(ValueError):
            multi_restart_fit(np.zeros((1, 1)), np.ones((1, 1)), np.zeros(1))


class TestSelectTop:
    def test_sort(self):
        assert select_top([0] * 4, [0.1, 0.9, 0.5, 0.7], 3) == [1, 3, 2]

    def test_ties_by_lml_then_index(self):
        assert select_top([0] * 4, [0.5] * 4, 3, lmls=[1.0, 3.0, 3.0, 2.0]) == [1, 2, 3]
        assert select_top([0] * 3, [0.5] * 3, 2) == [0, 1]

    def test_identity(self):
        assert sorted(select_top([0] * 5, [3, 1, 4, 1, 5], 5)) == list(range(5))

    def test_nan_last(self):
        assert select_top([0] * 3, [np.nan, 0.2, 0.1], 2) == [1, 2]

    def test_errors(self):
        with pytest.raises(ValueError):
            select_top([], [], 1)
        with pytest.raises(ValueError):
            select_top([0, 0], [1, 2], 3)
