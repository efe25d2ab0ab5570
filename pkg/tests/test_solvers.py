import warnings

import numpy as np
import pytest
from sklearn.exceptions import ConvergenceWarning

from oracles import denoise_cd_oracle, denoise_value, filter_operator, filter_oracle, prox_grid
from conftest import make_instance
from robust_gfi import (
    GammaSchedule,
    GsoConstraintSet,
    InnerConfig,
    ParameterError,
    RfiConfig,
    SignalBatch,
    SingularityError,
    filter_id_step,
    graph_denoise_step,
    objective_eval,
    prox_double_l1,
    rfi_d,
    rfi_iter,
    rfi_r,
    sample_covariance,
    tls_sem_baseline,
)
from robust_gfi.filters import Covariance, build_filter, sem_filter
from robust_gfi.graph import PerturbationSpec, generate_er, perturb_links
from robust_gfi.solvers import (
    default_ridge,
    denoise_objective,
    filter_id_gradient,
    tls_sem_alpha_max,
    with_gamma,
)


class TestConfig:
    def test_round_trip(self):
        cfg = RfiConfig(lambda_=0.5, gamma_schedule=GammaSchedule(1, 3, 9), ridge=1e-6)
        d = cfg.to_dict()
        assert d["lambda"] == 0.5 and "lambda_" not in d
        assert set(d) == {
            "lambda", "beta", "gamma_schedule", "stationarity_weight_x", "stationarity_weight_y",
            "max_outer_iters", "outer_tol", "inner", "ridge",
        }
        assert RfiConfig.from_dict(d) == cfg

    def test_rejects_unknown_and_invalid(self):
        with pytest.raises(ParameterError, match="unknown"):
            RfiConfig.from_dict({"lamda": 1.0})
        with pytest.raises(ParameterError):
            RfiConfig(lambda_=-1.0)
        with pytest.raises(ParameterError):
            RfiConfig(max_outer_iters=0)
        with pytest.raises(ParameterError):
            InnerConfig(tol=0.0)

    def test_gamma_schedule(self):
        g = GammaSchedule(0.1, 2.0, 1.0)
        assert [g.value(t) for t in range(5)] == pytest.approx([0.1, 0.2, 0.4, 0.8, 1.0])
        assert g.at_cap(4) and not g.at_cap(2)
        assert GammaSchedule.fixed(3.0).value(10) == 3.0
        assert with_gamma(RfiConfig(), 2.0).gamma_schedule.value(7) == 2.0


class TestFilterStep:
    def test_exact_recovery_without_noise(self, rng):
        s, h, batch = make_instance(rng, n=8, m=16)
        got = filter_id_step(s, batch, gamma=0.0)
        assert np.linalg.norm(got.matrix - h.matrix) / np.linalg.norm(h.matrix) < 1e-10
        got = filter_id_step(s, batch, gamma=10.0)
        assert np.linalg.norm(got.matrix - h.matrix) / np.linalg.norm(h.matrix) < 1e-10

    def test_matches_conjugate_gradient_oracle(self, rng):
        # DERIVED: independent matrix-form solve
        for _ in range(5):
            s, _, batch = make_instance(rng, n=5, m=8, noise=0.2)
            got = filter_id_step(s, batch, gamma=3.0).matrix
            ref = filter_oracle(s.entries, batch.x, batch.y, 3.0)
            assert np.linalg.norm(got - ref) <= 1e-8 * np.linalg.norm(ref)

    def test_gradient_vanishes_at_solution(self, rng):
        s, _, batch = make_instance(rng, n=5, m=12, noise=0.3)
        h = filter_id_step(s, batch, gamma=2.0).matrix
        g = filter_id_gradient(h, s, batch, 2.0)
        assert np.linalg.norm(g) < 1e-9 * np.linalg.norm(batch.y @ batch.x.T)
        # the gradient helper agrees with the matrix-form operator
        np.testing.assert_allclose(
            g / 2, filter_operator(h, s.entries, batch.x, 2.0) - batch.y @ batch.x.T, atol=1e-9
        )

    def test_underdetermined_uses_ridge_or_raises(self, rng):
        s, h, batch = make_instance(rng, n=6, m=2)
        with pytest.raises(SingularityError, match="ridge"):
            filter_id_step(s, batch, gamma=0.0, ridge=0.0)
        out = filter_id_step(s, batch, gamma=0.0)
        assert np.all(np.isfinite(out.matrix))
        ref = filter_oracle(s.entries, batch.x, batch.y, 0.0, ridge=default_ridge(batch.x))
        np.testing.assert_allclose(out.matrix, ref, atol=1e-6 * np.abs(ref).max())

    def test_dimension_checks(self, rng):
        s, _, batch = make_instance(rng, n=5)
        with pytest.raises(ParameterError, match="mismatch"):
            filter_id_step(np.zeros((4, 4)), batch, 1.0)
        with pytest.raises(ParameterError):
            filter_id_step(s, batch, -1.0)


class TestProx:
    def test_grid_oracle(self):
        # DERIVED: grid search on the scalar objective
        r = np.random.default_rng(0)
        for _ in range(100):
            v, a = r.normal(scale=2, size=2)
            t, lam, beta = r.uniform(0.05, 2, size=3)
            assert prox_double_l1(v, t, lam, beta, a) == pytest.approx(
                prox_grid(v, t, lam, beta, a), abs=1e-4
            )

    def test_hand_cases(self):
        # anchor 0 collapses to soft thresholding at step*(lam+beta)
        assert prox_double_l1(3.0, 1.0, 0.5, 0.5, 0.0) == pytest.approx(2.0)
        assert prox_double_l1(0.5, 1.0, 0.5, 0.5, 0.0) == 0.0
        # a large lambda pins the value to the anchor
        assert prox_double_l1(0.9, 1.0, 10.0, 0.1, 1.0) == pytest.approx(1.0)
        np.testing.assert_allclose(
            prox_double_l1(np.array([3.0, -3.0]), 1.0, 0.5, 0.5, 0.0), [2.0, -2.0]
        )

    def test_argument_checks(self):
        with pytest.raises(ParameterError):
            prox_double_l1(1.0, 0.0, 1.0, 1.0, 0.0)
        with pytest.raises(ParameterError):
            prox_double_l1(1.0, 1.0, -1.0, 1.0, 0.0)


def _denoise_instance(r, n=4):
    s = generate_er(n, 0.5, r)
    h = build_filter(s, r.uniform(-1, 1, 3)).matrix
    sb = perturb_links(s, PerturbationSpec.symmetric(0.3), r).entries
    return s, h, sb


class TestDenoise:
    def test_matches_coordinate_descent(self):
        # DERIVED: exact coordinate descent oracle
        r = np.random.default_rng(5)
        cfg = RfiConfig(lambda_=0.3, beta=0.05, inner=InnerConfig(max_iters=100000, tol=1e-12))
        for _ in range(3):
            _, h, sb = _denoise_instance(r)
            res = graph_denoise_step(h, sb, GsoConstraintSet(), cfg, gamma=1.0)
            ref = denoise_cd_oracle(sb, 0.3, 0.05, [(1.0, h)])
            f_ref = denoise_value(ref, sb, 0.3, 0.05, [(1.0, h)])
            assert res.converged
            assert res.objective <= f_ref * (1 + 1e-6) + 1e-12
            assert res.objective == pytest.approx(denoise_objective(res.s_hat, h, sb, cfg, 1.0))

    def test_feasible_output(self):
        r = np.random.default_rng(6)
        _, h, sb = _denoise_instance(r, n=6)
        cset = GsoConstraintSet(nonnegative=True, entry_upper_bound=1.0)
        res = graph_denoise_step(h, sb, cset, RfiConfig(), gamma=5.0)
        s = np.asarray(res.s_hat)
        np.testing.assert_array_equal(s, s.T)
        assert np.all(np.diag(s) == 0) and s.min() >= 0 and s.max() <= 1.0

    def test_zero_smooth_term_returns_prox_of_anchor(self):
        # with gamma = 0 the problem is separable: s = prox(s_bar) with any step
        r = np.random.default_rng(7)
        _, h, sb = _denoise_instance(r, n=5)
        cfg = RfiConfig(lambda_=1.0, beta=0.2)
        res = graph_denoise_step(h, sb, GsoConstraintSet(), cfg, gamma=0.0)
        np.testing.assert_allclose(np.asarray(res.s_hat), sb, atol=1e-12)

    def test_nonconvergence_warns(self):
        r = np.random.default_rng(8)
        _, h, sb = _denoise_instance(r, n=6)
        cfg = RfiConfig(lambda_=0.01, beta=0.0, inner=InnerConfig(max_iters=2, tol=1e-15))
        with pytest.warns(ConvergenceWarning):
            res = graph_denoise_step(h, sb, GsoConstraintSet(), cfg, gamma=10.0)
        assert not res.converged and res.n_iter == 2

    def test_covariance_terms_are_used(self):
        r = np.random.default_rng(9)
        s, h, sb = _denoise_instance(r, n=6)
        c = Covariance(h @ h.T)
        cfg = RfiConfig(lambda_=0.01, beta=0.001, stationarity_weight_y=100.0)
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", ConvergenceWarning)
            res = graph_denoise_step(np.zeros_like(sb), sb, GsoConstraintSet(), cfg, 0.0, cov_y=c)
        s_hat = np.asarray(res.s_hat)
        comm = lambda m: np.linalg.norm(m @ c.c - c.c @ m)
        assert comm(s_hat) < comm(sb)


class TestAlgorithms:
    def _setup(self, seed, n=8, m=40, noise=0.05, p=0.15):
        r = np.random.default_rng(seed)
        s = generate_er(n, 0.4, r)
        h = build_filter(s, r.uniform(-1, 1, 4))
        h_m = h.matrix / np.linalg.norm(h.matrix)
        x = r.standard_normal((n, m))
        y = h_m @ x + noise * r.standard_normal((n, m)) / np.sqrt(n)
        sb = perturb_links(s, PerturbationSpec.symmetric(p), r)
        return s, h_m, sb, SignalBatch(x, y)

    def test_rfi_iter_trajectory(self):
        s, h, sb, batch = self._setup(0)
        cfg = RfiConfig(gamma_schedule=GammaSchedule(1.0, 2.0, 8.0), max_outer_iters=30)
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", ConvergenceWarning)
            res = rfi_iter(sb, batch, GsoConstraintSet(), cfg)
        assert res.method == "rfi_iter" and res.outer_iters == len(res.objective_trajectory)
        gamma = cfg.gamma_schedule.value(res.outer_iters - 1)
        assert res.objective_trajectory[-1] == pytest.approx(
            objective_eval(res.s_hat, res.h_hat, sb, batch, cfg, gamma)
        )

    def test_rfi_iter_fixed_gamma_is_monotone(self):
        s, h, sb, batch = self._setup(1)
        cfg = RfiConfig(gamma_schedule=GammaSchedule.fixed(5.0), max_outer_iters=15, outer_tol=1e-12)
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", ConvergenceWarning)
            traj = rfi_iter(sb, batch, GsoConstraintSet(), cfg).objective_trajectory
        assert all(b <= a + 1e-9 * max(1.0, abs(a)) for a, b in zip(traj, traj[1:]))

    def test_robust_methods_improve_on_observed_graph(self):
        s, h, sb, batch = self._setup(2, m=200, noise=0.0)
        cset = GsoConstraintSet()
        cfg = RfiConfig()
        cov = sample_covariance(batch.y)
        err = lambda a: np.abs(np.asarray(a) - s.entries).sum()
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", ConvergenceWarning)
            for res in (rfi_d(sb, batch, cset, cfg, cov), rfi_r(sb, batch, cset, cfg, cov)):
                assert err(res.s_hat) < err(sb)
                assert res.outer_iters == 1 and len(res.objective_trajectory) == 1

    def test_two_step_methods_need_covariance(self):
        s, h, sb, batch = self._setup(3)
        with pytest.raises(ParameterError):
            rfi_d(sb, batch, GsoConstraintSet(), RfiConfig(), None)
        with pytest.raises(ParameterError):
            rfi_r(sb, batch, GsoConstraintSet(), RfiConfig(), None)


class TestTlsSem:
    def _sem(self, seed, p=0.1, m=300):
        r = np.random.default_rng(seed)
        g = generate_er(10, 0.3, r)
        s = g.entries
        a = 0.5 / np.abs(np.linalg.eigvalsh(s)).max()
        sb = perturb_links(g, PerturbationSpec.symmetric(p), r).entries
        assert np.any(sb != s)
        x = r.standard_normal((10, m))
        y = sem_filter(a * s).matrix @ x
        return a * s, a * sb, SignalBatch(x, y)

    def test_alpha_max_gives_zero_perturbation(self):
        s, sb, batch = self._sem(0)
        amax = tls_sem_alpha_max(sb, batch)
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", ConvergenceWarning)
            res = tls_sem_baseline(sb, batch, alpha=1.01 * amax, max_iters=1)
        np.testing.assert_array_equal(np.asarray(res.s_hat), sb)

    def test_recovers_sem_graph(self):
        s, sb, batch = self._sem(3)
        alpha = 0.1 * tls_sem_alpha_max(sb, batch)
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", ConvergenceWarning)
            res = tls_sem_baseline(sb, batch, alpha=alpha)
        s_hat = np.asarray(res.s_hat)
        assert np.linalg.norm(s_hat - s) < 0.5 * np.linalg.norm(sb - s)
        np.testing.assert_allclose(np.linalg.inv(np.eye(10) - s_hat), res.h_hat.matrix, atol=1e-10)
        assert res.method == "tls_sem" and np.all(np.diag(s_hat) == 0)

    def test_argument_checks(self):
        s, sb, batch = self._sem(2)
        with pytest.raises(ParameterError):
            tls_sem_baseline(sb, batch, alpha=-1.0)
        with pytest.raises(ParameterError):
            tls_sem_baseline(sb, batch, fit_weight=0.0)
