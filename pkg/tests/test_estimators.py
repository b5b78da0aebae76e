import math
import warnings

import numpy as np
import pytest

from regression_data import RegressionDataset, build_gram, coefficient_loss
from langevin_potential import Potential, curvature_bound
from langevin_sampler import SamplerConfig, batch_means_se
from sparsity_prior import PriorParams
from datagen import Example1Spec, gen_example1
from estimators import (
    EwaConfig,
    LassoConfig,
    LassoConvergenceWarning,
    StepSizeWarning,
    aggregate_predictions,
    auto_reg_level,
    ewa_discrete,
    ewa_fit,
    lasso_fit,
    lasso_gauss_ideal,
    lasso_objective,
    resolve_tuning,
    soft_threshold,
    theoretical_reg_level,
)


def _rademacher(n, M, seed, sigma=1.0):
    X = np.where(np.random.default_rng(seed).uniform(size=(n, M)) < 0.5, -1.0, 1.0)
    return RegressionDataset(X, np.zeros(n), noise_level=sigma)


# ═══════════════════════════════════════════════════════════
#  Tuning
# ═══════════════════════════════════════════════════════════

class TestResolveTuning:

    def test_defaults_on_rademacher_design(self):
        config = resolve_tuning(_rademacher(100, 100, 0), EwaConfig())
        assert config.beta == pytest.approx(4.0)
        assert config.tau == pytest.approx(0.04)
        assert config.alpha == 0.0
        assert config.sampler.step == pytest.approx(4e-4)
        assert config.sampler.horizon == 100.0

    def test_sigma_scaling(self):
        config = resolve_tuning(_rademacher(100, 100, 0, sigma=2.0), EwaConfig())
        assert config.beta == pytest.approx(16.0)
        assert config.tau == pytest.approx(0.08)

    def test_preset_fields_unchanged(self):
        preset = EwaConfig(beta=2.0, tau=0.5, alpha=0.1, sampler=SamplerConfig(step=1e-3, horizon=10.0))
        assert resolve_tuning(_rademacher(20, 5, 0), preset) is preset

    def test_preset_without_sigma(self):
        ds = RegressionDataset(np.eye(3), np.ones(3))
        preset = EwaConfig(beta=2.0, tau=0.5, sampler=SamplerConfig(step=1e-3, horizon=10.0))
        assert resolve_tuning(ds, preset) is preset

    def test_auto_needs_sigma(self):
        ds = RegressionDataset(np.eye(3), np.ones(3))
        with pytest.raises(ValueError, match="sigma"):
            resolve_tuning(ds, EwaConfig())

    def test_invalid_config(self):
        with pytest.raises(ValueError):
            EwaConfig(beta=-1.0)
        with pytest.raises(ValueError):
            EwaConfig(alpha=-0.1)

    @pytest.mark.parametrize("seed", range(5))
    def test_stability_heuristic_on_example1(self, seed):
        ds = gen_example1(Example1Spec(n=100, M=100, S=5, seed=seed))
        with warnings.catch_warnings():
            warnings.simplefilter("error", StepSizeWarning)
            config = resolve_tuning(ds, EwaConfig())
        pot = Potential(build_gram(ds), config.beta, PriorParams(tau=config.tau))
        assert config.sampler.step * curvature_bound(pot) <= 2.0

    def test_warning_on_unstable_user_step(self):
        ds = _rademacher(30, 10, 1)
        with pytest.warns(StepSizeWarning):
            resolve_tuning(ds, EwaConfig(sampler=SamplerConfig(step=1.0, horizon=10.0)))


# ═══════════════════════════════════════════════════════════
#  Continuous EWA
# ═══════════════════════════════════════════════════════════

class TestEwaFit:

    def test_symmetric_posterior_centres_on_zero(self):
        ds = RegressionDataset([[1.0]], [0.0], noise_level=1.0)
        estimate, report = ewa_fit(ds, EwaConfig(sampler=SamplerConfig(step=0.01, horizon=2000.0, seed=3)))
        se = batch_means_se(report.batch_means)[0]
        assert abs(estimate[0]) < 3.0 * se

    def test_returns_copy_of_average(self):
        ds = _rademacher(20, 4, 2)
        estimate, report = ewa_fit(ds, EwaConfig(sampler=SamplerConfig(seed=1)))
        estimate[0] = 99.0
        assert report.average[0] != 99.0

    def test_negation_equivariance(self):
        rng = np.random.default_rng(4)
        X = rng.standard_normal((15, 6))
        Y = X @ np.array([1.0, 0, 0, -1.0, 0, 0]) + 0.3 * rng.standard_normal(15)
        config = EwaConfig(sampler=SamplerConfig(seed=8))
        plain, _ = ewa_fit(RegressionDataset(X, Y, noise_level=0.3), config)
        flipped_config = EwaConfig(sampler=SamplerConfig(seed=8, antithetic=True))
        flipped, _ = ewa_fit(RegressionDataset(X, -Y, noise_level=0.3), flipped_config)
        assert np.array_equal(flipped, -plain)

    def test_deterministic(self):
        ds = gen_example1(Example1Spec(n=30, M=20, S=2, seed=1))
        a, _ = ewa_fit(ds, EwaConfig(sampler=SamplerConfig(seed=5)))
        b, _ = ewa_fit(ds, EwaConfig(sampler=SamplerConfig(seed=5)))
        assert np.array_equal(a, b)

    def test_recovers_sparse_signal(self):
        ds = gen_example1(Example1Spec(n=100, M=100, S=5, seed=0))
        estimate, report = ewa_fit(ds, EwaConfig(sampler=SamplerConfig(seed=0)))
        assert report.restarts_used == 0
        assert coefficient_loss(estimate, ds.truth) < 0.3

    @pytest.mark.slow
    def test_example1_loss_band(self):
        losses = []
        for seed in range(50):
            ds = gen_example1(Example1Spec(n=100, M=100, S=5, seed=seed))
            estimate, report = ewa_fit(ds, EwaConfig(sampler=SamplerConfig(seed=1000 + seed)))
            assert not report.diverged
            losses.append(coefficient_loss(estimate, ds.truth))
        assert 0.03 <= np.mean(losses) <= 0.12


# ═══════════════════════════════════════════════════════════
#  Discrete EWA
# ═══════════════════════════════════════════════════════════

class TestEwaDiscrete:

    def test_identical_columns_uniform(self):
        f = np.tile(np.arange(5.0)[:, None], (1, 4))
        np.testing.assert_allclose(ewa_discrete(f, np.ones(5), beta=2.0), np.full(4, 0.25))

    def test_flat_at_huge_temperature(self):
        rng = np.random.default_rng(0)
        w = ewa_discrete(rng.standard_normal((10, 6)), rng.standard_normal(10), beta=1e12)
        np.testing.assert_allclose(w, np.full(6, 1 / 6), atol=1e-6)

    def test_two_point_weights(self):
        beta = 3.0
        # ||Y - f1||^2 - ||Y - f2||^2 = beta log 9
        f = np.array([[math.sqrt(beta * math.log(9.0)), 0.0]])
        np.testing.assert_allclose(ewa_discrete(f, [0.0], beta), [0.1, 0.9], rtol=1e-12)

    def test_shift_invariance_and_normalisation(self):
        rng = np.random.default_rng(1)
        f = rng.standard_normal((8, 5))
        y = rng.standard_normal(8)
        w = ewa_discrete(f, y, beta=1.5)
        assert w.sum() == pytest.approx(1.0)
        # adding c to Y and to every candidate leaves every squared loss unchanged
        np.testing.assert_allclose(ewa_discrete(f + 7.0, y + 7.0, beta=1.5), w, rtol=1e-10)

    def test_no_overflow(self):
        f = np.array([[0.0, 1e4, 2e4]])
        w = ewa_discrete(f, [0.0], beta=1e-3)
        np.testing.assert_array_equal(w, [1.0, 0.0, 0.0])

    def test_prior_weights(self):
        f = np.zeros((3, 2))
        np.testing.assert_allclose(ewa_discrete(f, np.zeros(3), 1.0, prior_weights=[0.25, 0.75]), [0.25, 0.75])
        np.testing.assert_allclose(ewa_discrete(f, np.zeros(3), 1.0, prior_weights=[0.0, 1.0]), [0.0, 1.0])

    def test_bad_inputs(self):
        with pytest.raises(ValueError):
            ewa_discrete(np.zeros((3, 2)), np.zeros(3), beta=0.0)
        with pytest.raises(ValueError):
            ewa_discrete(np.zeros((3, 2)), np.zeros(4), beta=1.0)
        with pytest.raises(ValueError):
            ewa_discrete(np.zeros((3, 2)), np.zeros(3), beta=1.0, prior_weights=[1.0, -1.0])
        with pytest.raises(ValueError, match="positive mass"):
            ewa_discrete(np.zeros((3, 2)), np.zeros(3), beta=1.0, prior_weights=[0.0, 0.0])

    def test_aggregate(self):
        f = np.array([[1.0, 3.0], [2.0, 4.0]])
        np.testing.assert_allclose(aggregate_predictions(f, [0.5, 0.5]), [2.0, 3.0])


# ═══════════════════════════════════════════════════════════
#  Lasso
# ═══════════════════════════════════════════════════════════

def _kkt_violation(ds, lam, r):
    grad = ds.design.T @ (ds.responses - ds.design @ lam) / ds.n
    zero = lam == 0
    return max(
        float(np.max(np.abs(grad[zero]) - r, initial=0.0)),
        float(np.max(np.abs(grad[~zero] - r * np.sign(lam[~zero])), initial=0.0)),
    )


class TestLasso:

    def test_soft_threshold(self):
        np.testing.assert_allclose(soft_threshold(np.array([-3.0, -0.5, 0.0, 0.5, 3.0]), 1.0), [-2, 0, 0, 0, 2])

    def test_theoretical_level(self):
        assert theoretical_reg_level(1.0, 100, 100) == pytest.approx(math.sqrt(8 * math.log(100) / 100))

    def test_auto_level_is_half_theoretical(self):
        assert auto_reg_level(2.0, 200, 500) == pytest.approx(2.0 * math.sqrt(2 * math.log(500) / 200))
        assert auto_reg_level(1.0, 100, 100) == pytest.approx(0.5 * theoretical_reg_level(1.0, 100, 100))

    def test_zero_response(self):
        ds = _rademacher(20, 10, 3)
        lam, info = lasso_fit(ds, LassoConfig())
        np.testing.assert_array_equal(lam, np.zeros(10))
        assert info["converged"]

    def test_orthogonal_design_closed_form(self):
        n = 4
        X = math.sqrt(n) * np.array([[0.5, 0.5], [0.5, -0.5], [0.5, 0.5], [0.5, -0.5]])
        Y = np.array([2.0, 0.1, 1.5, -0.2])
        ds = RegressionDataset(X, Y)
        r = 0.6
        lam, _ = lasso_fit(ds, LassoConfig(reg_level=r))
        np.testing.assert_allclose(lam, soft_threshold(X.T @ Y / n, r), atol=1e-12)
        np.testing.assert_allclose(lam, [0.25, 0.3], atol=1e-12)

        # a fine grid search agrees
        grid = np.linspace(-2, 2, 801)
        g1, g2 = np.meshgrid(grid, grid, indexing="ij")
        resid = Y[:, None, None] - X[:, [0]][:, :, None] * g1 - X[:, [1]][:, :, None] * g2
        obj = np.mean(resid ** 2, axis=0) + 2 * r * (np.abs(g1) + np.abs(g2))
        i, j = np.unravel_index(np.argmin(obj), obj.shape)
        np.testing.assert_allclose(lam, [grid[i], grid[j]], atol=2 * (grid[1] - grid[0]))

    def test_kkt_at_explicit_level(self):
        n = 4
        X = math.sqrt(n) * np.array([[0.5, 0.5], [0.5, -0.5], [0.5, 0.5], [0.5, -0.5]])
        ds = RegressionDataset(X, np.array([2.0, 0.1, 1.5, -0.2]))
        lam, _ = lasso_fit(ds, LassoConfig(reg_level=0.3, tol=1e-12))
        grad = X.T @ (ds.responses - X @ lam) / n
        np.testing.assert_allclose(grad, 0.3 * np.sign(lam), atol=1e-10)

    def test_zero_solution_from_max_level(self):
        ds = gen_example1(Example1Spec(n=40, M=30, S=3, seed=9))
        r_max = float(np.max(np.abs(ds.design.T @ ds.responses))) / ds.n
        at_max, _ = lasso_fit(ds, LassoConfig(reg_level=r_max))
        below, _ = lasso_fit(ds, LassoConfig(reg_level=0.99 * r_max))
        assert not np.any(at_max)
        assert np.count_nonzero(below) >= 1

    def test_kkt_and_monotone_objective(self):
        ds = gen_example1(Example1Spec(n=50, M=80, S=4, seed=2))
        config = LassoConfig(tol=1e-10)
        lam, info = lasso_fit(ds, config)
        r = info["reg_level"]
        assert r == pytest.approx(auto_reg_level(ds.noise_level, 50, 80))
        assert _kkt_violation(ds, lam, r) < 1e-6
        history = np.array(info["objective"])
        assert np.all(np.diff(history) <= 1e-10 * np.abs(history[:-1]) + 1e-14)
        assert history[-1] == pytest.approx(lasso_objective(ds, lam, r), rel=1e-9)

    def test_matches_scikit_learn(self):
        from sklearn.linear_model import Lasso
        ds = gen_example1(Example1Spec(n=60, M=40, S=3, seed=5))
        r = auto_reg_level(ds.noise_level, ds.n, ds.M)
        lam, _ = lasso_fit(ds, LassoConfig(tol=1e-12))
        reference = Lasso(alpha=r, fit_intercept=False, tol=1e-12, max_iter=100_000).fit(ds.design, ds.responses)
        np.testing.assert_allclose(lam, reference.coef_, atol=1e-6)

    def test_warm_start_same_solution(self):
        ds = gen_example1(Example1Spec(n=40, M=30, S=3, seed=6))
        cold, _ = lasso_fit(ds, LassoConfig(reg_level=0.2, tol=1e-12))
        warm, _ = lasso_fit(ds, LassoConfig(reg_level=0.2, tol=1e-12), start=np.ones(30))
        np.testing.assert_allclose(warm, cold, atol=1e-8)

    def test_non_convergence_warns(self):
        ds = gen_example1(Example1Spec(n=40, M=30, S=3, seed=7))
        with pytest.warns(LassoConvergenceWarning):
            _, info = lasso_fit(ds, LassoConfig(max_sweeps=1, tol=1e-14))
        assert not info["converged"] and info["sweeps"] == 1

    def test_auto_level_needs_sigma(self):
        with pytest.raises(ValueError):
            lasso_fit(RegressionDataset(np.eye(3), np.ones(3)), LassoConfig())

    @pytest.mark.parametrize("kwargs", [{"tol": 0.0}, {"max_sweeps": 0}, {"reg_level": -1.0}])
    def test_invalid_config(self, kwargs):
        with pytest.raises(ValueError):
            LassoConfig(**kwargs)

    def test_example1_loss_band(self):
        losses = []
        for seed in range(50):
            ds = gen_example1(Example1Spec(n=100, M=100, S=5, seed=seed))
            lam, _ = lasso_fit(ds, LassoConfig())
            losses.append(coefficient_loss(lam, ds.truth))
        assert 0.20 <= np.mean(losses) <= 0.55


# ═══════════════════════════════════════════════════════════
#  Ideal Lasso-Gauss
# ═══════════════════════════════════════════════════════════

class TestLassoGaussIdeal:

    def test_needs_truth(self):
        with pytest.raises(ValueError, match="true coefficients"):
            lasso_gauss_ideal(_rademacher(10, 5, 0))

    def test_pure_noise_selects_zero(self):
        rng = np.random.default_rng(3)
        X = rng.standard_normal((30, 8))
        ds = RegressionDataset(X, rng.standard_normal(30), truth=np.zeros(8))
        estimate, info = lasso_gauss_ideal(ds)
        np.testing.assert_array_equal(estimate, np.zeros(8))
        assert info["support"] == [] and info["loss"] == 0.0

    def test_noiseless_exact_recovery(self):
        rng = np.random.default_rng(4)
        X = rng.standard_normal((20, 10))
        truth = np.zeros(10)
        truth[[1, 4, 7]] = [1.5, -2.0, 1.0]
        ds = RegressionDataset(X, X @ truth, truth=truth)
        estimate, info = lasso_gauss_ideal(ds)
        np.testing.assert_allclose(estimate, truth, atol=1e-8)
        assert info["loss"] < 1e-16

    def test_loss_gram_selection(self):
        ds = gen_example1(Example1Spec(n=50, M=30, S=3, seed=8))
        estimate, info = lasso_gauss_ideal(ds, loss_gram=np.eye(30), grid_size=20)
        assert info["loss"] == pytest.approx(coefficient_loss(estimate, ds.truth))
        assert info["grid_size"] == 20
