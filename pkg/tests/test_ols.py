import numpy as np
import pytest

from antitonic_pricing.market import MarketSpec, holder_noise
from antitonic_pricing.ols import OlsFit, fit_ols, intercept_correction


class TestFitOls:
    def test_exact_linear_data(self):
        fit = fit_ols([(1, 0), (1, 1), (1, 2)], [1, 3, 5])
        assert np.allclose(fit.theta, [1, 2], atol=1e-9)
        assert fit.n == 3

    def test_mean_in_one_dimension(self):
        fit = fit_ols([(1,), (1,)], [2, 4])
        assert np.allclose(fit.theta, [3], atol=1e-12)

    def test_two_by_two_normal_equations(self):
        # X'X = [[2,1],[1,1]], X'y = [1,1]; inverse [[1,-1],[-1,2]] gives (0,1)
        fit = fit_ols([(1, 0), (1, 1)], [0, 1])
        assert np.allclose(fit.theta, [0, 1], atol=1e-12)

    def test_residual_orthogonality(self):
        rng = np.random.default_rng(0)
        for _ in range(50):
            n, d = int(rng.integers(5, 200)), int(rng.integers(1, 6))
            X = np.column_stack([np.ones(n), rng.normal(size=(n, d - 1))]) if d > 1 else np.ones((n, 1))
            y = rng.normal(size=n)
            fit = fit_ols(X, y)
            resid = y - X @ fit.theta
            gram = X.T @ resid
            assert np.max(np.abs(gram)) <= 1e-8 * max(np.linalg.norm(y), 1.0) * n

    def test_exact_recovery_noiseless(self):
        rng = np.random.default_rng(1)
        X = np.column_stack([np.ones(100), rng.normal(size=(100, 3))])
        theta = np.array([2.0, -1.0, 0.5, 3.0])
        fit = fit_ols(X, X @ theta)
        assert np.max(np.abs(fit.theta - theta)) < 1e-9

    def test_singular_design_rejected(self):
        X = np.column_stack([np.ones(10), np.ones(10)])
        with pytest.raises(ValueError, match="singular design"):
            fit_ols(X, np.arange(10.0))

    def test_underdetermined_rejected(self):
        with pytest.raises(ValueError, match="at least"):
            fit_ols([(1.0, 2.0)], [1.0])


class TestInterceptCorrection:
    def test_noop_at_zero(self):
        fit = OlsFit(np.array([1.0, 2.0]), 10, 1.0)
        assert np.allclose(intercept_correction(fit, 0.0).theta, [1, 2])

    def test_additive_shift(self):
        fit = OlsFit(np.array([1.0, 2.0]), 10, 1.0)
        out = intercept_correction(fit, 0.5)
        assert np.allclose(out.theta, [1.5, 2.0])
        assert np.allclose(fit.theta, [1.0, 2.0])  # original untouched

    def test_monte_carlo_recovery_with_positive_p_min(self):
        # uniform exploration on [1, 6]; scaled sale indicator has conditional
        # mean theta0'x - p_min, so the corrected fit recovers theta0
        with pytest.warns(UserWarning, match="price window"):
            spec = MarketSpec(
                theta0=np.array([3.0, 2 / 3, 2 / 3, 2 / 3]),
                feature_low=-np.sqrt(2 / 3),
                feature_high=np.sqrt(2 / 3),
                noise=holder_noise(1.0),
                p_min=1.0,
                p_max=6.0,
            )
        rng = np.random.default_rng(42)
        n = 10**5
        X = np.empty((n, 4))
        X[:, 0] = 1.0
        X[:, 1:] = rng.uniform(spec.feature_low, spec.feature_high, (n, 3))
        v = X @ spec.theta0 + spec.noise.sample(rng, n)
        p = rng.uniform(spec.p_min, spec.p_max, n)
        y = (p <= v).astype(float)
        H = spec.p_max - spec.p_min
        fit = intercept_correction(fit_ols(X, H * y), spec.p_min)
        assert np.linalg.norm(fit.theta - spec.theta0) < 0.05
