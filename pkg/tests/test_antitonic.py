import itertools

import numpy as np
import pytest

from antitonic_pricing.antitonic import (
    StepFunction,
    WeightedSample,
    WeightedSamples,
    aggregate,
    evaluate,
    fit_pava,
    minimax_oracle,
)


def random_instance(rng, max_m=200, binary=True):
    m = int(rng.integers(1, max_m + 1))
    u = np.sort(rng.choice(np.arange(10 * max_m), size=m, replace=False)) / 10.0
    if binary:
        o = rng.integers(1, 6, m)
        y = rng.integers(0, o + 1) / o
    else:
        o = rng.integers(1, 6, m).astype(float)
        y = rng.random(m)
    return WeightedSamples(u, y, o)


def exhaustive_antitonic(samples):
    """Brute force: try every contiguous-block partition, keep the best
    least-squares fit whose block means are non-increasing."""
    u, y, o = samples.u, samples.y, samples.o
    m = len(y)
    best, best_sse = None, np.inf
    for cuts in itertools.product([0, 1], repeat=m - 1):
        bounds = [0] + [i + 1 for i, c in enumerate(cuts) if c] + [m]
        levels = np.empty(m)
        means = []
        for a, b in zip(bounds[:-1], bounds[1:]):
            mu = np.average(y[a:b], weights=o[a:b])
            means.append(mu)
            levels[a:b] = mu
        if any(means[i] < means[i + 1] - 1e-15 for i in range(len(means) - 1)):
            continue
        sse = float(np.sum(o * (y - levels) ** 2))
        if sse < best_sse - 1e-15:
            best_sse, best = sse, levels
    return best


class TestAggregate:
    def test_grouping_and_averaging(self):
        out = aggregate([(0.3, 1), (0.3, 0), (0.1, 1)])
        assert list(out.u) == [0.1, 0.3]
        assert list(out.y) == [1.0, 0.5]
        assert list(out.o) == [1, 2]

    def test_singleton(self):
        out = aggregate([(0.5, 1)])
        assert list(out.u) == [0.5] and list(out.y) == [1.0] and list(out.o) == [1]

    def test_constant_responses(self):
        rng = np.random.default_rng(0)
        u = rng.uniform(0, 1, 1000)
        out = aggregate((u, np.ones(1000)))
        assert np.all(out.y == 1.0)
        assert out.o.sum() == 1000

    def test_empty_errors(self):
        with pytest.raises(ValueError, match="no samples"):
            aggregate([])

    def test_non_binary_rejected(self):
        with pytest.raises(ValueError, match="binary"):
            aggregate([(0.1, 0.5)])

    def test_indexing_yields_records(self):
        out = aggregate([(0.3, 1), (0.1, 0)])
        assert out[0] == WeightedSample(0.1, 0.0, 1)
        assert len(out) == 2


class TestFitPava:
    def test_feasible_input_unchanged(self):
        fit = fit_pava(WeightedSamples([1, 2, 3, 4], [1, 1, 0, 0], [1, 1, 1, 1]))
        assert list(fit.levels) == [1, 1, 0, 0]

    def test_single_violator_pools_to_mean(self):
        fit = fit_pava(WeightedSamples([0, 1], [0, 1], [1, 1]))
        assert list(fit.levels) == [0.5, 0.5]

    def test_matches_minimax_on_fixed_instance(self):
        s = WeightedSamples([0, 1, 2, 3, 4], [1, 0, 1, 0, 0], [1, 1, 1, 1, 1])
        assert np.allclose(fit_pava(s).levels, minimax_oracle(s).levels, atol=1e-12)

    def test_unsorted_rejected(self):
        with pytest.raises(ValueError, match="strictly increasing"):
            fit_pava([(2.0, 1.0, 1.0), (1.0, 0.0, 1.0)])

    def test_duplicate_rejected(self):
        with pytest.raises(ValueError, match="strictly increasing"):
            fit_pava([(1.0, 1.0, 1.0), (1.0, 0.0, 1.0)])

    def test_monotonicity_and_range_random(self):
        rng = np.random.default_rng(1)
        for _ in range(200):
            s = random_instance(rng, max_m=60)
            fit = fit_pava(s)
            assert np.all(np.diff(fit.levels) <= 0)
            assert fit.levels.min() >= s.y.min() - 1e-12
            assert fit.levels.max() <= s.y.max() + 1e-12

    def test_idempotence(self):
        rng = np.random.default_rng(2)
        for _ in range(50):
            s = random_instance(rng, max_m=40)
            fit = fit_pava(s)
            refit = fit_pava(WeightedSamples(s.u, fit.levels, s.o))
            assert np.array_equal(fit.levels, refit.levels)

    def test_block_means_and_mean_preservation(self):
        rng = np.random.default_rng(3)
        for _ in range(100):
            s = random_instance(rng, max_m=50)
            fit = fit_pava(s)
            # weighted mean preserved (residual orthogonal to constants)
            assert np.isclose(
                np.average(fit.levels, weights=s.o),
                np.average(s.y, weights=s.o),
                atol=1e-12,
            )
            # each maximal constant block carries the weighted mean of its inputs
            splits = np.nonzero(np.diff(fit.levels) != 0)[0] + 1
            for blk_idx in np.split(np.arange(len(s)), splits):
                assert np.isclose(
                    fit.levels[blk_idx[0]],
                    np.average(s.y[blk_idx], weights=s.o[blk_idx]),
                    atol=1e-12,
                )

    def test_matches_exhaustive_small(self):
        rng = np.random.default_rng(4)
        for _ in range(150):
            s = random_instance(rng, max_m=7)
            assert np.allclose(fit_pava(s).levels, exhaustive_antitonic(s), atol=1e-10)


class TestMinimaxOracle:
    def test_pair_pools(self):
        fit = minimax_oracle(WeightedSamples([0, 1], [0, 1], [1, 1]))
        assert list(fit.levels) == [0.5, 0.5]

    def test_feasible_input(self):
        fit = minimax_oracle(WeightedSamples([0, 1, 2, 3], [1, 1, 0, 0], [1, 1, 1, 1]))
        assert list(fit.levels) == [1, 1, 0, 0]

    def test_equals_pava_on_random_instances(self):
        rng = np.random.default_rng(5)
        for _ in range(200):
            s = random_instance(rng, max_m=50)
            assert np.max(np.abs(fit_pava(s).levels - minimax_oracle(s).levels)) < 1e-10


class TestStepFunction:
    def test_left_constant_extension(self):
        f = StepFunction([0, 1], [1, 0])
        assert evaluate(f, -5) == 1.0

    def test_right_continuity(self):
        f = StepFunction([0, 1], [1, 0])
        assert evaluate(f, 0.5) == 1.0
        assert evaluate(f, 1.0) == 0.0

    def test_right_constant_extension(self):
        f = StepFunction([0, 1], [1, 0])
        assert evaluate(f, 7) == 0.0

    def test_vectorized_and_non_increasing(self):
        f = StepFunction([0.0, 0.5, 2.0], [3.0, 1.5, -1.0])
        grid = np.linspace(-1, 3, 101)
        vals = f(grid)
        assert np.all(np.diff(vals) <= 0)

    def test_invalid_construction(self):
        with pytest.raises(ValueError):
            StepFunction([1, 0], [1, 0])
        with pytest.raises(ValueError):
            StepFunction([0, 1], [0, 1])
        with pytest.raises(ValueError):
            StepFunction([], [])
        with pytest.raises(ValueError):
            StepFunction([0, np.inf], [1, 0])

    def test_immutable(self):
        f = StepFunction([0, 1], [1, 0])
        with pytest.raises(ValueError):
            f.levels[0] = 5.0
