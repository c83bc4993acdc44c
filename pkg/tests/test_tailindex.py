"""Hill estimator, Pareto plot, LMS start and the forward search."""

import math

import numpy as np
import pytest

from redescending.errors import ExperimentInterrupted
from redescending.tailindex import (
    ForwardSearchConfig,
    ParetoPlot,
    StopReason,
    analyze_sample,
    forward_search,
    hill,
    hill_path,
    lms_line,
    pareto_plot,
    tail_experiment,
)


def exact_pareto(n=1000):
    """Sample whose Pareto quantile plot lies exactly on y = x."""
    j = np.arange(1, n + 1)
    return (n + 1.0) / (n + 1.0 - j)


def kinked_plot():
    j = np.arange(1, 201)
    x = -np.log(j / 201.0)
    x30 = x[29]
    y = np.where(j <= 30, 2.0 * x30 + 0.5 * (x - x30), 2.0 * x)
    return ParetoPlot(x=x, y=y, sigmas=np.full(200, 0.05))


class TestHill:
    def test_known_value(self):
        estimate = hill([1.0, 2.0, 4.0, 8.0, 16.0], 2)
        assert estimate.inv_alpha == pytest.approx(1.5 * math.log(2.0), rel=1e-14)
        assert estimate.alpha == pytest.approx(1.0 / (1.5 * math.log(2.0)))

    def test_exact_pareto(self):
        assert hill(exact_pareto(), 100).inv_alpha == pytest.approx(0.978, abs=1e-3)

    def test_scale_invariance(self, rng):
        x = np.abs(rng.standard_t(3.0, size=500))
        assert hill(7.5 * x, 40).inv_alpha == pytest.approx(hill(x, 40).inv_alpha, rel=1e-12)

    def test_two_sided_uses_magnitudes(self):
        x = np.array([-16.0, 1.0, -2.0, 4.0, 8.0])
        assert hill(x, 2).inv_alpha == pytest.approx(1.5 * math.log(2.0))

    def test_invalid_k_and_threshold(self):
        x = [1.0, 2.0, 3.0, 4.0]
        with pytest.raises(ValueError):
            hill(x, 0)
        with pytest.raises(ValueError):
            hill(x, 4)
        with pytest.raises(ValueError):
            hill([-1.0, 0.0, 1.0, 2.0, 3.0], 3, two_sided=False)

    def test_path_matches_pointwise(self, rng):
        x = np.abs(rng.standard_t(4.0, size=300))
        ks = [1, 5, 30, 299]
        expected = [hill(x, k).inv_alpha for k in ks]
        np.testing.assert_allclose(hill_path(x, ks), expected, rtol=1e-10)
        assert hill_path(x, []).size == 0


class TestParetoPlot:
    def test_exact_pareto_lies_on_diagonal(self):
        plot = pareto_plot(exact_pareto())
        assert len(plot) == 995
        assert plot.n == 1000
        np.testing.assert_allclose(plot.y, plot.x, atol=1e-12)
        assert plot.x[0] == pytest.approx(-math.log(6 / 1001))
        assert np.all(np.diff(plot.x) < 0)
        assert np.all(plot.sigmas > 0) and np.all(np.isfinite(plot.sigmas))

    def test_one_sided_uses_positive_part(self, rng):
        x = rng.standard_normal(400)
        plot = pareto_plot(x, two_sided=False)
        assert plot.n == int(np.count_nonzero(x > 0))
        assert pareto_plot(x).n == 400

    @pytest.mark.parametrize("kde_on_logs", [False, True])
    def test_sigmas_follow_quantile_standard_error(self, kde_on_logs):
        # log X of the exact Pareto sample has density j/(n+1) at y_j
        plot = pareto_plot(exact_pareto(), kde_on_logs=kde_on_logs)
        j = np.arange(50, 201)
        p = 1.0 - j / 1001.0
        expected = np.sqrt(p * (1.0 - p) / 1000.0) / (1.0 - p)
        np.testing.assert_allclose(plot.sigmas[j - 6], expected, rtol=0.1)

    def test_records_discarded_points(self):
        plot = pareto_plot(exact_pareto())
        assert plot.n_discard == 5
        assert plot.tail_count(10) == 15
        assert ParetoPlot(x=np.ones(3), y=np.ones(3), sigmas=np.ones(3)).n == 3

    def test_constant_sample(self):
        with pytest.raises(ValueError):
            pareto_plot(np.full(100, 2.0))

    def test_needs_fifty_positive_values(self):
        with pytest.raises(ValueError):
            pareto_plot(np.arange(1.0, 50.0))

    def test_manual_plot_validation(self):
        with pytest.raises(ValueError):
            ParetoPlot(x=np.ones(3), y=np.ones(2), sigmas=np.ones(3))
        with pytest.raises(ValueError):
            ParetoPlot(x=np.ones(3), y=np.ones(3), sigmas=np.zeros(3))


class TestLmsLine:
    def test_three_collinear_points(self):
        line = lms_line([0.0, 1.0, 2.0], [0.0, 1.0, 2.0])
        assert line.slope == 1.0
        assert line.intercept == 0.0
        assert line.criterion == 0.0

    def test_ignores_outlier(self):
        x = np.arange(10.0)
        y = 2.0 * x + 1.0
        y[9] = 100.0
        line = lms_line(x, y)
        assert line.slope == pytest.approx(2.0)
        assert line.intercept == pytest.approx(1.0)

    def test_random_pairs_on_large_input(self, rng):
        x = rng.uniform(0.0, 5.0, 500)
        y = 3.0 * x - 1.0
        y[::10] += 40.0
        line = lms_line(x, y, seed=4)
        assert line.slope == pytest.approx(3.0, rel=1e-9)
        assert lms_line(x, y, seed=4) == line

    def test_degenerate_inputs(self):
        with pytest.raises(ValueError):
            lms_line([0.0, 1.0], [0.0, 1.0])
        with pytest.raises(ValueError):
            lms_line([1.0, 1.0, 1.0], [0.0, 1.0, 2.0])


class TestForwardSearch:
    def test_default_block_size(self):
        assert ForwardSearchConfig().block_for(1000) == 10
        assert ForwardSearchConfig().block_for(120) == 3
        assert ForwardSearchConfig(block_size=7).block_for(1000) == 7
        with pytest.raises(ValueError):
            ForwardSearchConfig(block_size=2)

    def test_maximum_weight(self):
        assert ForwardSearchConfig().kernel().max_weight == pytest.approx(0.965, abs=5e-4)

    @pytest.mark.parametrize("iterate", [True, False])
    def test_exact_pareto_is_exhausted(self, iterate):
        result = forward_search(pareto_plot(exact_pareto()), ForwardSearchConfig(iterate_new_weights=iterate))
        assert result.stop_reason is StopReason.EXHAUSTED
        assert result.n_included == 995
        assert result.slope == pytest.approx(1.0, abs=1e-8)
        assert result.inv_alpha == result.slope

    @pytest.mark.parametrize("iterate", [True, False])
    def test_stops_at_kink(self, iterate):
        result = forward_search(kinked_plot(), ForwardSearchConfig(block_size=10, iterate_new_weights=iterate))
        assert result.stop_reason is StopReason.WEIGHTS_COLLAPSED
        assert result.n_included == 30
        assert result.slope == pytest.approx(0.5, abs=1e-8)
        assert len(result.frozen_weights) == 30

    def test_inclusion_grows_by_blocks(self, rng):
        plot = pareto_plot(np.abs(rng.standard_t(3.0, size=1000)))
        result = forward_search(plot)
        assert result.block_size == 10
        assert len(result.frozen_weights) == result.n_included
        assert result.n_included % 10 == 0 or result.n_included == len(plot)
        assert 10 <= result.n_included <= len(plot)

    def test_needs_two_blocks(self):
        plot = ParetoPlot(x=np.linspace(5, 0, 8), y=np.linspace(5, 0, 8), sigmas=np.ones(8))
        with pytest.raises(ValueError):
            forward_search(plot, ForwardSearchConfig(block_size=5))

    def test_noisy_line_is_exhausted(self, rng):
        j = np.arange(1, 301)
        x = -np.log(j / 301.0)
        sigmas = 0.1 / np.sqrt(j)
        y = 0.4 * x + 1.0 + 0.2 * sigmas * rng.standard_normal(j.size)
        result = forward_search(ParetoPlot(x=x, y=y, sigmas=sigmas), ForwardSearchConfig(block_size=10))
        assert result.stop_reason is StopReason.EXHAUSTED
        assert result.n_included == 300
        assert result.slope == pytest.approx(0.4, abs=0.01)

    def test_rejected_block_leaves_line_unchanged(self):
        plot = kinked_plot()
        full = forward_search(plot, ForwardSearchConfig(block_size=10))
        top = ParetoPlot(x=plot.x[:30], y=plot.y[:30], sigmas=plot.sigmas[:30], n=200)
        assert forward_search(top, ForwardSearchConfig(block_size=10)).slope == pytest.approx(full.slope, abs=1e-12)

    @pytest.mark.parametrize("nu", [2.0, 3.0, 5.0])
    def test_inclusion_never_shrinks_with_stop_fraction(self, rng, nu):
        plot = pareto_plot(np.abs(rng.standard_t(nu, size=1000)))
        included = [
            forward_search(plot, ForwardSearchConfig(stop_fraction=fraction)).n_included
            for fraction in (0.2, 0.4, 0.5, 0.7, 0.9, 1.0)
        ]
        assert included == sorted(included)

    def test_analyze_sample(self):
        analysis = analyze_sample(exact_pareto())
        assert analysis.alpha == pytest.approx(1.0, abs=1e-8)
        assert analysis.search.n_included == 995
        assert analysis.hill.k == 999

    def test_hill_k_counts_discarded_points(self):
        analysis = analyze_sample(np.abs(np.random.default_rng(3).standard_t(3.0, size=1000)))
        assert analysis.plot.n_discard == 5
        if analysis.search.n_included < len(analysis.plot):
            assert analysis.hill.k == analysis.search.n_included + 5


class TestTailExperiment:
    def test_small_sweep(self):
        rows = tail_experiment([2.0, 4.0], n=200, n_reps=3, seed=1)
        assert [row.nu for row in rows] == [2.0, 4.0]
        for row in rows:
            assert 0 < row.p_opt < 1
            assert row.rmse_opt >= 0
            assert 0 <= row.n_failed <= 3

    def test_reproducible(self):
        a = tail_experiment([3.0], n=200, n_reps=2, seed=9)
        b = tail_experiment([3.0], n=200, n_reps=2, seed=9)
        assert a == b

    def test_stop_request(self):
        with pytest.raises(ExperimentInterrupted):
            tail_experiment([3.0], n=200, n_reps=2, should_stop=lambda: True)

    def test_validation(self):
        with pytest.raises(ValueError):
            tail_experiment([3.0], n=20)

    @pytest.mark.slow
    def test_full_sweep(self):
        grid = np.arange(1.0, 10.01, 0.5)
        rows = tail_experiment(grid, n=1000, n_reps=50)
        assert len(rows) == 19
        for row in rows:
            assert math.isfinite(row.rmse_alg_a)
            assert row.rmse_alg_a >= row.rmse_opt
        # the forward search overshoots the oracle k once the tail is light enough
        for row in rows:
            if row.nu >= 3.0:
                assert row.p_used_mean > row.p_opt
