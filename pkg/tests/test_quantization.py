import math

import numpy as np
import pytest
from scipy.special import expit

from qtensor.quantization import (
    Boundaries,
    EmptyObservationError,
    NoiseModel,
    bin_probability,
    compute_constants,
    default_boundaries,
    error_bound,
    level_representatives,
    quantize_sample,
    quantize_values,
)

REFERENCE_4 = Boundaries(
    omegas=(-0.4, 0.0, 0.4), kappas=(0.05, 0.05), alpha_low=-1.0, alpha_upper=1.0
)


def _random_boundaries(rng, levels, span=0.6, min_gap=0.15):
    while True:
        omegas = np.sort(rng.uniform(-span, span, size=levels - 1))
        if levels == 2 or np.min(np.diff(omegas)) >= min_gap:
            break
    kappas = tuple(min_gap / 2 for _ in range(max(levels - 2, 0)))
    return Boundaries(omegas=tuple(omegas), kappas=kappas, alpha_low=-1.0, alpha_upper=1.0)


class TestNoiseModel:
    def test_cdf_symmetry_at_zero(self):
        assert NoiseModel("logistic", 1.0).cdf(0.0) == pytest.approx(0.5)
        assert NoiseModel("probit", 1.0).cdf(0.0) == pytest.approx(0.5)

    def test_logistic_scaled_value(self):
        expected = 1.0 / (1.0 + math.exp(-1.0))
        assert NoiseModel("logistic", 2.0).cdf(2.0) == pytest.approx(expected, abs=1e-12)

    def test_cdf_strictly_monotone_pdf_positive(self):
        rng = np.random.default_rng(0)
        for kind in ("probit", "logistic"):
            model = NoiseModel(kind, float(rng.uniform(0.2, 2.0)))
            xs = np.sort(rng.uniform(-5, 5, size=200))
            cdf = model.cdf(xs)
            assert np.all(np.diff(cdf) > 0)
            assert np.all(model.pdf(xs) > 0)

    def test_pdf_matches_cdf_derivative(self):
        xs = np.linspace(-3, 3, 101)
        h = 1e-6
        for kind in ("probit", "logistic"):
            model = NoiseModel(kind, 0.7)
            numeric = (model.cdf(xs + h) - model.cdf(xs - h)) / (2 * h)
            np.testing.assert_allclose(model.pdf(xs), numeric, atol=1e-8)

    def test_pdf_deriv_matches_pdf_derivative(self):
        xs = np.linspace(-3, 3, 101)
        h = 1e-6
        for kind in ("probit", "logistic"):
            model = NoiseModel(kind, 0.7)
            numeric = (model.pdf(xs + h) - model.pdf(xs - h)) / (2 * h)
            np.testing.assert_allclose(model.pdf_deriv(xs), numeric, atol=1e-7)

    def test_invalid_inputs(self):
        with pytest.raises(ValueError):
            NoiseModel("cauchy", 1.0)
        with pytest.raises(ValueError):
            NoiseModel("probit", 0.0)


class TestBoundaries:
    def test_default_two_level(self):
        b = default_boundaries(2, 1.0)
        assert b.omegas == (0.0,)

    def test_default_four_level(self):
        b = default_boundaries(4, 1.0)
        assert b.omegas == (-0.5, 0.0, 0.5)
        assert b.alpha_low == -1.0 and b.alpha_upper == 1.0

    def test_default_satisfies_invariants(self):
        for levels in (2, 3, 4, 8):
            for alpha in (0.5, 1.0, 2.0):
                b = default_boundaries(levels, alpha)
                assert b.levels == levels
                diffs = np.diff(b.omegas)
                assert np.all(diffs > 0)
                assert all(d >= b.kappa(l) for d, l in zip(diffs, range(2, levels)))

    def test_ordering_enforced(self):
        with pytest.raises(ValueError):
            Boundaries(omegas=(0.5, 0.2), kappas=(0.1,), alpha_low=-1, alpha_upper=1)

    def test_gap_floor_enforced(self):
        with pytest.raises(ValueError):
            Boundaries(omegas=(0.0, 0.05), kappas=(0.2,), alpha_low=-1, alpha_upper=1)

    def test_box_enforced(self):
        with pytest.raises(ValueError):
            Boundaries(omegas=(-2.0,), kappas=(), alpha_low=-1, alpha_upper=1)


class TestBinProbability:
    def test_two_level_symmetry(self):
        model = NoiseModel("logistic", 1.0)
        b = default_boundaries(2, 1.0)
        assert bin_probability(model, b, 1, 0.0) == pytest.approx(0.5)

    def test_reference_probit_value(self):
        """Second-bin mass at x=0 equals the normal-CDF difference."""
        model = NoiseModel("probit", 0.25)
        got = float(bin_probability(model, REFERENCE_4, 2, 0.0))
        oracle = 0.5 * (1 + math.erf(0.0)) - 0.5 * (1 + math.erf(-1.6 / math.sqrt(2)))
        assert got == pytest.approx(oracle, abs=1e-12)
        assert got == pytest.approx(0.4452, abs=5e-5)

    def test_normalization_random(self):
        """Probabilities over all levels sum to one for random setups."""
        rng = np.random.default_rng(1)
        for _ in range(1000):
            kind = "probit" if rng.random() < 0.5 else "logistic"
            model = NoiseModel(kind, float(rng.uniform(0.1, 2.0)))
            levels = int(rng.integers(2, 6))
            b = _random_boundaries(rng, levels)
            x = float(rng.uniform(-2, 2))
            total = sum(float(bin_probability(model, b, l, x)) for l in range(1, levels + 1))
            assert abs(total - 1.0) < 1e-12

    def test_log_concavity_on_grid(self):
        """Second difference of log f_l is negative along the grid."""
        rng = np.random.default_rng(2)
        xs = np.linspace(-1.5, 1.5, 301)
        for kind in ("probit", "logistic"):
            model = NoiseModel(kind, 0.4)
            b = _random_boundaries(rng, 4)
            for level in range(1, 5):
                logf = np.log(bin_probability(model, b, level, xs))
                second = logf[2:] - 2 * logf[1:-1] + logf[:-2]
                assert np.all(second < 0)

    def test_level_out_of_range(self):
        with pytest.raises(ValueError):
            bin_probability(NoiseModel("probit", 1.0), default_boundaries(2, 1.0), 3, 0.0)


class TestQuantizeSample:
    def test_noise_free_thresholding(self):
        """Vanishing noise puts a positive entry above the zero boundary."""
        x = np.full((2, 2, 2), 0.5)
        b = default_boundaries(2, 1.0)
        q = quantize_sample(x, NoiseModel("probit", 1e-12), b, 1.0, seed=0)
        assert np.all(q.labels == 2)

    def test_full_rate_observes_everything(self):
        x = np.zeros((3, 4, 5))
        q = quantize_sample(x, NoiseModel("logistic", 0.5), default_boundaries(3, 1.0), 1.0, seed=1)
        assert q.observations.full_flag
        assert len(q.observations) == 60

    def test_deterministic(self):
        x = np.random.default_rng(3).uniform(-1, 1, (4, 4, 4))
        b = default_boundaries(4, 1.0)
        q1 = quantize_sample(x, NoiseModel("probit", 0.3), b, 0.6, seed=9)
        q2 = quantize_sample(x, NoiseModel("probit", 0.3), b, 0.6, seed=9)
        assert np.array_equal(q1.labels, q2.labels)
        assert q1.observations == q2.observations

    def test_observation_count_binomial(self):
        """|observed| stays within 5 sigma of N*p."""
        x = np.zeros((10, 10, 100))
        n, p = x.size, 0.35
        q = quantize_sample(x, NoiseModel("probit", 1.0), default_boundaries(2, 1.0), p, seed=4)
        sigma = math.sqrt(n * p * (1 - p))
        assert abs(len(q.observations) - n * p) < 5 * sigma

    def test_label_frequencies_match_bin_probabilities(self):
        """Empirical frequencies stay within 3 standard errors of the model."""
        model = NoiseModel("probit", 0.25)
        x = np.full((50, 50, 40), 0.2)
        q = quantize_sample(x, model, REFERENCE_4, 1.0, seed=5)
        n = x.size
        counts = np.bincount(q.labels, minlength=5)[1:]
        for level in range(1, 5):
            prob = float(bin_probability(model, REFERENCE_4, level, 0.2))
            se = math.sqrt(prob * (1 - prob) / n)
            assert abs(counts[level - 1] / n - prob) < 3 * se

    def test_empty_observation_error(self):
        x = np.zeros((2, 2))
        with pytest.raises(EmptyObservationError):
            quantize_sample(x, NoiseModel("probit", 1.0), default_boundaries(2, 1.0), 1e-12, seed=0)

    def test_logistic_noise_sampling_distribution(self):
        """Inverse-CDF logistic draws have the model CDF (KS-style check)."""
        model = NoiseModel("logistic", 0.5)
        rng = np.random.default_rng(6)
        draws = model.sample_noise(rng, 20000)
        for t in (-0.5, 0.0, 0.7):
            empirical = np.mean(draws <= t)
            assert abs(empirical - float(model.cdf(t))) < 0.012


class TestQuantizeValues:
    def test_boundary_value_maps_down(self):
        b = default_boundaries(4, 1.0)
        assert quantize_values(np.array([-0.5]), b)[0] == 1
        assert quantize_values(np.array([0.0]), b)[0] == 2
        assert quantize_values(np.array([0.50000001]), b)[0] == 4

    def test_representatives_are_interior(self):
        b = REFERENCE_4
        reps = level_representatives(b, 1.0)
        assert reps.tolist() == [(-1 - 0.4) / 2, -0.2, 0.2, (1 + 0.4) / 2]
        assert np.array_equal(quantize_values(reps, b), np.arange(1, 5))


class TestComputeConstants:
    def test_curvature_positive(self):
        """Strict log-concavity keeps the curvature constant positive."""
        rng = np.random.default_rng(7)
        for _ in range(20):
            kind = "probit" if rng.random() < 0.5 else "logistic"
            model = NoiseModel(kind, float(rng.uniform(0.2, 1.5)))
            levels = int(rng.integers(2, 6))
            b = _random_boundaries(rng, levels)
            alpha = float(rng.uniform(0.4, 1.5))
            gamma, slope = compute_constants(model, b, alpha)
            assert gamma > 0
            assert slope > 0

    def test_logistic_matches_closed_form(self):
        """Grid constants agree with the logistic closed forms."""
        rng = np.random.default_rng(8)
        for _ in range(20):
            sigma = float(rng.uniform(0.2, 2.0))
            levels = int(rng.integers(2, 6))
            b = _random_boundaries(rng, levels)
            alpha = float(rng.uniform(0.4, 1.5))
            model = NoiseModel("logistic", sigma)
            gamma, slope = compute_constants(model, b, alpha)
            grid = np.linspace(-2 * alpha, 2 * alpha, 2001)
            ext = np.concatenate(([-np.inf], b.omegas, [np.inf]))
            g_oracle = np.inf
            f_min = np.inf
            for level in range(1, levels + 1):
                pu = expit((ext[level] - grid) / sigma)
                pl = expit((ext[level - 1] - grid) / sigma)
                g_oracle = min(
                    g_oracle,
                    float(np.min((pu * (1 - pu) + pl * (1 - pl)) / sigma**2)),
                )
                f_min = min(f_min, float(np.min(pu - pl)))
            assert gamma == pytest.approx(g_oracle, abs=1e-6 * (1 + abs(g_oracle)))
            assert slope == pytest.approx(1.0 / (2 * sigma * f_min), rel=1e-6)

    def test_domain_monotonicity(self):
        """Widening the grid never raises gamma and never lowers the slope."""
        model = NoiseModel("probit", 0.4)
        b = REFERENCE_4
        g1, s1 = compute_constants(model, b, 0.6)
        g2, s2 = compute_constants(model, b, 1.2)
        assert g2 <= g1 + 1e-8 * (1 + abs(g1))
        assert s2 >= s1 - 1e-8 * (1 + abs(s1))


class TestErrorBound:
    def test_min_branch(self):
        shape = (10, 10, 10)
        tight = error_bound(2, shape, gamma=1e9, slope=1.0, delta=0.1, alpha=1.0)
        assert tight < 2.0
        loose = error_bound(2, shape, gamma=1e-9, slope=1.0, delta=0.1, alpha=1.0)
        assert loose == 2.0

    def test_formula_deterministic_under_doubling(self):
        shape = (8, 6, 10)
        doubled = tuple(2 * n for n in shape)
        got = error_bound(3, doubled, 1.0, 1.0, 0.2, 1e9)

        def u(shape):
            k = len(shape)
            inner = 8.0 * (sum(shape) * math.log(4 * k / 3) + math.log(2 / 0.2))
            return (4 * 3 / 1.0) * math.sqrt(inner / math.prod(shape))

        assert got == pytest.approx(u(doubled), rel=1e-12)

    def test_asymptotic_dimension_scaling(self):
        """Bound tracks r*sqrt(K log K / n^(K-1)) across doubling steps."""
        for k in (2, 3, 4):
            ratios = []
            for n in (10, 20, 40):
                shape = (n,) * k
                u = error_bound(2, shape, 1.0, 1.0, 0.25, 1e12)
                inner = k * n * math.log(4 * k / 3) + math.log(2 / 0.25)
                expected = 8 * math.sqrt(inner / n**k)
                ratios.append(u / expected)
            assert ratios[0] == pytest.approx(ratios[1], rel=1e-12)
            assert ratios[1] == pytest.approx(ratios[2], rel=1e-12)

    def test_monotone_in_shape_and_rank(self):
        base = error_bound(2, (10, 10, 10), 0.5, 1.0, 0.1, 1e9)
        assert error_bound(2, (20, 10, 10), 0.5, 1.0, 0.1, 1e9) <= base
        assert error_bound(3, (10, 10, 10), 0.5, 1.0, 0.1, 1e9) >= base

    def test_nonpositive_curvature_rejected(self):
        with pytest.raises(ValueError):
            error_bound(2, (4, 4), 0.0, 1.0, 0.1, 1.0)
