"""Acceptance suite: one test per criterion, each printing a PASS line.

Run with ``pytest tests/test_acceptance.py -v -s`` to see the per-criterion
summary lines.  The solver configurations used by the trend criteria were
fixed by pilot runs; the pilot values are recorded in the docstrings of the
tests that rely on them.
"""

import math
import time

import numpy as np
import pytest
from scipy.special import expit

from qtensor.experiments import (
    SynthSpec,
    gen_synthetic,
    prediction_error,
    reference_boundaries,
    run_one,
    run_sweep,
)
from qtensor.likelihood import (
    ObjectiveContext,
    grad_boundary,
    grad_factor,
    grad_x,
    numeric_grad_boundary,
    numeric_grad_factor,
    numeric_grad_x,
)
from qtensor.quantization import (
    Boundaries,
    NoiseModel,
    bin_probability,
    compute_constants,
    default_boundaries,
    error_bound,
    quantize_sample,
)
from qtensor.solver import SolverConfig, run
from qtensor.tensor_core import (
    cp_reconstruct,
    factor_coefficients,
    fold,
    frobenius_norm,
    khatri_rao,
    unfold,
)

SEEDS_10 = list(range(10))


def _report(criterion, detail):
    print(f"\n[PASS] criterion {criterion}: {detail}")


def _random_boundaries(rng, levels):
    if levels == 2:
        return Boundaries(
            omegas=(float(rng.uniform(-0.3, 0.3)),), kappas=(),
            alpha_low=-1.0, alpha_upper=1.0,
        )
    while True:
        omegas = np.sort(rng.uniform(-0.6, 0.6, levels - 1))
        if np.min(np.diff(omegas)) >= 0.25:
            break
    return Boundaries(
        omegas=tuple(float(w) for w in omegas),
        kappas=tuple(0.1 for _ in range(levels - 2)),
        alpha_low=-1.0, alpha_upper=1.0,
    )


def test_criterion_1_gradient_correctness():
    """Analytic gradients of every block match central finite differences."""
    start = time.perf_counter()
    rng = np.random.default_rng(2024)
    lambdas = [0.0, 1.0, 10.0]
    kinds = ["probit", "logistic"]
    worst = 0.0
    for i in range(20):
        shape = tuple(int(rng.integers(2, hi + 1)) for hi in (4, 3, 3))
        rank = int(rng.integers(1, 4))
        levels = int(rng.choice([2, 3, 4]))
        kind = kinds[i % 2]
        lam = lambdas[i % 3]
        model = NoiseModel(kind, float(rng.uniform(0.3, 1.0)))
        boundaries = _random_boundaries(rng, levels)
        xstar = rng.uniform(-1, 1, shape)
        qobs = quantize_sample(xstar, model, boundaries, 0.8, seed=10_000 + i)
        ctx = ObjectiveContext(observations=qobs, model=model, lam=lam, alpha=1.0)
        x = rng.uniform(-1, 1, shape)
        factors = [rng.normal(scale=0.5, size=(n, rank)) for n in shape]

        ga, gn = grad_x(ctx, x, factors, boundaries), numeric_grad_x(ctx, x, factors, boundaries)
        worst = max(worst, float(np.max(np.abs(ga - gn) / np.maximum(1.0, np.abs(ga)))))
        for k in range(3):
            fa = grad_factor(ctx, k, x, factors)
            fn = numeric_grad_factor(ctx, k, x, factors, boundaries)
            worst = max(worst, float(np.max(np.abs(fa - fn) / np.maximum(1.0, np.abs(fa)))))
        for level in range(1, levels):
            ba = grad_boundary(ctx, level, x, boundaries)
            bn = numeric_grad_boundary(ctx, level, x, boundaries)
            worst = max(worst, abs(ba - bn) / max(1.0, abs(ba)))
    elapsed = time.perf_counter() - start
    assert worst < 1e-6
    assert elapsed < 10.0
    _report(1, f"max relative gradient error {worst:.2e} over 20 instances in {elapsed:.1f}s")


def test_criterion_2_bin_probability_normalization():
    """Level probabilities sum to one to within 1e-12."""
    rng = np.random.default_rng(7)
    worst = 0.0
    for _ in range(1000):
        kind = "probit" if rng.random() < 0.5 else "logistic"
        model = NoiseModel(kind, float(rng.uniform(0.1, 2.0)))
        levels = int(rng.integers(2, 6))
        boundaries = _random_boundaries(rng, levels)
        x = float(rng.uniform(-2, 2))
        total = sum(
            float(bin_probability(model, boundaries, l, x)) for l in range(1, levels + 1)
        )
        worst = max(worst, abs(total - 1.0))
    assert worst < 1e-12
    _report(2, f"max |sum f_l - 1| = {worst:.2e} over 1000 draws")


def test_criterion_3_structural_identities():
    """Unfold/fold roundtrips exactly; CP matches its matricized form;
    Khatri-Rao equals the brute-force double loop."""
    rng = np.random.default_rng(11)
    for shape in [(4, 3), (3, 4, 2), (2, 3, 2, 4)]:
        x = rng.normal(size=shape)
        for k in range(len(shape)):
            assert np.array_equal(fold(unfold(x, k), k, shape), x)

    worst_identity = 0.0
    for shape, rank in [((4, 3, 5), 2), ((3, 2, 2), 3), ((5, 4, 3, 2), 2)]:
        factors = [rng.normal(size=(n, rank)) for n in shape]
        x = cp_reconstruct(factors)
        scale = 1.0 + max(frobenius_norm(f) for f in factors)
        for k in range(len(shape)):
            bk = factor_coefficients(factors, k)
            gap = frobenius_norm(x - fold(factors[k] @ bk.T, k, shape)) / scale
            worst_identity = max(worst_identity, gap)
    assert worst_identity <= 1e-10

    a = rng.normal(size=(4, 3))
    b = rng.normal(size=(5, 3))
    kr = khatri_rao(a, b)
    for col in range(3):
        for i in range(4):
            for j in range(5):
                assert kr[i * 5 + j, col] == a[i, col] * b[j, col]
    _report(3, f"roundtrips exact; worst CP-identity residual {worst_identity:.2e}")


def test_criterion_4_descent_with_frozen_penalty():
    """With the penalty weight frozen, the objective never increases."""
    model = NoiseModel("probit", 0.25)
    boundaries = reference_boundaries(4, 1.0)
    worst = -np.inf
    for known in (True, False):
        for seed in range(5):
            spec = SynthSpec(shape=(12, 10, 8), rank=3, sigma=0.25, levels=4,
                             boundaries=boundaries)
            xstar, _ = gen_synthetic(spec, seed)
            qobs = quantize_sample(xstar, model, boundaries, 1.0, seed=seed + 50)
            cfg = SolverConfig(
                rank=3, model=model, alpha=1.0, iterations=200, beta=0.1,
                lambda0=1.0, lambda_growth=1.0, boundaries_known=known, seed=seed,
            )
            result = run(qobs, cfg, boundaries if known else None)
            trace = result.objective_trace
            increases = np.diff(trace) / (1.0 + np.abs(trace[:-1]))
            worst = max(worst, float(np.max(increases)))
    assert worst <= 1e-9
    _report(4, f"largest normalized objective increase {worst:.2e} (200 iters x 5 seeds x 2 modes)")


def _trend_config(**overrides):
    """Shared n=40-style setup for the trend criteria (pilot-tuned beta=0.1)."""
    base = dict(
        rank=3, model=NoiseModel("probit", 0.25), alpha=1.0, iterations=200,
        beta=0.1, lambda0=1.0, lambda_growth=1.05, boundaries_known=True, seed=1,
    )
    base.update(overrides)
    return SolverConfig(**base)


def test_criterion_5_recovery_trends():
    """Mean error falls from n=20 to n=60, and 2-bit beats 1-bit at n=40.

    Pilot (2026-08, 3 seeds): dimension means 0.037/0.015/0.011 for
    n=20/40/60; bits means 0.081 (W=2) vs 0.015 (W=4).
    """
    start = time.perf_counter()
    cfg = _trend_config()
    spec = SynthSpec(shape=(20, 20, 20), rank=3, sigma=0.25, levels=4,
                     boundaries=reference_boundaries(4, 1.0))
    _, dim_summary = run_sweep("dimension", [20, 40, 60], spec, cfg, SEEDS_10)
    means = {v: m for v, m, _ in dim_summary}
    assert means[60] < means[20]

    spec40 = SynthSpec(shape=(40, 40, 40), rank=3, sigma=0.25, levels=4,
                       boundaries=reference_boundaries(4, 1.0))
    _, bits_summary = run_sweep("bits", [2, 4], spec40, cfg, SEEDS_10)
    bits = {v: m for v, m, _ in bits_summary}
    assert bits[4] <= bits[2]
    elapsed = time.perf_counter() - start
    assert elapsed < 300.0
    _report(
        5,
        "mean rel_error n20/n40/n60 = "
        f"{means[20]:.4f}/{means[40]:.4f}/{means[60]:.4f}; "
        f"W=2 {bits[2]:.4f} vs W=4 {bits[4]:.4f}; {elapsed:.0f}s",
    )


def test_criterion_6_observation_rate_trend():
    """Error at 80% observations is below error at 30%."""
    cfg = _trend_config()
    spec40 = SynthSpec(shape=(40, 40, 40), rank=3, sigma=0.25, levels=4,
                       boundaries=reference_boundaries(4, 1.0))
    _, summary = run_sweep("obs_rate", [0.3, 0.8], spec40, cfg, SEEDS_10)
    means = {v: m for v, m, _ in summary}
    assert means[0.8] < means[0.3]
    _report(6, f"mean rel_error obs=0.3 {means[0.3]:.4f} vs obs=0.8 {means[0.8]:.4f}")


def test_criterion_7_unknown_boundary_mode():
    """Boundary estimation stays within 2x of the known-boundary error.

    Pilot (2026-08, 3 seeds, beta=0.1): known 0.0148, unknown 0.0195,
    ratio 1.31.  The 2x bound is the acceptance threshold.
    """
    boundaries = default_boundaries(3, 1.0)
    spec = SynthSpec(shape=(40, 40, 40), rank=3, sigma=0.25, levels=3,
                     boundaries=boundaries)
    known_cfg = _trend_config(boundaries_known=True)
    unknown_cfg = _trend_config(boundaries_known=False)
    known = [run_one(spec, known_cfg, s).rel_error for s in SEEDS_10]
    unknown = [run_one(spec, unknown_cfg, s).rel_error for s in SEEDS_10]
    known_mean = float(np.mean(known))
    unknown_mean = float(np.mean(unknown))
    assert unknown_mean <= 2.0 * known_mean
    _report(
        7,
        f"known mean {known_mean:.4f}, unknown mean {unknown_mean:.4f} "
        f"(ratio {unknown_mean / known_mean:.2f} <= 2)",
    )


def test_criterion_8_logistic_constants_cross_check():
    """Grid-evaluated constants match the logistic closed forms."""
    rng = np.random.default_rng(88)
    worst_gamma = 0.0
    worst_slope = 0.0
    for _ in range(20):
        sigma = float(rng.uniform(0.2, 2.0))
        levels = int(rng.integers(2, 6))
        boundaries = _random_boundaries(rng, levels)
        alpha = float(rng.uniform(0.4, 1.5))
        model = NoiseModel("logistic", sigma)
        gamma, slope = compute_constants(model, boundaries, alpha)

        grid = np.linspace(-2 * alpha, 2 * alpha, 2001)
        ext = np.concatenate(([-np.inf], boundaries.omegas, [np.inf]))
        gamma_cf = np.inf
        fmin = np.inf
        for level in range(1, levels + 1):
            pu = expit((ext[level] - grid) / sigma)
            pl = expit((ext[level - 1] - grid) / sigma)
            gamma_cf = min(
                gamma_cf, float(np.min((pu * (1 - pu) + pl * (1 - pl)) / sigma**2))
            )
            fmin = min(fmin, float(np.min(pu - pl)))
        slope_cf = 1.0 / (2.0 * sigma * fmin)
        worst_gamma = max(worst_gamma, abs(gamma - gamma_cf) / (1.0 + abs(gamma_cf)))
        worst_slope = max(worst_slope, abs(slope - slope_cf) / (1.0 + abs(slope_cf)))
    assert worst_gamma < 1e-6
    assert worst_slope < 1e-6
    _report(8, f"closed-form gaps: gamma {worst_gamma:.2e}, slope {worst_slope:.2e}")


def test_criterion_9_bound_scaling():
    """Doubling every extent rescales the bound by the analytic ratio."""
    worst = 0.0
    for k in (2, 3, 4):
        for n in (10, 20, 40):
            shape = (n,) * k
            doubled = (2 * n,) * k
            gamma, slope, delta, rank = 0.7, 1.3, 0.1, 2
            u1 = error_bound(rank, shape, gamma, slope, delta, alpha=1e300)
            u2 = error_bound(rank, doubled, gamma, slope, delta, alpha=1e300)
            log_term = math.log(4 * k / 3)
            inner1 = k * n * log_term + math.log(2 / delta)
            inner2 = k * 2 * n * log_term + math.log(2 / delta)
            analytic = math.sqrt(inner2 / inner1 / 2**k)
            worst = max(worst, abs(u2 / u1 - analytic) / analytic)
    assert worst < 1e-12
    _report(9, f"max relative ratio error {worst:.2e} for K in (2,3,4)")


def test_criterion_10_prediction_metric_oracle():
    """The original rating-dataset experiment is not reproduced here (the
    dataset is not distributable and the 100-run/n=120 sweeps are scaled
    down; criteria 5-7 carry the trend content), so this criterion pins the
    discrete prediction metric against a brute-force oracle instead."""
    rng = np.random.default_rng(10)
    levels = 6
    true_levels = rng.integers(1, levels + 1, 500)
    estimates = rng.uniform(0.0, levels + 1.0, 500)
    got = prediction_error(true_levels, estimates, levels)
    total = 0.0
    for t, e in zip(true_levels, estimates):
        best = min(range(1, levels + 1), key=lambda l: (abs(e - l), l))
        total += abs(t - best) / (levels - 1)
    oracle = total / 500
    assert got == pytest.approx(oracle, rel=1e-12)
    assert prediction_error(np.array([1, 6]), np.array([6.0, 1.0]), 6) == 1.0
    assert prediction_error(np.array([3]), np.array([3.0]), 6) == 0.0
    _report(10, f"metric equals brute-force oracle ({got:.4f}); full-scale dataset runs out of scope")
