"""Synthetic data generation, recovery metrics, and seeded parameter sweeps.

The synthetic protocol draws the first CP factor uniformly from
``[-0.5, 0.5]`` and the remaining factors from ``[0, 1]``, reconstructs the
tensor, and rescales it so the largest absolute entry is exactly 1.  A sweep
varies one axis of (rank, dimension, noise, obs_rate, bits) over a grid,
runs every (grid point, seed) combination independently, and reports one
record per run plus per-grid-point means.
"""

from __future__ import annotations

import dataclasses
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .quantization import (
    Boundaries,
    NoiseModel,
    QuantizedObservations,
    default_boundaries,
    level_representatives,
    quantize_sample,
)
from .solver import NumericalError, SolverConfig, run
from .tensor_core import ObservationSet, cp_reconstruct, frobenius_norm

__all__ = [
    "PRESET_RANK_GRID",
    "PRESET_SIGMA_GRID",
    "RunRecord",
    "SWEEP_AXES",
    "SynthSpec",
    "gen_synthetic",
    "holdout_split",
    "prediction_error",
    "prediction_grid",
    "quantize_to_levels",
    "reference_boundaries",
    "relative_error",
    "run_sweep",
]

SWEEP_AXES = ("rank", "dimension", "noise", "obs_rate", "bits")


@dataclass(frozen=True)
class SynthSpec:
    """Ground-truth generator settings for a three-way synthetic tensor."""

    shape: tuple
    rank: int
    sigma: float
    levels: int
    boundaries: Boundaries
    obs_rate: float = 1.0
    first_factor_range: tuple = (-0.5, 0.5)
    other_factor_range: tuple = (0.0, 1.0)

    def __post_init__(self):
        if len(self.shape) < 2:
            raise ValueError("need at least two modes")
        if self.rank < 1:
            raise ValueError("rank must be at least 1")
        if not self.sigma > 0:
            raise ValueError("sigma must be positive")
        if not 0 < self.obs_rate <= 1:
            raise ValueError("obs_rate must lie in (0, 1]")
        if self.boundaries.levels != self.levels:
            raise ValueError("boundaries do not match the level count")


@dataclass(frozen=True)
class RunRecord:
    """One solver run of a sweep; field order fixes the CSV column order."""

    run_id: str
    seed: int
    shape: tuple
    r_true: int
    r_est: int
    sigma_true: float
    sigma_est: float
    levels: int
    obs_rate: float
    boundaries_known: bool
    rel_error: float
    pred_error: float | None
    iterations: int
    wall_time_ms: float
    omega_hat: tuple


def reference_boundaries(levels: int, alpha: float) -> Boundaries:
    """Standard synthetic-protocol boundaries on the unit scale.

    For the unit box these are ``(0,)`` for two levels and
    ``(-0.4, 0, 0.4)`` for four; anything else falls back to the uniform
    default.
    """
    if alpha == 1.0 and levels == 4:
        base = default_boundaries(levels, alpha)
        return dataclasses.replace(base, omegas=(-0.4, 0.0, 0.4))
    return default_boundaries(levels, alpha)


def gen_synthetic(spec: SynthSpec, seed: int):
    """Ground-truth tensor with ``max |entry| == 1`` plus its factors.

    Raises on a degenerate all-zero draw instead of resampling, so callers
    keep seed control.
    """
    rng = np.random.default_rng(seed)
    lo, hi = spec.first_factor_range
    factors = [rng.uniform(lo, hi, size=(spec.shape[0], spec.rank))]
    lo, hi = spec.other_factor_range
    for n in spec.shape[1:]:
        factors.append(rng.uniform(lo, hi, size=(n, spec.rank)))
    x = cp_reconstruct(factors)
    peak = float(np.max(np.abs(x)))
    if peak == 0.0:
        raise ValueError(f"degenerate all-zero draw for seed {seed}")
    factors[0] = factors[0] / peak
    return x / peak, factors


def relative_error(xstar: np.ndarray, xhat: np.ndarray) -> float:
    """Squared Frobenius error ratio ``||X* - Xhat||^2 / ||X*||^2``."""
    xstar = np.asarray(xstar, dtype=np.float64)
    xhat = np.asarray(xhat, dtype=np.float64)
    if xstar.shape != xhat.shape:
        raise ValueError(f"shape mismatch {xstar.shape} vs {xhat.shape}")
    denom = frobenius_norm(xstar)
    if denom == 0.0:
        raise ValueError("reference tensor is zero")
    return (frobenius_norm(xstar - xhat) / denom) ** 2


def quantize_to_levels(x: np.ndarray, boundaries: Boundaries, alpha: float) -> np.ndarray:
    """Nearest level of each value, by distance to the level representatives
    (bin midpoints); exact midpoints map to the lower level."""
    reps = level_representatives(boundaries, alpha)
    cuts = 0.5 * (reps[:-1] + reps[1:])
    return np.searchsorted(cuts, np.asarray(x, dtype=np.float64), side="left").astype(np.int64) + 1


def prediction_error(true_levels, estimated, levels: int) -> float:
    """Mean absolute level distance normalized by the level range.

    ``estimated`` may hold real values on the level scale; each is mapped to
    the nearest integer level (ties to the lower level, clipped to
    ``1..levels``) before comparing.  Perfect predictions give 0; every
    prediction off by the full range gives 1.
    """
    true_levels = np.asarray(true_levels, dtype=np.float64)
    estimated = np.asarray(estimated, dtype=np.float64)
    if true_levels.size == 0:
        raise ValueError("empty holdout")
    if true_levels.shape != estimated.shape:
        raise ValueError("true and estimated level arrays must align")
    if levels < 2:
        raise ValueError("need at least two levels")
    mapped = np.clip(np.ceil(estimated - 0.5), 1, levels)
    return float(np.mean(np.abs(true_levels - mapped)) / (levels - 1))


PRESET_RANK_GRID = (5, 10, 15, 20, 25)
PRESET_SIGMA_GRID = (0.001, 0.01, 0.05, 0.1, 0.15, 0.2, 0.25)


def prediction_grid(
    qobs: QuantizedObservations,
    cfg: SolverConfig,
    ranks=PRESET_RANK_GRID,
    sigmas=PRESET_SIGMA_GRID,
    fraction: float = 0.2,
    seed: int = 0,
    omega0: Boundaries | None = None,
):
    """Holdout prediction error over a (rank, noise-scale) estimation grid.

    The protocol for data with unknown rank and noise scale: split the
    observed labels once, solve the training part for every combination,
    and score each recovery by the discrete holdout prediction error.
    Returns ``(rows, best)`` where ``rows`` holds ``(rank, sigma, error)``
    in grid order and ``best`` is the row with the smallest error.
    """
    ranks = [int(r) for r in ranks]
    sigmas = [float(s) for s in sigmas]
    if not ranks or not sigmas:
        raise ValueError("rank and sigma grids must be nonempty")
    train, holdout = holdout_split(qobs, fraction, seed)
    hold_lin = holdout.observations.linear_indices
    rows = []
    for r in ranks:
        for s in sigmas:
            cfg_rs = dataclasses.replace(
                cfg, rank=r, model=NoiseModel(cfg.model.kind, s)
            )
            result = run(train, cfg_rs, omega0)
            est = quantize_to_levels(result.x, result.boundaries, cfg.alpha)
            err = prediction_error(
                holdout.labels, est.ravel()[hold_lin], qobs.levels
            )
            rows.append((r, s, err))
    best = min(rows, key=lambda row: row[2])
    return rows, best


def holdout_split(qobs: QuantizedObservations, fraction: float, seed: int):
    """Disjoint seeded split of the observed entries into (train, holdout)."""
    if not 0 < fraction < 1:
        raise ValueError("fraction must lie in (0, 1)")
    n = len(qobs.observations)
    n_hold = int(round(fraction * n))
    if n_hold < 1 or n_hold >= n:
        raise ValueError(f"fraction {fraction} leaves an empty split of {n} observations")
    rng = np.random.default_rng(seed)
    perm = rng.permutation(n)
    hold_pos = np.sort(perm[:n_hold])
    train_pos = np.sort(perm[n_hold:])
    shape = qobs.shape
    lin = qobs.observations.linear_indices

    def subset(pos):
        return QuantizedObservations(
            observations=ObservationSet(shape, lin[pos]),
            labels=qobs.labels[pos],
            levels=qobs.levels,
        )

    return subset(train_pos), subset(hold_pos)


def _apply_axis(spec: SynthSpec, cfg: SolverConfig, axis: str, value):
    if axis == "rank":
        v = int(value)
        return (
            dataclasses.replace(spec, rank=v),
            dataclasses.replace(cfg, rank=v),
        )
    if axis == "dimension":
        n = int(value)
        return dataclasses.replace(spec, shape=(n,) * len(spec.shape)), cfg
    if axis == "noise":
        s = float(value)
        return (
            dataclasses.replace(spec, sigma=s),
            dataclasses.replace(cfg, model=NoiseModel(cfg.model.kind, s)),
        )
    if axis == "obs_rate":
        return dataclasses.replace(spec, obs_rate=float(value)), cfg
    if axis == "bits":
        w = int(value)
        bounds = reference_boundaries(w, cfg.alpha)
        return dataclasses.replace(spec, levels=w, boundaries=bounds), cfg
    raise ValueError(f"unknown sweep axis {axis!r}; expected one of {SWEEP_AXES}")


def _stage_seeds(seed: int):
    state = np.random.SeedSequence(seed).generate_state(3)
    return int(state[0]), int(state[1]), int(state[2])


def run_one(spec: SynthSpec, cfg: SolverConfig, seed: int, run_id: str = "") -> RunRecord:
    """Generate, quantize, recover, and score a single seeded instance."""
    s_gen, s_qnt, s_alg = _stage_seeds(seed)
    xstar, _ = gen_synthetic(spec, s_gen)
    gen_model = NoiseModel(cfg.model.kind, spec.sigma)
    qobs = quantize_sample(xstar, gen_model, spec.boundaries, spec.obs_rate, s_qnt)
    cfg_run = dataclasses.replace(cfg, seed=s_alg)
    omega0 = spec.boundaries if cfg.boundaries_known else None
    start = time.perf_counter()
    try:
        result = run(qobs, cfg_run, omega0)
        rel = relative_error(xstar, result.x)
        iterations = result.iterations
        omega_hat = result.boundaries.omegas
    except NumericalError:
        rel = float("nan")
        iterations = 0
        omega_hat = ()
    wall_ms = (time.perf_counter() - start) * 1000.0
    return RunRecord(
        run_id=run_id or f"seed-{seed}",
        seed=seed,
        shape=spec.shape,
        r_true=spec.rank,
        r_est=cfg.rank,
        sigma_true=spec.sigma,
        sigma_est=cfg.model.sigma,
        levels=spec.levels,
        obs_rate=spec.obs_rate,
        boundaries_known=cfg.boundaries_known,
        rel_error=rel,
        pred_error=None,
        iterations=iterations,
        wall_time_ms=wall_ms,
        omega_hat=omega_hat,
    )


def run_sweep(
    axis: str,
    grid,
    spec: SynthSpec,
    cfg: SolverConfig,
    seeds,
    workers: int = 1,
):
    """Full factorial over ``grid x seeds``; every run is independent.

    Returns ``(records, summary)`` where ``summary`` has one
    ``(value, mean_rel_error, runs)`` row per grid point (failed runs are
    recorded with a NaN error and excluded from the mean).  Results are
    merged in grid order regardless of ``workers``.
    """
    grid = list(grid)
    seeds = list(seeds)
    if not grid or not seeds:
        raise ValueError("grid and seeds must be nonempty")
    tasks = []
    for value in grid:
        spec_v, cfg_v = _apply_axis(spec, cfg, axis, value)
        for seed in seeds:
            tasks.append((value, spec_v, cfg_v, seed))

    def execute(task):
        value, spec_v, cfg_v, seed = task
        return run_one(spec_v, cfg_v, seed, run_id=f"{axis}-{value}-s{seed}")

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            records = list(pool.map(execute, tasks))
    else:
        records = [execute(t) for t in tasks]

    summary = []
    for i, value in enumerate(grid):
        block = records[i * len(seeds) : (i + 1) * len(seeds)]
        errs = [r.rel_error for r in block if not np.isnan(r.rel_error)]
        mean = float(np.mean(errs)) if errs else float("nan")
        summary.append((value, mean, len(block)))
    return records, summary
