"""Noise models, the multi-level quantizer, bin probabilities, and the
recovery-error bound evaluator.

A noisy entry ``x + noise`` is mapped to level ``l`` when it falls in
``(omega_{l-1}, omega_l]`` with ``omega_0 = -inf`` and ``omega_W = +inf``.
The probability of level ``l`` at mean ``x`` is
``Phi(omega_l - x) - Phi(omega_{l-1} - x)`` where ``Phi`` is the noise CDF.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import expit, ndtr

from .tensor_core import ObservationSet

__all__ = [
    "PROB_FLOOR",
    "Boundaries",
    "EmptyObservationError",
    "NoiseModel",
    "QuantizedObservations",
    "bin_probability",
    "compute_constants",
    "default_boundaries",
    "error_bound",
    "level_representatives",
    "quantize_sample",
    "quantize_values",
]

# Floor applied to bin probabilities before logarithms and divisions in the
# likelihood; raw probabilities (used for normalization and the curvature
# constants) are never floored at this level.
PROB_FLOOR = 1e-12

_INV_SQRT_2PI = 1.0 / np.sqrt(2.0 * np.pi)

PROBIT = 0
LOGISTIC = 1
_MODEL_IDS = {"probit": PROBIT, "logistic": LOGISTIC}


class EmptyObservationError(RuntimeError):
    """Raised when subsampling leaves no observed entries."""


@dataclass(frozen=True)
class NoiseModel:
    """Additive noise with CDF ``Phi(x) = base_cdf(x / sigma)``.

    ``probit`` uses the standard normal CDF (scipy's ``ndtr``, an erfc-based
    implementation accurate to ~1e-15); ``logistic`` uses
    ``1 / (1 + exp(-x / sigma))``.
    """

    kind: str
    sigma: float

    def __post_init__(self):
        if self.kind not in _MODEL_IDS:
            raise ValueError(f"unknown noise model {self.kind!r}")
        if not self.sigma > 0:
            raise ValueError("sigma must be positive")

    @property
    def model_id(self) -> int:
        return _MODEL_IDS[self.kind]

    def cdf(self, x):
        z = np.asarray(x, dtype=np.float64) / self.sigma
        return ndtr(z) if self.kind == "probit" else expit(z)

    def pdf(self, x):
        z = np.asarray(x, dtype=np.float64) / self.sigma
        if self.kind == "probit":
            return np.exp(-0.5 * z * z) * (_INV_SQRT_2PI / self.sigma)
        p = expit(z)
        return p * (1.0 - p) / self.sigma

    def pdf_deriv(self, x):
        """Derivative of :meth:`pdf`; zero in the limits x -> +-inf."""
        x = np.asarray(x, dtype=np.float64)
        finite = np.isfinite(x)
        z = np.where(finite, x, 0.0) / self.sigma
        if self.kind == "probit":
            val = -z * np.exp(-0.5 * z * z) * (_INV_SQRT_2PI / self.sigma**2)
        else:
            p = expit(z)
            val = p * (1.0 - p) * (1.0 - 2.0 * p) / self.sigma**2
        return np.where(finite, val, 0.0)

    def sample_noise(self, rng: np.random.Generator, size):
        """Draw i.i.d. noise; logistic uses the inverse CDF transform."""
        if self.kind == "probit":
            return rng.normal(0.0, self.sigma, size=size)
        u = rng.random(size=size)
        return self.sigma * np.log(u / (1.0 - u))

    def cdf_diff(self, upper, lower):
        """``cdf(upper) - cdf(lower)`` evaluated without tail cancellation."""
        zu = np.asarray(upper, dtype=np.float64) / self.sigma
        zl = np.asarray(lower, dtype=np.float64) / self.sigma
        base = ndtr if self.kind == "probit" else expit
        # When both arguments sit in the upper tail, difference the survival
        # functions instead so relative accuracy survives.
        return np.where(zl > 0, base(-zl) - base(-zu), base(zu) - base(zl))


@dataclass(frozen=True)
class Boundaries:
    """Ordered quantization thresholds with gap floors and box bounds.

    ``omegas`` holds ``omega_1 < ... < omega_{W-1}``; ``kappas`` holds the
    positive gap floors ``kappa_2 .. kappa_{W-1}`` (``kappa_1 = kappa_W = 0``
    implicitly).  Feasibility requires ``alpha_low <= omega_1``,
    ``omega_{W-1} <= alpha_upper`` and ``omega_l - omega_{l-1} >= kappa_l``.
    """

    omegas: tuple
    kappas: tuple
    alpha_low: float
    alpha_upper: float

    def __post_init__(self):
        object.__setattr__(self, "omegas", tuple(float(w) for w in self.omegas))
        object.__setattr__(self, "kappas", tuple(float(k) for k in self.kappas))
        w = len(self.omegas) + 1
        if w < 2:
            raise ValueError("need at least one boundary (two levels)")
        if len(self.kappas) != max(w - 2, 0):
            raise ValueError(f"expected {max(w - 2, 0)} gap floors, got {len(self.kappas)}")
        if any(k <= 0 for k in self.kappas):
            raise ValueError("gap floors must be positive")
        if not all(np.isfinite(self.omegas)):
            raise ValueError("boundaries must be finite")
        diffs = np.diff(self.omegas)
        if np.any(diffs <= 0):
            raise ValueError("boundaries must be strictly increasing")
        # 1e-9 absolute slack: projections may land on a gap up to rounding.
        if any(d < k - 1e-9 for d, k in zip(diffs, self.kappas)):
            raise ValueError("boundary gap below its floor")
        if self.omegas[0] < self.alpha_low - 1e-9 or self.omegas[-1] > self.alpha_upper + 1e-9:
            raise ValueError("boundaries outside the box bounds")

    @property
    def levels(self) -> int:
        return len(self.omegas) + 1

    def kappa(self, level: int) -> float:
        """Gap floor ``kappa_level`` (1-based); zero outside 2..W-1."""
        if 2 <= level <= self.levels - 1:
            return self.kappas[level - 2]
        return 0.0

    def extended(self) -> np.ndarray:
        """``[-inf, omega_1, ..., omega_{W-1}, +inf]``."""
        return np.concatenate(([-np.inf], self.omegas, [np.inf]))

    def omega_array(self) -> np.ndarray:
        return np.asarray(self.omegas, dtype=np.float64)


def default_boundaries(levels: int, alpha: float) -> Boundaries:
    """Uniform boundaries ``omega_l = 2*alpha*l/levels - alpha``.

    Gap floors default to 5% of the uniform spacing; box bounds to
    ``[-alpha, alpha]``.
    """
    if levels < 2:
        raise ValueError("need at least two levels")
    if not alpha > 0:
        raise ValueError("alpha must be positive")
    omegas = tuple(2.0 * alpha * l / levels - alpha for l in range(1, levels))
    kappas = tuple(0.05 * (2.0 * alpha / levels) for _ in range(max(levels - 2, 0)))
    return Boundaries(omegas=omegas, kappas=kappas, alpha_low=-alpha, alpha_upper=alpha)


@dataclass(frozen=True)
class QuantizedObservations:
    """Integer levels in ``1..levels`` on an observation set."""

    observations: ObservationSet
    labels: np.ndarray
    levels: int

    def __post_init__(self):
        labels = np.asarray(self.labels, dtype=np.int64)
        object.__setattr__(self, "labels", labels)
        if self.levels < 2:
            raise ValueError("need at least two levels")
        if labels.shape != (len(self.observations),):
            raise ValueError("one label per observed index required")
        if labels.min() < 1 or labels.max() > self.levels:
            raise ValueError(f"labels must lie in 1..{self.levels}")

    @property
    def shape(self) -> tuple:
        return self.observations.shape

    def label_counts(self) -> np.ndarray:
        """Counts of each level 1..W (index 0 unused)."""
        return np.bincount(self.labels, minlength=self.levels + 1)


def bin_probability(model: NoiseModel, boundaries: Boundaries, level: int, x):
    """Probability that a noisy value centered at ``x`` lands in ``level``.

    Returns the raw probability (no floor); levels sum to 1 across
    ``1..levels`` up to roundoff.
    """
    if not 1 <= level <= boundaries.levels:
        raise ValueError(f"level {level} out of range 1..{boundaries.levels}")
    ext = boundaries.extended()
    x = np.asarray(x, dtype=np.float64)
    return model.cdf_diff(ext[level] - x, ext[level - 1] - x)


def quantize_values(values: np.ndarray, boundaries: Boundaries) -> np.ndarray:
    """Level of each value: ``l`` such that ``omega_{l-1} < v <= omega_l``."""
    omegas = boundaries.omega_array()
    return np.searchsorted(omegas, np.asarray(values), side="left").astype(np.int64) + 1


def level_representatives(boundaries: Boundaries, alpha: float) -> np.ndarray:
    """Canonical value of each level: bin midpoints, with the unbounded end
    bins represented by the midpoint against ``-alpha`` / ``alpha``."""
    ext = boundaries.extended()
    reps = 0.5 * (ext[:-1] + ext[1:])
    reps[0] = 0.5 * (-alpha + ext[1])
    reps[-1] = 0.5 * (alpha + ext[-2])
    return reps


def quantize_sample(
    xstar: np.ndarray,
    model: NoiseModel,
    boundaries: Boundaries,
    obs_rate: float,
    seed: int,
) -> QuantizedObservations:
    """Noisy quantized labels of ``xstar`` on a random observation set.

    Noise is drawn first, then each index is kept independently with
    probability ``obs_rate`` (``obs_rate == 1`` keeps the full set), both
    from ``default_rng(seed)``.  Raises :class:`EmptyObservationError` when
    the subsampling leaves nothing, so callers control the seed to retry.
    """
    xstar = np.asarray(xstar, dtype=np.float64)
    if xstar.ndim < 2:
        raise ValueError("expected a tensor of at least two modes")
    if not 0 < obs_rate <= 1:
        raise ValueError("obs_rate must lie in (0, 1]")
    rng = np.random.default_rng(seed)
    noisy = xstar + model.sample_noise(rng, xstar.shape)
    labels_full = quantize_values(noisy.ravel(), boundaries)
    if obs_rate >= 1.0:
        obs = ObservationSet.full(xstar.shape)
        labels = labels_full
    else:
        keep = rng.random(xstar.size) < obs_rate
        lin = np.flatnonzero(keep)
        if lin.size == 0:
            raise EmptyObservationError(
                f"observation rate {obs_rate} left no observed entries (seed {seed})"
            )
        obs = ObservationSet(xstar.shape, lin)
        labels = labels_full[lin]
    return QuantizedObservations(observations=obs, labels=labels, levels=boundaries.levels)


def _grid_bin_quantities(model, boundaries, level, grid):
    """Raw f_l, fdot_l, fddot_l of one level over a grid of centers."""
    ext = boundaries.extended()
    upper = ext[level] - grid
    lower = ext[level - 1] - grid
    f = model.cdf_diff(upper, lower)
    # d/dx [Phi(w_l - x) - Phi(w_{l-1} - x)]
    fdot = model.pdf(lower) - model.pdf(upper)
    fddot = model.pdf_deriv(upper) - model.pdf_deriv(lower)
    return f, fdot, fddot


def compute_constants(
    model: NoiseModel,
    boundaries: Boundaries,
    alpha: float,
    grid_points: int = 2001,
) -> tuple:
    """Curvature lower bound and slope upper bound of the level likelihoods.

    Evaluates, over a uniform ``grid_points`` grid on ``[-2*alpha, 2*alpha]``
    and all levels,

    * ``gamma = min fdot^2/f^2 - fddot/f``  (the negative second derivative
      of ``log f_l``), and
    * the slope constant ``L``: for the logistic model the closed form
      ``1 / (2*sigma*min f_l)``; otherwise ``max |fdot|/f``.

    Raw probabilities are floored at 1e-300 only, so the curvature keeps its
    sign deep in the tails.
    """
    if not alpha > 0:
        raise ValueError("alpha must be positive")
    grid = np.linspace(-2.0 * alpha, 2.0 * alpha, grid_points)
    gamma = np.inf
    slope = 0.0
    min_prob = np.inf
    for level in range(1, boundaries.levels + 1):
        f, fdot, fddot = _grid_bin_quantities(model, boundaries, level, grid)
        f = np.maximum(f, 1e-300)
        gamma = min(gamma, float(np.min((fdot / f) ** 2 - fddot / f)))
        slope = max(slope, float(np.max(np.abs(fdot) / f)))
        min_prob = min(min_prob, float(np.min(f)))
    if not np.isfinite(gamma):
        raise ValueError("non-finite curvature encountered")
    if model.kind == "logistic":
        slope = 1.0 / (2.0 * model.sigma * min_prob)
    return gamma, slope


def error_bound(
    rank: int,
    shape,
    gamma: float,
    slope: float,
    delta: float,
    alpha: float,
) -> float:
    """Worst-case recovery bound ``min(2*alpha, U)`` under full observation.

    ``U = (4 r / gamma) * sqrt(8 L^2 ((sum n_k) log(4K/3) + log(2/delta))
    / prod n_k)``.
    """
    shape = tuple(int(n) for n in shape)
    if not shape or any(n < 1 for n in shape):
        raise ValueError(f"invalid shape {shape}")
    if not 0 < delta < 1:
        raise ValueError("delta must lie in (0, 1)")
    if gamma <= 0:
        raise ValueError("curvature constant must be positive")
    k = len(shape)
    total = float(np.prod(np.asarray(shape, dtype=np.float64)))
    inner = 8.0 * slope**2 * (sum(shape) * np.log(4.0 * k / 3.0) + np.log(2.0 / delta))
    u = (4.0 * rank / gamma) * np.sqrt(inner / total)
    return float(min(2.0 * alpha, u))
