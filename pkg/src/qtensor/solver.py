"""Alternating proximal gradient solver for penalized quantized recovery.

One sweep updates, in order: each CP factor (Gauss-Seidel, using the
already-updated lower modes), the dense tensor followed by an entrywise
clamp to ``[-alpha, alpha]``, and, unless the boundaries are known, each
quantization boundary followed by its order/box projection.  The coupling
weight ``lam`` then grows geometrically up to a cap.

Step sizes are the reciprocals of per-block Lipschitz bounds:

* factors: ``1 / (lam * ||B_k^T B_k||)``
* tensor:  ``1 / (scale / (sigma^2 beta^2) + lam)``
* boundary ``l``: ``sigma^2 beta^2 / (scale * (sqrt(G_l) + sqrt(G_{l+1})))``
  where ``G_l`` counts observed entries labeled ``l``; a boundary with no
  supporting labels is skipped for that sweep.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .likelihood import ObjectiveContext
from .quantization import (
    Boundaries,
    NoiseModel,
    QuantizedObservations,
    default_boundaries,
    level_representatives,
)
from .tensor_core import (
    _spectral_norm_psd,
    cp_als_init,
    cp_reconstruct,
    factor_coefficients,
    unfold,
)

__all__ = [
    "NumericalError",
    "SolveResult",
    "SolverConfig",
    "SolverState",
    "StepSizes",
    "initialize",
    "iterate_once",
    "project_boundaries",
    "project_tensor",
    "run",
    "step_sizes",
]


class NumericalError(RuntimeError):
    """A non-finite value appeared during the iteration."""

    def __init__(self, message: str, iteration: int | None = None):
        super().__init__(message)
        self.iteration = iteration


@dataclass(frozen=True)
class SolverConfig:
    """All solver hyperparameters.

    ``beta`` scales step conservatism only: smaller values shrink the tensor
    and boundary steps, never breaking descent.  The 0.1 default is very
    safe; values up to about 1.0 converge much faster for moderate noise
    levels (the tensor-step curvature bound ``1/(sigma*beta)^2`` must stay
    above the largest per-entry curvature of the data term, which is around
    ``1/sigma^2`` for entries inside the box).
    """

    rank: int
    model: NoiseModel
    alpha: float = 1.0
    iterations: int = 200
    beta: float = 0.1
    lambda0: float = 1.0
    lambda_growth: float = 1.05
    lambda_cap: float = 1e6
    boundaries_known: bool = False
    init_sweeps: int = 10
    seed: int = 0
    kappas: tuple | None = None
    alpha_low: float | None = None
    alpha_upper: float | None = None
    early_stop: bool = False
    early_stop_tol: float = 1e-10

    def __post_init__(self):
        if self.rank < 1:
            raise ValueError("rank must be at least 1")
        if self.iterations < 0:
            raise ValueError("iterations must be nonnegative")
        if not self.beta > 0:
            raise ValueError("beta must be positive")
        if not self.alpha > 0:
            raise ValueError("alpha must be positive")
        if not self.lambda0 > 0:
            raise ValueError("lambda0 must be positive")
        if self.lambda_growth < 1:
            raise ValueError("lambda growth factor must be at least 1")
        if self.lambda_cap < self.lambda0:
            raise ValueError("lambda cap below lambda0")


@dataclass
class SolverState:
    """Per-iteration variables plus cached label bookkeeping."""

    factors: list
    x: np.ndarray
    boundaries: Boundaries
    lam: float
    iteration: int
    objective_trace: list = field(default_factory=list)
    boundary_trace: list = field(default_factory=list)
    label_counts: np.ndarray | None = None
    label_slots: list | None = None


@dataclass(frozen=True)
class StepSizes:
    """Step sizes for one sweep; ``None`` marks a skipped update."""

    factors: tuple
    x: float
    omegas: tuple


@dataclass(frozen=True)
class SolveResult:
    x: np.ndarray
    boundaries: Boundaries
    factors: list
    objective_trace: np.ndarray
    boundary_trace: np.ndarray
    iterations: int
    lam_final: float


def project_tensor(x: np.ndarray, alpha: float) -> np.ndarray:
    """Entrywise clamp to ``[-alpha, alpha]``."""
    return np.clip(np.asarray(x, dtype=np.float64), -alpha, alpha)


def project_boundaries(omegas, kappas, alpha_low: float, alpha_upper: float) -> np.ndarray:
    """Sequential order/box projection of candidate boundaries.

    Level ``l`` is clipped from above at ``min(omega_{l+1} - kappa_{l+1},
    alpha_upper)`` using the not-yet-projected ``omega_{l+1}``, otherwise
    from below at ``max(omega_{l-1} + kappa_l, alpha_low)`` using the
    already-projected ``omega_{l-1}``.  ``kappas`` holds the floors for
    levels ``2..W-1``.
    """
    om = np.array(omegas, dtype=np.float64)
    kappas = tuple(kappas)
    w = om.size + 1

    def kappa(level):
        return kappas[level - 2] if 2 <= level <= w - 1 else 0.0

    for l in range(1, w):
        upper = alpha_upper if l == w - 1 else min(om[l] - kappa(l + 1), alpha_upper)
        if om[l - 1] > upper:
            om[l - 1] = upper
        else:
            lower = alpha_low if l == 1 else max(om[l - 2] + kappa(l), alpha_low)
            if om[l - 1] < lower:
                om[l - 1] = lower
    return om


def _resolve_boundaries(obs: QuantizedObservations, cfg: SolverConfig, omega0) -> Boundaries:
    if omega0 is not None:
        if omega0.levels != obs.levels:
            raise ValueError(
                f"boundaries describe {omega0.levels} levels, observations have {obs.levels}"
            )
        return omega0
    base = default_boundaries(obs.levels, cfg.alpha)
    return Boundaries(
        omegas=base.omegas,
        kappas=cfg.kappas if cfg.kappas is not None else base.kappas,
        alpha_low=cfg.alpha_low if cfg.alpha_low is not None else base.alpha_low,
        alpha_upper=cfg.alpha_upper if cfg.alpha_upper is not None else base.alpha_upper,
    )


def initialize(
    obs: QuantizedObservations,
    cfg: SolverConfig,
    omega0: Boundaries | None = None,
) -> SolverState:
    """Starting point: boundary guess, per-label midpoint tensor, ALS factors.

    Observed entries start at their level's representative value (interior
    bin midpoints; ``(+-alpha + omega)/2`` for the end bins); unobserved
    entries start at zero.  Factors come from the seeded ALS fit of that
    tensor, so the state is bit-deterministic in its inputs.
    """
    boundaries = _resolve_boundaries(obs, cfg, omega0)
    shape = obs.shape
    reps = level_representatives(boundaries, cfg.alpha)
    x0 = np.zeros(shape, dtype=np.float64)
    x0.ravel()[obs.observations.linear_indices] = reps[obs.labels - 1]
    factors = cp_als_init(x0, cfg.rank, cfg.seed, cfg.init_sweeps)
    counts = obs.label_counts()
    slots = [None] + [
        np.flatnonzero(obs.labels == l) for l in range(1, obs.levels + 1)
    ]
    return SolverState(
        factors=factors,
        x=x0,
        boundaries=boundaries,
        lam=cfg.lambda0,
        iteration=0,
        label_counts=counts,
        label_slots=slots,
    )


def step_sizes(state: SolverState, ctx: ObjectiveContext, cfg: SolverConfig) -> StepSizes:
    """Step sizes at the current state; ``None`` where a denominator is zero."""
    taus_a = []
    for k in range(len(state.factors)):
        bk = factor_coefficients(state.factors, k)
        norm = _spectral_norm_psd(bk.T @ bk)
        denom = state.lam * norm
        taus_a.append(1.0 / denom if denom > 0 else None)
    scale = ctx.scale_factor
    sb2 = (cfg.model.sigma * cfg.beta) ** 2
    tau_x = 1.0 / (scale / sb2 + state.lam)
    taus_w = []
    counts = state.label_counts
    for l in range(1, state.boundaries.levels):
        support = np.sqrt(counts[l]) + np.sqrt(counts[l + 1])
        taus_w.append(sb2 / (scale * support) if support > 0 else None)
    return StepSizes(factors=tuple(taus_a), x=tau_x, omegas=tuple(taus_w))


def iterate_once(state: SolverState, ctx: ObjectiveContext, cfg: SolverConfig) -> SolverState:
    """One full Gauss-Seidel sweep; mutates and returns ``state``.

    Appends the post-sweep objective (evaluated at the penalty weight used
    during the sweep) to the objective trace, then grows the weight.
    Raises :class:`NumericalError` if the objective turns non-finite.
    """
    lam = state.lam
    obs = ctx.observations
    lin = obs.observations.linear_indices
    labels = obs.labels
    scale = ctx.scale_factor
    sigma = cfg.model.sigma
    model_id = cfg.model.model_id
    sb2 = (sigma * cfg.beta) ** 2

    for k in range(len(state.factors)):
        bk = factor_coefficients(state.factors, k)
        gram = bk.T @ bk
        norm = _spectral_norm_psd(gram)
        if norm > 0.0:
            grad = lam * (state.factors[k] @ gram - unfold(state.x, k) @ bk)
            state.factors[k] = state.factors[k] - grad / (lam * norm)

    cp = cp_reconstruct(state.factors)
    omegas = state.boundaries.omega_array()
    xo = np.ascontiguousarray(state.x.ravel()[lin])
    grad = np.zeros(state.x.shape, dtype=np.float64)
    grad.ravel()[lin] = scale * kernels.dneg_log_f(xo, labels, omegas, sigma, model_id)
    grad += lam * (state.x - cp)
    tau_x = 1.0 / (scale / sb2 + lam)
    state.x = project_tensor(state.x - tau_x * grad, cfg.alpha)

    if not cfg.boundaries_known:
        om = omegas.copy()
        w = state.boundaries.levels
        xo = np.ascontiguousarray(state.x.ravel()[lin])
        counts = state.label_counts
        for l in range(1, w):
            support = np.sqrt(counts[l]) + np.sqrt(counts[l + 1])
            if support > 0:
                g = scale * kernels.boundary_grad(
                    np.ascontiguousarray(xo[state.label_slots[l]]),
                    np.ascontiguousarray(xo[state.label_slots[l + 1]]),
                    l, om, sigma, model_id,
                )
                om[l - 1] -= (sb2 / (scale * support)) * g
            upper = (
                state.boundaries.alpha_upper
                if l == w - 1
                else min(om[l] - state.boundaries.kappa(l + 1), state.boundaries.alpha_upper)
            )
            if om[l - 1] > upper:
                om[l - 1] = upper
            else:
                lower = (
                    state.boundaries.alpha_low
                    if l == 1
                    else max(om[l - 2] + state.boundaries.kappa(l), state.boundaries.alpha_low)
                )
                if om[l - 1] < lower:
                    om[l - 1] = lower
        if not np.all(np.isfinite(om)):
            raise NumericalError(
                f"non-finite boundary at iteration {state.iteration}", state.iteration
            )
        state.boundaries = dataclasses.replace(state.boundaries, omegas=tuple(om))

    xo = np.ascontiguousarray(state.x.ravel()[lin])
    resid = state.x - cp
    h = scale * kernels.nll(
        xo, labels, state.boundaries.omega_array(), sigma, model_id
    ) + 0.5 * lam * float(np.sum(resid * resid))
    if not np.isfinite(h):
        raise NumericalError(
            f"non-finite objective at iteration {state.iteration}", state.iteration
        )
    assert float(np.max(np.abs(state.x))) <= cfg.alpha + 1e-12
    state.objective_trace.append(h)
    state.boundary_trace.append(state.boundaries.omegas)
    state.lam = min(cfg.lambda_growth * lam, cfg.lambda_cap)
    state.iteration += 1
    return state


def run(
    obs: QuantizedObservations,
    cfg: SolverConfig,
    omega0: Boundaries | None = None,
) -> SolveResult:
    """Run ``cfg.iterations`` sweeps and return the dense-tensor estimate.

    The returned tensor is the box-constrained variable itself (the growing
    coupling weight drives it onto the CP factorization).  The objective
    trace has one leading entry for the initial point.
    """
    state = initialize(obs, cfg, omega0)
    ctx = ObjectiveContext(observations=obs, model=cfg.model, lam=cfg.lambda0, alpha=cfg.alpha)
    xo = np.ascontiguousarray(state.x.ravel()[obs.observations.linear_indices])
    resid = state.x - cp_reconstruct(state.factors)
    h0 = ctx.scale_factor * kernels.nll(
        xo, obs.labels, state.boundaries.omega_array(),
        cfg.model.sigma, cfg.model.model_id,
    ) + 0.5 * state.lam * float(np.sum(resid * resid))
    state.objective_trace.append(h0)
    state.boundary_trace.append(state.boundaries.omegas)
    for _ in range(cfg.iterations):
        iterate_once(state, ctx, cfg)
        if (
            cfg.early_stop
            and len(state.objective_trace) >= 2
            and abs(state.objective_trace[-1] - state.objective_trace[-2])
            < cfg.early_stop_tol * (1.0 + abs(state.objective_trace[-1]))
        ):
            break
    return SolveResult(
        x=state.x,
        boundaries=state.boundaries,
        factors=state.factors,
        objective_trace=np.asarray(state.objective_trace),
        boundary_trace=np.asarray(state.boundary_trace, dtype=np.float64),
        iterations=state.iteration,
        lam_final=state.lam,
    )
