"""Command-line interface.

Subcommands: ``gen-synth``, ``quantize``, ``recover``, ``sweep``,
``predict``, ``bound``.  Shared flags: ``--seed``, ``--out`` and
``--config`` (flat UTF-8 ``key=value`` lines, ``#`` comments; keys mirror
the solver/synthetic-spec field names in lower_snake_case; command-line
flags override file values).

Exit codes: 0 success, 2 input-format error, 3 numerical failure,
4 usage error.
"""

from __future__ import annotations

import argparse
import dataclasses
import sys

from .experiments import (
    PRESET_RANK_GRID,
    PRESET_SIGMA_GRID,
    SWEEP_AXES,
    SynthSpec,
    gen_synthetic,
    holdout_split,
    prediction_error,
    prediction_grid,
    quantize_to_levels,
    reference_boundaries,
    run_sweep,
)
from .fileio import (
    FileFormatError,
    read_observations,
    read_tensor,
    write_observations,
    write_records,
    write_tensor,
)
from .quantization import (
    Boundaries,
    EmptyObservationError,
    NoiseModel,
    compute_constants,
    default_boundaries,
    error_bound,
    quantize_sample,
)
from .solver import NumericalError, SolverConfig, run

EXIT_OK = 0
EXIT_FORMAT = 2
EXIT_NUMERIC = 3
EXIT_USAGE = 4


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def _load_config(path) -> dict:
    values = {}
    try:
        with open(path, "r", encoding="utf-8") as fh:
            for lineno, raw in enumerate(fh, start=1):
                line = raw.strip()
                if not line or line.startswith("#"):
                    continue
                if "=" not in line:
                    raise FileFormatError(f"expected key=value, got {line!r}", line=lineno)
                key, _, value = line.partition("=")
                values[key.strip()] = value.strip()
    except OSError as exc:
        raise FileFormatError(f"cannot read config: {exc}") from None
    return values


def _pick(args, config, key, cast, default=None):
    """CLI flag > config file > default."""
    flag = getattr(args, key, None)
    if flag is not None:
        return flag
    if key in config:
        try:
            return cast(config[key])
        except ValueError as exc:
            raise UsageError(f"config key {key}: {exc}") from None
    return default


def _parse_shape(text) -> tuple:
    try:
        shape = tuple(int(tok) for tok in str(text).replace("x", ",").split(",") if tok)
    except ValueError as exc:
        raise UsageError(f"bad shape {text!r}: {exc}") from None
    if len(shape) < 2 or any(n < 1 for n in shape):
        raise UsageError(f"bad shape {text!r}")
    return shape


def _parse_bool(text) -> bool:
    value = str(text).strip().lower()
    if value in ("1", "true", "yes"):
        return True
    if value in ("0", "false", "no"):
        return False
    raise ValueError(f"expected a boolean, got {text!r}")


def _parse_omegas(text) -> tuple:
    try:
        return tuple(float(tok) for tok in str(text).split(",") if tok)
    except ValueError as exc:
        raise UsageError(f"bad boundary list {text!r}: {exc}") from None


def _boundaries_from_text(text, levels: int, alpha: float) -> Boundaries:
    if text is None or str(text).strip().lower() in ("default", ""):
        return default_boundaries(levels, alpha)
    if str(text).strip().lower() == "reference":
        return reference_boundaries(levels, alpha)
    omegas = _parse_omegas(text)
    if len(omegas) != levels - 1:
        raise UsageError(f"expected {levels - 1} boundaries for {levels} levels, got {len(omegas)}")
    base = default_boundaries(levels, alpha)
    return Boundaries(
        omegas=omegas, kappas=base.kappas,
        alpha_low=base.alpha_low, alpha_upper=base.alpha_upper,
    )


def _solver_config(args, config) -> SolverConfig:
    kind = _pick(args, config, "model", str, "probit")
    if kind not in ("probit", "logistic"):
        raise UsageError(f"unknown noise model {kind!r}")
    sigma = _pick(args, config, "sigma", float, 0.25)
    return SolverConfig(
        rank=_pick(args, config, "rank", int, 3),
        model=NoiseModel(kind, sigma),
        alpha=_pick(args, config, "alpha", float, 1.0),
        iterations=_pick(args, config, "iterations", int, 200),
        beta=_pick(args, config, "beta", float, 0.1),
        lambda0=_pick(args, config, "lambda0", float, 1.0),
        lambda_growth=_pick(args, config, "lambda_growth", float, 1.05),
        lambda_cap=_pick(args, config, "lambda_cap", float, 1e6),
        boundaries_known=_pick(args, config, "boundaries_known", _parse_bool, False),
        init_sweeps=_pick(args, config, "init_sweeps", int, 10),
        seed=_pick(args, config, "seed", int, 0),
    )


def _cmd_gen_synth(args) -> int:
    config = _load_config(args.config) if args.config else {}
    shape = _parse_shape(_pick(args, config, "shape", str, "20,20,20"))
    rank = _pick(args, config, "rank", int, 3)
    seed = _pick(args, config, "seed", int, 0)
    alpha = _pick(args, config, "alpha", float, 1.0)
    levels = _pick(args, config, "levels", int, 4)
    spec = SynthSpec(
        shape=shape, rank=rank, sigma=_pick(args, config, "sigma", float, 0.25),
        levels=levels, boundaries=default_boundaries(levels, alpha),
    )
    x, _ = gen_synthetic(spec, seed)
    if not args.out:
        raise UsageError("gen-synth requires --out")
    write_tensor(args.out, x)
    print(f"wrote {args.out}: shape {'x'.join(map(str, shape))}, rank {rank}, seed {seed}")
    return EXIT_OK


def _cmd_quantize(args) -> int:
    config = _load_config(args.config) if args.config else {}
    x = read_tensor(args.tensor)
    levels = _pick(args, config, "levels", int, 4)
    alpha = _pick(args, config, "alpha", float, 1.0)
    kind = _pick(args, config, "model", str, "probit")
    model = NoiseModel(kind, _pick(args, config, "sigma", float, 0.25))
    boundaries = _boundaries_from_text(args.boundaries, levels, alpha)
    obs_rate = _pick(args, config, "obs_rate", float, 1.0)
    seed = _pick(args, config, "seed", int, 0)
    qobs = quantize_sample(x, model, boundaries, obs_rate, seed)
    if not args.out:
        raise UsageError("quantize requires --out")
    write_observations(args.out, qobs)
    print(
        f"wrote {args.out}: {len(qobs.observations)} of {x.size} entries observed, "
        f"{levels} levels"
    )
    return EXIT_OK


def _known_boundaries_arg(args, levels: int, alpha: float):
    text = getattr(args, "known_boundaries", None)
    if text is None or str(text).strip().lower() == "none":
        return None
    omegas = _parse_omegas(text)
    if len(omegas) != levels - 1:
        raise UsageError(f"expected {levels - 1} boundaries for {levels} levels, got {len(omegas)}")
    base = default_boundaries(levels, alpha)
    return Boundaries(
        omegas=omegas, kappas=base.kappas,
        alpha_low=base.alpha_low, alpha_upper=base.alpha_upper,
    )


def _cmd_recover(args) -> int:
    config = _load_config(args.config) if args.config else {}
    qobs = read_observations(args.obs)
    cfg = _solver_config(args, config)
    omega0 = _known_boundaries_arg(args, qobs.levels, cfg.alpha)
    if omega0 is not None and not cfg.boundaries_known:
        cfg = dataclasses.replace(cfg, boundaries_known=True)
    result = run(qobs, cfg, omega0)
    omegas = ", ".join(f"{w:.6g}" for w in result.boundaries.omegas)
    print(f"iterations: {result.iterations}")
    print(f"objective: {result.objective_trace[-1]:.10g}")
    print(f"boundaries: {omegas}")
    if args.out:
        write_tensor(args.out, result.x)
        print(f"wrote {args.out}")
    return EXIT_OK


def _cmd_sweep(args) -> int:
    config = _load_config(args.config) if args.config else {}
    if args.axis not in SWEEP_AXES:
        raise UsageError(f"unknown axis {args.axis!r}; expected one of {SWEEP_AXES}")
    grid_text = _pick(args, config, "grid", str, None)
    if not grid_text:
        raise UsageError("sweep requires --grid")
    grid = [float(tok) if "." in tok or "e" in tok else int(tok) for tok in str(grid_text).split(",")]
    seeds_text = _pick(args, config, "seeds", str, "0,1,2,3,4,5,6,7,8,9")
    seeds = [int(tok) for tok in str(seeds_text).split(",") if tok]
    cfg = _solver_config(args, config)
    shape = _parse_shape(_pick(args, config, "shape", str, "40,40,40"))
    levels = _pick(args, config, "levels", int, 4)
    boundaries = _boundaries_from_text(args.boundaries, levels, cfg.alpha)
    spec = SynthSpec(
        shape=shape,
        rank=_pick(args, config, "r_true", int, cfg.rank),
        sigma=_pick(args, config, "sigma_true", float, cfg.model.sigma),
        levels=levels,
        boundaries=boundaries,
        obs_rate=_pick(args, config, "obs_rate", float, 1.0),
    )
    records, summary = run_sweep(
        args.axis, grid, spec, cfg, seeds, workers=_pick(args, config, "workers", int, 1)
    )
    for value, mean, runs in summary:
        print(f"{args.axis}={value}: mean rel_error {mean:.6g} over {runs} runs")
    if args.out:
        write_records(args.out, records)
        print(f"wrote {args.out} ({len(records)} records)")
    return EXIT_OK


def _parse_grid(text, preset, cast):
    if str(text).strip().lower() == "preset":
        return list(preset)
    try:
        return [cast(tok) for tok in str(text).split(",") if tok]
    except ValueError as exc:
        raise UsageError(f"bad grid {text!r}: {exc}") from None


def _cmd_predict(args) -> int:
    config = _load_config(args.config) if args.config else {}
    qobs = read_observations(args.obs)
    fraction = _pick(args, config, "holdout_fraction", float, 0.2)
    seed = _pick(args, config, "seed", int, 0)
    cfg = _solver_config(args, config)
    omega0 = _known_boundaries_arg(args, qobs.levels, cfg.alpha)
    if omega0 is not None and not cfg.boundaries_known:
        cfg = dataclasses.replace(cfg, boundaries_known=True)
    if args.rank_grid or args.sigma_grid:
        ranks = (
            _parse_grid(args.rank_grid, PRESET_RANK_GRID, int)
            if args.rank_grid else [cfg.rank]
        )
        sigmas = (
            _parse_grid(args.sigma_grid, PRESET_SIGMA_GRID, float)
            if args.sigma_grid else [cfg.model.sigma]
        )
        rows, best = prediction_grid(
            qobs, cfg, ranks, sigmas, fraction=fraction, seed=seed, omega0=omega0
        )
        for r, s, err in rows:
            print(f"rank={r} sigma={s:g}: prediction error {err:.6g}")
        print(f"best: rank={best[0]} sigma={best[1]:g} error {best[2]:.6g}")
        return EXIT_OK
    train, holdout = holdout_split(qobs, fraction, seed)
    result = run(train, cfg, omega0)
    est_levels = quantize_to_levels(result.x, result.boundaries, cfg.alpha)
    est_at_holdout = est_levels.ravel()[holdout.observations.linear_indices]
    err = prediction_error(holdout.labels, est_at_holdout, qobs.levels)
    print(f"holdout size: {len(holdout.observations)}")
    print(f"prediction error: {err:.6g}")
    return EXIT_OK


def _cmd_bound(args) -> int:
    config = _load_config(args.config) if args.config else {}
    shape = _parse_shape(_pick(args, config, "shape", str, None))
    rank = _pick(args, config, "rank", int, 3)
    delta = _pick(args, config, "delta", float, 0.1)
    alpha = _pick(args, config, "alpha", float, 1.0)
    levels = _pick(args, config, "levels", int, 4)
    kind = _pick(args, config, "model", str, "probit")
    model = NoiseModel(kind, _pick(args, config, "sigma", float, 0.25))
    boundaries = _boundaries_from_text(args.boundaries, levels, alpha)
    gamma, slope = compute_constants(model, boundaries, alpha)
    value = error_bound(rank, shape, gamma, slope, delta, alpha)
    print(f"gamma: {gamma:.10g}")
    print(f"slope: {slope:.10g}")
    print(f"bound: {value:.10g}")
    return EXIT_OK


def build_parser() -> _Parser:
    parser = _Parser(prog="qtensor", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    def shared(p):
        p.add_argument("--seed", type=int, default=None)
        p.add_argument("--out", type=str, default=None)
        p.add_argument("--config", type=str, default=None)

    p = sub.add_parser("gen-synth", help="generate a synthetic low-rank tensor (QTD1)")
    shared(p)
    p.add_argument("--shape", type=str, default=None)
    p.add_argument("--rank", type=int, default=None)
    p.add_argument("--alpha", type=float, default=None)
    p.add_argument("--sigma", type=float, default=None)
    p.add_argument("--levels", type=int, default=None)
    p.set_defaults(func=_cmd_gen_synth)

    p = sub.add_parser("quantize", help="quantize a tensor into observations (QTO1)")
    shared(p)
    p.add_argument("--tensor", type=str, required=True)
    p.add_argument("--model", type=str, default=None, choices=("probit", "logistic"))
    p.add_argument("--sigma", type=float, default=None)
    p.add_argument("--levels", type=int, default=None)
    p.add_argument("--boundaries", type=str, default=None)
    p.add_argument("--alpha", type=float, default=None)
    p.add_argument("--obs-rate", dest="obs_rate", type=float, default=None)
    p.set_defaults(func=_cmd_quantize)

    p = sub.add_parser("recover", help="recover a tensor from observations")
    shared(p)
    p.add_argument("--obs", type=str, required=True)
    p.add_argument("--rank", type=int, default=None)
    p.add_argument("--sigma", type=float, default=None)
    p.add_argument("--model", type=str, default=None, choices=("probit", "logistic"))
    p.add_argument("--iters", dest="iterations", type=int, default=None)
    p.add_argument("--alpha", type=float, default=None)
    p.add_argument("--beta", type=float, default=None)
    p.add_argument("--lambda0", type=float, default=None)
    p.add_argument("--lambda-growth", dest="lambda_growth", type=float, default=None)
    p.add_argument("--known-boundaries", dest="known_boundaries", type=str, default=None)
    p.set_defaults(func=_cmd_recover)

    p = sub.add_parser("sweep", help="run a seeded synthetic parameter sweep")
    shared(p)
    p.add_argument("--axis", type=str, required=True)
    p.add_argument("--grid", type=str, default=None)
    p.add_argument("--seeds", type=str, default=None)
    p.add_argument("--shape", type=str, default=None)
    p.add_argument("--rank", type=int, default=None)
    p.add_argument("--sigma", type=float, default=None)
    p.add_argument("--model", type=str, default=None, choices=("probit", "logistic"))
    p.add_argument("--levels", type=int, default=None)
    p.add_argument("--boundaries", type=str, default=None)
    p.add_argument("--obs-rate", dest="obs_rate", type=float, default=None)
    p.add_argument("--iters", dest="iterations", type=int, default=None)
    p.add_argument("--alpha", type=float, default=None)
    p.add_argument("--beta", type=float, default=None)
    p.add_argument("--lambda0", type=float, default=None)
    p.add_argument("--lambda-growth", dest="lambda_growth", type=float, default=None)
    p.set_defaults(func=_cmd_sweep)

    p = sub.add_parser("predict", help="holdout prediction error on observed labels")
    shared(p)
    p.add_argument("--obs", type=str, required=True)
    p.add_argument("--holdout-fraction", dest="holdout_fraction", type=float, default=None)
    p.add_argument("--rank-grid", dest="rank_grid", type=str, default=None,
                   help="comma list or 'preset' to grid the rank estimate")
    p.add_argument("--sigma-grid", dest="sigma_grid", type=str, default=None,
                   help="comma list or 'preset' to grid the noise-scale estimate")
    p.add_argument("--rank", type=int, default=None)
    p.add_argument("--sigma", type=float, default=None)
    p.add_argument("--model", type=str, default=None, choices=("probit", "logistic"))
    p.add_argument("--iters", dest="iterations", type=int, default=None)
    p.add_argument("--alpha", type=float, default=None)
    p.add_argument("--beta", type=float, default=None)
    p.add_argument("--lambda0", type=float, default=None)
    p.add_argument("--lambda-growth", dest="lambda_growth", type=float, default=None)
    p.add_argument("--known-boundaries", dest="known_boundaries", type=str, default=None)
    p.set_defaults(func=_cmd_predict)

    p = sub.add_parser("bound", help="evaluate the recovery-error bound")
    shared(p)
    p.add_argument("--shape", type=str, default=None)
    p.add_argument("--rank", type=int, default=None)
    p.add_argument("--delta", type=float, default=None)
    p.add_argument("--alpha", type=float, default=None)
    p.add_argument("--model", type=str, default=None, choices=("probit", "logistic"))
    p.add_argument("--sigma", type=float, default=None)
    p.add_argument("--levels", type=int, default=None)
    p.add_argument("--boundaries", type=str, default=None)
    p.set_defaults(func=_cmd_bound)

    return parser


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
        return args.func(args)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except FileFormatError as exc:
        print(f"input format error: {exc}", file=sys.stderr)
        return EXIT_FORMAT
    except OSError as exc:
        print(f"input error: {exc}", file=sys.stderr)
        return EXIT_FORMAT
    except (NumericalError, EmptyObservationError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except ValueError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
