"""Command-line front end: run a benchmark sweep, print the angle bound for
a scene, or run a single subspace estimate."""

from __future__ import annotations

import argparse
import os
import sys

from .crb import aoa_crb
from .estimation import music_estimate, simulate_snapshots
from .experiments import (
    CONFIG_ENV_VAR,
    SCHEMES,
    ConfigError,
    ExperimentConfig,
    build_cell,
    emit_outputs,
    load_config,
    run_scheme,
)
from .optimizer import (
    CrbInfeasibleError,
    RisPhase,
    dominant_precoder,
    effective_channel,
    jcas_optimize,
)
from .steering import build_sensing_context

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_RUNTIME = 2


def _base_config(args) -> ExperimentConfig:
    path = getattr(args, "config", None) or os.environ.get(CONFIG_ENV_VAR)
    config = load_config(path) if path else ExperimentConfig()
    overrides = {}
    if getattr(args, "scheme", None):
        overrides["scheme"] = args.scheme
    if getattr(args, "snr", None):
        overrides["snr_grid_db"] = tuple(float(s) for s in args.snr.split(","))
    if getattr(args, "seeds", None) is not None:
        overrides["seeds"] = args.seeds
    if getattr(args, "trials", None) is not None:
        overrides["mse_trials"] = args.trials
    if getattr(args, "out", None):
        overrides["output_dir"] = args.out
    if overrides:
        config = ExperimentConfig.from_dict({**config.to_dict(), **overrides})
    return config


def _cmd_run(args) -> int:
    config = _base_config(args)
    rows = run_scheme(config)
    paths = emit_outputs(rows, config.output_dir)
    for path in paths:
        print(path)
    return EXIT_OK


def _cmd_crb(args) -> int:
    config = _base_config(args)
    snr = config.snr_grid_db[0] if args.snr_db is None else args.snr_db
    scene, channels, coeffs, jcas = build_cell(config, args.seed, snr)
    if args.optimize:
        result = jcas_optimize(scene, channels, jcas, coeffs=coeffs)
        precoder, phi = result.precoder, result.ris_phase
    else:
        phi = RisPhase.random(channels.n_ris, [jcas.seed, 0]).vector
        precoder = dominant_precoder(
            effective_channel(channels, phi), config.n_streams, config.power_budget
        )
    ctx = build_sensing_context(scene, phi, coeffs, channels.noise_radar)
    value = aoa_crb(precoder, ctx.path_response_deriv, ctx.noise_cov)
    print(f"target_angle_rad={scene.target_angle!r}")
    print(f"snr_db={snr!r}")
    print(f"crb_rad2={value!r}")
    print(f"threshold_rad2={config.crb_threshold!r}")
    print(f"satisfied={value <= config.crb_threshold}")
    return EXIT_OK


def _cmd_estimate(args) -> int:
    config = _base_config(args)
    snr = config.snr_grid_db[0] if args.snr_db is None else args.snr_db
    scene, channels, coeffs, jcas = build_cell(config, args.seed, snr)
    result = jcas_optimize(scene, channels, jcas, coeffs=coeffs)
    batch = simulate_snapshots(
        scene,
        channels,
        result.precoder,
        result.ris_phase,
        coeffs,
        config.snapshots,
        seed=config.root_seed,
        residual_si_mode=config.residual_si_mode,
        residual_factor=config.residual_factor,
    )
    est = music_estimate(batch, config.n_streams, config.grid_resolution)
    error = est.angle_estimate - scene.target_angle
    print(f"true_angle_rad={scene.target_angle!r}")
    print(f"estimate_rad={est.angle_estimate!r}")
    print(f"error_rad={error!r}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="fdjcas",
        description="Full-duplex joint communications and sensing studies",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run a scheme over the SNR grid and emit CSVs")
    run.add_argument("config", nargs="?", help=f"YAML config path (default: ${CONFIG_ENV_VAR})")
    run.add_argument("--scheme", choices=SCHEMES)
    run.add_argument("--snr", help="comma-separated SNR grid in dB, e.g. 0,5,10")
    run.add_argument("--seeds", type=int)
    run.add_argument("--trials", type=int, help="Monte-Carlo trials for the MSE column")
    run.add_argument("--out", help="output directory")
    run.set_defaults(func=_cmd_run)

    crb = sub.add_parser("crb", help="print the angle bound for a configured scene")
    crb.add_argument("config", nargs="?")
    crb.add_argument("--snr-db", type=float, default=None)
    crb.add_argument("--seed", type=int, default=0)
    crb.add_argument("--optimize", action="store_true", help="optimize before evaluating")
    crb.set_defaults(func=_cmd_crb)

    estimate = sub.add_parser("estimate", help="single optimized MUSIC estimate")
    estimate.add_argument("config", nargs="?")
    estimate.add_argument("--snr-db", type=float, default=None)
    estimate.add_argument("--seed", type=int, default=0)
    estimate.set_defaults(func=_cmd_estimate)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as err:
        print(f"config error: {err}", file=sys.stderr)
        return EXIT_CONFIG
    except (CrbInfeasibleError, OSError, ValueError, RuntimeError) as err:
        print(f"error: {err}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
