"""Benchmark study runner: builds the reference scenario, sweeps SNR and
seeds for each scheme, and emits plot-ready CSV tables."""

from __future__ import annotations

import csv
import dataclasses
import math
import os
from dataclasses import dataclass, field

import numpy as np
import yaml

from .channels import build_channel_set, strip_ris
from .estimation import SI_MODES, SI_MODE_POST_CANCELLATION, music_estimate, simulate_snapshots
from .geometry import build_scene
from .optimizer import (
    RIS_OBJECTIVE_JCAS,
    RIS_OBJECTIVE_RATE,
    CrbInfeasibleError,
    JcasConfig,
    jcas_optimize,
)
from .steering import PathCoefficients

SCHEME_RIS_SENSING = "ris_with_sensing"
SCHEME_NO_RIS_SENSING = "no_ris_with_sensing"
SCHEME_RIS_COMM = "ris_comm_only"
SCHEME_NO_RIS_COMM = "no_ris_comm_only"
SCHEMES = (
    SCHEME_RIS_SENSING,
    SCHEME_NO_RIS_SENSING,
    SCHEME_RIS_COMM,
    SCHEME_NO_RIS_COMM,
)

CONFIG_ENV_VAR = "FDJCAS_CONFIG"

METRIC_COLUMNS = ("rate_bps_hz", "si_power_db", "crb_rad2", "mse_rad2")


class ConfigError(ValueError):
    """Invalid experiment configuration."""


@dataclass(frozen=True)
class ExperimentConfig:
    """One study cell grid: scheme x SNR grid x seeds at fixed scenario.

    The scene block mirrors the reference scenario: a 15x10 full-duplex
    array pair, a 10x10 surface at 30 degrees and 5 m, the user at 80 m,
    targets on a 50 m circle with per-seed random angles, 2 streams, and
    an accuracy threshold of 0.01 rad^2.
    """

    # scene
    n_bs_tx: int = 15
    n_bs_rx: int = 10
    n_user: int = 5
    ris_rows: int = 10
    ris_cols: int = 10
    wavelength: float = 0.1
    bs_ris_angle_deg: float = 30.0
    bs_ris_distance: float = 5.0
    user_range: float = 80.0
    user_angle_deg: float = 0.0
    target_range: float = 50.0
    # paths
    direct_path_mag: float = 1.0
    ris_path_mag: float = 0.5
    nlos_si_power: float = 0.01
    # optimizer
    power_budget: float = 1.0
    crb_threshold: float = 0.01
    n_streams: int = 2
    outer_tol: float = 1e-4
    max_outer: int = 100
    # run
    scheme: str = SCHEME_RIS_SENSING
    snr_grid_db: tuple = (0.0, 5.0, 10.0, 15.0, 20.0, 25.0, 30.0)
    seeds: int = 50
    root_seed: int = 0
    # sensing evaluation
    mse_trials: int = 200
    snapshots: int = 64
    grid_resolution: float = 1e-3
    residual_si_mode: str = SI_MODE_POST_CANCELLATION
    residual_factor: float = 0.1
    # output
    output_dir: str = "results"

    def __post_init__(self):
        object.__setattr__(self, "snr_grid_db", tuple(float(s) for s in self.snr_grid_db))
        if self.scheme not in SCHEMES:
            raise ConfigError(f"unknown scheme {self.scheme!r}; choose from {SCHEMES}")
        if self.seeds < 1 or self.mse_trials < 0:
            raise ConfigError("seeds must be >= 1 and mse_trials >= 0")
        if any(n < 1 for n in (self.n_bs_tx, self.n_bs_rx, self.n_user, self.ris_rows, self.ris_cols, self.n_streams)):
            raise ConfigError("array sizes and stream count must be positive")
        if list(self.snr_grid_db) != sorted(self.snr_grid_db):
            raise ConfigError("snr_grid_db must be sorted ascending")
        if self.residual_si_mode not in SI_MODES:
            raise ConfigError(f"unknown residual_si_mode {self.residual_si_mode!r}")

    def to_dict(self) -> dict:
        out = dataclasses.asdict(self)
        out["snr_grid_db"] = list(self.snr_grid_db)
        return out

    @classmethod
    def from_dict(cls, data: dict) -> "ExperimentConfig":
        flat = {}
        for key, value in data.items():
            if isinstance(value, dict):
                flat.update(value)
            else:
                flat[key] = value
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = set(flat) - known
        if unknown:
            raise ConfigError(f"unknown configuration keys: {sorted(unknown)}")
        try:
            return cls(**flat)
        except TypeError as err:
            raise ConfigError(str(err)) from err


def load_config(path) -> ExperimentConfig:
    """Parse the YAML experiment file (flat keys or one level of grouping)."""
    try:
        with open(path, "r", encoding="utf-8") as fh:
            data = yaml.safe_load(fh)
    except (OSError, yaml.YAMLError) as err:
        raise ConfigError(f"cannot read config {path}: {err}") from err
    if data is None:
        data = {}
    if not isinstance(data, dict):
        raise ConfigError("config file must contain a mapping")
    return ExperimentConfig.from_dict(data)


def save_config(config: ExperimentConfig, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        yaml.safe_dump(config.to_dict(), fh, sort_keys=True)


def scheme_flags(scheme: str):
    """(uses_ris, does_sensing) for a scheme name."""
    if scheme not in SCHEMES:
        raise ConfigError(f"unknown scheme {scheme!r}")
    return scheme.startswith("ris"), scheme.endswith("with_sensing")


def build_cell(config: ExperimentConfig, seed_index: int, snr_db: float):
    """Scene, channels, coefficients and solver options for one grid cell.

    The target angle is drawn per seed from the 50 m circle; channel and
    phase randomness derive from (root_seed, seed_index) streams so a cell
    is reproducible in isolation and independent of the surface size for
    the RIS-free schemes.
    """
    uses_ris, does_sensing = scheme_flags(config.scheme)
    angle_rng = np.random.default_rng([config.root_seed, seed_index, 1])
    target_angle = angle_rng.uniform(-np.pi / 2, np.pi / 2)
    scene = build_scene(
        n_bs_tx=config.n_bs_tx,
        n_bs_rx=config.n_bs_rx,
        ris_rows=config.ris_rows,
        ris_cols=config.ris_cols,
        wavelength=config.wavelength,
        bs_ris_angle=np.deg2rad(config.bs_ris_angle_deg),
        bs_ris_distance=config.bs_ris_distance,
        user_range=config.user_range,
        user_angle=np.deg2rad(config.user_angle_deg),
        target_range=config.target_range,
        target_angle=target_angle,
    )
    noise = config.power_budget / 10.0 ** (snr_db / 10.0)
    channels = build_channel_set(
        scene,
        n_user_antennas=config.n_user,
        nlos_si_power=config.nlos_si_power,
        seed=[config.root_seed, seed_index, 2],
        noise_user=noise,
        noise_radar=noise,
    )
    coeffs = PathCoefficients.random(
        [config.root_seed, seed_index, 3],
        direct_mag=config.direct_path_mag,
        ris_mag=config.ris_path_mag,
    )
    if not uses_ris:
        channels = strip_ris(channels)
        coeffs = coeffs.without_ris()
    jcas = JcasConfig(
        power_budget=config.power_budget,
        crb_threshold=config.crb_threshold if does_sensing else math.inf,
        n_streams=config.n_streams,
        outer_tol=config.outer_tol,
        max_outer=config.max_outer,
        ris_enabled=uses_ris,
        si_enabled=does_sensing,
        sensing_enabled=does_sensing,
        ris_objective=RIS_OBJECTIVE_JCAS if does_sensing else RIS_OBJECTIVE_RATE,
        seed=int(np.random.default_rng([config.root_seed, seed_index, 4]).integers(2**31)),
    )
    return scene, channels, coeffs, jcas


def _run_cell(config: ExperimentConfig, seed_index: int, snr_db: float):
    """Optimize one cell; returns a metrics dict or None when infeasible."""
    _, does_sensing = scheme_flags(config.scheme)
    scene, channels, coeffs, jcas = build_cell(config, seed_index, snr_db)
    try:
        result = jcas_optimize(scene, channels, jcas, coeffs=coeffs)
    except CrbInfeasibleError:
        return None
    metrics = {
        "rate_bps_hz": result.trace.rate_bps_hz[-1],
        "si_power": result.trace.si_power[-1] if does_sensing else math.nan,
        "crb_rad2": result.trace.crb[-1] if does_sensing else math.nan,
        "sq_errors": [],
    }
    if does_sensing and config.mse_trials > 0:
        trials = max(1, config.mse_trials // config.seeds)
        for trial in range(trials):
            batch = simulate_snapshots(
                scene,
                channels,
                result.precoder,
                result.ris_phase,
                coeffs,
                config.snapshots,
                seed=config.root_seed + seed_index * trials + trial,
                residual_si_mode=config.residual_si_mode,
                residual_factor=config.residual_factor,
            )
            est = music_estimate(batch, config.n_streams, config.grid_resolution)
            metrics["sq_errors"].append((est.angle_estimate - scene.target_angle) ** 2)
    return metrics


def run_scheme(config: ExperimentConfig):
    """Average the scheme's metrics over seeds at every SNR point.

    Cells whose sensing constraint is infeasible are excluded from the
    averages but counted; a point with no feasible seed is emitted with
    the ``infeasible`` status instead of being dropped.
    """
    rows = []
    for snr_db in config.snr_grid_db:
        rates, si_powers, crbs, sq_errors = [], [], [], []
        feasible = 0
        for seed_index in range(config.seeds):
            metrics = _run_cell(config, seed_index, snr_db)
            if metrics is None:
                continue
            feasible += 1
            rates.append(metrics["rate_bps_hz"])
            si_powers.append(metrics["si_power"])
            crbs.append(metrics["crb_rad2"])
            sq_errors.extend(metrics["sq_errors"])
        row = {
            "scheme": config.scheme,
            "snr_db": float(snr_db),
            "feasible_seeds": feasible,
            "total_seeds": config.seeds,
            "status": "ok" if feasible > 0 else "infeasible",
            "rate_bps_hz": float(np.mean(rates)) if rates else math.nan,
            "si_power_db": _mean_db(si_powers),
            "crb_rad2": _nanmean(crbs),
            "mse_rad2": float(np.mean(sq_errors)) if sq_errors else math.nan,
        }
        rows.append(row)
    return rows


def _nanmean(values):
    values = [v for v in values if not math.isnan(v)]
    return float(np.mean(values)) if values else math.nan


def _mean_db(values):
    values = [v for v in values if not math.isnan(v)]
    if not values:
        return math.nan
    mean = float(np.mean(values))
    return 10.0 * math.log10(mean) if mean > 0.0 else math.nan


def _format(value) -> str:
    if isinstance(value, float):
        return "" if math.isnan(value) else repr(value)
    return str(value)


def emit_outputs(results, output_dir) -> list:
    """Write one CSV per scheme plus a combined long-format table.

    Returns the written paths.  Numbers are rendered with ``repr`` so a
    rerun with identical inputs reproduces the files byte for byte;
    missing metrics become empty cells, never NaN text.
    """
    os.makedirs(output_dir, exist_ok=True)
    paths = []
    by_scheme = {}
    for row in results:
        by_scheme.setdefault(row["scheme"], []).append(row)
    header = [
        "scheme",
        "snr_db",
        "rate_bps_hz",
        "si_power_db",
        "crb_rad2",
        "mse_rad2",
        "feasible_seeds",
        "total_seeds",
        "status",
    ]
    for scheme in sorted(by_scheme):
        path = os.path.join(output_dir, f"{scheme}.csv")
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(header)
            for row in sorted(by_scheme[scheme], key=lambda r: r["snr_db"]):
                writer.writerow([_format(row.get(col, "")) for col in header])
        paths.append(path)
    combined = os.path.join(output_dir, "combined.csv")
    with open(combined, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["scheme", "snr_db", "metric", "value"])
        for scheme in sorted(by_scheme):
            for row in sorted(by_scheme[scheme], key=lambda r: r["snr_db"]):
                for metric in METRIC_COLUMNS:
                    value = row.get(metric, math.nan)
                    if isinstance(value, float) and math.isnan(value):
                        continue
                    writer.writerow([scheme, _format(row["snr_db"]), metric, _format(value)])
    paths.append(combined)
    return paths
