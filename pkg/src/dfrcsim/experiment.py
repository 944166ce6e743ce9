# Monte-Carlo experiment runner: YAML scenario specs validated against a
# published JSON schema, deterministic per-cell seed derivation, CSV results
# with a sidecar run manifest.

from __future__ import annotations

import csv
import hashlib
import io
import json
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np
import yaml

from . import __version__
from .metrics import PowerModel, beampattern, detection_probability, energy_efficiency, \
    stack_columns, total_power
from .model import PathLossModel, RadarScene, SystemConfig, generate_channel
from .pdd import SolverFailureError, solve_best

CSV_SCHEMA_VERSION = 1

SWEEP_VARIABLES = ("gamma_db", "pt_dbm", "num_users", "num_tx_antennas")
SOLVE_ARCHITECTURES = ("RS", "PC", "FD")

# Published config schema. dB/dBm fields are converted to linear exactly once
# at ingestion; angles are degrees in the file and radians internally.
EXPERIMENT_SCHEMA = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "title": "dfrcsim experiment spec",
    "type": "object",
    "additionalProperties": False,
    "required": ["sweep", "run"],
    "properties": {
        "system": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "num_tx_antennas": {"type": "integer", "minimum": 1},
                "num_rx_antennas": {"type": "integer", "minimum": 1},
                "num_tx_rf_chains": {"type": "integer", "minimum": 1},
                "num_rx_rf_chains": {"type": "integer", "minimum": 1},
                "num_users": {"type": "integer", "minimum": 1},
                "num_user_antennas": {"type": "integer", "minimum": 1},
                "streams_per_user": {"type": "integer", "minimum": 1},
                "tx_power_dbm": {"type": "number"},
                "user_noise_dbm": {"type": "number"},
                "radar_noise_dbm": {"type": "number"},
            },
        },
        "scene": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "target_deg": {"type": "number"},
                "clutter_deg": {"type": "array", "items": {"type": "number"}},
                "target_power_db": {"type": "number"},
                "clutter_power_db": {"type": "number"},
            },
        },
        "channel": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "distance_m": {"type": "number", "exclusiveMinimum": 0},
                "num_paths": {"type": "integer", "minimum": 1},
                "pathloss_intercept_db": {"type": "number"},
                "pathloss_exponent": {"type": "number", "exclusiveMinimum": 0},
                "shadowing_std_db": {"type": "number", "minimum": 0},
            },
        },
        "power": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "baseband_w": {"type": "number", "minimum": 0},
                "rf_chain_w": {"type": "number", "minimum": 0},
                "phase_shifter_w": {"type": "number", "minimum": 0},
                "switch_w": {"type": "number", "minimum": 0},
            },
        },
        "solver": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "rho0": {"type": "number", "exclusiveMinimum": 0},
                "shrink": {"type": "number", "exclusiveMinimum": 0, "exclusiveMaximum": 1},
                "inner_tol": {"type": "number", "exclusiveMinimum": 0},
                "outer_tol": {"type": "number", "exclusiveMinimum": 0},
                "max_inner": {"type": "integer", "minimum": 1},
                "max_outer": {"type": "integer", "minimum": 1},
                "num_starts": {"type": "integer", "minimum": 1},
            },
        },
        "sweep": {
            "type": "object",
            "additionalProperties": False,
            "required": ["variable", "values"],
            "properties": {
                "variable": {"enum": list(SWEEP_VARIABLES)},
                "values": {"type": "array", "minItems": 1,
                           "items": {"type": "number"}},
            },
        },
        "run": {
            "type": "object",
            "additionalProperties": False,
            "required": ["architectures", "trials", "master_seed"],
            "properties": {
                "architectures": {
                    "type": "array", "minItems": 1,
                    "items": {"enum": list(SOLVE_ARCHITECTURES)},
                },
                "trials": {"type": "integer", "minimum": 1},
                "master_seed": {"type": "integer", "minimum": 0},
                "gamma_db": {"type": "number"},
                "pfa_grid": {"type": "array", "items": {
                    "type": "number", "exclusiveMinimum": 0, "exclusiveMaximum": 1}},
                "output": {"type": "string"},
            },
        },
        "beampattern": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "grid_step_deg": {"type": "number", "exclusiveMinimum": 0},
                "gamma_db": {"type": "number"},
            },
        },
    },
}


class ConfigError(ValueError):
    """Invalid or unreadable experiment specification."""


@dataclass(frozen=True)
class ExperimentSpec:
    """One validated experiment: sweep axis, architectures, trial plan."""

    sweep_variable: str
    sweep_values: tuple[float, ...]
    architectures: tuple[str, ...]
    trials: int
    master_seed: int
    base_cfg: SystemConfig
    power: PowerModel
    scene: RadarScene
    path_loss: PathLossModel
    distance_m: float
    num_paths: int
    gamma_db: float
    pfa_grid: tuple[float, ...]
    output: str | None
    solver: dict = field(default_factory=dict)
    num_starts: int = 1
    beampattern_step_deg: float = 0.5
    beampattern_gamma_db: float | None = None
    config_sha256: str = ""


def dbm_to_watts(dbm: float) -> float:
    return 10.0 ** (dbm / 10.0) / 1000.0


def db_to_linear(db: float) -> float:
    return 10.0 ** (db / 10.0)


def load_spec(path: str | Path) -> ExperimentSpec:
    """Read and validate a YAML experiment spec; raises ConfigError."""
    path = Path(path)
    try:
        raw_bytes = path.read_bytes()
    except OSError as exc:
        raise ConfigError(f"cannot read spec file {path}: {exc}") from exc
    try:
        doc = yaml.safe_load(io.BytesIO(raw_bytes))
    except yaml.YAMLError as exc:
        raise ConfigError(f"malformed YAML in {path}: {exc}") from exc
    if not isinstance(doc, dict):
        raise ConfigError(f"spec {path} must be a mapping at top level")

    import jsonschema

    try:
        jsonschema.validate(doc, EXPERIMENT_SCHEMA)
    except jsonschema.ValidationError as exc:
        where = "/".join(str(p) for p in exc.absolute_path) or "<root>"
        raise ConfigError(f"spec {path} invalid at {where}: {exc.message}") from exc

    return spec_from_dict(doc, config_sha256=hashlib.sha256(raw_bytes).hexdigest())


def spec_from_dict(doc: dict, config_sha256: str = "") -> ExperimentSpec:
    system = doc.get("system", {})
    cfg = SystemConfig(
        M_T=system.get("num_tx_antennas", 16),
        M_R=system.get("num_rx_antennas", 8),
        N_RF_t=system.get("num_tx_rf_chains", 4),
        N_RF_r=system.get("num_rx_rf_chains", 4),
        K=system.get("num_users", 2),
        M_U=system.get("num_user_antennas", 2),
        d_s=system.get("streams_per_user", 1),
        P_T=dbm_to_watts(system.get("tx_power_dbm", 40.0)),
        sigma2_user=dbm_to_watts(system.get("user_noise_dbm", -90.0)),
        sigma2_radar=dbm_to_watts(system.get("radar_noise_dbm", 20.0)),
    )
    scene_doc = doc.get("scene", {})
    scene = RadarScene(
        theta_0=math.radians(scene_doc.get("target_deg", 0.0)),
        theta_j=np.radians(scene_doc.get("clutter_deg", [-30.0, 30.0])),
        sigma0_sq=db_to_linear(scene_doc.get("target_power_db", 10.0)),
        sigmaC_sq=db_to_linear(scene_doc.get("clutter_power_db", 20.0)),
    )
    channel = doc.get("channel", {})
    path_loss = PathLossModel(
        alpha=channel.get("pathloss_intercept_db", 72.0),
        beta=channel.get("pathloss_exponent", 2.92),
        sigma_shadow=channel.get("shadowing_std_db", 8.7),
    )
    power_doc = doc.get("power", {})
    power = PowerModel(
        P_BB=power_doc.get("baseband_w", 0.2),
        P_RF=power_doc.get("rf_chain_w", 0.3),
        P_PS=power_doc.get("phase_shifter_w", 0.05),
        P_SW=power_doc.get("switch_w", 0.005),
    )
    solver_doc = dict(doc.get("solver", {}))
    num_starts = solver_doc.pop("num_starts", 1)
    run = doc["run"]
    bp = doc.get("beampattern", {})
    spec = ExperimentSpec(
        sweep_variable=doc["sweep"]["variable"],
        sweep_values=tuple(float(v) for v in doc["sweep"]["values"]),
        architectures=tuple(run["architectures"]),
        trials=int(run["trials"]),
        master_seed=int(run["master_seed"]),
        base_cfg=cfg,
        power=power,
        scene=scene,
        path_loss=path_loss,
        distance_m=float(channel.get("distance_m", 80.0)),
        num_paths=int(channel.get("num_paths", 3)),
        gamma_db=float(run.get("gamma_db", 10.0)),
        pfa_grid=tuple(float(p) for p in run.get("pfa_grid", [1e-6, 1e-4])),
        output=run.get("output"),
        solver=solver_doc,
        num_starts=int(num_starts),
        beampattern_step_deg=float(bp.get("grid_step_deg", 0.5)),
        beampattern_gamma_db=bp.get("gamma_db"),
        config_sha256=config_sha256,
    )
    for value in spec.sweep_values:
        try:
            _cell_config(spec, value)
        except ValueError as exc:
            raise ConfigError(f"sweep value {value} yields an invalid system "
                              f"configuration: {exc}") from exc
    if "PC" in spec.architectures:
        for value in spec.sweep_values:
            cell_cfg, _ = _cell_config(spec, value)
            if cell_cfg.M_T % cell_cfg.N_RF_t or cell_cfg.M_R % cell_cfg.N_RF_r:
                raise ConfigError(
                    f"PC architecture needs antenna counts divisible by RF "
                    f"chains (sweep value {value})")
    return spec


# ---------------------------------------------------------------------------
# Seed derivation
# ---------------------------------------------------------------------------

def derive_seed(master_seed: int, sweep_index: int, arch: str, trial: int,
                stream: str) -> int:
    """Deterministic per-cell seed: first 8 bytes of
    SHA-256("{master}:{sweep_index}:{arch}:{trial}:{stream}").

    The channel stream passes arch="*" so all architectures of a cell see the
    same channel draw and per-trial comparisons are paired.
    """
    key = f"{master_seed}:{sweep_index}:{arch}:{trial}:{stream}"
    digest = hashlib.sha256(key.encode("ascii")).digest()
    return int.from_bytes(digest[:8], "big")


def cell_channel_seed(spec: ExperimentSpec, sweep_index: int, trial: int) -> int:
    return derive_seed(spec.master_seed, sweep_index, "*", trial, "channel")


def cell_init_seed(spec: ExperimentSpec, sweep_index: int, arch: str, trial: int) -> int:
    return derive_seed(spec.master_seed, sweep_index, arch, trial, "init")


# ---------------------------------------------------------------------------
# Cell execution
# ---------------------------------------------------------------------------

def _cell_config(spec: ExperimentSpec, value: float) -> tuple[SystemConfig, float]:
    """Apply the sweep value; returns (config, gamma_linear)."""
    cfg = spec.base_cfg
    gamma_db = spec.gamma_db
    var = spec.sweep_variable
    if var == "gamma_db":
        gamma_db = value
    elif var == "pt_dbm":
        cfg = replace(cfg, P_T=dbm_to_watts(value))
    elif var == "num_users":
        cfg = replace(cfg, K=int(value))
    elif var == "num_tx_antennas":
        cfg = replace(cfg, M_T=int(value))
    else:  # pragma: no cover - schema forbids
        raise ConfigError(f"unknown sweep variable {var}")
    return cfg, db_to_linear(gamma_db)


def run_cell(spec: ExperimentSpec, sweep_index: int, arch: str, trial: int) -> dict:
    """Solve one (sweep value, architecture, trial) cell; never raises for
    per-trial solver trouble, flagging the row instead."""
    value = spec.sweep_values[sweep_index]
    cfg, gamma = _cell_config(spec, value)
    channel_seed = cell_channel_seed(spec, sweep_index, trial)
    init_seed = cell_init_seed(spec, sweep_index, arch, trial)
    channels = generate_channel(cfg, spec.path_loss, spec.distance_m,
                                spec.num_paths, np.random.default_rng(channel_seed))
    row = {
        "schema_version": CSV_SCHEMA_VERSION,
        "sweep_variable": spec.sweep_variable,
        "sweep_value": value,
        "architecture": arch,
        "trial": trial,
        "channel_seed": channel_seed,
        "init_seed": init_seed,
        "feasible": 0,
        "converged": 0,
        "sum_rate_bps_hz": float("nan"),
        "scnr_constraint": float("nan"),
        "scnr_constraint_db": float("nan"),
        "h_final": float("nan"),
        "outer_iterations": 0,
        "power_w": total_power(arch, cfg, spec.power),
        "ee_bps_hz_per_w": float("nan"),
        "status": "unsolved",
        "wall_time_s": 0.0,
    }
    for pfa in spec.pfa_grid:
        row[f"pd_at_pfa_{pfa:.0e}"] = float("nan")
    t0 = time.perf_counter()
    try:
        result = solve_best(cfg, channels, spec.scene, gamma, arch,
                            rng=init_seed, n_starts=spec.num_starts, **spec.solver)
    except SolverFailureError as exc:
        row["status"] = f"solver_failure:{exc.status}"
        row["wall_time_s"] = time.perf_counter() - t0
        return row
    row["wall_time_s"] = time.perf_counter() - t0
    row["status"] = result.status
    row["converged"] = int(result.converged)
    row["feasible"] = int(result.converged)
    row["outer_iterations"] = result.outer_iterations
    if result.converged:
        row["sum_rate_bps_hz"] = result.sum_rate
        row["scnr_constraint"] = result.scnr_constraint
        row["scnr_constraint_db"] = 10.0 * math.log10(max(result.scnr_constraint, 1e-300))
        row["h_final"] = result.trace[-1].h if result.trace else 0.0
        row["ee_bps_hz_per_w"] = energy_efficiency(result.sum_rate, arch, cfg, spec.power)
        for pfa in spec.pfa_grid:
            row[f"pd_at_pfa_{pfa:.0e}"] = detection_probability(
                result.scnr_constraint, pfa)
    return row


def _run_cell_star(args) -> dict:
    return run_cell(*args)


def run_experiment(spec: ExperimentSpec, threads: int = 1) -> list[dict]:
    """Run every (sweep value x architecture x trial) cell.

    Rows come back ordered by (sweep index, architecture order, trial)
    regardless of worker completion order; per-trial infeasibility is recorded
    as a row flag and the run continues.
    """
    cells = [(spec, s, arch, t)
             for s in range(len(spec.sweep_values))
             for arch in spec.architectures
             for t in range(spec.trials)]
    if threads > 1:
        with ProcessPoolExecutor(max_workers=threads) as pool:
            rows = list(pool.map(_run_cell_star, cells))
    else:
        rows = [run_cell(*c) for c in cells]
    return rows


def summarize(spec: ExperimentSpec, rows: list[dict]) -> list[dict]:
    """Aggregate feasible trials into mean/std per (sweep value, architecture)."""
    out = []
    metrics = ["sum_rate_bps_hz", "scnr_constraint_db", "ee_bps_hz_per_w",
               "outer_iterations"]
    for value in spec.sweep_values:
        for arch in spec.architectures:
            cell = [r for r in rows
                    if r["sweep_value"] == value and r["architecture"] == arch]
            feas = [r for r in cell if r["feasible"]]
            summary = {
                "sweep_variable": spec.sweep_variable,
                "sweep_value": value,
                "architecture": arch,
                "trials": len(cell),
                "feasible_trials": len(feas),
            }
            for m in metrics:
                vals = np.array([r[m] for r in feas], dtype=float)
                summary[f"{m}_mean"] = float(vals.mean()) if len(vals) else float("nan")
                summary[f"{m}_std"] = float(vals.std(ddof=0)) if len(vals) else float("nan")
            out.append(summary)
    return out


# ---------------------------------------------------------------------------
# Output files
# ---------------------------------------------------------------------------

def _format_value(v) -> str:
    if isinstance(v, float):
        return format(v, ".12g")
    return str(v)


def write_csv(rows: list[dict], path: str | Path, drop: tuple[str, ...] = ()) -> None:
    """UTF-8 CSV with '.' decimals and a fixed column order; byte-stable for
    identical rows."""
    if not rows:
        raise ValueError("no rows to write")
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fields = [k for k in rows[0].keys() if k not in drop]
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(fields)
        for row in rows:
            writer.writerow([_format_value(row[k]) for k in fields])


def write_manifest(spec: ExperimentSpec, rows: list[dict], path: str | Path,
                   extra: dict | None = None) -> None:
    """Sidecar manifest: config hash, seed, code version, timing."""
    manifest = {
        "code_version": __version__,
        "csv_schema_version": CSV_SCHEMA_VERSION,
        "config_sha256": spec.config_sha256,
        "master_seed": spec.master_seed,
        "sweep_variable": spec.sweep_variable,
        "sweep_values": list(spec.sweep_values),
        "architectures": list(spec.architectures),
        "trials": spec.trials,
        "total_wall_time_s": float(sum(r.get("wall_time_s", 0.0) for r in rows)),
        "infeasible_trials": int(sum(1 for r in rows if not r["feasible"])),
    }
    if extra:
        manifest.update(extra)
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n",
                    encoding="utf-8")


# Per-trial wall times stay out of the results CSV so identical runs are
# byte-identical; they are recorded in the manifest total instead.
RESULT_CSV_DROP = ("wall_time_s",)


def emit_beampattern(w: np.ndarray, t: np.ndarray, cfg: SystemConfig,
                     path: str | Path, step_deg: float = 0.5) -> np.ndarray:
    """Write the peak-normalized beampattern over [-90, 90] degrees as CSV
    rows of (angle_deg, power_db); returns the dB values."""
    if step_deg <= 0:
        raise ValueError("step_deg must be > 0")
    angles_deg = np.arange(-90.0, 90.0 + step_deg / 2, step_deg)
    pattern_db = beampattern(w, t, np.radians(angles_deg), cfg)
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    try:
        with open(path, "w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(["angle_deg", "power_db"])
            for a, p in zip(angles_deg, pattern_db):
                writer.writerow([_format_value(float(a)), _format_value(float(p))])
    except OSError as exc:
        raise OSError(f"cannot write beampattern to {path}: {exc}") from exc
    return pattern_db


def beampattern_inputs(result) -> tuple[np.ndarray, np.ndarray]:
    """Stacked physical receive/transmit vectors of a solve result."""
    bf = result.beamformers
    t = stack_columns(bf.T_RF @ bf.T_D)
    w = stack_columns(bf.W_RF @ bf.W_D)
    return w, t
