"""Run orchestration and persistence of run artifacts.

A run directory holds ``config.ini`` (canonical copy of the configuration),
``timeseries.csv``, ``snapshots.csv``, ``dissipation.csv`` (cumulative
energy removed by the scheme), ``limit.json``, ``comparison.csv``
and ``manifest.json``.  Everything except the wall-clock figures in the
manifest is a deterministic function of the configuration.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
import json
import os
from pathlib import Path
import time
from typing import Optional

import numpy as np

from . import __version__, asymptotics, fem
from .config import RunConfig, initial_dofs, load_config, parse_config
from .model import validate_laws, validate_params

#: overrides the root that relative output directories are resolved against
OUTPUT_ROOT_ENV = "TIPBEAM_OUTPUT_ROOT"

TIMESERIES_COLUMNS = ("t", "V", "dVdt_model", "uL", "vL", "vprimeL")


class ValidationFailure(ValueError):
    """Parameters or laws failed validation; nothing was simulated."""

    def __init__(self, message, reports):
        super().__init__(message)
        self.reports = reports


@dataclass(frozen=True)
class RunManifest:
    config_hash: str
    version: str
    directory: Path
    files: dict
    limit: dict
    stats: dict
    params: dict
    laws: str

    def as_dict(self) -> dict:
        return {"config_hash": self.config_hash, "version": self.version,
                "directory": str(self.directory), "params": self.params, "laws": self.laws,
                "files": self.files, "limit": self.limit, "stats": self.stats}


def output_directory(cfg: RunConfig) -> Path:
    path = Path(cfg.output)
    root = os.environ.get(OUTPUT_ROOT_ENV)
    if root and not path.is_absolute():
        path = Path(root) / path
    return path


def _fmt(x: float) -> str:
    return repr(float(x))


def _write_csv(path: Path, header, rows):
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow([_fmt(v) for v in row])


def _read_csv(path: Path):
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        data = np.array([[float(v) for v in row] for row in reader])
    return header, data.reshape(-1, len(header))


def check_config(cfg: RunConfig):
    """Validation reports for the parameters and laws of a configuration."""
    return {"params": validate_params(cfg.params), "laws": validate_laws(cfg.laws.build())}


def run(cfg: RunConfig) -> RunManifest:
    reports = check_config(cfg)
    bad = {k: r for k, r in reports.items() if not r.passed}
    if bad:
        msg = "; ".join(f"{k}: {r.describe()}" for k, r in bad.items())
        raise ValidationFailure(f"validation failed: {msg}", bad)

    started = time.perf_counter()
    laws = cfg.laws.build()
    disc = fem.assemble(cfg.params, cfg.n_elements)
    q0, v0 = initial_dofs(cfg, disc)
    traj = fem.simulate(disc, laws, disc.state(q0, v0), cfg.dt, cfg.horizon(), stride=cfg.stride)
    simulated = time.perf_counter()

    out = output_directory(cfg)
    out.mkdir(parents=True, exist_ok=True)
    (out / "config.ini").write_text(cfg.to_ini())
    _write_csv(out / "timeseries.csv", TIMESERIES_COLUMNS,
               zip(traj.times, traj.energies, traj.dissipations, traj.tip_values,
                   traj.tip_velocities, traj.tip_slope_rates))
    ndof = disc.ndof
    header = ["t"] + [f"q{i}" for i in range(ndof)] + [f"v{i}" for i in range(ndof)]
    _write_csv(out / "snapshots.csv", header,
               (np.concatenate(([t], q, v)) for t, q, v in
                zip(traj.snapshot_times, traj.snapshots_q, traj.snapshots_v)))
    _write_csv(out / "dissipation.csv", ("t", "dissipated"), zip(traj.times, traj.dissipated))
    files = {"config": "config.ini", "timeseries": "timeseries.csv", "snapshots": "snapshots.csv",
             "dissipation": "dissipation.csv"}
    limit = _analyze_into(out, cfg, traj, files)
    stats = dict(traj.stats)
    stats.update(wall_simulate_s=simulated - started, wall_total_s=time.perf_counter() - started,
                 dissipated=float(traj.dissipated[-1]))
    manifest = RunManifest(cfg.digest(), __version__, out, files, limit, stats,
                           cfg.params.as_dict(), laws.name)
    (out / "manifest.json").write_text(json.dumps(manifest.as_dict(), indent=2) + "\n")
    return manifest


def run_config(path) -> RunManifest:
    return run(load_config(path))


def _analyze_into(out: Path, cfg: RunConfig, traj: fem.TrajectoryRecord, files: dict) -> dict:
    report = asymptotics.classify_limit(traj, cfg.params, cfg.laws.build(), cfg.thresholds)
    (out / "limit.json").write_text(json.dumps(report.as_dict(), indent=2) + "\n")
    files["limit"] = "limit.json"
    if report.orbit is not None:
        _write_csv(out / "comparison.csv", ("t", "xi_sim", "xi_pred"),
                   zip(traj.times, cfg.params.J * traj.tip_slope_rates,
                       cfg.params.J * report.orbit.tip_slope_rate(traj.times)))
        files["comparison"] = "comparison.csv"
    return report.as_dict()


def load_trajectory(directory, cfg: Optional[RunConfig] = None) -> fem.TrajectoryRecord:
    """Rebuild a trajectory record from the CSV files of a run directory."""
    directory = Path(directory)
    cfg = cfg or parse_config((directory / "config.ini").read_text(), str(directory / "config.ini"))
    _, ts = _read_csv(directory / "timeseries.csv")
    _, snaps = _read_csv(directory / "snapshots.csv")
    ndof = (snaps.shape[1] - 1) // 2
    disc = fem.assemble(cfg.params, ndof // 2)
    dt = float(ts[1, 0] - ts[0, 0]) if len(ts) > 1 else cfg.dt
    laws = cfg.laws.build()
    _, diss = _read_csv(directory / "dissipation.csv")
    dissipated = diss[:, 1]
    return fem.TrajectoryRecord(ts[:, 0], ts[:, 1], ts[:, 2], dissipated, ts[:, 3], ts[:, 4], ts[:, 5],
                                snaps[:, 0], snaps[:, 1:1 + ndof], snaps[:, 1 + ndof:],
                                disc.nodes, cfg.params, laws.name, dt)


def analyze(manifest_path) -> dict:
    """Re-run the limit classification for a finished run."""
    manifest_path = Path(manifest_path)
    manifest = json.loads(manifest_path.read_text())
    directory = manifest_path.parent
    cfg = parse_config((directory / manifest["files"]["config"]).read_text())
    traj = load_trajectory(directory, cfg)
    files = dict(manifest["files"])
    limit = _analyze_into(directory, cfg, traj, files)
    return {"limit": limit, "files": files}
