"""Run-directory persistence: manifest.json, series.csv, snapshots/, summary.json.

Floats are written with ``repr`` so a directory reloads bit-for-bit and
repeated runs of one config produce byte-identical series files.
"""
from __future__ import annotations

import csv
import json
import subprocess
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .. import __version__
from ..constitutive import ModelParams
from ..diagnostics import energy
from ..dynamics import STATE_TYPES
from ..errors import ConfigError
from ..field import Grid, read_fields_csv, write_fields_csv
from ..integrate import Trajectory
from .config import ScenarioConfig

SERIES_COLUMNS = ("t", "dt", "E_kinetic", "E_internal", "E_capillary", "E_total",
                  "dissipation_cum", "rho_min", "rho_max", "drift_consistency", "mass")


def git_describe() -> str:
    try:
        out = subprocess.run(["git", "describe", "--always", "--dirty", "--tags"],
                             cwd=Path(__file__).resolve().parent, capture_output=True,
                             text=True, timeout=5)
    except (OSError, subprocess.SubprocessError):
        return "unknown"
    return out.stdout.strip() or "unknown"


def series_rows(traj: Trajectory, params: ModelParams):
    for k, state in enumerate(traj.states):
        rep = energy(state, params)
        yield (traj.times[k], traj.dts[k], rep.kinetic, rep.internal, rep.capillary, rep.total,
               traj.cumulative_dissipation[k], float(np.min(state.rho)),
               float(np.max(state.rho)), traj.consistency[k], state.grid.quad(state.rho))


def write_series(path, traj: Trajectory, params: ModelParams):
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(SERIES_COLUMNS)
        for row in series_rows(traj, params):
            writer.writerow([repr(float(v)) for v in row])


def read_series(path) -> dict:
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    header, body = rows[0], rows[1:]
    data = np.array([[float(v) for v in row] for row in body]).reshape(len(body), len(header))
    return {name: data[:, i] for i, name in enumerate(header)}


def checkpoint_indices(traj: Trajectory, times) -> list:
    return [traj.index_of(t) for t in times if traj.has_time(t)]


def write_snapshots(run_dir: Path, traj: Trajectory, times):
    snap_dir = run_dir / "snapshots"
    snap_dir.mkdir(exist_ok=True)
    rows = []
    for j, k in enumerate(sorted(set(checkpoint_indices(traj, times)))):
        name = f"{j:04d}.csv"
        write_fields_csv(snap_dir / name, traj.grid, traj.states[k].fields())
        rows.append((j, traj.times[k], name))
    with open(snap_dir / "index.csv", "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["index", "t", "file"])
        for j, t, name in rows:
            writer.writerow([j, repr(float(t)), name])


def write_json(path, payload):
    with open(path, "w") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")


def write_run(run_dir, config: ScenarioConfig, traj: Trajectory, status: str,
              exit_code: int, error: str = None, summary: dict = None):
    """Flush every artifact of a (possibly aborted) run."""
    run_dir = Path(run_dir)
    run_dir.mkdir(parents=True, exist_ok=True)
    write_series(run_dir / "series.csv", traj, config.params)
    times = config.controls.checkpoint_times()
    if status != "completed":
        # an aborted run still exposes its last valid snapshot
        times = list(times) + [traj.times[-1]]
    write_snapshots(run_dir, traj, times)
    manifest = {
        "config": config.to_dict(),
        "status": status,
        "exit_code": exit_code,
        "error": error,
        "model": traj.model,
        "steps": traj.steps,
        "package_version": __version__,
        "git_describe": git_describe(),
    }
    write_json(run_dir / "manifest.json", manifest)
    if summary is not None:
        write_json(run_dir / "summary.json", summary)


@dataclass
class LoadedRun:
    path: Path
    manifest: dict
    config: ScenarioConfig
    trajectory: Trajectory  # checkpoint snapshots only
    series: dict

    @property
    def params(self) -> ModelParams:
        return self.config.params

    @property
    def grid(self) -> Grid:
        return self.config.grid


def load_run(path) -> LoadedRun:
    path = Path(path)
    manifest_path = path / "manifest.json"
    if not manifest_path.exists():
        raise ConfigError(f"{path} is not a run directory (no manifest.json)")
    with open(manifest_path) as fh:
        manifest = json.load(fh)
    config = ScenarioConfig.from_dict(manifest["config"])
    series = read_series(path / "series.csv")
    state_cls = STATE_TYPES[manifest["model"]]
    grid = config.grid
    traj = Trajectory(manifest["model"], config.params, grid)
    with open(path / "snapshots" / "index.csv", newline="") as fh:
        entries = list(csv.DictReader(fh))
    series_t = series["t"]
    for entry in entries:
        t = float(entry["t"])
        cols = read_fields_csv(path / "snapshots" / entry["file"])
        state = state_cls(grid, *(cols[name] for name in state_cls.field_names))
        k = int(np.argmin(np.abs(series_t - t)))
        traj.append(t, series["dt"][k], state, series["dissipation_cum"][k],
                    series["drift_consistency"][k])
    traj.steps = manifest.get("steps", 0)
    return LoadedRun(path, manifest, config, traj, series)
