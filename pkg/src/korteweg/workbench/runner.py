"""Scenario execution, the viscous-limit sweep, run comparison and the lemma suite driver."""
from __future__ import annotations

import csv
import logging
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Optional

import numpy as np

from .. import diagnostics as dg
from .. import lemma_suite as ls
from ..dynamics import STATE_TYPES
from ..errors import (ConsistencyError, IncompatibleRunsError, NonFiniteError,
                      SimulationAborted, VacuumError)
from ..field import Grid
from ..integrate import Trajectory, simulate
from .config import LemmaConfig, ScenarioConfig, SweepConfig
from .runio import LoadedRun, load_run, write_json, write_run

log = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_FAILURE = 1
EXIT_CONFIG = 2
EXIT_VACUUM = 3
EXIT_CONSISTENCY = 4
EXIT_NONFINITE = 5
EXIT_INCOMPATIBLE = 6

_ABORT_CODES = ((VacuumError, EXIT_VACUUM), (ConsistencyError, EXIT_CONSISTENCY),
                (NonFiniteError, EXIT_NONFINITE))


def abort_code(exc) -> int:
    for cls, code in _ABORT_CODES:
        if isinstance(exc, cls):
            return code
    return EXIT_FAILURE


# -- scenarios ------------------------------------------------------------------

def initial_state(config: ScenarioConfig, grid: Optional[Grid] = None):
    grid = grid or config.grid
    rho, u = config.initial.fields(grid)
    return STATE_TYPES[config.model].from_primitive(grid, rho, u, config.params)


def manufactured_reference(config: ScenarioConfig, grid: Optional[Grid] = None):
    """Closed-form travelling wave and the forcing that makes it an exact solution."""
    m = config.reference.manufactured
    grid = grid or config.grid
    k = 2 * np.pi * m.mode / grid.length
    c = m.speed
    ref = dg.ClosedFormReference(
        grid, config.params,
        r=lambda x, t: m.base + m.amplitude * np.sin(k * (x - c * t)),
        U=lambda x, t: c + 0 * x,
        r_t=lambda x, t: -c * k * m.amplitude * np.cos(k * (x - c * t)),
        U_t=lambda x, t: 0 * x,
    )

    def forcing(t):
        E1, E2 = dg.strong_residual_euk(ref, t, config.params)
        return np.stack([np.zeros(grid.n), E1.values, E2.values])

    return ref, forcing


@dataclass
class RunOutcome:
    exit_code: int
    run_dir: Optional[Path]
    trajectory: Optional[Trajectory]
    summary: dict


def summarize(config: ScenarioConfig, traj: Trajectory, wall: float) -> dict:
    params = config.params
    e0 = dg.energy(traj.states[0], params)
    e1 = dg.energy(traj.final, params)
    m0, m1 = (traj.grid.quad(s.rho) for s in (traj.states[0], traj.final))
    out = {
        "t_final": traj.times[-1], "steps": traj.steps, "recorded": len(traj.times),
        "E_total_initial": e0.total, "E_total_final": e1.total,
        "energy_drift_relative": (e1.total - e0.total) / e0.total,
        "dissipation_cum": traj.cumulative_dissipation[-1],
        "energy_budget_relative": (e1.total + traj.cumulative_dissipation[-1] - e0.total) / e0.total,
        "mass_drift_relative": (m1 - m0) / m0,
        "rho_min": float(min(np.min(s.rho) for s in traj.states)),
        "drift_consistency_max": float(max(traj.consistency)),
        "wall_time_s": wall,
    }
    return out


def execute_run(config: ScenarioConfig, run_dir=None, write: bool = True) -> RunOutcome:
    """Simulate one scenario and (optionally) persist its run directory."""
    run_dir = Path(run_dir or config.output_dir or "run")
    state0 = initial_state(config)
    forcing = ref = None
    if config.reference is not None and config.reference.manufactured is not None:
        ref, forcing = manufactured_reference(config)
    start = time.perf_counter()
    try:
        traj = simulate(state0, config.params, config.controls, forcing=forcing)
        status, code, error = "completed", EXIT_OK, None
    except SimulationAborted as exc:
        traj, status, code, error = exc.trajectory, "aborted", abort_code(exc.cause), str(exc)
    summary = summarize(config, traj, time.perf_counter() - start)
    summary["status"] = status
    if status == "completed" and config.reference is not None:
        summary["reference"] = reference_report(config, traj, ref, forcing)
    if write:
        write_run(run_dir, config, traj, status, code, error, summary)
    return RunOutcome(code, run_dir if write else None, traj, summary)


def reference_report(config, traj, ref, forcing) -> dict:
    checkpoints = [t for t in config.controls.checkpoint_times() if traj.has_time(t)]
    params = config.params
    if ref is not None:
        # manufactured: distance to the wave and the forcing round trip
        values = [dg.relative_entropy_euk(traj.state_at(t), ref, params, t).value
                  for t in checkpoints]
        measured = dg.TrajectoryReference(traj, params, derivative="fd4")
        worst = 0.0
        for t in checkpoints:
            E1_meas, _ = dg.strong_residual_euk(measured, t, params, slaved=True)
            E1_true, _ = dg.strong_residual_euk(ref, t, params, slaved=True)
            scale = max(np.max(np.abs(E1_true.values)), 1e-300)
            worst = max(worst, float(np.max(np.abs(E1_meas.values - E1_true.values)) / scale))
        return {"kind": "manufactured", "times": checkpoints, "relative_entropy": values,
                "forcing_round_trip": worst}
    factor = config.reference.high_resolution_factor
    fine = replace(config, grid=Grid(config.grid.n * factor, config.grid.length),
                   reference=None)
    fine_traj = simulate(initial_state(fine), params, fine.controls)
    gaps = [float(np.max(np.abs(traj.state_at(t).rho - fine_traj.state_at(t).rho[::factor])))
            for t in checkpoints]
    return {"kind": "high_resolution", "factor": factor, "times": checkpoints,
            "rho_sup_gap": gaps}


# -- comparison ---------------------------------------------------------------------

def _compatibility(a: LoadedRun, b: LoadedRun, functional: str):
    problems = []
    ga, gb = a.grid, b.grid
    if not np.isclose(ga.length, gb.length, rtol=1e-14, atol=0):
        problems.append(f"domain length {ga.length} vs {gb.length}")
    elif gb.n % ga.n:
        problems.append(f"grid n={gb.n} of the reference does not refine n={ga.n}")
    pa, pb = a.params, b.params
    for name in ("gamma", "s", "epsilon"):
        if getattr(pa, name) != getattr(pb, name):
            problems.append(f"{name}: {getattr(pa, name)} vs {getattr(pb, name)}")
    if functional == "nsk" and a.manifest["model"] != "nsk":
        problems.append("the nsk functional needs a Navier-Stokes-Korteweg run as first argument")
    common = [t for t in a.trajectory.times if b.trajectory.has_time(t)]
    if len(common) < 1 or common[0] != 0.0:
        problems.append(f"no common checkpoint times (ranges [0, {a.trajectory.times[-1]}] and "
                        f"[0, {b.trajectory.times[-1]}])")
    if problems:
        raise IncompatibleRunsError("incompatible runs: " + "; ".join(problems))
    return common


def compare_runs(a: LoadedRun, b: LoadedRun, functional: str = "euk",
                 c0: Optional[float] = None) -> dict:
    """Relative entropy of run ``a`` against run ``b`` (the reference) at common checkpoints."""
    if functional not in ("euk", "nsk", "glt"):
        raise ValueError("functional must be euk, nsk or glt")
    common = _compatibility(a, b, functional)
    c0 = a.config.gronwall_c0 if c0 is None else c0
    # restrict the candidate to the common times so time integrals use the same nodes
    traj = Trajectory(a.trajectory.model, a.params, a.grid)
    for t in common:
        k = a.trajectory.index_of(t)
        traj.append(t, a.trajectory.dts[k], a.trajectory.states[k],
                    a.trajectory.cumulative_dissipation[k], a.trajectory.consistency[k])
    ref = dg.TrajectoryReference(b.trajectory, b.params, grid=a.grid, derivative="rhs")
    rows = []
    for t in common:
        st = traj.state_at(t)
        if functional == "euk":
            rep = dg.relative_entropy_euk(st, ref, a.params, t)
        elif functional == "nsk":
            rep = dg.relative_entropy_nsk(traj, ref, t, a.params)
        else:
            val = dg.relative_entropy_glt(st, ref, a.params, t)
            rep = dg.RelEntropyReport(val, float("nan"), float("nan"), float("nan"))
        rows.append(rep)
    times = np.array(common)
    values = np.array([r.value for r in rows])
    variant = "nsk" if functional == "nsk" else "euk"
    _, b_series = dg.source_series(traj, ref, a.params if variant == "nsk" else b.params,
                                   variant)
    C = dg.estimate_gronwall_constant(ref, common, b.params, c0=c0)
    if functional == "nsk":
        C = dg.nsk_gronwall_constant(C, a.params)
    certificate = {"functional": functional, "C": C, "c0": c0, "satisfied": None,
                   "margin": None}
    if np.all(values >= 0) and len(times) >= 1:
        ok, margin = dg.gronwall_certify(times, values, np.maximum(b_series, 0.0)
                                         if variant == "euk" else b_series, C)
        certificate.update(satisfied=ok, margin=margin)
    for rep, bval in zip(rows, b_series):
        rep.b_value = float(bval)
        rep.gronwall_C = C
        rep.bound_satisfied = certificate["satisfied"]
    return {"times": common, "reports": rows, "certificate": certificate}


def write_comparison(out_dir, result: dict, run_a, run_b):
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    keys = ("value", "velocity_gap", "drift_gap", "enthalpy_gap", "time_integrated_gap",
            "b_value")
    with open(out_dir / "relative_entropy.csv", "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(("t",) + keys)
        for t, rep in zip(result["times"], result["reports"]):
            d = rep.to_dict()
            writer.writerow([repr(float(t))] + [repr(float(d[k])) for k in keys])
    cert = dict(result["certificate"], run=str(run_a), reference=str(run_b))
    write_json(out_dir / "certificate.json", cert)


# -- viscous-limit sweep ----------------------------------------------------------------

def _run_cell(config_dict: dict, run_dir: str):
    config = ScenarioConfig.from_dict(config_dict)
    outcome = execute_run(config, run_dir)
    return outcome.exit_code


def _workers(n_tasks: int) -> int:
    cap = os.environ.get("KORTEWEG_THREADS")
    limit = int(cap) if cap and cap.isdigit() and int(cap) > 0 else (os.cpu_count() or 1)
    return max(1, min(limit, n_tasks))


def fit_order(nus, values) -> Optional[float]:
    """Least-squares slope of log(value) against log(nu); None with < 2 usable points."""
    pts = [(n, v) for n, v in zip(nus, values) if v is not None and v > 0]
    if len(pts) < 2:
        return None
    x = np.log([p[0] for p in pts])
    y = np.log([p[1] for p in pts])
    return float(np.polyfit(x, y, 1)[0])


def execute_sweep(config: SweepConfig, out_dir=None) -> tuple:
    """Run the limit scenario and one NSK run per nu; returns (exit_code, report)."""
    out_dir = Path(out_dir or config.output_dir or "sweep")
    out_dir.mkdir(parents=True, exist_ok=True)
    limit_cfg = config.limit_run
    factor = (limit_cfg.reference.high_resolution_factor
              if limit_cfg.reference is not None else None)
    if factor:
        limit_cfg = replace(limit_cfg, grid=Grid(limit_cfg.grid.n * factor, limit_cfg.grid.length),
                            reference=None)
    jobs = [(limit_cfg.to_dict(), str(out_dir / "limit"))]
    jobs += [(config.cell(nu).to_dict(), str(out_dir / f"nu_{i:02d}"))
             for i, nu in enumerate(config.nu_values)]
    workers = _workers(len(jobs))
    if workers == 1:
        codes = [_run_cell(*job) for job in jobs]
    else:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            codes = list(pool.map(_run_cell, *zip(*jobs)))

    report = {"nu_values": list(config.nu_values), "cells": [], "limit_exit_code": codes[0]}
    rows = []
    final_values = []
    if codes[0] != EXIT_OK:
        report.update(monotone=None, order=None, ok=False,
                      error="limit run failed; no comparisons possible")
        write_json(out_dir / "sweep_report.json", report)
        return EXIT_FAILURE, report
    limit = load_run(out_dir / "limit")
    t_end = config.base.controls.t_end
    for i, (nu, code) in enumerate(zip(config.nu_values, codes[1:])):
        cell = {"nu": nu, "exit_code": code, "E_final": None}
        if code == EXIT_OK:
            try:
                run = load_run(out_dir / f"nu_{i:02d}")
                res = compare_runs(run, limit, "euk")
                for t, rep in zip(res["times"], res["reports"]):
                    rows.append((nu, t, rep.value))
                    if t == t_end:
                        cell["E_final"] = rep.value
                cell["certificate"] = res["certificate"]
            except Exception as exc:  # a failed cell is reported, not fatal
                cell["error"] = str(exc)
        final_values.append(cell["E_final"])
        report["cells"].append(cell)

    with open(out_dir / "sweep.csv", "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(("nu", "t", "relative_entropy"))
        for nu, t, val in rows:
            writer.writerow([repr(float(nu)), repr(float(t)), repr(float(val))])

    monotone, offending = True, None
    ok_vals = [(nu, v) for nu, v in zip(config.nu_values, final_values) if v is not None]
    for (nu_a, va), (nu_b, vb) in zip(ok_vals, ok_vals[1:]):
        if not vb < va:
            monotone, offending = False, [{"nu": nu_a, "E": va}, {"nu": nu_b, "E": vb}]
            break
    order = fit_order(config.nu_values, final_values)
    report.update(monotone=monotone, offending_pair=offending,
                  order_relative_entropy=order,
                  order_norm=None if order is None else order / 2,
                  ok=monotone and all(v is not None for v in final_values))
    write_json(out_dir / "sweep_report.json", report)
    return (EXIT_OK if report["ok"] else EXIT_FAILURE), report


# -- lemma suite ---------------------------------------------------------------------

def execute_lemmas(config: LemmaConfig, out_dir=None) -> tuple:
    region = ls.SampleRegion(config.r_range, config.rho_range, config.n_samples, config.seed)
    report = ls.run_suite(config.pairs, config.negative_controls, region,
                          config.identity_samples, config.seed)
    out_dir = Path(out_dir or config.output_dir or ".")
    out_dir.mkdir(parents=True, exist_ok=True)
    write_json(out_dir / "lemmas_report.json", report)
    return (EXIT_OK if report["ok"] else EXIT_FAILURE), report
