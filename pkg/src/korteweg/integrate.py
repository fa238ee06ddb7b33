"""Explicit RK4 time advancement with a composite CFL and vacuum/consistency guards."""
from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from . import constitutive as cv
from .dynamics import NskState, drift_consistency, rhs
from .errors import ConsistencyError, KortewegError, NonFiniteError, SimulationAborted

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class TimeControls:
    t_end: float
    cfl_hyperbolic: float = 0.4
    cfl_dispersive: float = 0.25
    dt_max: float = 0.1
    vacuum_floor: Optional[float] = None  # default: 1e-8 * initial mean density
    record_stride: int = 1
    checkpoints: Optional[int] = None  # uniform landing times in [0, t_end]
    consistency_tol: float = 1e-6
    dealias: bool = True

    def __post_init__(self):
        if not self.t_end >= 0:
            raise ValueError("t_end must be non-negative")
        for name in ("cfl_hyperbolic", "cfl_dispersive"):
            if not 0 < getattr(self, name) <= 1:
                raise ValueError(f"{name} must lie in (0, 1]")
        if not self.dt_max > 0:
            raise ValueError("dt_max must be positive")
        if self.vacuum_floor is not None and not self.vacuum_floor > 0:
            raise ValueError("vacuum_floor must be positive")
        if int(self.record_stride) != self.record_stride or self.record_stride < 1:
            raise ValueError("record_stride must be an integer >= 1")
        if self.checkpoints is not None and self.checkpoints < 2:
            raise ValueError("checkpoints must be >= 2 when given")

    def checkpoint_times(self) -> np.ndarray:
        if self.t_end == 0:
            return np.array([0.0])
        if self.checkpoints is None:
            return np.array([0.0, self.t_end])
        return np.linspace(0.0, self.t_end, self.checkpoints)

    def to_dict(self) -> dict:
        return {
            "t_end": self.t_end, "cfl_hyperbolic": self.cfl_hyperbolic,
            "cfl_dispersive": self.cfl_dispersive, "dt_max": self.dt_max,
            "vacuum_floor": self.vacuum_floor, "record_stride": self.record_stride,
            "checkpoints": self.checkpoints, "consistency_tol": self.consistency_tol,
            "dealias": self.dealias,
        }


@dataclass
class Trajectory:
    model: str
    params: cv.ModelParams
    grid: object
    times: list = field(default_factory=list)
    dts: list = field(default_factory=list)
    states: list = field(default_factory=list)
    cumulative_dissipation: list = field(default_factory=list)
    consistency: list = field(default_factory=list)
    steps: int = 0

    def append(self, t, dt, state, dissipation, consistency):
        self.times.append(float(t))
        self.dts.append(float(dt))
        self.states.append(state)
        self.cumulative_dissipation.append(float(dissipation))
        self.consistency.append(float(consistency))

    @property
    def final(self):
        return self.states[-1]

    def index_of(self, t: float, tol: float = 1e-12) -> int:
        times = np.asarray(self.times)
        k = int(np.argmin(np.abs(times - t)))
        if abs(times[k] - t) > tol * max(1.0, abs(t)):
            raise KeyError(f"time {t} was not recorded")
        return k

    def has_time(self, t: float, tol: float = 1e-12) -> bool:
        try:
            self.index_of(t, tol)
        except KeyError:
            return False
        return True

    def state_at(self, t: float):
        return self.states[self.index_of(t)]


def _velocity_and_rho(state, params):
    return state.velocity(params), state.rho


def stable_dt(state, params: cv.ModelParams, controls: TimeControls) -> float:
    """min(cfl_h dx / s_max, cfl_d dx^2 / a_max, dt_max)."""
    grid = state.grid
    u, rho = _velocity_and_rho(state, params)
    if not np.min(rho) > 0:
        from .errors import VacuumError
        raise VacuumError("stable_dt called on a state with non-positive density")
    s_max = float(np.max(np.abs(u) + np.sqrt(cv.pressure_prime(rho, params))))
    dispersive = params.epsilon * cv.mu_prime(rho, params) * np.sqrt(
        rho * cv.capillarity(rho, params)) / rho
    viscous = params.nu * cv.mu(rho, params) / rho
    a_max = float(max(np.max(dispersive), np.max(viscous)))
    dt = controls.dt_max
    if s_max > 0:
        dt = min(dt, controls.cfl_hyperbolic * grid.dx / s_max)
    if a_max > 0:
        dt = min(dt, controls.cfl_dispersive * grid.dx**2 / a_max)
    return dt


def rk4_step(state, dt: float, params: cv.ModelParams, *, floor: float = 0.0,
             t: float = 0.0, forcing: Optional[Callable] = None, dealias: bool = True,
             consistency_tol: Optional[float] = None):
    """Classical four-stage update of the conservative variables.

    ``forcing(t)`` may return an array added to the stacked conservative rates.
    """
    if dt == 0:
        return state
    cls, grid = type(state), state.grid

    def rate(st, tau):
        k = rhs(st, params, dealias)
        if forcing is not None:
            k = k + forcing(tau)
        return k

    def make(q):
        if not np.all(np.isfinite(q)):
            raise NonFiniteError("non-finite value in RK stage")
        return cls.from_conservative(grid, q, params, floor)

    q0 = state.conservative()
    k1 = rate(state, t)
    k2 = rate(make(q0 + 0.5 * dt * k1), t + 0.5 * dt)
    k3 = rate(make(q0 + 0.5 * dt * k2), t + 0.5 * dt)
    k4 = rate(make(q0 + dt * k3), t + dt)
    new = make(q0 + dt / 6 * (k1 + 2 * k2 + 2 * k3 + k4))
    if consistency_tol is not None:
        gap = drift_consistency(new, params)
        if gap > consistency_tol:
            raise ConsistencyError(
                f"drift shadow gap {gap:.3e} exceeds tolerance {consistency_tol:.1e}")
    return new


def _dissipation_rate(state, params):
    if isinstance(state, NskState):
        from .diagnostics import energy_nsk
        return energy_nsk(state, params).dissipation_rate
    return 0.0


def simulate(initial_state, params: cv.ModelParams, controls: TimeControls,
             forcing: Optional[Callable] = None) -> Trajectory:
    """Advance to ``controls.t_end``, landing exactly on every checkpoint.

    Every ``record_stride``-th accepted step and every checkpoint is recorded.
    For the Navier-Stokes-Korteweg model the dissipation rate is integrated
    by the trapezoid rule over the recorded snapshots.
    """
    if isinstance(initial_state, NskState):
        params.require_nsk()
    floor = controls.vacuum_floor
    if floor is None:
        floor = 1e-8 * float(np.mean(initial_state.rho))
    traj = Trajectory(initial_state.model, params, initial_state.grid)
    rate = _dissipation_rate(initial_state, params)
    traj.append(0.0, 0.0, initial_state, 0.0, drift_consistency(initial_state, params))

    targets = [t for t in controls.checkpoint_times() if t > 0]
    state, t, steps, dt = initial_state, 0.0, 0, 0.0
    t_rec, d_cum = 0.0, 0.0

    def record(state, t, dt):
        nonlocal rate, t_rec, d_cum
        new_rate = _dissipation_rate(state, params)
        d_cum += 0.5 * (rate + new_rate) * (t - t_rec)
        rate, t_rec = new_rate, t
        traj.append(t, dt, state, d_cum, drift_consistency(state, params))

    try:
        for target in targets:
            while t < target:
                step_dt = stable_dt(state, params, controls)
                landed = t + step_dt >= target * (1 - 1e-13)
                if landed:
                    step_dt = target - t
                state = rk4_step(state, step_dt, params, floor=floor, t=t, forcing=forcing,
                                 dealias=controls.dealias,
                                 consistency_tol=controls.consistency_tol)
                t = target if landed else t + step_dt
                dt = step_dt
                steps += 1
                traj.steps = steps
                if landed or steps % controls.record_stride == 0:
                    record(state, t, dt)
    except KortewegError as exc:
        traj.steps = steps
        if t > traj.times[-1]:
            record(state, t, dt)  # last valid state, even if off the recording stride
        log.warning("aborting at t=%.6g: %s", t, exc)
        raise SimulationAborted(exc, traj) from exc
    return traj
