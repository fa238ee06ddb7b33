"""Energies, relative entropies, strong-solution residuals and the Gronwall certificate.

Reference solutions come in two flavours:

* ``ClosedFormReference`` -- (r, U) and their time derivatives are callables
  of (x, t); used for manufactured solutions.
* ``TrajectoryReference`` -- a simulated run, optionally on a finer nested
  grid, queried only at its recorded times.  Time derivatives come from the
  semi-discrete right-hand side (``derivative="rhs"``) or from 5-point
  finite differences over the recorded snapshots (``derivative="fd4"``).

All functionals are spatial trapezoid sums on the periodic grid; time
integrals use the trapezoid rule over recorded snapshots.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, NamedTuple, Optional

import numpy as np

from . import constitutive as cv
from .dynamics import EulerState, NskState, capillary_operator, rhs
from .errors import ConsistencyError, GridError, SeriesError, TimeRangeError
from .field import Field, Grid


# -- energies ------------------------------------------------------------------

@dataclass(frozen=True)
class EnergyReport:
    kinetic: float
    internal: float
    capillary: float
    total: float
    dissipation_rate: float = 0.0
    capillary_check: float = 0.0  # relative gap between the two capillary evaluations

    def to_dict(self) -> dict:
        return {"E_kinetic": self.kinetic, "E_internal": self.internal,
                "E_capillary": self.capillary, "E_total": self.total,
                "dissipation_rate": self.dissipation_rate}


def energy_euk(state, params: cv.ModelParams) -> EnergyReport:
    """1/2 rho u^2 + 1/2 eps^2 rho v^2 + H(rho), integrated over the torus.

    The capillary part uses the evolved drift v; it is cross-checked against
    1/2 eps^2 K(rho) rho_x^2 and the relative gap is stored in the report.
    """
    grid, rho = state.grid, state.rho
    u = state.velocity(params)
    v = state.drift(params)
    kinetic = 0.5 * grid.quad(rho * u**2)
    internal = grid.quad(cv.enthalpy(rho, params))
    eps2 = params.epsilon**2
    capillary = 0.5 * eps2 * grid.quad(rho * v**2)
    via_gradient = 0.5 * eps2 * grid.quad(cv.capillarity(rho, params) * grid.deriv(rho) ** 2)
    scale = max(abs(capillary), abs(via_gradient))
    check = abs(capillary - via_gradient) / scale if scale > 0 else 0.0
    return EnergyReport(kinetic, internal, capillary, kinetic + internal + capillary,
                        0.0, check)


def dissipation_density_nsk(grid, rho, w, vbar, params):
    """Pointwise integrand of the viscous energy dissipation (without the nu factor)."""
    rx = grid.deriv(rho)
    grad2 = grid.deriv(w) ** 2 + grid.deriv(vbar) ** 2
    weight = cv.mu(rho, params)
    if params.s != -1:
        weight = weight + 0.5 * cv.lambda_bd(rho, params)
    return (cv.mu_prime(rho, params) * cv.enthalpy_second(rho, params) * rx**2
            + weight * grad2)


def energy_nsk(state: NskState, params: cv.ModelParams) -> EnergyReport:
    """Energy in the (w, vbar) variables; the capillary slot holds 1/2 rho vbar^2."""
    params.require_nsk()
    grid, rho = state.grid, state.rho
    kinetic = 0.5 * grid.quad(rho * state.w**2)
    capillary = 0.5 * grid.quad(rho * state.vbar**2)
    internal = grid.quad(cv.enthalpy(rho, params))
    rate = 0.0
    if params.nu:
        rate = params.nu * grid.quad(
            dissipation_density_nsk(grid, rho, state.w, state.vbar, params))
    return EnergyReport(kinetic, internal, capillary, kinetic + internal + capillary, rate)


def energy(state, params) -> EnergyReport:
    if isinstance(state, NskState):
        return energy_nsk(state, params)
    return energy_euk(state, params)


def to_euler_state(state, params) -> EulerState:
    """View any state through the Euler-Korteweg variables (rho, u, v)."""
    if isinstance(state, EulerState):
        return state
    return EulerState(state.grid, state.rho, state.velocity(params), state.drift(params))


# -- reference solutions ---------------------------------------------------------

class ReferenceSnapshot(NamedTuple):
    grid: Grid
    r: np.ndarray
    U: np.ndarray
    V: np.ndarray


def _drift_of(grid, r, params):
    return cv.mu_prime(r, params) * grid.deriv(r) / r


class ReferenceSolution:
    """Smooth candidate (r, U) with derived V = mu(r)_x / r, Vbar = c V, W = U + nu V."""

    grid: Grid
    params: cv.ModelParams

    def fields(self, t: float):
        raise NotImplementedError

    def time_derivatives(self, t: float):
        raise NotImplementedError

    def available(self, t: float) -> bool:
        return True

    def snapshot(self, t: float) -> ReferenceSnapshot:
        r, U = self.fields(t)
        if not np.min(r) > 0:
            from .errors import VacuumError
            raise VacuumError(f"reference density not positive at t={t}")
        return ReferenceSnapshot(self.grid, r, U, _drift_of(self.grid, r, self.params))

    def V(self, t):
        return self.snapshot(t).V

    def Vbar(self, t):
        return self.params.coupling * self.V(t)

    def W(self, t):
        snap = self.snapshot(t)
        return snap.U + self.params.nu * snap.V

    def V_t(self, t):
        """Time derivative of V from d/dt(mu(r)_x / r)."""
        grid, p = self.grid, self.params
        r, _ = self.fields(t)
        r_t, _ = self.time_derivatives(t)
        return (grid.deriv(cv.mu_prime(r, p) * r_t) / r
                - grid.deriv(cv.mu(r, p)) * r_t / r**2)


class ClosedFormReference(ReferenceSolution):
    """Reference given by callables f(x, t) for r, U, r_t and U_t."""

    def __init__(self, grid: Grid, params: cv.ModelParams, r: Callable, U: Callable,
                 r_t: Optional[Callable] = None, U_t: Optional[Callable] = None):
        self.grid, self.params = grid, params
        self._r, self._U, self._r_t, self._U_t = r, U, r_t, U_t

    def fields(self, t):
        x = self.grid.x
        return (np.asarray(self._r(x, t), float) + 0 * x,
                np.asarray(self._U(x, t), float) + 0 * x)

    def time_derivatives(self, t):
        if self._r_t is None or self._U_t is None:
            raise ConsistencyError("reference has no time-derivative oracle")
        x = self.grid.x
        return (np.asarray(self._r_t(x, t), float) + 0 * x,
                np.asarray(self._U_t(x, t), float) + 0 * x)


def fd_weights(nodes, x0, order=1):
    """Finite-difference weights for derivative ``order`` at x0 (Fornberg's recursion)."""
    nodes = np.asarray(nodes, dtype=float)
    n = len(nodes)
    c = np.zeros((n, order + 1))
    c1, c4 = 1.0, nodes[0] - x0
    c[0, 0] = 1.0
    for i in range(1, n):
        mn = min(i, order)
        c2, c5, c4 = 1.0, c4, nodes[i] - x0
        for j in range(i):
            c3 = nodes[i] - nodes[j]
            c2 *= c3
            if j == i - 1:
                for k in range(mn, 0, -1):
                    c[i, k] = c1 * (k * c[i - 1, k - 1] - c5 * c[i - 1, k]) / c2
                c[i, 0] = -c1 * c5 * c[i - 1, 0] / c2
            for k in range(mn, 0, -1):
                c[j, k] = (c4 * c[j, k] - k * c[j, k - 1]) / c3
            c[j, 0] = c4 * c[j, 0] / c3
        c1 = c2
    return c[:, order]


class TrajectoryReference(ReferenceSolution):
    """A recorded run used as the smooth reference.

    ``grid`` may be coarser than the run's grid provided the run's grid
    refines it; fields are then sampled at the shared nodes.
    """

    def __init__(self, trajectory, params: Optional[cv.ModelParams] = None,
                 grid: Optional[Grid] = None, derivative: str = "rhs",
                 forcing: Optional[Callable] = None):
        if derivative not in ("rhs", "fd4"):
            raise ValueError("derivative must be 'rhs' or 'fd4'")
        self.trajectory = trajectory
        self.params = params or trajectory.params
        self.grid = grid or trajectory.grid
        self._stride = self.grid.nested_in(trajectory.grid)
        self.derivative = derivative
        self.forcing = forcing
        self._times = np.asarray(trajectory.times)

    def available(self, t):
        return self.trajectory.has_time(t)

    def _index(self, t):
        try:
            return self.trajectory.index_of(t)
        except KeyError:
            raise TimeRangeError(f"reference run has no snapshot at t={t}") from None

    def _sub(self, values):
        return np.asarray(values)[:: self._stride]

    def fields(self, t):
        st = self.trajectory.states[self._index(t)]
        return self._sub(st.rho), self._sub(st.velocity(self.params))

    def snapshot(self, t):
        """Uses the run's evolved drift, so a run compared with itself gives exactly 0."""
        st = self.trajectory.states[self._index(t)]
        return ReferenceSnapshot(self.grid, self._sub(st.rho),
                                 self._sub(st.velocity(self.params)),
                                 self._sub(st.drift(self.params)))

    def nsk_variables(self, t, params):
        """The run's own (w, vbar) when it is an NSK run with the same nu and epsilon.

        Rebuilding W = U + nu V from the recovered velocity only agrees to round-off,
        so a run compared with itself would not give exactly 0.
        """
        st = self.trajectory.states[self._index(t)]
        if (isinstance(st, NskState) and self.params.nu == params.nu
                and self.params.epsilon == params.epsilon):
            return self._sub(st.w), self._sub(st.vbar)
        return None

    def time_derivatives(self, t):
        k = self._index(t)
        if self.derivative == "rhs":
            st = self.trajectory.states[k]
            rates = rhs(st, self.params)
            if self.forcing is not None:
                rates = rates + self.forcing(t)
            r_t = rates[0]
            if isinstance(st, NskState):
                # u = w - nu d(rho): subtract nu * d_t from the effective-velocity rate
                grid, p = st.grid, self.params
                d_t = (grid.deriv(cv.mu_prime(st.rho, p) * r_t) / st.rho
                       - grid.deriv(cv.mu(st.rho, p)) * r_t / st.rho**2)
                U_t = (rates[1] - st.w * r_t) / st.rho - p.nu * d_t
            else:
                U_t = (rates[1] - st.u * r_t) / st.rho
            return self._sub(r_t), self._sub(U_t)
        times = self._times
        if len(times) < 5:
            raise TimeRangeError("fd4 time derivatives need at least 5 snapshots")
        lo = min(max(k - 2, 0), len(times) - 5)
        idx = range(lo, lo + 5)
        wts = fd_weights(times[lo:lo + 5], times[k])
        r_t = sum(wgt * self.trajectory.states[i].rho for wgt, i in zip(wts, idx))
        U_t = sum(wgt * self.trajectory.states[i].velocity(self.params)
                  for wgt, i in zip(wts, idx))
        return self._sub(r_t), self._sub(U_t)


def as_snapshot(ref, params, t=None) -> ReferenceSnapshot:
    """Accept a ReferenceSolution (needs t), a ReferenceSnapshot or a state."""
    if isinstance(ref, ReferenceSnapshot):
        return ref
    if isinstance(ref, ReferenceSolution):
        if t is None:
            raise ValueError("a time is required to evaluate a ReferenceSolution")
        return ref.snapshot(t)
    st = to_euler_state(ref, params)
    return ReferenceSnapshot(st.grid, st.rho, st.u, st.v)


def _same_grid(a: Grid, b: Grid):
    if a.n != b.n or not np.isclose(a.length, b.length, rtol=1e-14, atol=0):
        raise GridError(f"grid mismatch: n={a.n}, L={a.length} vs n={b.n}, L={b.length}")


# -- relative entropies -------------------------------------------------------

@dataclass
class RelEntropyReport:
    value: float
    velocity_gap: float
    drift_gap: float
    enthalpy_gap: float
    time_integrated_gap: float = 0.0
    b_value: float = 0.0
    gronwall_C: Optional[float] = None
    bound_satisfied: Optional[bool] = None
    extras: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        out = {"value": self.value, "velocity_gap": self.velocity_gap,
               "drift_gap": self.drift_gap, "enthalpy_gap": self.enthalpy_gap,
               "time_integrated_gap": self.time_integrated_gap, "b_value": self.b_value,
               "gronwall_C": self.gronwall_C, "bound_satisfied": self.bound_satisfied}
        out.update(self.extras)
        return out


def relative_entropy_euk(state, ref, params: cv.ModelParams, t=None) -> RelEntropyReport:
    """1/2 int rho (u-U)^2 + 1/2 eps^2 int rho (v-V)^2 + int H(rho|r)."""
    st = to_euler_state(state, params)
    snap = as_snapshot(ref, params, t)
    _same_grid(st.grid, snap.grid)
    grid = st.grid
    vel = 0.5 * grid.quad(st.rho * (st.u - snap.U) ** 2)
    drift = 0.5 * params.epsilon**2 * grid.quad(st.rho * (st.v - snap.V) ** 2)
    enth = grid.quad(cv.modulated_enthalpy(st.rho, snap.r, params))
    return RelEntropyReport(vel + drift + enth, vel, drift, enth)


def _nsk_gap_density(grid, rho, w, vbar, W, Vbar, params):
    weight = cv.mu(rho, params)
    if params.s != -1:
        weight = weight + 0.5 * cv.lambda_bd(rho, params)
    return weight * (grid.deriv(vbar - Vbar) ** 2 + grid.deriv(w - W) ** 2)


def _trapezoid(times, values):
    times = np.asarray(times, dtype=float)
    values = np.asarray(values, dtype=float)
    if len(times) < 2:
        return 0.0
    return float(np.sum(0.5 * (values[1:] + values[:-1]) * np.diff(times)))


def _covered_indices(traj, ref, t):
    times = np.asarray(traj.times)
    if t < 0 or t > times[-1] * (1 + 1e-12) + 1e-300:
        raise TimeRangeError(f"t={t} lies outside the recorded range [0, {times[-1]}]")
    k_end = traj.index_of(t) if traj.has_time(t) else None
    if k_end is None:
        raise TimeRangeError(f"t={t} is not a recorded time of the run")
    return [k for k in range(k_end + 1) if ref.available(times[k])]


def _reference_nsk_variables(ref, snap, t, params):
    """(W, Vbar) of the reference: its own evolved values when it has them."""
    own = ref.nsk_variables(t, params) if hasattr(ref, "nsk_variables") else None
    if own is not None:
        return own
    return snap.U + params.nu * snap.V, params.coupling * snap.V


def relative_entropy_nsk(traj, ref: ReferenceSolution, t: float,
                         params: cv.ModelParams) -> RelEntropyReport:
    """Modulated energy in (w, vbar) plus the time-integrated viscous gaps.

    The time integral runs over the recorded snapshots at which the
    reference is available.  The recovered-velocity gap 1/2 int rho (u-U)^2
    is reported in ``extras`` without entering the value.
    """
    params.require_nsk()
    ks = _covered_indices(traj, ref, t)
    grid, nu = traj.grid, params.nu

    def parts(k):
        st = traj.states[k]
        snap = ref.snapshot(traj.times[k])
        _same_grid(st.grid, snap.grid)
        W, Vbar = _reference_nsk_variables(ref, snap, traj.times[k], params)
        return st, snap, W, Vbar

    st, snap, W, Vbar = parts(ks[-1])
    vel = 0.5 * grid.quad(st.rho * (st.w - W) ** 2)
    drift = 0.5 * grid.quad(st.rho * (st.vbar - Vbar) ** 2)
    enth = grid.quad(cv.modulated_enthalpy(st.rho, snap.r, params))
    u_gap = 0.5 * grid.quad(st.rho * (st.velocity(params) - snap.U) ** 2)

    tail = 0.0
    if nu and len(ks) > 1:
        dens = []
        for k in ks:
            s_k, _, W_k, Vbar_k = parts(k)
            dens.append(nu * grid.quad(_nsk_gap_density(grid, s_k.rho, s_k.w, s_k.vbar,
                                                        W_k, Vbar_k, params)))
        tail = _trapezoid([traj.times[k] for k in ks], dens)
    return RelEntropyReport(vel + drift + enth + tail, vel, drift, enth, tail,
                            extras={"recovered_u_gap": u_gap})


def relative_entropy_glt(state, ref, params: cv.ModelParams, t=None) -> float:
    """Gradient form: 1/2 int rho (u-U)^2 + 1/2 eps^2 int I_T + int H(rho|r)."""
    st = to_euler_state(state, params)
    snap = as_snapshot(ref, params, t)
    _same_grid(st.grid, snap.grid)
    grid = st.grid
    rho, r = st.rho, snap.r
    rx, Rx = grid.deriv(rho), grid.deriv(r)
    K_r = cv.capillarity(r, params)
    I_T = (cv.capillarity(rho, params) * rx**2 - K_r * Rx**2
           - cv.capillarity_prime(r, params) * Rx**2 * (rho - r) - 2 * K_r * Rx * (rx - Rx))
    return (0.5 * grid.quad(rho * (st.u - snap.U) ** 2)
            + 0.5 * params.epsilon**2 * grid.quad(I_T)
            + grid.quad(cv.modulated_enthalpy(rho, r, params)))


# -- strong residuals and source terms ------------------------------------------

def strong_residual_euk(ref: ReferenceSolution, t: float, params: cv.ModelParams,
                        slaved: bool = False):
    """Residual fields (E1, E2) of the Euler-Korteweg equations for (r, U, V).

    E1 = r(U_t + U U_x) + p(r)_x - eps^2 [ (mu V_x)_x + 1/2 (lambda V_x)_x ]
    E2 = r(V_t + U V_x) + (mu U_x)_x + 1/2 (lambda U_x)_x
    With ``slaved=True`` V is tied to r and E2 is returned as zero.
    """
    grid = ref.grid
    snap = ref.snapshot(t)
    r, U, V = snap.r, snap.U, snap.V
    _, U_t = ref.time_derivatives(t)
    E1 = (r * (U_t + U * grid.deriv(U)) + grid.deriv(cv.pressure(r, params))
          - params.epsilon**2 * capillary_operator(grid, r, V, params))
    if slaved:
        E2 = np.zeros_like(E1)
    else:
        E2 = (r * (ref.V_t(t) + U * grid.deriv(V))
              + capillary_operator(grid, r, U, params, transpose=True))
    return Field(grid, E1), Field(grid, E2)


def strong_residual_nsk(ref: ReferenceSolution, t: float, params: cv.ModelParams):
    """Residual fields of the (W, Vbar) Navier-Stokes-Korteweg equations."""
    params.require_nsk()
    grid, nu, c = ref.grid, params.nu, params.coupling
    snap = ref.snapshot(t)
    r, U = snap.r, snap.U
    _, U_t = ref.time_derivatives(t)
    V_t = ref.V_t(t)
    W, Vbar = U + nu * snap.V, c * snap.V
    W_t, Vbar_t = U_t + nu * V_t, c * V_t
    E1 = (r * (W_t + U * grid.deriv(W)) + grid.deriv(cv.pressure(r, params))
          - nu * capillary_operator(grid, r, W, params)
          - c * capillary_operator(grid, r, Vbar, params))
    E2 = (r * (Vbar_t + U * grid.deriv(Vbar)) - nu * capillary_operator(grid, r, Vbar, params)
          + c * capillary_operator(grid, r, W, params, transpose=True))
    return Field(grid, E1), Field(grid, E2)


def source_density(state, ref, t, params, variant="euk"):
    """Spatial integral of the source integrand at one time."""
    snap = ref.snapshot(t)
    if variant == "euk":
        st = to_euler_state(state, params)
        E1, E2 = strong_residual_euk(ref, t, params)
        integrand = np.abs(E1.values * (snap.U - st.u)
                           + params.epsilon**2 * E2.values * (snap.V - st.v))
        return st.grid.quad(st.rho / snap.r * integrand)
    if variant == "nsk":
        if not isinstance(state, NskState):
            raise ValueError("the nsk source term needs a Navier-Stokes-Korteweg run")
        E1, E2 = strong_residual_nsk(ref, t, params)
        W, Vbar = _reference_nsk_variables(ref, snap, t, params)
        integrand = E1.values * (W - state.w) + E2.values * (Vbar - state.vbar)
        return state.grid.quad(state.rho / snap.r * integrand)
    raise ValueError(f"unknown variant {variant!r}")


def source_term_b(traj, ref: ReferenceSolution, t: float, params: cv.ModelParams,
                  variant: str = "euk") -> float:
    """Trapezoid-in-time accumulation of the residual source up to t."""
    ks = _covered_indices(traj, ref, t)
    if len(ks) < 2:
        return 0.0
    times = [traj.times[k] for k in ks]
    dens = [source_density(traj.states[k], ref, traj.times[k], params, variant) for k in ks]
    return _trapezoid(times, dens)


def source_series(traj, ref, params, variant="euk"):
    """(times, cumulative b) over every recorded time where the reference exists."""
    ks = _covered_indices(traj, ref, traj.times[-1])
    times = np.array([traj.times[k] for k in ks])
    dens = np.array([source_density(traj.states[k], ref, traj.times[k], params, variant)
                     for k in ks])
    cum = np.concatenate([[0.0], np.cumsum(0.5 * (dens[1:] + dens[:-1]) * np.diff(times))])
    return times, cum


# -- Gronwall certificate ------------------------------------------------------------

def _check_series(times, values, b, C):
    times = np.asarray(times, dtype=float)
    values = np.asarray(values, dtype=float)
    b = np.asarray(b, dtype=float)
    if times.ndim != 1 or values.shape != times.shape or b.shape != times.shape:
        raise SeriesError("times, values and b must be 1-D arrays of equal length")
    if len(times) == 0:
        raise SeriesError("empty series")
    if not (np.all(np.isfinite(times)) and np.all(np.isfinite(values))
            and np.all(np.isfinite(b))):
        raise SeriesError("series contains non-finite entries")
    if np.any(np.diff(times) <= 0):
        raise SeriesError("times must be strictly increasing")
    if np.any(values < 0):
        raise SeriesError("relative entropy values must be non-negative")
    if not (np.isfinite(C) and C > 0):
        raise SeriesError("C must be positive")
    return times, values, b


def gronwall_rhs(times, values, b, C) -> np.ndarray:
    """E_0 e^{C t_k} + b_k + C int_0^{t_k} b(xi) e^{C (t_k - xi)} dxi (trapezoid)."""
    times, values, b = _check_series(times, values, b, C)
    rhs_vals = np.empty_like(times)
    for k, tk in enumerate(times):
        kern = b[: k + 1] * np.exp(C * (tk - times[: k + 1]))
        conv = _trapezoid(times[: k + 1], kern)
        rhs_vals[k] = values[0] * np.exp(C * (tk - times[0])) + b[k] + C * conv
    return rhs_vals


def gronwall_certify(times, values, b, C, rel_slack: float = 1e-9):
    """Check E_k <= RHS_k (1 + slack) for every k.

    Returns (satisfied, margin) where margin is the minimum of
    (RHS_k - E_k) / RHS_k over t_k > 0 with RHS_k > 0 (0 if none).
    """
    times, values, b = _check_series(times, values, b, C)
    bound = gronwall_rhs(times, values, b, C)
    ok = bool(np.all(values <= bound * (1 + rel_slack)))
    mask = (times > times[0]) & (bound > 0)
    margin = float(np.min((bound[mask] - values[mask]) / bound[mask])) if np.any(mask) else 0.0
    return ok, margin


def gronwall_threshold(times, values, b, C_hi: float = 1.0, tol: float = 1e-6,
                       max_doublings: int = 60) -> float:
    """Smallest C (to relative ``tol``) for which the certificate holds, by bisection."""
    lo, hi = 0.0, float(C_hi)
    for _ in range(max_doublings):
        if gronwall_certify(times, values, b, hi)[0]:
            break
        lo, hi = hi, 2 * hi
    else:
        return float("inf")
    while hi - lo > tol * hi:
        mid = 0.5 * (lo + hi)
        if mid > 0 and gronwall_certify(times, values, b, mid)[0]:
            hi = mid
        else:
            lo = mid
    return hi


def nsk_gronwall_constant(C: float, params: cv.ModelParams) -> float:
    """F = C (1 + nu / (eps^2 - nu^2))."""
    params.require_nsk()
    return C * (1 + params.nu / (params.epsilon**2 - params.nu**2))


def estimate_gronwall_constant(ref: ReferenceSolution, times, params: cv.ModelParams,
                               c0: float = 1.0, lemma_constant: float = 0.0) -> float:
    """c0 (1 + sup_t [|U_x| + |V_x| + |V_xx| + |div U|]_inf + lemma_constant)."""
    grid = ref.grid
    worst = 0.0
    for t in times:
        snap = ref.snapshot(t)
        Ux = grid.deriv(snap.U)
        Vx = grid.deriv(snap.V)
        Vxx = grid.deriv(snap.V, 2)
        worst = max(worst, 2 * np.max(np.abs(Ux)) + np.max(np.abs(Vx)) + np.max(np.abs(Vxx)))
    return float(c0 * (1 + worst + lemma_constant))
