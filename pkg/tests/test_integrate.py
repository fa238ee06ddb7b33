import numpy as np
import pytest

from korteweg.constitutive import ModelParams
from korteweg.dynamics import EulerState, NskState, QuantumState
from korteweg.errors import (ConsistencyError, NonFiniteError, SimulationAborted, VacuumError)
from korteweg.field import Grid
from korteweg.integrate import TimeControls, Trajectory, rk4_step, simulate, stable_dt

GRID = Grid(64, 2 * np.pi)
EK = ModelParams(2.0, -1.0, epsilon=0.5)


def sine_state(cls=EulerState, amp=0.1, params=EK, grid=GRID, u=0.0):
    return cls.from_primitive(grid, 1 + amp * np.sin(grid.x), u + 0 * grid.x, params)


def test_time_controls_validation():
    for kw in ({"t_end": -1}, {"t_end": 1, "cfl_hyperbolic": 0}, {"t_end": 1, "cfl_dispersive": 2},
               {"t_end": 1, "dt_max": 0}, {"t_end": 1, "vacuum_floor": 0},
               {"t_end": 1, "record_stride": 0}, {"t_end": 1, "record_stride": 1.5},
               {"t_end": 1, "checkpoints": 1}, {"t_end": float("nan")}):
        with pytest.raises(ValueError):
            TimeControls(**kw)
    np.testing.assert_allclose(TimeControls(1.0, checkpoints=5).checkpoint_times(),
                               [0, 0.25, 0.5, 0.75, 1.0])
    assert list(TimeControls(0.0, checkpoints=5).checkpoint_times()) == [0.0]
    assert list(TimeControls(2.0).checkpoint_times()) == [0.0, 2.0]


def test_stable_dt_composite_formula():
    st_ = sine_state()
    c = TimeControls(1.0, cfl_hyperbolic=0.4, cfl_dispersive=0.25, dt_max=10.0)
    rho = st_.rho
    s_max = np.max(np.sqrt(2 * rho))
    a_max = np.max(0.5 * np.sqrt(rho / rho) / rho)  # eps mu' sqrt(rho K)/rho, mu' = 1, K = 1/rho
    expected = min(0.4 * GRID.dx / s_max, 0.25 * GRID.dx**2 / a_max)
    assert stable_dt(st_, EK, c) == pytest.approx(expected, rel=1e-14)
    assert stable_dt(st_, EK, TimeControls(1.0, dt_max=1e-6)) == 1e-6


def test_stable_dt_includes_viscous_limit():
    params = ModelParams(2.0, -1.0, epsilon=0.05, nu=0.04)
    st_ = sine_state(NskState, params=params)
    c = TimeControls(1.0, dt_max=10.0)
    rho = st_.rho
    a_max = max(np.max(0.05 / rho), np.max(0.04 * rho / rho))
    assert stable_dt(st_, params, c) <= 0.25 * GRID.dx**2 / a_max * (1 + 1e-14)


def test_rk4_zero_step_is_identity():
    st_ = sine_state()
    assert rk4_step(st_, 0.0, EK) is st_


def test_rk4_local_error_is_fifth_order_on_a_linear_mode():
    """Small-amplitude mode: rho - 1 = delta cos(omega t) cos x with omega^2 = p' + eps^2 K."""
    delta = 1e-7
    grid = Grid(16, 2 * np.pi)
    st0 = EulerState.from_primitive(grid, 1 + delta * np.cos(grid.x), 0 * grid.x, EK)
    omega = np.sqrt(2.0 + 0.25)
    errs = []
    for dt in (0.2, 0.1):
        new = rk4_step(st0, dt, EK, dealias=False)
        # the z^5 term of the RK4 stability polynomial is imaginary, so the local
        # fifth-order error sits in the velocity u = delta omega sin(omega t) sin x
        exact_u = delta * omega * np.sin(omega * dt) * np.sin(grid.x)
        errs.append(np.max(np.abs(new.u - exact_u)) / delta)
    order = np.log2(errs[0] / errs[1])
    assert 4.5 < order < 5.5


def test_linear_dispersion_relation_over_one_time_unit():
    delta = 1e-6
    grid = Grid(32, 2 * np.pi)
    for k, omega in ((1, 1.5), (2, np.sqrt(4 * (2 + 0.25 * 4)))):
        st0 = EulerState.from_primitive(grid, 1 + delta * np.cos(k * grid.x), 0 * grid.x, EK)
        traj = simulate(st0, EK, TimeControls(1.0, record_stride=1000))
        exact = 1 + delta * np.cos(omega) * np.cos(k * grid.x)
        assert np.max(np.abs(traj.final.rho - exact)) < 1e-4 * delta


def test_simulate_lands_on_checkpoints_and_records_by_stride():
    traj = simulate(sine_state(), EK, TimeControls(0.3, checkpoints=4, record_stride=3))
    for t in (0.0, 0.1, 0.2, 0.3):
        assert traj.has_time(t)
    assert traj.times[-1] == 0.3
    assert traj.times == sorted(traj.times)
    assert len(traj.times) < traj.steps + 1
    assert traj.dts[0] == 0.0 and all(d > 0 for d in traj.dts[1:])
    with pytest.raises(KeyError):
        traj.index_of(0.05)
    assert traj.state_at(0.3) is traj.final


def test_t_end_zero_records_only_the_initial_state():
    st_ = sine_state()
    traj = simulate(st_, EK, TimeControls(0.0))
    assert traj.times == [0.0] and traj.steps == 0 and traj.final is st_


def test_mass_is_conserved_by_the_integrator():
    traj = simulate(sine_state(amp=0.3), EK, TimeControls(0.5))
    m0, m1 = (GRID.quad(s.rho) for s in (traj.states[0], traj.final))
    assert abs(m1 - m0) / m0 < 1e-13


def test_simulation_is_deterministic():
    a = simulate(sine_state(), EK, TimeControls(0.2))
    b = simulate(sine_state(), EK, TimeControls(0.2))
    assert a.times == b.times
    np.testing.assert_array_equal(a.final.rho, b.final.rho)


def test_nsk_dissipation_is_accumulated_and_positive():
    params = ModelParams(2.0, -1.0, epsilon=0.5, nu=0.1)
    traj = simulate(sine_state(NskState, params=params), params, TimeControls(0.2))
    d = np.array(traj.cumulative_dissipation)
    assert d[0] == 0.0 and np.all(np.diff(d) > 0)


def test_euler_trajectory_has_no_dissipation():
    traj = simulate(sine_state(), EK, TimeControls(0.1))
    assert set(traj.cumulative_dissipation) == {0.0}


def test_vacuum_abort_keeps_last_valid_state():
    # a strong converging flow drives the density towards zero
    params = ModelParams(2.0, -1.0, epsilon=0.05)
    grid = Grid(32, 2 * np.pi)
    st0 = EulerState.from_primitive(grid, np.ones(32), 3 * np.sin(grid.x), params)
    with pytest.raises(SimulationAborted) as info:
        simulate(st0, params, TimeControls(5.0, vacuum_floor=0.5, consistency_tol=1e9))
    exc = info.value
    assert isinstance(exc.cause, VacuumError)
    last = exc.last_state
    assert np.min(last.rho) > 0.5
    assert exc.trajectory.times[-1] > 0


def test_consistency_abort():
    params = ModelParams(2.0, -1.0, epsilon=0.5)
    grid = Grid(16, 2 * np.pi)
    st0 = EulerState.from_primitive(grid, 1 + 0.3 * np.sin(grid.x), 0 * grid.x, params)
    with pytest.raises(SimulationAborted) as info:
        simulate(st0, params, TimeControls(1.0, consistency_tol=1e-14))
    assert isinstance(info.value.cause, ConsistencyError)


def test_non_finite_forcing_aborts():
    st0 = sine_state()
    with pytest.raises(NonFiniteError):
        rk4_step(st0, 0.01, EK, forcing=lambda t: np.full((3, GRID.n), np.nan))
    with pytest.raises(SimulationAborted) as info:
        simulate(st0, EK, TimeControls(0.1), forcing=lambda t: np.full((3, GRID.n), np.inf))
    assert isinstance(info.value.cause, NonFiniteError)
    assert info.value.trajectory.times == [0.0]


def test_forcing_receives_stage_times():
    seen = []

    def forcing(t):
        seen.append(t)
        return np.zeros((3, GRID.n))

    rk4_step(sine_state(), 0.1, EK, t=1.0, forcing=forcing)
    assert seen == [1.0, 1.05, 1.05, 1.1]


def test_quantum_state_integrates():
    traj = simulate(sine_state(QuantumState), EK, TimeControls(0.1))
    assert traj.model == "quantum_euler_direct" and traj.consistency[-1] == 0.0


def test_trajectory_append_and_lookup():
    traj = Trajectory("euler_korteweg", EK, GRID)
    traj.append(0, 0, "a", 0, 0)
    traj.append(0.5, 0.5, "b", 0, 0)
    assert traj.state_at(0.5) == "b" and traj.has_time(0.5 + 1e-14) and not traj.has_time(0.4)
