import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from korteweg import diagnostics as dg
from korteweg.constitutive import ModelParams
from korteweg.dynamics import EulerState, NskState
from korteweg.errors import ConsistencyError, GridError, SeriesError, TimeRangeError
from korteweg.field import Grid
from korteweg.integrate import TimeControls, simulate

GRID = Grid(64, 2 * np.pi)
X = GRID.x
EK = ModelParams(2.0, -1.0, epsilon=0.5)
NSK = ModelParams(2.0, -1.0, epsilon=0.5, nu=0.1)


def ek_state(amp=0.1, u_amp=0.0, grid=GRID):
    return EulerState.from_primitive(grid, 1 + amp * np.sin(grid.x),
                                     u_amp * np.cos(grid.x), EK)


@pytest.fixture(scope="module")
def ek_traj():
    return simulate(ek_state(0.2, 0.1), EK, TimeControls(0.2, checkpoints=9))


@pytest.fixture(scope="module")
def nsk_traj():
    st0 = NskState.from_primitive(GRID, 1 + 0.2 * np.sin(X), 0.1 * np.cos(X), NSK)
    return simulate(st0, NSK, TimeControls(0.2, checkpoints=9))


# -- energies -------------------------------------------------------------------

def test_energy_of_constant_state_by_hand():
    st_ = EulerState.from_primitive(GRID, np.full(64, 2.0), np.full(64, 1.0), EK)
    rep = dg.energy(st_, EK)
    two_pi = 2 * np.pi
    assert rep.kinetic == pytest.approx(two_pi, rel=1e-14)
    assert rep.internal == pytest.approx(4 * two_pi, rel=1e-14)
    assert rep.capillary == 0.0
    assert rep.total == pytest.approx(5 * two_pi, rel=1e-14)
    assert set(rep.to_dict()) >= {"E_kinetic", "E_internal", "E_capillary", "E_total"}


def test_capillary_energy_two_evaluations_agree():
    rep = dg.energy_euk(ek_state(0.3), EK)
    assert rep.capillary > 0 and rep.capillary_check < 1e-13
    # K rho_x^2 with K = 1/rho: 1/2 eps^2 int (0.3 cos x)^2 / (1 + 0.3 sin x)
    grid = Grid(512, 2 * np.pi)
    fine = 0.125 * grid.quad(0.09 * np.cos(grid.x) ** 2 / (1 + 0.3 * np.sin(grid.x)))
    assert rep.capillary == pytest.approx(fine, rel=1e-12)


def test_nsk_energy_reduces_to_euler_korteweg_energy_without_viscosity():
    params = ModelParams(2.0, -1.0, epsilon=0.5, nu=0.0)
    rho, u = 1 + 0.2 * np.sin(X), 0.3 * np.cos(X)
    e_ns = dg.energy(NskState.from_primitive(GRID, rho, u, params), params)
    e_ek = dg.energy(EulerState.from_primitive(GRID, rho, u, params), params)
    assert e_ns.total == pytest.approx(e_ek.total, rel=1e-14)
    assert e_ns.dissipation_rate == 0.0


def test_nsk_dissipation_rate_by_hand_for_constant_density():
    # rho = 1, s = -1: rate = nu * int mu (w_x^2 + vbar_x^2) = nu * int (a cos x)^2
    st_ = NskState(GRID, np.ones(64), 0.5 * np.sin(X), np.zeros(64))
    assert dg.energy_nsk(st_, NSK).dissipation_rate == pytest.approx(0.1 * 0.25 * np.pi,
                                                                     rel=1e-13)


def test_to_euler_state_from_nsk():
    st_ = NskState.from_primitive(GRID, 1 + 0.2 * np.sin(X), 0.1 * np.cos(X), NSK)
    ek = dg.to_euler_state(st_, NSK)
    np.testing.assert_allclose(ek.u, 0.1 * np.cos(X), atol=1e-14)
    np.testing.assert_allclose(ek.v, 0.2 * np.cos(X) / (1 + 0.2 * np.sin(X)), atol=1e-13)


# -- relative entropies --------------------------------------------------------------

def test_relative_entropy_of_a_state_with_itself_is_zero():
    st_ = ek_state(0.2, 0.1)
    rep = dg.relative_entropy_euk(st_, st_, EK)
    assert rep.value == 0.0
    assert dg.relative_entropy_glt(st_, st_, EK) == pytest.approx(0.0, abs=1e-15)


def test_relative_entropy_components_by_hand():
    # same density, velocity offset 0.1: only the velocity gap is nonzero
    a = EulerState.from_primitive(GRID, np.ones(64), np.full(64, 0.1), EK)
    b = EulerState.from_primitive(GRID, np.ones(64), np.zeros(64), EK)
    rep = dg.relative_entropy_euk(a, b, EK)
    assert rep.velocity_gap == pytest.approx(0.5 * 0.01 * 2 * np.pi, rel=1e-14)
    assert rep.drift_gap == 0 and rep.enthalpy_gap == 0
    # constant densities 2 vs 1, gamma = 2: H(2|1) = (2 - 1)^2 = 1 per unit length
    c = EulerState.from_primitive(GRID, np.full(64, 2.0), np.zeros(64), EK)
    assert dg.relative_entropy_euk(c, b, EK).enthalpy_gap == pytest.approx(2 * np.pi, rel=1e-14)


def test_relative_entropy_is_quadratic_in_the_perturbation():
    ref = ek_state(0.2, 0.1)
    vals = [dg.relative_entropy_euk(ek_state(0.2 + d, 0.1 + d), ref, EK).value
            for d in (1e-3, 2e-3)]
    assert vals[1] / vals[0] == pytest.approx(4.0, rel=1e-2)
    glt = [dg.relative_entropy_glt(ek_state(0.2 + d, 0.1 + d), ref, EK) for d in (1e-3, 2e-3)]
    assert glt[1] / glt[0] == pytest.approx(4.0, rel=1e-2)


@settings(max_examples=40, deadline=None)
@given(st.floats(0.0, 0.8), st.floats(-1, 1), st.floats(0.0, 0.8), st.floats(-1, 1))
def test_relative_entropy_is_non_negative(a1, u1, a2, u2):
    rep = dg.relative_entropy_euk(ek_state(a1, u1), ek_state(a2, u2), EK)
    assert rep.value >= 0 and rep.velocity_gap >= 0 and rep.drift_gap >= 0
    assert rep.enthalpy_gap >= 0


def test_relative_entropy_rejects_grid_mismatch():
    with pytest.raises(GridError):
        dg.relative_entropy_euk(ek_state(), ek_state(grid=Grid(32, 2 * np.pi)), EK)


def test_closed_form_reference_needs_time_and_oracles():
    ref = dg.ClosedFormReference(GRID, EK, r=lambda x, t: 1 + 0 * x, U=lambda x, t: 0 * x)
    with pytest.raises(ValueError):
        dg.relative_entropy_euk(ek_state(), ref, EK)
    with pytest.raises(ConsistencyError):
        ref.time_derivatives(0.0)
    assert dg.relative_entropy_euk(ek_state(0.0), ref, EK, t=0.0).value == 0.0


def test_trajectory_reference_self_comparison(ek_traj):
    ref = dg.TrajectoryReference(ek_traj, EK)
    for t in (0.0, 0.1, 0.2):
        assert dg.relative_entropy_euk(ek_traj.state_at(t), ref, EK, t).value == 0.0
    with pytest.raises(TimeRangeError):
        ref.snapshot(0.123456)
    assert dg.source_term_b(ek_traj, ref, 0.2, EK) == 0.0


def test_trajectory_reference_on_a_nested_coarse_grid():
    fine = simulate(ek_state(0.2, 0.1, grid=Grid(128, 2 * np.pi)), EK, TimeControls(0.1))
    coarse = simulate(ek_state(0.2, 0.1), EK, TimeControls(0.1))
    ref = dg.TrajectoryReference(fine, EK, grid=GRID)
    rep = dg.relative_entropy_euk(coarse.final, ref, EK, 0.1)
    assert rep.value < 1e-20  # both resolutions are converged for this smooth data


def test_relative_entropy_nsk_self_is_zero_and_tail_accumulates(nsk_traj):
    ref = dg.TrajectoryReference(nsk_traj, NSK)
    rep = dg.relative_entropy_nsk(nsk_traj, ref, 0.2, NSK)
    assert rep.value == 0.0 and rep.time_integrated_gap == 0.0
    st0 = NskState.from_primitive(GRID, 1 + 0.21 * np.sin(X), 0.1 * np.cos(X), NSK)
    other = simulate(st0, NSK, TimeControls(0.2, checkpoints=9))
    r1 = dg.relative_entropy_nsk(other, ref, 0.1, NSK)
    r2 = dg.relative_entropy_nsk(other, ref, 0.2, NSK)
    assert 0 < r1.time_integrated_gap < r2.time_integrated_gap
    assert r2.value > 0 and r2.extras["recovered_u_gap"] >= 0
    with pytest.raises(TimeRangeError):
        dg.relative_entropy_nsk(other, ref, 0.5, NSK)


# -- residuals ------------------------------------------------------------------------

def test_fd_weights_are_exact_for_quartics():
    nodes = np.array([0.0, 0.1, 0.25, 0.3, 0.5])
    w = dg.fd_weights(nodes, 0.25)
    for p in range(5):
        expected = p * 0.25 ** (p - 1) if p else 0.0
        assert np.dot(w, nodes**p) == pytest.approx(expected, abs=1e-10)
    np.testing.assert_allclose(dg.fd_weights([-1, 0, 1], 0, order=2), [1, -2, 1], atol=1e-14)


def test_strong_residual_vanishes_for_constant_flow():
    ref = dg.ClosedFormReference(GRID, EK, r=lambda x, t: 1.5 + 0 * x, U=lambda x, t: 0.3 + 0 * x,
                                 r_t=lambda x, t: 0 * x, U_t=lambda x, t: 0 * x)
    E1, E2 = dg.strong_residual_euk(ref, 0.0, EK)
    assert np.max(np.abs(E1.values)) < 1e-14 and np.max(np.abs(E2.values)) < 1e-14


def test_strong_residual_of_a_simulated_run_is_small(ek_traj):
    ref = dg.TrajectoryReference(ek_traj, EK, derivative="rhs")
    E1, E2 = dg.strong_residual_euk(ref, 0.1, EK)
    scale = np.max(np.abs(dg.strong_residual_euk(
        dg.TrajectoryReference(ek_traj, EK.replace(epsilon=0.0)), 0.1, EK)[0].values))
    assert np.max(np.abs(E1.values)) < 1e-10 * max(scale, 1.0)
    assert np.max(np.abs(E2.values)) < 1e-10
    fd = dg.TrajectoryReference(ek_traj, EK, derivative="fd4")
    E1_fd, _ = dg.strong_residual_euk(fd, 0.1, EK, slaved=True)
    assert np.max(np.abs(E1_fd.values)) < 1e-3


def test_strong_residual_nsk_of_a_simulated_run_is_small(nsk_traj):
    ref = dg.TrajectoryReference(nsk_traj, NSK, derivative="rhs")
    E1, E2 = dg.strong_residual_nsk(ref, 0.1, NSK)
    assert np.max(np.abs(E1.values)) < 1e-10 and np.max(np.abs(E2.values)) < 1e-10


def test_manufactured_wave_is_reproduced_with_its_forcing():
    c, a = 0.5, 0.1
    ref = dg.ClosedFormReference(
        GRID, EK, r=lambda x, t: 1 + a * np.sin(x - c * t), U=lambda x, t: c + 0 * x,
        r_t=lambda x, t: -c * a * np.cos(x - c * t), U_t=lambda x, t: 0 * x)

    def forcing(t):
        E1, E2 = dg.strong_residual_euk(ref, t, EK)
        return np.stack([np.zeros(GRID.n), E1.values, E2.values])

    E1, _ = dg.strong_residual_euk(ref, 0.0, EK)
    assert np.max(np.abs(E1.values)) > 1e-2  # the wave is not a free solution
    st0 = EulerState.from_primitive(GRID, 1 + a * np.sin(X), c + 0 * X, EK)
    traj = simulate(st0, EK, TimeControls(0.3), forcing=forcing)
    assert dg.relative_entropy_euk(traj.final, ref, EK, 0.3).value < 1e-20


def test_source_term_grows_for_an_unforced_mismatch(ek_traj):
    ref = dg.ClosedFormReference(
        GRID, EK, r=lambda x, t: 1 + 0.2 * np.sin(x), U=lambda x, t: 0.1 * np.cos(x),
        r_t=lambda x, t: 0 * x, U_t=lambda x, t: 0 * x)
    times, b = dg.source_series(ek_traj, ref, EK)
    assert b[0] == 0.0 and np.all(np.diff(b) > 0)
    assert dg.source_term_b(ek_traj, ref, 0.2, EK) == pytest.approx(b[-1], rel=1e-14)
    with pytest.raises(ValueError):
        dg.source_density(ek_traj.final, ref, 0.2, EK, "nsk")


# -- Gronwall ---------------------------------------------------------------------------

def test_gronwall_rhs_closed_forms():
    t = np.linspace(0, 1, 201)
    np.testing.assert_allclose(dg.gronwall_rhs(t, 2 + 0 * t, 0 * t, 1.5), 2 * np.exp(1.5 * t),
                               rtol=1e-14)
    # constant b: b + C int_0^t b e^{C(t - xi)} = b e^{Ct}
    rhs = dg.gronwall_rhs(t, 0 * t, 0 * t + 0.3, 2.0)
    np.testing.assert_allclose(rhs, 0.3 * np.exp(2 * t), rtol=1e-4)


def test_gronwall_certify_and_threshold():
    t = np.linspace(0, 1, 101)
    E = np.exp(2 * t)
    assert dg.gronwall_certify(t, E, 0 * t, 2.5)[0]
    ok, margin = dg.gronwall_certify(t, E, 0 * t, 1.5)
    assert not ok and margin < 0
    assert dg.gronwall_threshold(t, E, 0 * t, tol=1e-8) == pytest.approx(2.0, rel=1e-6)
    # zero everywhere: certified with margin 0 by convention
    assert dg.gronwall_certify(t, 0 * t, 0 * t, 1.0) == (True, 0.0)


def test_gronwall_series_validation():
    t = np.array([0.0, 0.5, 1.0])
    good = np.array([1.0, 1.0, 1.0])
    for args in ((t, good[:2], good, 1.0), (t[::-1], good, good, 1.0),
                 (t, -good, good, 1.0), (t, good, good, 0.0),
                 (t, np.array([1, np.nan, 1]), good, 1.0), ([], [], [], 1.0)):
        with pytest.raises(SeriesError):
            dg.gronwall_certify(*args)


def test_gronwall_constants():
    assert dg.nsk_gronwall_constant(1.0, NSK) == pytest.approx(1 + 0.1 / 0.24, rel=1e-15)
    flat = dg.ClosedFormReference(GRID, EK, r=lambda x, t: 1 + 0 * x, U=lambda x, t: 0 * x)
    assert dg.estimate_gronwall_constant(flat, [0.0], EK, c0=3.0) == 3.0
    wave = dg.ClosedFormReference(GRID, EK, r=lambda x, t: 1 + 0 * x,
                                  U=lambda x, t: 0.5 * np.sin(x))
    assert dg.estimate_gronwall_constant(wave, [0.0], EK) == pytest.approx(2.0, rel=1e-12)
