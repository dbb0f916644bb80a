import math
from dataclasses import replace

import numpy as np
import pytest

from phonon_berry.berry import rytov_line_integral
from phonon_berry.errors import StepSizeUnderflow, ZeroMomentum
from phonon_berry.medium import axial_duct, gaussian_lens, homogeneous, linear_gradient
from phonon_berry.raytrace import (
    PhononState,
    Scenario,
    Termination,
    TraceConfig,
    duct_helix,
    hall_shift,
    helicity_splitting,
    integrate,
    momentum_path,
    ray_rhs,
)

TWO_PI = 2.0 * math.pi
LENS = gaussian_lens(0.2, 5.0)


def test_rhs_examples():
    st = PhononState((0, 0, 0), (1, 0, 0), +1)
    dr, dp = ray_rhs(st, homogeneous(), 1.0)
    np.testing.assert_array_equal(dp, 0.0)
    np.testing.assert_array_equal(dr, [1, 0, 0])

    lin = linear_gradient((0, 0, 0.01))
    dr, dp = ray_rhs(st, lin, 1.0)
    np.testing.assert_allclose(dp, [0, 0, -0.01], atol=1e-17)
    np.testing.assert_allclose(dr, [1, 0.01, 0], atol=1e-17)
    dr, _ = ray_rhs(st, lin, 0.0)
    np.testing.assert_array_equal(dr, [1, 0, 0])
    dr, _ = ray_rhs(replace(st, sigma=-1), lin, 1.0)
    np.testing.assert_allclose(dr, [1, -0.01, 0], atol=1e-17)


def test_homogeneous_straight_line():
    traj = integrate(PhononState((0, 0, 0), (1, 0, 0)), homogeneous(), TraceConfig(t_max=10.0))
    assert traj.terminated is Termination.COMPLETED
    np.testing.assert_allclose(traj.r[-1], [10, 0, 0], rtol=1e-12)
    assert traj.gamma[-1] == 0.0
    np.testing.assert_array_equal(hall_shift(traj), 0.0)
    assert np.all(np.diff(traj.t) > 0)


def test_time_reversal():
    cfg = TraceConfig(t_max=10.0, hbar_scale=0.05)
    s0 = PhononState((-3.0, 1.0, 0.5), (1.0, 0.2, -0.1), +1)
    fwd = integrate(s0, LENS, cfg).final_state
    back = integrate(PhononState(fwd.r, -fwd.p, +1), LENS, cfg).final_state
    assert np.max(np.abs(back.r - s0.r)) < 10 * cfg.rel_tol * np.max(np.abs(s0.r))
    assert np.max(np.abs(-back.p - s0.p)) < 10 * cfg.rel_tol


@pytest.mark.parametrize("medium, r0", [
    (LENS, (-20.0, 1.0, 0.5)),
    (axial_duct(0.05), (1.0, 0.0, 0.0)),
    (linear_gradient((0.001, 0.002, -0.001)), (0.0, 0.0, 0.0)),
])
def test_energy_conservation(medium, r0):
    traj = integrate(PhononState(r0, (1.0, 0.3, 0.2)), medium, TraceConfig(t_max=1000.0, output_stride=50))
    assert traj.max_energy_drift() < 1e-8


def test_hall_increments_orthogonal():
    state, period, _ = duct_helix(axial_duct(1.0), 1.0, 10.0, +1, 1.0)
    traj = integrate(state, axial_duct(1.0), TraceConfig(t_max=2 * period))
    assert 0 < traj.max_hall_residual < 1e-10


def test_classical_limit_helicities_coincide():
    cfg = TraceConfig(t_max=40.0, hbar_scale=0.0)
    sc = Scenario(LENS, (-20.0, 1.0, 0.5), (1.0, 0.0, 0.0))
    plus, minus, sep = helicity_splitting(sc, cfg)
    assert np.max(np.abs(plus.r - minus.r)) <= 10 * cfg.rel_tol
    assert np.max(np.abs(plus.p - minus.p)) <= 10 * cfg.rel_tol
    assert np.max(sep) <= 10 * cfg.rel_tol
    np.testing.assert_array_equal(hall_shift(plus), 0.0)


def test_splitting_in_uniform_gradient_is_twice_hall_shift():
    # in a uniform gradient the momentum path does not depend on helicity
    sc = Scenario(linear_gradient((0.0, 0.0, 0.02)), (0, 0, 0), (1.0, 0.0, 0.3))
    cfg = TraceConfig(t_max=20.0, hbar_scale=1e-3)
    plus, minus, sep = helicity_splitting(sc, cfg)
    assert np.all(sep >= 0)
    assert sep[-1] == pytest.approx(2 * np.linalg.norm(hall_shift(plus)), rel=1e-6)
    np.testing.assert_allclose(hall_shift(plus), -hall_shift(minus), rtol=1e-9)


def test_hall_shift_on_equatorial_circle():
    # kappa R = sqrt(2) balances the duct exactly on the z = const plane
    medium = axial_duct(1.0)
    state, period, alpha = duct_helix(medium, math.sqrt(2.0), 1.0, +1, 0.0)
    assert alpha == pytest.approx(math.pi / 2, abs=1e-12)
    cfg = TraceConfig(t_max=period, hbar_scale=1e-3)
    traj = integrate(state, medium, cfg, [period])
    np.testing.assert_allclose(hall_shift(traj), [0, 0, TWO_PI * 1e-3], rtol=1e-6, atol=1e-12)


@pytest.mark.parametrize("p_mag", [20.0, 100.0])
def test_hall_shift_on_cone(p_mag):
    medium = axial_duct(1.0)
    state, period, alpha = duct_helix(medium, 1.0, p_mag, -1, 1.0)
    traj = integrate(state, medium, TraceConfig(t_max=period, hbar_scale=1.0), [period])
    want = -TWO_PI * math.sin(alpha) ** 2 / p_mag
    np.testing.assert_allclose(hall_shift(traj), [0, 0, want], rtol=1e-6, atol=1e-9 * abs(want))


def test_gamma_matches_berry_line_integral():
    medium = axial_duct(1.0)
    state, period, alpha = duct_helix(medium, 1.0, 100.0, +1, 1.0)
    traj = integrate(state, medium, TraceConfig(t_max=period, hbar_scale=1.0), [period])
    full = integrate(state, medium, TraceConfig(t_max=period, hbar_scale=1.0))
    path = momentum_path(full, closed=True, closure_tol=1e-6)
    line = rytov_line_integral(path, max_step=None).gamma
    assert abs(full.gamma[-1] - line) < 1e-6
    assert abs(traj.gamma[-1] - TWO_PI * math.cos(alpha)) < 1e-6


def test_tolerance_convergence():
    s0 = PhononState((-20.0, 1.0, 0.5), (1.0, 0.0, 0.0), +1)
    cfg = TraceConfig(t_max=40.0, hbar_scale=1e-3, rel_tol=1e-7, abs_tol=1e-10, max_turn=0.05)
    coarse = integrate(s0, LENS, cfg)
    fine = integrate(s0, LENS, replace(cfg, rel_tol=0.5e-7, abs_tol=0.5e-10))
    change = np.linalg.norm(fine.r[-1] - coarse.r[-1])
    assert change < coarse.error_estimate


def test_domain_exit():
    cfg = TraceConfig(t_max=100.0, box_half_width=5.0)
    traj = integrate(PhononState((0, 0, 0), (1, 0, 0)), homogeneous(), cfg)
    assert traj.terminated is Termination.DOMAIN_EXIT
    assert traj.r[-1, 0] > 5.0 and traj.t[-1] < 100.0


def test_output_grid_and_stride():
    t_eval = np.linspace(0.0, 5.0, 11)
    traj = integrate(PhononState((-3, 0, 0), (1, 0.1, 0)), LENS, TraceConfig(t_max=5.0), t_eval)
    np.testing.assert_array_equal(traj.t, t_eval)
    strided = integrate(PhononState((-3, 0, 0), (1, 0.1, 0)), LENS, TraceConfig(t_max=5.0, output_stride=7))
    assert strided.t[-1] == 5.0 and len(strided) < strided.n_steps


class _BrokenMedium:
    """Speed becomes NaN beyond x = 1, which no step size can cure."""

    def speed_and_gradient(self, r):
        if r[0] > 1.0:
            return math.nan, np.full(3, math.nan)
        return 1.0, np.zeros(3)


def test_step_size_underflow():
    with pytest.raises(StepSizeUnderflow):
        integrate(PhononState((0, 0, 0), (1, 0, 0)), _BrokenMedium(), TraceConfig(t_max=5.0))


def test_state_validation():
    with pytest.raises(ZeroMomentum):
        PhononState((0, 0, 0), (0, 0, 0))
    with pytest.raises(ValueError):
        PhononState((0, 0, 0), (1, 0, 0), sigma=0)
    with pytest.raises(ValueError):
        TraceConfig(rel_tol=0.0)
    with pytest.raises(ValueError):
        TraceConfig(hbar_scale=-1.0)


def test_trajectory_csv(tmp_path):
    traj = integrate(PhononState((-3, 0, 0), (1, 0.1, 0)), LENS, TraceConfig(t_max=2.0, hbar_scale=0.1))
    f = tmp_path / "t.csv"
    traj.to_csv(f)
    lines = f.read_text(encoding="utf-8").splitlines()
    assert lines[0] == "t,r_x,r_y,r_z,p_x,p_y,p_z,gamma,hall_x,hall_y,hall_z,H"
    back = np.loadtxt(f, delimiter=",", skiprows=1)
    np.testing.assert_array_equal(back, traj.rows())
