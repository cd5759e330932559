import math

import numpy as np
import pytest

from tsgsim.dynamics import GravityModel, MU_EARTH, StateVector, DynamicsError
from tsgsim.lqr import (
    DareError,
    GainSchedule,
    LinearizedModel,
    LqrWeights,
    ScheduleError,
    build_gain_schedule,
    control_law,
    dare_residual,
    discretize,
    expm_taylor,
    feedback_gain,
    gain_from_dare,
    jacobian_gravity,
    load_gain_schedule,
    riccati_fixed_point,
    saturate,
    solve_dare,
)

from conftest import LEO_ELEMENTS

GOLDEN = (1.0 + math.sqrt(5.0)) / 2.0


class TestJacobian:
    def test_axis_aligned_closed_form(self, gravity):
        g = jacobian_gravity([7000.0, 0.0, 0.0], gravity)
        mu_r3 = MU_EARTH / 7000.0**3
        assert g == pytest.approx(np.diag([2 * mu_r3, -mu_r3, -mu_r3]), rel=1e-12)
        assert g[0, 0] == pytest.approx(2.32420e-6, abs=1e-10)

    def test_trace_free_and_symmetric(self, gravity, rng):
        for _ in range(20):
            pos = rng.uniform(-1e4, 1e4, 3)
            if np.linalg.norm(pos) < 100.0:
                continue
            g = jacobian_gravity(pos, gravity)
            assert np.trace(g) == pytest.approx(0.0, abs=1e-18)
            assert g == pytest.approx(g.T, rel=1e-14)

    def test_finite_difference_oracle(self, gravity):
        from tsgsim.dynamics import gravity_accel

        pos = np.array([5000.0, -3000.0, 2500.0])
        g = jacobian_gravity(pos, gravity)
        eps = 1e-3
        fd = np.zeros((3, 3))
        for j in range(3):
            dp = np.zeros(3)
            dp[j] = eps
            fd[:, j] = (gravity_accel(pos + dp, gravity) - gravity_accel(pos - dp, gravity)) / (
                2 * eps
            )
        assert g == pytest.approx(fd, rel=1e-7)


class TestDiscretize:
    def test_free_space_double_integrator(self):
        # G = 0 has the closed-form ZOH matrices
        model = GravityModel(mu=1e-30)  # negligible gravity
        dt = 7.0
        lin = discretize([1e12, 0.0, 0.0], dt, model)
        a_expect = np.eye(6)
        a_expect[:3, 3:] = dt * np.eye(3)
        b_expect = np.vstack([dt**2 / 2 * np.eye(3), dt * np.eye(3)])
        assert lin.a_d == pytest.approx(a_expect, abs=1e-12)
        assert lin.b_d == pytest.approx(b_expect, abs=1e-12)

    def test_small_dt_limits(self, gravity):
        lin = discretize([7000.0, 0.0, 0.0], 1e-9, gravity)
        assert lin.a_d == pytest.approx(np.eye(6), abs=1e-8)
        assert np.linalg.norm(lin.b_d, np.inf) < 1e-8

    def test_against_variational_ode_oracle(self, gravity):
        # integrate d(Phi)/dt = A Phi on the augmented system with RK4
        pos = np.array([6798.0, 120.0, -50.0])
        dt = 10.0
        g = jacobian_gravity(pos, gravity)
        a = np.zeros((6, 6))
        a[:3, 3:] = np.eye(3)
        a[3:, :3] = g
        b = np.zeros((6, 3))
        b[3:, :] = np.eye(3)
        aug = np.zeros((9, 9))
        aug[:6, :6] = a
        aug[:6, 6:] = b

        phi = np.eye(9)
        n = 2000
        h = dt / n
        for _ in range(n):
            k1 = aug @ phi
            k2 = aug @ (phi + 0.5 * h * k1)
            k3 = aug @ (phi + 0.5 * h * k2)
            k4 = aug @ (phi + h * k3)
            phi = phi + (h / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)

        lin = discretize(pos, dt, gravity)
        assert lin.a_d == pytest.approx(phi[:6, :6], abs=1e-9)
        assert lin.b_d == pytest.approx(phi[:6, 6:], abs=1e-9)

    def test_expm_against_scipy(self, rng):
        from scipy.linalg import expm as scipy_expm

        for _ in range(10):
            m = rng.normal(0.0, 0.5, (7, 7))
            assert expm_taylor(m) == pytest.approx(scipy_expm(m), rel=1e-10, abs=1e-12)


class TestDare:
    def test_zero_a_gives_q(self):
        q = np.diag([3.0, 4.0])
        s = riccati_fixed_point(np.zeros((2, 2)), np.ones((2, 1)), q, [[1.0]])
        assert s == pytest.approx(q, abs=1e-12)

    def test_scalar_golden_ratio(self):
        s = riccati_fixed_point([[1.0]], [[1.0]], [[1.0]], [[1.0]])
        assert s[0, 0] == pytest.approx(GOLDEN, abs=1e-6)
        k = feedback_gain([[1.0]], [[1.0]], [[1.0]], s)
        assert k[0, 0] == pytest.approx(1.0 / GOLDEN, abs=1e-6)

    def test_double_integrator_residual(self):
        a = np.array([[1.0, 1.0], [0.0, 1.0]])
        b = np.array([[0.5], [1.0]])
        q = np.eye(2)
        r = np.eye(1)
        s = riccati_fixed_point(a, b, q, r)
        assert dare_residual(a, b, q, r, s) < 1e-9

    def test_against_scipy_dare(self, gravity):
        from scipy.linalg import solve_discrete_are

        lin = discretize([6798.0, 0.0, 0.0], 10.0, gravity)
        w = LqrWeights()
        s = solve_dare(lin, w)
        s_ref = solve_discrete_are(lin.a_d, lin.b_d, w.q, w.r)
        assert s == pytest.approx(s_ref, rel=1e-6)

    def test_gain_zero_s(self, gravity):
        lin = discretize([7000.0, 0.0, 0.0], 10.0, gravity)
        k = gain_from_dare(lin, LqrWeights(), np.zeros((6, 6)))
        assert np.all(k == 0.0)

    def test_nonconvergence_raises(self):
        # unstabilizable: a grows, b = 0 column
        with pytest.raises(DareError) as err:
            riccati_fixed_point([[2.0]], [[0.0]], [[1.0]], [[1.0]], max_iter=50)
        assert err.value.residual is not None

    def test_weights_validation(self):
        with pytest.raises(DynamicsError):
            LqrWeights(q=np.diag([1.0, 1, 1, 1, 1, -1]))
        with pytest.raises(DynamicsError):
            LqrWeights(r=np.zeros((3, 3)))
        with pytest.raises(DynamicsError):
            LqrWeights(q=np.triu(np.ones((6, 6))))


@pytest.fixture(scope="module")
def leo_schedule(gravity):
    return build_gain_schedule(LEO_ELEMENTS, LqrWeights(), 10.0, gravity)


class TestSchedule:
    def test_builds_and_covers_period(self, leo_schedule, leo_orbit):
        assert leo_schedule.period == pytest.approx(leo_orbit.period)
        assert len(leo_schedule.grid_times) == round(leo_orbit.period / 10.0)

    def test_every_solve_passes_substitution(self, gravity, leo_schedule, leo_orbit):
        # recompute S at a sample of grid points and check the defect
        w = LqrWeights()
        states = leo_orbit.states_at(leo_schedule.grid_times[::50])
        for i, t in enumerate(leo_schedule.grid_times[::50]):
            lin = discretize(states[i, :3], 10.0, gravity, anchor_time=float(t))
            s = solve_dare(lin, w)
            assert dare_residual(lin.a_d, lin.b_d, w.q, w.r, s) < 1e-9

    def test_closed_loop_stable(self, gravity, leo_schedule, leo_orbit):
        states = leo_orbit.states_at(leo_schedule.grid_times[::100])
        for i, t in enumerate(leo_schedule.grid_times[::100]):
            lin = discretize(states[i, :3], 10.0, gravity)
            k = leo_schedule.gains[leo_schedule.indices_at(t)[0]]
            eigs = np.linalg.eigvals(lin.a_d - lin.b_d @ k)
            assert np.max(np.abs(eigs)) < 1.0

    def test_circular_orbit_gain_norm_constant(self, gravity):
        from tsgsim.dynamics import OrbitalElements

        el = OrbitalElements(sma=7000.0, ecc=0.0, inc=0.3, raan=0.1, argp=0.0)
        sched = build_gain_schedule(el, LqrWeights(), 50.0, gravity)
        norms = np.linalg.norm(sched.gains, axis=(1, 2))
        assert (norms.max() - norms.min()) / norms.mean() < 1e-6

    def test_lookup_wraps_and_zoh(self, leo_schedule):
        t = 1234.0
        assert leo_schedule.gain_at(t) == pytest.approx(
            leo_schedule.gain_at(t + leo_schedule.period), rel=1e-15
        )
        # exact ZOH inside a cell
        i = 77
        t0 = leo_schedule.grid_times[i]
        assert np.array_equal(leo_schedule.gain_at(t0), leo_schedule.gains[i])
        assert np.array_equal(leo_schedule.gain_at(t0 + 9.999), leo_schedule.gains[i])
        assert np.array_equal(leo_schedule.gain_at(t0 + 10.0), leo_schedule.gains[i + 1])

    def test_negative_time_lookup(self, leo_schedule):
        assert leo_schedule.gain_at(-10.0) == pytest.approx(
            leo_schedule.gain_at(leo_schedule.period - 10.0), rel=1e-15
        )

    def test_save_load_round_trip(self, leo_schedule, tmp_path):
        path = tmp_path / "schedule.npz"
        leo_schedule.save(path)
        back = load_gain_schedule(path)
        assert np.max(np.abs(back.gains - leo_schedule.gains)) < 1e-12
        assert np.array_equal(back.grid_times, leo_schedule.grid_times)

    def test_load_garbage_raises(self, tmp_path):
        p = tmp_path / "junk.npz"
        p.write_bytes(b"not an npz")
        with pytest.raises(ScheduleError):
            load_gain_schedule(p)

    def test_bad_grid_rejected(self):
        with pytest.raises(ScheduleError):
            GainSchedule(np.array([0.0, 0.0]), np.zeros((2, 3, 6)), 100.0)
        with pytest.raises(ScheduleError):
            GainSchedule(np.array([0.0, 200.0]), np.zeros((2, 3, 6)), 100.0)


class TestControlLaw:
    def test_zero_error_zero_control(self, leo_schedule, leo_orbit):
        s = leo_orbit.state_at(0.0)
        u = control_law(leo_schedule, 0.0, s, s, 5e-4)
        assert np.all(u == 0.0)

    def test_saturation_magnitude_and_direction(self):
        u = saturate(np.array([1e-3, 0.0, 0.0]), 5e-4)
        assert np.linalg.norm(u) == pytest.approx(5e-4, rel=1e-15)
        assert u[0] > 0
        u2 = saturate(np.array([2e-4, 0.0, 0.0]), 5e-4)
        assert u2 == pytest.approx([2e-4, 0.0, 0.0], rel=1e-15)
        assert np.all(saturate(np.zeros(3), 5e-4) == 0.0)

    def test_norm_never_exceeds_umax(self, leo_schedule, leo_orbit, rng):
        chief = leo_orbit.state_at(0.0)
        for _ in range(50):
            deputy = StateVector(chief.pos + rng.normal(0, 50, 3), chief.vel + rng.normal(0, 0.1, 3))
            u = control_law(leo_schedule, float(rng.uniform(0, 6000)), deputy, chief, 5e-4)
            assert np.linalg.norm(u) <= 5e-4 + 1e-15

    def test_regulation_smoke(self, gravity, leo_schedule, leo_orbit):
        # deputy perturbed 1 km converges to < 10 m within one period (no governor)
        from tsgsim.dynamics import propagate

        dt = 10.0
        deputy = StateVector(leo_orbit.state_at(0.0).pos + [1.0, 0.0, 0.0], leo_orbit.state_at(0.0).vel)
        t = 0.0
        n = int(leo_orbit.period / dt)
        for _ in range(n):
            chief = leo_orbit.state_at(t)
            u = control_law(leo_schedule, t, deputy, chief, 5e-4)
            deputy = propagate(deputy, u, t, t + dt, dt, gravity)
            t += dt
        final = np.linalg.norm(deputy.pos - leo_orbit.state_at(t).pos)
        assert final < 0.010
