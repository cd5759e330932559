import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from tsgsim.dynamics import (
    MU_EARTH,
    DynamicsError,
    FrameUndefinedError,
    GravityModel,
    OrbitalElements,
    ReferenceOrbit,
    StateVector,
    UnsupportedOrbitError,
    angular_momentum,
    elements_to_state,
    eom,
    from_vnb,
    gravity_accel,
    orbit_period,
    propagate,
    solve_kepler,
    specific_energy,
    to_vnb,
    true_to_mean_anomaly,
    vnb_frame,
)

from conftest import LEO_ELEMENTS, MOLNIYA_ELEMENTS


class TestGravity:
    def test_reference_value(self, gravity):
        # independent evaluation: -mu/7000^2 along -x
        a = gravity_accel([7000.0, 0.0, 0.0], gravity)
        assert a == pytest.approx([-8.13470e-3, 0.0, 0.0], abs=1e-8)

    def test_axis_symmetry(self, gravity):
        a = gravity_accel([0.0, 0.0, 9000.0], gravity)
        assert a[0] == 0.0 and a[1] == 0.0 and a[2] < 0.0

    def test_inverse_square_scaling(self, gravity):
        a1 = np.linalg.norm(gravity_accel([7000.0, 100.0, -3.0], gravity))
        a2 = np.linalg.norm(gravity_accel([28000.0, 400.0, -12.0], gravity))
        assert a1 / a2 == pytest.approx(16.0, rel=1e-12)

    def test_zero_position_rejected(self, gravity):
        with pytest.raises(DynamicsError):
            gravity_accel([0.0, 0.0, 0.0], gravity)


class TestEom:
    def test_unforced_circular(self, gravity):
        state = StateVector([7000.0, 0.0, 0.0], [0.0, 7.546, 0.0])
        d = eom(0.0, state, np.zeros(3), gravity)
        assert d[:3] == pytest.approx(state.vel)
        assert np.linalg.norm(d[3:]) == pytest.approx(MU_EARTH / 7000.0**2, rel=1e-12)

    def test_control_cancels_gravity(self, gravity):
        state = StateVector([6800.0, 123.0, -45.0], [1.0, 7.0, 0.5])
        u = -gravity_accel(state.pos, gravity)
        d = eom(0.0, state, u, gravity)
        assert d[3:] == pytest.approx([0.0, 0.0, 0.0], abs=1e-18)

    def test_matches_gravity_only_oracle(self, gravity, leo_orbit):
        state = leo_orbit.state_at(0.0)
        d = eom(0.0, state, np.zeros(3), gravity)
        r = np.linalg.norm(state.pos)
        expected = -MU_EARTH / r**3 * state.pos
        assert d[3:] == pytest.approx(expected, rel=1e-15)


class TestPropagate:
    def test_zero_duration_identity(self, gravity):
        s = StateVector([7000.0, 0.0, 0.0], [0.0, 7.5, 0.0])
        out = propagate(s, np.zeros(3), 5.0, 5.0, 1.0, gravity)
        assert np.array_equal(out.vec, s.vec)

    def test_circular_orbit_period_return(self, gravity):
        a = 7000.0
        v = math.sqrt(MU_EARTH / a)
        s0 = StateVector([a, 0.0, 0.0], [0.0, v, 0.0])
        period = 2.0 * math.pi * math.sqrt(a**3 / MU_EARTH)
        out = propagate(s0, np.zeros(3), 0.0, period, 1.0, gravity)
        assert np.linalg.norm(out.pos - s0.pos) < 1e-6

    def test_partial_final_step(self, gravity):
        s0 = StateVector([7000.0, 0.0, 0.0], [0.0, 7.5, 0.0])
        # 10.5 s with 1 s steps vs 10.5 s with 0.5 s steps should agree closely
        a = propagate(s0, np.zeros(3), 0.0, 10.5, 1.0, gravity)
        b = propagate(s0, np.zeros(3), 0.0, 10.5, 0.5, gravity)
        assert np.linalg.norm(a.pos - b.pos) < 1e-9

    def test_energy_and_momentum_conservation_leo(self, gravity, leo_orbit):
        s0 = leo_orbit.state_at(0.0)
        e0 = specific_energy(s0, gravity)
        h0 = angular_momentum(s0)
        period = leo_orbit.period
        s = s0
        t = 0.0
        chunk = period / 16.0
        for _ in range(16):
            s = propagate(s, np.zeros(3), t, t + chunk, 1.0, gravity)
            t += chunk
            assert abs((specific_energy(s, gravity) - e0) / e0) < 1e-9
            assert abs((angular_momentum(s) - h0) / h0) < 1e-9

    def test_energy_conservation_molniya(self, gravity, molniya_orbit):
        s0 = molniya_orbit.state_at(0.0)
        e0 = specific_energy(s0, gravity)
        h0 = angular_momentum(s0)
        s = propagate(s0, np.zeros(3), 0.0, molniya_orbit.period, 10.0, gravity)
        assert abs((specific_energy(s, gravity) - e0) / e0) < 1e-9
        assert abs((angular_momentum(s) - h0) / h0) < 1e-9

    def test_rk4_order(self, gravity):
        a = 7000.0
        v = math.sqrt(MU_EARTH / a)
        s0 = StateVector([a, 0.0, 0.0], [0.0, v, 0.0])
        period = 2.0 * math.pi * math.sqrt(a**3 / MU_EARTH)

        def one_period_error(step):
            out = propagate(s0, np.zeros(3), 0.0, period, step, gravity)
            return np.linalg.norm(out.pos - s0.pos)

        e_coarse = one_period_error(8.0)
        e_fine = one_period_error(4.0)
        assert 12.0 < e_coarse / e_fine < 20.0

    def test_invalid_inputs(self, gravity):
        s = StateVector([7000.0, 0.0, 0.0], [0.0, 7.5, 0.0])
        with pytest.raises(DynamicsError):
            propagate(s, np.zeros(3), 1.0, 0.0, 1.0, gravity)
        with pytest.raises(DynamicsError):
            propagate(s, np.zeros(3), 0.0, 1.0, -1.0, gravity)


class TestElements:
    def test_circular_reference_case(self, gravity):
        el = OrbitalElements(sma=7000.0, ecc=0.0, inc=0.0, raan=0.0, argp=0.0)
        s = elements_to_state(el, gravity)
        assert s.pos == pytest.approx([7000.0, 0.0, 0.0], abs=1e-9)
        circ_speed = math.sqrt(MU_EARTH / 7000.0)  # 7.5461 km/s
        assert s.vel == pytest.approx([0.0, circ_speed, 0.0], abs=1e-12)
        assert circ_speed == pytest.approx(7.5461, abs=1e-4)

    def test_circular_speed_independent_of_anomaly(self, gravity):
        speeds = []
        for nu in np.linspace(0.0, 2.0 * math.pi, 17):
            el = OrbitalElements(7000.0, 0.0, 0.5, 1.0, 2.0, true_anomaly=float(nu))
            speeds.append(np.linalg.norm(elements_to_state(el, gravity).vel))
        assert max(speeds) - min(speeds) < 1e-12

    def test_reference_periods(self, gravity):
        assert orbit_period(LEO_ELEMENTS, gravity) / 60.0 == pytest.approx(92.97, abs=0.01)
        assert orbit_period(MOLNIYA_ELEMENTS, gravity) / 60.0 == pytest.approx(721.48, abs=0.05)

    def test_hyperbolic_rejected(self, gravity):
        el = OrbitalElements(sma=7000.0, ecc=1.2, inc=0.0, raan=0.0, argp=0.0)
        with pytest.raises(UnsupportedOrbitError):
            elements_to_state(el, gravity)

    def test_bad_elements_rejected(self):
        with pytest.raises(DynamicsError):
            OrbitalElements(sma=-1.0, ecc=0.0, inc=0.0, raan=0.0, argp=0.0)
        with pytest.raises(DynamicsError):
            OrbitalElements(sma=7000.0, ecc=-0.1, inc=0.0, raan=0.0, argp=0.0)


class TestReferenceOrbit:
    def test_kepler_solver_residual(self):
        for m in np.linspace(-10.0, 10.0, 37):
            for e in (0.0, 0.3, 0.74, 0.95):
                E = solve_kepler(m, e)
                assert abs(E - e * math.sin(E) - (m % (2 * math.pi))) < 1e-11

    def test_epoch_state_matches_elements(self, gravity, leo_orbit):
        direct = elements_to_state(LEO_ELEMENTS, gravity)
        viaorbit = leo_orbit.state_at(0.0)
        assert viaorbit.vec == pytest.approx(direct.vec, abs=1e-9)

    def test_periodicity(self, leo_orbit, molniya_orbit):
        for orbit in (leo_orbit, molniya_orbit):
            s0 = orbit.state_at(123.0)
            s1 = orbit.state_at(123.0 + orbit.period)
            assert np.linalg.norm(s1.vec - s0.vec) < 1e-7

    def test_matches_rk4_propagation(self, gravity, molniya_orbit):
        # conic solution against the numerical integrator over a half period
        s0 = molniya_orbit.state_at(0.0)
        t1 = molniya_orbit.period / 2.0
        rk = propagate(s0, np.zeros(3), 0.0, t1, 1.0, gravity)
        kp = molniya_orbit.state_at(t1)
        assert np.linalg.norm(rk.pos - kp.pos) < 1e-4
        assert np.linalg.norm(rk.vel - kp.vel) < 1e-7

    def test_states_at_vectorized(self, leo_orbit):
        times = np.linspace(-100.0, 100.0, 21)
        block = leo_orbit.states_at(times)
        assert block.shape == (21, 6)
        for i, t in enumerate(times):
            assert block[i] == pytest.approx(leo_orbit.state_at(float(t)).vec, abs=1e-12)

    def test_mean_anomaly_round_trip(self):
        for e in (0.0, 0.3, 0.74):
            for nu in np.linspace(-3.0, 3.0, 13):
                m = true_to_mean_anomaly(float(nu), e)
                E = solve_kepler(m, e)
                nu_back = 2.0 * math.atan2(
                    math.sqrt(1 + e) * math.sin(E / 2.0),
                    math.sqrt(1 - e) * math.cos(E / 2.0),
                )
                assert math.cos(nu_back) == pytest.approx(math.cos(nu), abs=1e-10)
                assert math.sin(nu_back) == pytest.approx(math.sin(nu), abs=1e-10)


class TestVnbFrame:
    def test_hand_worked_case(self):
        chief = StateVector([7000.0, 0.0, 0.0], [0.0, 7.5, 0.0])
        f = vnb_frame(chief)
        assert f.basis[:, 0] == pytest.approx([0.0, 1.0, 0.0])
        assert f.basis[:, 1] == pytest.approx([0.0, 0.0, 1.0])
        assert f.basis[:, 2] == pytest.approx([1.0, 0.0, 0.0])

    def test_degenerate_inputs(self):
        with pytest.raises(FrameUndefinedError):
            vnb_frame(StateVector([7000.0, 0.0, 0.0], [0.0, 0.0, 0.0]))
        with pytest.raises(FrameUndefinedError):
            vnb_frame(StateVector([7000.0, 0.0, 0.0], [1.0, 0.0, 0.0]))

    @settings(max_examples=100, deadline=None)
    @given(
        st.lists(st.floats(-1e4, 1e4), min_size=3, max_size=3),
        st.lists(st.floats(-10.0, 10.0), min_size=3, max_size=3),
    )
    def test_orthonormal_right_handed(self, p, v):
        pos = np.array(p)
        vel = np.array(v)
        if np.linalg.norm(pos) < 1.0 or np.linalg.norm(vel) < 1e-3:
            return
        if np.linalg.norm(np.cross(pos, vel)) < 1e-6 * np.linalg.norm(pos) * np.linalg.norm(vel):
            return
        f = vnb_frame(StateVector(pos, vel))
        assert f.basis.T @ f.basis == pytest.approx(np.eye(3), abs=1e-12)
        assert np.linalg.det(f.basis) == pytest.approx(1.0, abs=1e-12)

    def test_to_vnb_origin_and_alignment(self, leo_orbit):
        chief = leo_orbit.state_at(100.0)
        f = vnb_frame(chief)
        assert to_vnb(f, chief) == pytest.approx([0.0, 0.0, 0.0], abs=1e-12)
        vhat = chief.vel / np.linalg.norm(chief.vel)
        other = StateVector(chief.pos + 3.0 * vhat, chief.vel)
        assert to_vnb(f, other) == pytest.approx([3.0, 0.0, 0.0], abs=1e-10)

    def test_round_trip(self, leo_orbit):
        chief = leo_orbit.state_at(777.0)
        f = vnb_frame(chief)
        local = np.array([1.2, -3.4, 0.07])
        assert to_vnb(f, StateVector(from_vnb(f, local), chief.vel)) == pytest.approx(
            local, abs=1e-12
        )


class TestStateVector:
    def test_round_trip_vec(self):
        s = StateVector.from_vec([1, 2, 3, 4, 5, 6])
        assert np.array_equal(s.vec, np.arange(1.0, 7.0))

    def test_non_finite_rejected(self):
        with pytest.raises(DynamicsError):
            StateVector([np.nan, 0, 0], [0, 0, 0])

    def test_bad_shape_rejected(self):
        with pytest.raises(DynamicsError):
            StateVector.from_vec([1, 2, 3])
