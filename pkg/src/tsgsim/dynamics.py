"""Two-body dynamics, Keplerian reference orbits, and the chief-centered VNB frame.

Canonical units are km, km/s, km/s^2, seconds, and radians throughout. All
functions here are pure; the dataclasses are immutable after construction and
safe to share across threads.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import _fast

MU_EARTH = 398600.4418
"""Earth gravitational parameter, km^3/s^2."""

KEPLER_TOL = 1e-12
KEPLER_MAX_ITER = 50


class DynamicsError(ValueError):
    """Invalid input to a dynamics operation (zero-radius position, bad elements)."""


class UnsupportedOrbitError(DynamicsError):
    """Orbit is not a closed ellipse (ecc >= 1)."""


class FrameUndefinedError(DynamicsError):
    """VNB frame is degenerate (zero velocity or position parallel to velocity)."""


class IntegrationError(RuntimeError):
    """Numerical propagation produced a non-finite state.

    Attributes:
        time: simulation time at which the state became non-finite.
    """

    def __init__(self, message: str, time: float):
        super().__init__(message)
        self.time = time


def _as_vec3(x, name: str) -> np.ndarray:
    v = np.asarray(x, dtype=float).reshape(-1)
    if v.shape != (3,):
        raise DynamicsError(f"{name} must be a 3-vector, got shape {v.shape}")
    if not np.all(np.isfinite(v)):
        raise DynamicsError(f"{name} must be finite, got {v}")
    return v


@dataclass(frozen=True)
class GravityModel:
    """Point-mass gravity field."""

    mu: float = MU_EARTH

    def __post_init__(self):
        if not (math.isfinite(self.mu) and self.mu > 0):
            raise DynamicsError(f"mu must be positive and finite, got {self.mu}")


@dataclass(frozen=True)
class StateVector:
    """Inertial position (km) and velocity (km/s) of one spacecraft in ECI."""

    pos: np.ndarray
    vel: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "pos", _as_vec3(self.pos, "pos"))
        object.__setattr__(self, "vel", _as_vec3(self.vel, "vel"))

    @classmethod
    def from_vec(cls, vec) -> "StateVector":
        v = np.asarray(vec, dtype=float).reshape(-1)
        if v.shape != (6,):
            raise DynamicsError(f"state vector must have 6 components, got {v.shape}")
        return cls(v[:3], v[3:])

    @property
    def vec(self) -> np.ndarray:
        """The state as a flat [x, y, z, vx, vy, vz] array (copy)."""
        return np.concatenate([self.pos, self.vel])


@dataclass(frozen=True)
class OrbitalElements:
    """Classical orbital elements (km, rad)."""

    sma: float
    ecc: float
    inc: float
    raan: float
    argp: float
    true_anomaly: float = 0.0

    def __post_init__(self):
        vals = (self.sma, self.ecc, self.inc, self.raan, self.argp, self.true_anomaly)
        if not all(math.isfinite(v) for v in vals):
            raise DynamicsError(f"orbital elements must be finite, got {vals}")
        if self.sma <= 0:
            raise DynamicsError(f"sma must be positive, got {self.sma}")
        if self.ecc < 0:
            raise DynamicsError(f"ecc must be nonnegative, got {self.ecc}")


@dataclass(frozen=True)
class VnbFrame:
    """Chief-centered Velocity-Normal-Binormal frame.

    ``basis`` columns are the local unit axes expressed in ECI; the frame
    rotates with the chief, so components taken through it are instantaneous
    projections.
    """

    basis: np.ndarray
    origin: StateVector


def gravity_accel(pos, model: GravityModel) -> np.ndarray:
    """Point-mass gravitational acceleration at ``pos``: -mu/r^3 * pos."""
    p = _as_vec3(pos, "pos")
    r = float(np.linalg.norm(p))
    if r <= 0.0:
        raise DynamicsError("gravity undefined at zero-norm position")
    return (-model.mu / r**3) * p


def eom(t: float, state: StateVector, u, model: GravityModel) -> np.ndarray:
    """Time derivative of the state under gravity plus the control acceleration ``u``."""
    uu = _as_vec3(u, "u")
    acc = gravity_accel(state.pos, model) + uu
    return np.concatenate([state.vel, acc])


def _rk4_step(y: np.ndarray, t: float, dt: float, u: np.ndarray, mu: float) -> np.ndarray:
    def f(yy):
        r = math.sqrt(yy[0] ** 2 + yy[1] ** 2 + yy[2] ** 2)
        c = -mu / r**3
        return np.array(
            [yy[3], yy[4], yy[5], c * yy[0] + u[0], c * yy[1] + u[1], c * yy[2] + u[2]]
        )

    k1 = f(y)
    k2 = f(y + 0.5 * dt * k1)
    k3 = f(y + 0.5 * dt * k2)
    k4 = f(y + dt * k3)
    return y + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


def propagate(
    state: StateVector,
    u,
    t0: float,
    t1: float,
    step: float,
    model: GravityModel,
) -> StateVector:
    """Fixed-step RK4 propagation of ``state`` from ``t0`` to ``t1``.

    ``u`` is a constant control acceleration held over the whole interval
    (callers integrate one control interval at a time). A final partial step
    covers any remainder when (t1 - t0) is not a multiple of ``step``.
    """
    if t1 < t0:
        raise DynamicsError(f"t1 must be >= t0, got t0={t0}, t1={t1}")
    if step <= 0:
        raise DynamicsError(f"step must be positive, got {step}")
    uu = _as_vec3(u, "u")
    y = state.vec
    span = t1 - t0
    if span == 0.0:
        return state
    n_full = int(span / step)
    # guard against n_full overshooting by one due to floating point
    if n_full * step > span:
        n_full -= 1
    t = t0
    for _ in range(n_full):
        y = _rk4_step(y, t, step, uu, model.mu)
        t += step
        if not np.all(np.isfinite(y)):
            raise IntegrationError(f"non-finite state at t={t}", time=t)
    rem = t1 - t
    if rem > 1e-12 * max(1.0, abs(t1)):
        y = _rk4_step(y, t, rem, uu, model.mu)
        if not np.all(np.isfinite(y)):
            raise IntegrationError(f"non-finite state at t={t1}", time=t1)
    return StateVector.from_vec(y)


def perifocal_rotation(raan: float, inc: float, argp: float) -> np.ndarray:
    """Rotation matrix taking perifocal coordinates to ECI (3-1-3 sequence)."""
    co, so = math.cos(raan), math.sin(raan)
    ci, si = math.cos(inc), math.sin(inc)
    cw, sw = math.cos(argp), math.sin(argp)
    return np.array(
        [
            [co * cw - so * sw * ci, -co * sw - so * cw * ci, so * si],
            [so * cw + co * sw * ci, -so * sw + co * cw * ci, -co * si],
            [sw * si, cw * si, ci],
        ]
    )


def elements_to_state(el: OrbitalElements, model: GravityModel) -> StateVector:
    """ECI state for classical elements via the perifocal construction."""
    if el.ecc >= 1.0:
        raise UnsupportedOrbitError(f"only closed orbits are supported, got ecc={el.ecc}")
    p = el.sma * (1.0 - el.ecc**2)
    nu = el.true_anomaly
    r = p / (1.0 + el.ecc * math.cos(nu))
    r_pf = np.array([r * math.cos(nu), r * math.sin(nu), 0.0])
    v_pf = math.sqrt(model.mu / p) * np.array(
        [-math.sin(nu), el.ecc + math.cos(nu), 0.0]
    )
    rot = perifocal_rotation(el.raan, el.inc, el.argp)
    return StateVector(rot @ r_pf, rot @ v_pf)


def orbit_period(el: OrbitalElements, model: GravityModel) -> float:
    """Keplerian orbital period 2*pi*sqrt(a^3/mu)."""
    if el.ecc >= 1.0:
        raise UnsupportedOrbitError(f"period undefined for ecc={el.ecc}")
    return 2.0 * math.pi * math.sqrt(el.sma**3 / model.mu)


def true_to_mean_anomaly(nu: float, ecc: float) -> float:
    """Mean anomaly for a given true anomaly on an elliptic orbit."""
    e_anom = 2.0 * math.atan2(
        math.sqrt(1.0 - ecc) * math.sin(nu / 2.0),
        math.sqrt(1.0 + ecc) * math.cos(nu / 2.0),
    )
    return e_anom - ecc * math.sin(e_anom)


def solve_kepler(mean_anomaly: float, ecc: float) -> float:
    """Eccentric anomaly solving Kepler's equation by Newton iteration.

    Tolerance 1e-12 on the equation residual, at most 50 iterations.
    """
    if not 0.0 <= ecc < 1.0:
        raise UnsupportedOrbitError(f"Kepler solve requires 0 <= ecc < 1, got {ecc}")
    return float(_fast.kepler_e(float(mean_anomaly), float(ecc), KEPLER_TOL, KEPLER_MAX_ITER))


@dataclass(frozen=True)
class ReferenceOrbit:
    """Unforced reference orbit evaluated by the exact conic solution.

    Time zero corresponds to the epoch where the orbit passes through
    ``elements.true_anomaly``. Evaluation at arbitrary (including negative)
    times solves Kepler's equation, so repeated lookups never accumulate
    integration drift.
    """

    elements: OrbitalElements
    model: GravityModel
    _rot: np.ndarray = field(init=False, repr=False, compare=False)
    _mean0: float = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        if self.elements.ecc >= 1.0:
            raise UnsupportedOrbitError(
                f"reference orbit must be elliptic, got ecc={self.elements.ecc}"
            )
        object.__setattr__(
            self,
            "_rot",
            perifocal_rotation(self.elements.raan, self.elements.inc, self.elements.argp),
        )
        object.__setattr__(
            self,
            "_mean0",
            true_to_mean_anomaly(self.elements.true_anomaly, self.elements.ecc),
        )

    @property
    def period(self) -> float:
        return orbit_period(self.elements, self.model)

    @property
    def mean_motion(self) -> float:
        return math.sqrt(self.model.mu / self.elements.sma**3)

    def states_at(self, times) -> np.ndarray:
        """Reference states at an array of times, one row per time, shape (n, 6)."""
        tt = np.atleast_1d(np.asarray(times, dtype=float))
        return _fast.reference_states(
            tt,
            self.elements.sma,
            self.elements.ecc,
            self._mean0,
            self.mean_motion,
            self._rot,
            self.model.mu,
            KEPLER_TOL,
            KEPLER_MAX_ITER,
        )

    def state_at(self, t: float) -> StateVector:
        """Reference state at a single time."""
        return StateVector.from_vec(self.states_at([t])[0])


def vnb_frame(chief: StateVector) -> VnbFrame:
    """VNB frame of the chief: x along velocity, y along orbit normal."""
    vn = float(np.linalg.norm(chief.vel))
    if vn <= 0.0:
        raise FrameUndefinedError("VNB frame undefined for zero velocity")
    xhat = chief.vel / vn
    cross = np.cross(chief.pos, xhat)
    cn = float(np.linalg.norm(cross))
    if cn <= 1e-12 * float(np.linalg.norm(chief.pos)):
        raise FrameUndefinedError("VNB frame undefined: position parallel to velocity")
    yhat = cross / cn
    zhat = np.cross(xhat, yhat)
    return VnbFrame(np.column_stack([xhat, yhat, zhat]), chief)


def to_vnb(frame: VnbFrame, other: StateVector) -> np.ndarray:
    """Position of ``other`` relative to the frame origin, in VNB components."""
    return frame.basis.T @ (other.pos - frame.origin.pos)


def from_vnb(frame: VnbFrame, local) -> np.ndarray:
    """ECI position for VNB components relative to the frame origin."""
    return frame.origin.pos + frame.basis @ _as_vec3(local, "local")


def specific_energy(state: StateVector, model: GravityModel) -> float:
    """Specific orbital energy v^2/2 - mu/r."""
    r = float(np.linalg.norm(state.pos))
    v = float(np.linalg.norm(state.vel))
    if r <= 0:
        raise DynamicsError("energy undefined at zero radius")
    return 0.5 * v * v - model.mu / r


def angular_momentum(state: StateVector) -> float:
    """Magnitude of the specific angular momentum r x v."""
    return float(np.linalg.norm(np.cross(state.pos, state.vel)))
