"""Mission constraints and forward-simulation verification of time shifts.

Three constraints guard the approach: the line-of-sight corridor (a cone of
half-angle alpha opening along the docking axis, anti-parallel to the chief
velocity), the thrust magnitude limit (enforced by saturation inside the
control law, so it holds by construction), and the soft docking envelope
bounding relative speed once inside gamma1 of the chief.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import _fast
from .dynamics import DynamicsError, ReferenceOrbit, StateVector
from .lqr import GainSchedule


@dataclass(frozen=True)
class ConstraintConfig:
    """Constraint parameters.

    ``gamma2`` has units 1/s: it converts the relative distance into the
    allowed relative-speed budget of the soft docking envelope.
    """

    alpha: float = math.radians(20.0)
    u_max: float = 5.0e-4
    gamma1: float = 5.0
    gamma2: float = 20.0
    gamma3: float = 1.0e-3
    los_epsilon: float = 1.0e-3

    def __post_init__(self):
        if not 0.0 < self.alpha < math.pi / 2.0:
            raise DynamicsError(f"alpha must be in (0, pi/2), got {self.alpha}")
        if self.u_max <= 0:
            raise DynamicsError(f"u_max must be positive, got {self.u_max}")
        if min(self.gamma1, self.gamma2, self.gamma3) < 0:
            raise DynamicsError("gamma parameters must be nonnegative")
        if self.los_epsilon <= 0:
            raise DynamicsError(f"los_epsilon must be positive, got {self.los_epsilon}")

    @property
    def cos_alpha(self) -> float:
        return math.cos(self.alpha)


@dataclass(frozen=True)
class ConstraintReport:
    """Constraint values at one sample; ``h3`` is None while inactive."""

    h1: float
    h2: float
    h3: float | None
    satisfied: bool
    worst: str

    @property
    def h3_active(self) -> bool:
        return self.h3 is not None


def los_constraint(chief: StateVector, deputy: StateVector, cfg: ConstraintConfig) -> float:
    """Approach-corridor value; nonpositive iff the deputy is inside the cone.

    The cone opens along the docking axis, anti-parallel to the chief
    velocity. Inside ``los_epsilon`` of the chief the cone apex is
    meaningless and the constraint is satisfied by convention.
    """
    vn = float(np.linalg.norm(chief.vel))
    if vn <= 0.0:
        raise DynamicsError("approach corridor undefined for zero chief velocity")
    p_rel = deputy.pos - chief.pos
    pn = float(np.linalg.norm(p_rel))
    if pn < cfg.los_epsilon:
        return cfg.cos_alpha - 1.0
    return float(chief.vel @ p_rel) / (vn * pn) + cfg.cos_alpha


def thrust_constraint(u, cfg: ConstraintConfig) -> float:
    """Thrust-magnitude margin ||u|| - u_max."""
    return float(np.linalg.norm(np.asarray(u, dtype=float))) - cfg.u_max


def soft_docking_constraint(
    chief: StateVector, deputy: StateVector, cfg: ConstraintConfig
) -> float | None:
    """Relative-speed envelope value, or None while outside gamma1."""
    p_rel = deputy.pos - chief.pos
    pn = float(np.linalg.norm(p_rel))
    if pn > cfg.gamma1:
        return None
    v_rel = deputy.vel - chief.vel
    return float(np.linalg.norm(v_rel)) - cfg.gamma2 * pn - cfg.gamma3


def evaluate_constraints(
    chief: StateVector, deputy: StateVector, u, cfg: ConstraintConfig
) -> ConstraintReport:
    """All three constraints at one sample, with the least-margin identifier."""
    h1 = los_constraint(chief, deputy, cfg)
    h2 = thrust_constraint(u, cfg)
    h3 = soft_docking_constraint(chief, deputy, cfg)
    values = {"h1": h1, "h2": h2}
    if h3 is not None:
        values["h3"] = h3
    worst = max(values, key=values.get)
    return ConstraintReport(
        h1=h1, h2=h2, h3=h3, satisfied=values[worst] <= 0.0, worst=worst
    )


@dataclass(frozen=True)
class Violation:
    """First constraint violation found along a predicted trajectory."""

    index: int
    time: float
    constraint: str
    value: float


@dataclass(frozen=True)
class VerifyResult:
    ok: bool
    violation: Violation | None = None
    cause: str | None = None


class ShiftVerifier:
    """Checks candidate time shifts by simulating the saturated closed loop.

    Precomputes everything that does not depend on the candidate (the chief
    trajectory over the horizon and the sample grid), so bisection over many
    candidates from the same state stays cheap. The prediction uses the same
    per-control-step RK4 discretization as the mission loop, so a verified
    trajectory is exactly what the closed loop will fly under that shift.
    """

    def __init__(
        self,
        orbit: ReferenceOrbit,
        schedule: GainSchedule,
        cfg: ConstraintConfig,
        t: float,
        deputy: StateVector,
        horizon: float,
        step: float,
        substeps: int = 1,
    ):
        if horizon <= 0:
            raise DynamicsError(f"horizon must be positive, got {horizon}")
        if step <= 0:
            raise DynamicsError(f"step must be positive, got {step}")
        if substeps < 1:
            raise DynamicsError(f"substeps must be >= 1, got {substeps}")
        self.orbit = orbit
        self.schedule = schedule
        self.cfg = cfg
        self.t = float(t)
        self.deputy = deputy
        self.step = float(step)
        self.substeps = int(substeps)
        n = max(1, int(math.ceil(horizon / step - 1e-9)))
        self.times = self.t + np.arange(n + 1) * self.step
        self._chief = orbit.states_at(self.times)
        self.calls = 0

    def check(self, t_back: float) -> VerifyResult:
        """Simulate with the shifted virtual target; true iff no sampled violation."""
        if t_back > 0:
            raise DynamicsError(f"time shift must be <= 0, got {t_back}")
        shifted = self.times + t_back
        target = self.orbit.states_at(shifted)
        gain_idx = self.schedule.indices_at(shifted[:-1])
        cfg = self.cfg
        ok, viol_idx, viol_code, xd, _, _, h1, h3, _ = _fast.closed_loop_scan(
            self.deputy.vec,
            self._chief,
            target,
            self.schedule.gains,
            gain_idx,
            self.step,
            self.substeps,
            self.orbit.model.mu,
            cfg.u_max,
            cfg.cos_alpha,
            cfg.los_epsilon,
            cfg.gamma1,
            cfg.gamma2,
            cfg.gamma3,
            True,
        )
        self.calls += 1
        if not np.all(np.isfinite(xd[: max(viol_idx, 0) + 1])):
            return VerifyResult(ok=False, cause="non-finite state during prediction")
        if ok:
            return VerifyResult(ok=True)
        name = "h1" if viol_code == _fast.VIOL_LOS else "h3"
        value = h1[viol_idx] if name == "h1" else h3[viol_idx]
        return VerifyResult(
            ok=False,
            violation=Violation(
                index=int(viol_idx),
                time=float(self.times[viol_idx]),
                constraint=name,
                value=float(value),
            ),
        )


def verify_shift(
    orbit: ReferenceOrbit,
    schedule: GainSchedule,
    cfg: ConstraintConfig,
    t: float,
    deputy: StateVector,
    t_back: float,
    horizon: float,
    step: float,
    substeps: int = 1,
) -> VerifyResult:
    """One-shot shift verification; see :class:`ShiftVerifier`."""
    return ShiftVerifier(orbit, schedule, cfg, t, deputy, horizon, step, substeps).check(t_back)
