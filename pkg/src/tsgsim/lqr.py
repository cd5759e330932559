"""Periodic LQ tracking controller machinery.

Linearizes the two-body dynamics along the reference orbit, discretizes by
the augmented-matrix (Van Loan) exponential, solves the discrete algebraic
Riccati equation by fixed-point iteration, and packages the gains into a
periodic schedule with zero-order-hold lookup.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .dynamics import (
    DynamicsError,
    GravityModel,
    OrbitalElements,
    ReferenceOrbit,
    StateVector,
)

EXPM_TOL = 1e-13
DARE_TOL = 1e-9
DARE_MAX_ITER = 10000


class DareError(RuntimeError):
    """Riccati iteration failed to converge or produced a singular inner matrix.

    Attributes:
        residual: last relative fixed-point defect, when applicable.
    """

    def __init__(self, message: str, residual: float | None = None):
        super().__init__(message)
        self.residual = residual


class ScheduleError(RuntimeError):
    """Gain-schedule construction or loading failed."""


def _check_symmetric(m: np.ndarray, name: str, tol: float = 1e-9) -> np.ndarray:
    m = np.asarray(m, dtype=float)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise DynamicsError(f"{name} must be square, got shape {m.shape}")
    if not np.allclose(m, m.T, atol=tol, rtol=0):
        raise DynamicsError(f"{name} must be symmetric")
    return 0.5 * (m + m.T)


@dataclass(frozen=True)
class LqrWeights:
    """State and control weighting matrices (state PSD, control PD)."""

    q: np.ndarray = field(default_factory=lambda: np.diag([10.0, 10.0, 10.0, 1.0, 1.0, 1.0]))
    r: np.ndarray = field(default_factory=lambda: np.eye(3))

    def __post_init__(self):
        q = _check_symmetric(self.q, "q")
        r = _check_symmetric(self.r, "r")
        if np.min(np.linalg.eigvalsh(q)) < -1e-12:
            raise DynamicsError("q must be positive semidefinite")
        if np.min(np.linalg.eigvalsh(r)) <= 0:
            raise DynamicsError("r must be positive definite")
        object.__setattr__(self, "q", q)
        object.__setattr__(self, "r", r)


@dataclass(frozen=True)
class LinearizedModel:
    """Discrete-time linearized relative dynamics about an anchor point."""

    a_d: np.ndarray
    b_d: np.ndarray
    dt: float
    anchor_time: float = 0.0

    def __post_init__(self):
        a = np.asarray(self.a_d, dtype=float)
        b = np.asarray(self.b_d, dtype=float)
        if a.shape != (6, 6) or b.shape != (6, 3):
            raise DynamicsError(f"bad linearized model shapes {a.shape}, {b.shape}")
        if not (np.all(np.isfinite(a)) and np.all(np.isfinite(b))):
            raise DynamicsError("linearized model must be finite")
        if self.dt <= 0:
            raise DynamicsError(f"dt must be positive, got {self.dt}")
        object.__setattr__(self, "a_d", a)
        object.__setattr__(self, "b_d", b)


def jacobian_gravity(pos, model: GravityModel) -> np.ndarray:
    """Gradient of point-mass gravity: mu * (3 p p^T / r^5 - I / r^3)."""
    p = np.asarray(pos, dtype=float).reshape(3)
    r = float(np.linalg.norm(p))
    if r <= 0.0:
        raise DynamicsError("gravity gradient undefined at zero-norm position")
    return model.mu * (3.0 * np.outer(p, p) / r**5 - np.eye(3) / r**3)


def expm_taylor(m: np.ndarray, tol: float = EXPM_TOL) -> np.ndarray:
    """Matrix exponential by scaling-and-squaring with a truncated Taylor series."""
    m = np.asarray(m, dtype=float)
    norm = float(np.linalg.norm(m, np.inf))
    squarings = max(0, int(math.ceil(math.log2(norm / 0.5))) if norm > 0.5 else 0)
    ms = m / (2.0**squarings)
    out = np.eye(m.shape[0])
    term = np.eye(m.shape[0])
    k = 1
    while True:
        term = term @ ms / k
        out = out + term
        if np.linalg.norm(term, np.inf) < tol * max(1.0, np.linalg.norm(out, np.inf)):
            break
        k += 1
        if k > 200:
            raise DynamicsError("matrix exponential series failed to converge")
    for _ in range(squarings):
        out = out @ out
    return out


def discretize(pos_anchor, dt: float, model: GravityModel, anchor_time: float = 0.0) -> LinearizedModel:
    """Exact zero-order-hold discretization of the linearized relative dynamics.

    Continuous dynamics about the anchor are d/dt [dp; dv] = A [dp; dv] + B u
    with A = [[0, I], [G, 0]] and B = [I stacked under 0]. A_d and B_d come
    from one exponential of the (9 x 9) augmented matrix [[A, B], [0, 0]].
    """
    if dt <= 0:
        raise DynamicsError(f"dt must be positive, got {dt}")
    g = jacobian_gravity(pos_anchor, model)
    a = np.zeros((6, 6))
    a[:3, 3:] = np.eye(3)
    a[3:, :3] = g
    b = np.zeros((6, 3))
    b[3:, :] = np.eye(3)
    aug = np.zeros((9, 9))
    aug[:6, :6] = a
    aug[:6, 6:] = b
    phi = expm_taylor(aug * dt)
    return LinearizedModel(a_d=phi[:6, :6], b_d=phi[:6, 6:], dt=dt, anchor_time=anchor_time)


def _riccati_map(a: np.ndarray, b: np.ndarray, q: np.ndarray, r: np.ndarray, s: np.ndarray) -> np.ndarray:
    btsb = b.T @ s @ b
    try:
        inner = np.linalg.solve(r + btsb, b.T @ s @ a)
    except np.linalg.LinAlgError as exc:
        raise DareError(f"singular inner matrix: {exc}") from exc
    s_next = q + a.T @ s @ a - a.T @ s @ b @ inner
    return 0.5 * (s_next + s_next.T)


def riccati_fixed_point(
    a,
    b,
    q,
    r,
    warm_start: np.ndarray | None = None,
    tol: float = DARE_TOL,
    max_iter: int = DARE_MAX_ITER,
) -> np.ndarray:
    """Fixed-point solution of the discrete algebraic Riccati equation.

    Iterates S <- Q + A'SA - A'SB (R + B'SB)^-1 B'SA from Q (or a warm
    start) until the relative sup-norm update falls below ``tol``. Works for
    any consistent matrix sizes, including scalars given as 1x1 arrays.
    """
    a = np.atleast_2d(np.asarray(a, dtype=float))
    b = np.atleast_2d(np.asarray(b, dtype=float))
    q = np.atleast_2d(np.asarray(q, dtype=float))
    r = np.atleast_2d(np.asarray(r, dtype=float))
    s = q.copy() if warm_start is None else np.atleast_2d(np.asarray(warm_start, dtype=float))
    defect = math.inf
    for _ in range(max_iter):
        s_next = _riccati_map(a, b, q, r, s)
        denom = max(1.0, float(np.linalg.norm(s_next, np.inf)))
        defect = float(np.linalg.norm(s_next - s, np.inf)) / denom
        s = s_next
        if defect < tol:
            return s
    raise DareError(
        f"Riccati iteration did not converge within {max_iter} iterations", residual=defect
    )


def dare_residual(a, b, q, r, s) -> float:
    """Relative sup-norm defect of the Riccati fixed point at ``s``."""
    a = np.atleast_2d(np.asarray(a, dtype=float))
    b = np.atleast_2d(np.asarray(b, dtype=float))
    q = np.atleast_2d(np.asarray(q, dtype=float))
    r = np.atleast_2d(np.asarray(r, dtype=float))
    s = np.atleast_2d(np.asarray(s, dtype=float))
    s_next = _riccati_map(a, b, q, r, s)
    denom = max(1.0, float(np.linalg.norm(s, np.inf)))
    return float(np.linalg.norm(s_next - s, np.inf)) / denom


def solve_dare(
    model: LinearizedModel,
    w: LqrWeights,
    warm_start: np.ndarray | None = None,
    tol: float = DARE_TOL,
    max_iter: int = DARE_MAX_ITER,
) -> np.ndarray:
    """Riccati solution for a discretized relative-dynamics model."""
    return riccati_fixed_point(model.a_d, model.b_d, w.q, w.r, warm_start, tol, max_iter)


def feedback_gain(a, b, r, s) -> np.ndarray:
    """Feedback gain K = (B'SB + R)^-1 B'S A."""
    a = np.atleast_2d(np.asarray(a, dtype=float))
    b = np.atleast_2d(np.asarray(b, dtype=float))
    r = np.atleast_2d(np.asarray(r, dtype=float))
    s = np.atleast_2d(np.asarray(s, dtype=float))
    inner = b.T @ s @ b + r
    try:
        return np.linalg.solve(inner, b.T @ s @ a)
    except np.linalg.LinAlgError as exc:
        raise DareError(f"singular gain inner matrix: {exc}") from exc


def gain_from_dare(model: LinearizedModel, w: LqrWeights, s: np.ndarray) -> np.ndarray:
    return feedback_gain(model.a_d, model.b_d, w.r, s)


@dataclass(frozen=True)
class GainSchedule:
    """Periodic feedback gains with zero-order-hold lookup, wrapped modulo period."""

    grid_times: np.ndarray
    gains: np.ndarray
    period: float

    def __post_init__(self):
        t = np.asarray(self.grid_times, dtype=float)
        g = np.asarray(self.gains, dtype=float)
        if t.ndim != 1 or len(t) == 0:
            raise ScheduleError("grid_times must be a nonempty 1-d array")
        if np.any(np.diff(t) <= 0):
            raise ScheduleError("grid_times must be strictly increasing")
        if g.shape != (len(t), 3, 6):
            raise ScheduleError(f"gains shape {g.shape} does not match grid of {len(t)}")
        if not (self.period > 0 and t[-1] < self.period):
            raise ScheduleError("grid must cover one period, with grid_times[-1] < period")
        object.__setattr__(self, "grid_times", t)
        object.__setattr__(self, "gains", g)

    def indices_at(self, times) -> np.ndarray:
        """Zero-order-hold gain indices for an array of times."""
        tt = np.mod(np.atleast_1d(np.asarray(times, dtype=float)), self.period)
        idx = np.searchsorted(self.grid_times, tt, side="right") - 1
        return np.clip(idx, 0, len(self.grid_times) - 1).astype(np.int64)

    def gain_at(self, t: float) -> np.ndarray:
        return self.gains[int(self.indices_at(t)[0])]

    def save(self, path) -> None:
        """Cache the schedule; reload with :func:`load_gain_schedule`."""
        np.savez(path, grid_times=self.grid_times, gains=self.gains, period=self.period)


def load_gain_schedule(path) -> GainSchedule:
    path = Path(path)
    try:
        with np.load(path) as data:
            return GainSchedule(
                grid_times=data["grid_times"],
                gains=data["gains"],
                period=float(data["period"]),
            )
    except (OSError, KeyError, ValueError) as exc:
        raise ScheduleError(f"cannot load gain schedule from {path}: {exc}") from exc


def build_gain_schedule(
    elements: OrbitalElements,
    w: LqrWeights,
    dt: float,
    model: GravityModel,
) -> GainSchedule:
    """Precompute the periodic gains over one orbital period on a uniform grid.

    Each grid point linearizes at the reference-orbit state, discretizes with
    ``dt``, and solves the Riccati equation warm-started from the previous
    point. Raises :class:`DareError` annotated with the failing grid time.
    """
    orbit = ReferenceOrbit(elements, model)
    period = orbit.period
    n = int(round(period / dt))
    if n < 1 or abs(n * dt - period) > dt:
        raise ScheduleError(f"dt={dt} does not divide the period {period} within one cell")
    grid = np.arange(n) * dt
    states = orbit.states_at(grid)
    gains = np.empty((n, 3, 6))
    warm = None
    for i in range(n):
        lin = discretize(states[i, :3], dt, model, anchor_time=float(grid[i]))
        try:
            s = solve_dare(lin, w, warm_start=warm)
        except DareError as exc:
            raise DareError(
                f"Riccati solve failed at grid time {grid[i]:.3f} s: {exc}",
                residual=exc.residual,
            ) from exc
        gains[i] = gain_from_dare(lin, w, s)
        warm = s
    return GainSchedule(grid_times=grid, gains=gains, period=period)


def saturate(u: np.ndarray, u_max: float) -> np.ndarray:
    """Scale ``u`` down to magnitude ``u_max``, preserving direction.

    The output magnitude never exceeds ``u_max``, even by roundoff.
    """
    n = float(np.linalg.norm(u))
    if n <= u_max or n == 0.0:
        return u
    out = u * (u_max / n)
    while float(np.linalg.norm(out)) > u_max:
        out = np.nextafter(out, 0.0)
    return out


def control_law(
    schedule: GainSchedule,
    t: float,
    deputy: StateVector,
    virtual_target: StateVector,
    u_max: float,
) -> np.ndarray:
    """Saturated feedback toward the virtual target.

    ``t`` is the gain-lookup time; when tracking a time-shifted target the
    caller passes the shifted time so the gain anchor matches the target's
    position on the reference orbit.
    """
    k = schedule.gain_at(t)
    u_raw = -(k @ (deputy.vec - virtual_target.vec))
    return saturate(u_raw, u_max)
