"""Time shift governor: virtual targets, bisection search, and the hybrid update.

The governor's single decision variable is the time shift t_back <= 0. The
virtual target is the reference orbit evaluated at the shifted time, so
driving the shift to zero completes the rendezvous. The conventional
governor bisects over candidate shifts, verifying each by forward
simulation; the hybrid update first asks a learned predictor, verifies its
answer, and falls back to holding or bisection per stall/failure counters.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .constraints import ConstraintConfig, ShiftVerifier
from .dynamics import DynamicsError, ReferenceOrbit, StateVector
from .lqr import GainSchedule
from .lstm import ModelRegistry, SlidingWindow, denormalize, lstm_forward, select_model


@dataclass(frozen=True)
class TimeShiftState:
    """Current shift, stall/failure counters, and the search tolerances."""

    t_back: float = 0.0
    k1: int = 0
    k2: int = 0
    n1_cap: int = 50
    n2_cap: int = 10
    epsilon: float = 1e-10
    bisect_tol: float = 1e-3
    bisect_max_iter: int = 40

    def __post_init__(self):
        if self.t_back > 0:
            raise DynamicsError(f"t_back must be <= 0, got {self.t_back}")
        if min(self.k1, self.k2) < 0 or min(self.n1_cap, self.n2_cap) < 1:
            raise DynamicsError("counters must be nonnegative and caps positive")
        if self.epsilon <= 0 or self.bisect_tol <= 0 or self.bisect_max_iter < 1:
            raise DynamicsError("epsilon, bisect_tol and bisect_max_iter must be positive")


@dataclass(frozen=True)
class GovernorConfig:
    """Update period, verification horizon, and the initial search bound."""

    p_tsg: float
    t_tsg: float
    initial_lower_bound: float

    def __post_init__(self):
        if self.p_tsg <= 0 or self.t_tsg <= 0:
            raise DynamicsError("p_tsg and t_tsg must be positive")
        if self.initial_lower_bound >= 0:
            raise DynamicsError("initial_lower_bound must be negative")


@dataclass(frozen=True)
class GovernorContext:
    """Everything a governor update needs besides its own mutable state."""

    orbit: ReferenceOrbit
    schedule: GainSchedule
    constraints: ConstraintConfig
    governor: GovernorConfig
    control_dt: float
    substeps: int = 1

    def verifier(self, t: float, deputy: StateVector) -> ShiftVerifier:
        return ShiftVerifier(
            self.orbit,
            self.schedule,
            self.constraints,
            t,
            deputy,
            self.governor.t_tsg,
            self.control_dt,
            self.substeps,
        )


@dataclass(frozen=True)
class GovernorRecord:
    """One governor update, as appended to the trajectory log."""

    time: float
    predicted: float | None
    adopted: float
    safe: bool | None
    path: str
    wall_s: float = 0.0
    note: str | None = None


@dataclass(frozen=True)
class BisectionOutcome:
    t_back: float
    warning: bool
    verify_calls: int


def virtual_target(orbit: ReferenceOrbit, t: float, t_back: float) -> StateVector:
    """Reference-orbit state at the shifted time t + t_back."""
    if t_back > 0:
        raise DynamicsError(f"t_back must be <= 0, got {t_back}")
    return orbit.state_at(t + t_back)


def _bisect(verifier: ShiftVerifier, lo: float, state: TimeShiftState) -> BisectionOutcome:
    """Max verified-feasible shift in [lo, 0] by bisection.

    Checks zero first (the rendezvous-complete shift), then the lower bound;
    if even the lower bound fails, it is returned unchanged with the warning
    flag raised. Otherwise standard bisection on the feasibility boundary,
    returning the last shift that actually verified.
    """
    if lo > 0:
        raise DynamicsError(f"lower bound must be <= 0, got {lo}")
    start_calls = verifier.calls
    if verifier.check(0.0).ok:
        return BisectionOutcome(0.0, False, verifier.calls - start_calls)
    if lo == 0.0:
        return BisectionOutcome(0.0, True, verifier.calls - start_calls)
    if not verifier.check(lo).ok:
        return BisectionOutcome(lo, True, verifier.calls - start_calls)
    hi = 0.0
    feasible = lo
    for _ in range(state.bisect_max_iter):
        if hi - lo <= state.bisect_tol:
            break
        mid = 0.5 * (lo + hi)
        if verifier.check(mid).ok:
            lo = mid
            feasible = mid
        else:
            hi = mid
    return BisectionOutcome(feasible, False, verifier.calls - start_calls)


def bisection_tsg(
    ctx: GovernorContext,
    t: float,
    deputy: StateVector,
    lo: float,
    state: TimeShiftState,
) -> BisectionOutcome:
    """Conventional governor update: bisection over [lo, 0]."""
    return _bisect(ctx.verifier(t, deputy), lo, state)


def closest_shift_guess(
    orbit: ReferenceOrbit, t0: float, deputy: StateVector, lower_bound: float
) -> float:
    """Shift whose reference-orbit point lies closest to the deputy position.

    Pure geometry (no verification): a two-stage vectorized scan over
    [lower_bound, 0]. For a deputy near the trailing corridor this lands
    inside the feasible island around the trail time.
    """
    if lower_bound >= 0:
        raise DynamicsError(f"lower_bound must be negative, got {lower_bound}")

    def argmin_on(grid: np.ndarray) -> float:
        states = orbit.states_at(t0 + grid)
        d = np.linalg.norm(states[:, :3] - deputy.pos, axis=1)
        return float(grid[int(np.argmin(d))])

    coarse = np.linspace(lower_bound, 0.0, 513)
    best = argmin_on(coarse)
    cell = -lower_bound / 512.0
    fine = np.linspace(max(lower_bound, best - cell), min(0.0, best + cell), 257)
    return argmin_on(fine)


def initial_shift(
    ctx: GovernorContext,
    t0: float,
    deputy: StateVector,
    state: TimeShiftState | None = None,
) -> float | None:
    """Feasible starting shift within [initial_lower_bound, 0], or None.

    The feasible shifts form an island around the deputy's trail time, in
    general touching neither zero nor the lower bound, so a plain bisection
    from the lower bound cannot start. Instead: accept zero if it verifies,
    otherwise seed from the geometric trail-time guess, scan a bounded set
    of neighbors for a verified shift, and polish the island's upper edge by
    bisection. None is the infeasibility marker consumed by the Monte Carlo
    filter.
    """
    state = state or TimeShiftState()
    verifier = ctx.verifier(t0, deputy)
    if verifier.check(0.0).ok:
        return 0.0
    lb = ctx.governor.initial_lower_bound
    guess = closest_shift_guess(ctx.orbit, t0, deputy, lb)
    candidates = [guess]
    for factor in (0.75, 1.25, 0.5, 1.5, 0.25, 2.0):
        candidates.append(guess * factor)
    for off in (0.5, 1.0, 2.0):
        candidates.append(guess - off * ctx.control_dt)
    seed = None
    seen = set()
    for cand in candidates:
        cand = min(0.0, max(cand, lb))
        key = round(cand, 9)
        if key in seen or cand == 0.0:
            continue
        seen.add(key)
        if verifier.check(cand).ok:
            seed = cand
            break
    if seed is None:
        return None
    return _bisect(verifier, seed, state).t_back


def hybrid_step(
    ctx: GovernorContext,
    state: TimeShiftState,
    window: SlidingWindow,
    t: float,
    deputy: StateVector,
    registry: ModelRegistry,
) -> tuple[TimeShiftState, GovernorRecord]:
    """One hybrid governor update: predict, verify, and fall back as needed.

    A safe moving prediction is adopted and resets both counters. A safe but
    stalled prediction (change below epsilon) bumps the stall counter and
    triggers bisection at the cap. An unsafe prediction holds the previous
    shift, bumps the failure counter, and triggers bisection at its cap.
    While the sliding window is still shorter than every admissible model's
    window the previous shift is held without verification; a registry with
    no model covering the current phase falls back to bisection outright.
    """
    prev = state.t_back
    chief = ctx.orbit.state_at(t)
    rel_distance = float(np.linalg.norm(deputy.pos - chief.pos))

    phase_models = [m for m in registry.models if m.phase_contains(rel_distance)]
    if not phase_models:
        verifier = ctx.verifier(t, deputy)
        outcome = _bisect(verifier, prev, state)
        new = replace(state, t_back=outcome.t_back, k1=0, k2=0)
        rec = GovernorRecord(
            time=t,
            predicted=None,
            adopted=outcome.t_back,
            safe=not outcome.warning,
            path="bisection",
            note="no model covers the current phase",
        )
        return new, rec

    model = select_model(registry, rel_distance, window.current_len)
    if model is None:
        # window still filling for this phase: hold the previous shift
        rec = GovernorRecord(
            time=t, predicted=None, adopted=prev, safe=None, path="hold",
            note="window filling",
        )
        return state, rec

    raw = denormalize(model, lstm_forward(model, window))
    pred = min(0.0, max(raw, prev))
    verifier = ctx.verifier(t, deputy)
    # a prediction inside the bisection tolerance of zero is a completion
    # signal: prefer exact zero when it verifies, which is the value a
    # bisection would return at the same accuracy
    res = None
    if -state.bisect_tol < pred < 0.0:
        res = verifier.check(0.0)
        if res.ok:
            pred = 0.0
        else:
            res = None
    if res is None:
        res = verifier.check(pred)

    if res.ok:
        k2 = 0
        if abs(pred - prev) < state.epsilon:
            k1 = state.k1 + 1
            if k1 >= state.n1_cap:
                outcome = _bisect(verifier, prev, state)
                new = replace(state, t_back=outcome.t_back, k1=0, k2=k2)
                rec = GovernorRecord(
                    time=t, predicted=pred, adopted=outcome.t_back, safe=True,
                    path="bisection", note="stall cap reached",
                )
                return new, rec
            new = replace(state, t_back=pred, k1=k1, k2=k2)
            return new, GovernorRecord(
                time=t, predicted=pred, adopted=pred, safe=True, path="model"
            )
        new = replace(state, t_back=pred, k1=0, k2=k2)
        return new, GovernorRecord(
            time=t, predicted=pred, adopted=pred, safe=True, path="model"
        )

    k2 = state.k2 + 1
    if k2 >= state.n2_cap:
        outcome = _bisect(verifier, prev, state)
        new = replace(state, t_back=outcome.t_back, k2=0)
        rec = GovernorRecord(
            time=t, predicted=pred, adopted=outcome.t_back, safe=False,
            path="bisection", note="failure cap reached",
        )
        return new, rec
    new = replace(state, t_back=prev, k2=k2)
    return new, GovernorRecord(
        time=t, predicted=pred, adopted=prev, safe=False, path="hold"
    )
