"""Scenario configuration: schema, JSON round trip, and the shipped presets.

The two presets mirror the reference missions: a LEO (ISS-like) approach
from ~44 km behind the chief and a highly eccentric Molniya approach from
~10 km behind. The chief's initial true anomaly is part of the preset; it
is chosen so the nominal relative state sits in the trailing approach
corridor.
"""

from __future__ import annotations

import json
import math
import os
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .constraints import ConstraintConfig
from .dynamics import (
    MU_EARTH,
    DynamicsError,
    GravityModel,
    OrbitalElements,
    ReferenceOrbit,
    orbit_period,
)
from .governor import GovernorConfig, GovernorContext, TimeShiftState
from .lqr import GainSchedule, LqrWeights, build_gain_schedule

CONFIG_DIR_ENV = "TSGSIM_CONFIG_DIR"


class ConfigurationError(ValueError):
    """Scenario configuration is inconsistent or cannot be loaded."""


@dataclass(frozen=True)
class MonteCarloConfig:
    """Campaign size, perturbation scales, and the seed.

    ``sigma_pos`` defaults to a tenth of the nominal initial relative
    distance and ``sigma_vel`` to a hundredth of the nominal initial
    relative speed; None keeps those derived defaults.
    """

    runs: int = 20
    sigma_pos: float | None = None
    sigma_vel: float | None = None
    rng_seed: int = 2024

    def __post_init__(self):
        if self.runs < 1:
            raise ConfigurationError(f"runs must be >= 1, got {self.runs}")


@dataclass(frozen=True)
class ScenarioConfig:
    """Everything one mission needs: orbit, offsets, rates, and sub-configs."""

    name: str
    elements: OrbitalElements
    mu: float
    nominal_rel_state: np.ndarray
    control_dt: float
    integrator_dt: float
    weights: LqrWeights = field(default_factory=LqrWeights)
    constraints: ConstraintConfig = field(default_factory=ConstraintConfig)
    governor: GovernorConfig | None = None
    shift_defaults: TimeShiftState = field(default_factory=TimeShiftState)
    mc: MonteCarloConfig = field(default_factory=MonteCarloConfig)
    sim_duration: float | None = None
    completion_threshold: float = 0.1

    def __post_init__(self):
        rel = np.asarray(self.nominal_rel_state, dtype=float).reshape(-1)
        if rel.shape != (6,):
            raise ConfigurationError(f"nominal_rel_state must have 6 entries, got {rel.shape}")
        object.__setattr__(self, "nominal_rel_state", rel)
        if not self.control_dt >= self.integrator_dt > 0:
            raise ConfigurationError(
                f"need control_dt >= integrator_dt > 0, got {self.control_dt}, {self.integrator_dt}"
            )
        ratio = self.control_dt / self.integrator_dt
        if abs(ratio - round(ratio)) > 1e-9:
            raise ConfigurationError(
                f"control_dt must be an integer multiple of integrator_dt, got ratio {ratio}"
            )
        if self.governor is None:
            period = orbit_period(self.elements, GravityModel(self.mu))
            object.__setattr__(
                self,
                "governor",
                GovernorConfig(
                    p_tsg=self.control_dt,
                    t_tsg=period,
                    initial_lower_bound=-period / 10.0,
                ),
            )
        if self.sim_duration is not None and self.sim_duration < 0:
            raise ConfigurationError(f"sim_duration must be >= 0, got {self.sim_duration}")

    @property
    def gravity(self) -> GravityModel:
        return GravityModel(self.mu)

    @property
    def orbit(self) -> ReferenceOrbit:
        return ReferenceOrbit(self.elements, self.gravity)

    @property
    def period(self) -> float:
        return orbit_period(self.elements, self.gravity)

    @property
    def duration(self) -> float:
        return 2.0 * self.period if self.sim_duration is None else self.sim_duration

    @property
    def substeps(self) -> int:
        return int(round(self.control_dt / self.integrator_dt))

    @property
    def sigma_pos(self) -> float:
        if self.mc.sigma_pos is not None:
            return self.mc.sigma_pos
        return 0.1 * float(np.linalg.norm(self.nominal_rel_state[:3]))

    @property
    def sigma_vel(self) -> float:
        if self.mc.sigma_vel is not None:
            return self.mc.sigma_vel
        return 0.01 * float(np.linalg.norm(self.nominal_rel_state[3:]))

    def build_schedule(self) -> GainSchedule:
        return build_gain_schedule(self.elements, self.weights, self.control_dt, self.gravity)

    def governor_context(self, schedule: GainSchedule) -> GovernorContext:
        return GovernorContext(
            orbit=self.orbit,
            schedule=schedule,
            constraints=self.constraints,
            governor=self.governor,
            control_dt=self.control_dt,
            substeps=self.substeps,
        )


def preset_leo_crew3() -> ScenarioConfig:
    """ISS-like LEO approach: deputy starts ~44 km behind on the orbital track.

    The governor re-plans every 30 s (three control steps); per-step
    re-planning walks the shift to zero so quickly that the fuel use falls
    well below the reference mission's.
    """
    elements = OrbitalElements(
        sma=6798.281637,
        ecc=0.000551,
        inc=0.900516,
        raan=5.909781,
        argp=1.872335,
        true_anomaly=2.157623,
    )
    period = orbit_period(elements, GravityModel(MU_EARTH))
    return ScenarioConfig(
        name="leo_crew3",
        elements=elements,
        mu=MU_EARTH,
        nominal_rel_state=np.array([-25.9809, 27.8498, 22.7715, -0.0350, -0.0066, -0.0234]),
        control_dt=10.0,
        integrator_dt=1.0,
        constraints=ConstraintConfig(los_epsilon=0.02),
        governor=GovernorConfig(
            p_tsg=30.0, t_tsg=period, initial_lower_bound=-period / 10.0
        ),
    )


def preset_molniya() -> ScenarioConfig:
    """Highly eccentric Molniya approach: deputy starts ~10 km behind."""
    return ScenarioConfig(
        name="molniya",
        elements=OrbitalElements(
            sma=26646.680769,
            ecc=0.74,
            inc=1.096067,
            raan=0.0,
            argp=4.88692,
            true_anomaly=5.919401,
        ),
        mu=MU_EARTH,
        nominal_rel_state=np.array([-9.7168, -0.3110, 0.5869, 0.0014, -0.0035, -0.0068]),
        control_dt=60.0,
        integrator_dt=10.0,
        constraints=ConstraintConfig(los_epsilon=0.02),
    )


PRESETS = {
    "leo_crew3": preset_leo_crew3,
    "molniya": preset_molniya,
}


def scenario_to_dict(cfg: ScenarioConfig) -> dict:
    el = cfg.elements
    return {
        "name": cfg.name,
        "mu_km3_s2": cfg.mu,
        "elements": {
            "sma_km": el.sma,
            "ecc": el.ecc,
            "inc_rad": el.inc,
            "raan_rad": el.raan,
            "argp_rad": el.argp,
            "true_anomaly_rad": el.true_anomaly,
        },
        "nominal_rel_state": cfg.nominal_rel_state.tolist(),
        "control_dt_s": cfg.control_dt,
        "integrator_dt_s": cfg.integrator_dt,
        "sim_duration_s": cfg.sim_duration,
        "completion_threshold_km": cfg.completion_threshold,
        "weights": {"q": cfg.weights.q.tolist(), "r": cfg.weights.r.tolist()},
        "constraints": {
            "alpha_rad": cfg.constraints.alpha,
            "u_max_km_s2": cfg.constraints.u_max,
            "gamma1_km": cfg.constraints.gamma1,
            "gamma2_per_s": cfg.constraints.gamma2,
            "gamma3_km_s": cfg.constraints.gamma3,
            "los_epsilon_km": cfg.constraints.los_epsilon,
        },
        "governor": {
            "p_tsg_s": cfg.governor.p_tsg,
            "t_tsg_s": cfg.governor.t_tsg,
            "initial_lower_bound_s": cfg.governor.initial_lower_bound,
        },
        "shift_state": {
            "n1_cap": cfg.shift_defaults.n1_cap,
            "n2_cap": cfg.shift_defaults.n2_cap,
            "epsilon_s": cfg.shift_defaults.epsilon,
            "bisect_tol_s": cfg.shift_defaults.bisect_tol,
            "bisect_max_iter": cfg.shift_defaults.bisect_max_iter,
        },
        "mc": {
            "runs": cfg.mc.runs,
            "sigma_pos_km": cfg.mc.sigma_pos,
            "sigma_vel_km_s": cfg.mc.sigma_vel,
            "rng_seed": cfg.mc.rng_seed,
        },
    }


def scenario_from_dict(doc: dict) -> ScenarioConfig:
    try:
        el = doc["elements"]
        gov = doc.get("governor") or {}
        shift = doc.get("shift_state") or {}
        mc = doc.get("mc") or {}
        weights = doc.get("weights") or {}
        cons = doc.get("constraints") or {}
        governor = None
        if gov.get("p_tsg_s") is not None:
            governor = GovernorConfig(
                p_tsg=float(gov["p_tsg_s"]),
                t_tsg=float(gov["t_tsg_s"]),
                initial_lower_bound=float(gov["initial_lower_bound_s"]),
            )
        return ScenarioConfig(
            name=str(doc.get("name", "custom")),
            elements=OrbitalElements(
                sma=float(el["sma_km"]),
                ecc=float(el["ecc"]),
                inc=float(el["inc_rad"]),
                raan=float(el["raan_rad"]),
                argp=float(el["argp_rad"]),
                true_anomaly=float(el.get("true_anomaly_rad", 0.0)),
            ),
            mu=float(doc.get("mu_km3_s2", MU_EARTH)),
            nominal_rel_state=np.asarray(doc["nominal_rel_state"], dtype=float),
            control_dt=float(doc["control_dt_s"]),
            integrator_dt=float(doc["integrator_dt_s"]),
            sim_duration=None if doc.get("sim_duration_s") is None else float(doc["sim_duration_s"]),
            completion_threshold=float(doc.get("completion_threshold_km", 0.1)),
            weights=LqrWeights(
                q=np.asarray(weights.get("q", np.diag([10.0, 10, 10, 1, 1, 1])), dtype=float),
                r=np.asarray(weights.get("r", np.eye(3)), dtype=float),
            ),
            constraints=ConstraintConfig(
                alpha=float(cons.get("alpha_rad", math.radians(20.0))),
                u_max=float(cons.get("u_max_km_s2", 5e-4)),
                gamma1=float(cons.get("gamma1_km", 5.0)),
                gamma2=float(cons.get("gamma2_per_s", 20.0)),
                gamma3=float(cons.get("gamma3_km_s", 1e-3)),
                los_epsilon=float(cons.get("los_epsilon_km", 1e-3)),
            ),
            shift_defaults=TimeShiftState(
                n1_cap=int(shift.get("n1_cap", 50)),
                n2_cap=int(shift.get("n2_cap", 10)),
                epsilon=float(shift.get("epsilon_s", 1e-10)),
                bisect_tol=float(shift.get("bisect_tol_s", 1e-3)),
                bisect_max_iter=int(shift.get("bisect_max_iter", 40)),
            ),
            mc=MonteCarloConfig(
                runs=int(mc.get("runs", 20)),
                sigma_pos=None if mc.get("sigma_pos_km") is None else float(mc["sigma_pos_km"]),
                sigma_vel=None if mc.get("sigma_vel_km_s") is None else float(mc["sigma_vel_km_s"]),
                rng_seed=int(mc.get("rng_seed", 2024)),
            ),
        )
    except (KeyError, TypeError, ValueError, DynamicsError) as exc:
        raise ConfigurationError(f"invalid scenario document: {exc}") from exc


def save_scenario(cfg: ScenarioConfig, path) -> None:
    Path(path).write_text(json.dumps(scenario_to_dict(cfg), indent=1))


def load_scenario(name_or_path: str) -> ScenarioConfig:
    """Scenario by preset name, explicit path, or file in $TSGSIM_CONFIG_DIR."""
    if name_or_path in PRESETS:
        return PRESETS[name_or_path]()
    path = Path(name_or_path)
    if not path.exists():
        config_dir = os.environ.get(CONFIG_DIR_ENV)
        if config_dir:
            for cand in (
                Path(config_dir) / name_or_path,
                Path(config_dir) / f"{name_or_path}.json",
            ):
                if cand.exists():
                    path = cand
                    break
    if not path.exists():
        raise ConfigurationError(
            f"no such scenario {name_or_path!r}; presets: {sorted(PRESETS)}"
        )
    try:
        doc = json.loads(path.read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigurationError(f"cannot parse {path}: {exc}") from exc
    return scenario_from_dict(doc)
