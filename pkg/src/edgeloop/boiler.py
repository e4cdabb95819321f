"""Synthetic drum-boiler environment stepped at the 5-second control cadence.

The plant is a set of first-order difference equations coupling water
level, pressure, and outlet temperature, with discrete pump/valve
actuators. It is deliberately desk-scale, and deliberately not in
equilibrium at the mid (0.5, 0.5) actuator setting: the feed pump is
slightly oversized relative to the valve, so the level creeps upward
until the controller sheds water. Holding any single actuator setting
eventually breaches the safety envelope; regulation requires actively
duty-cycling the actuators, which is what separates the control policies
under comparison.

Update equations (dt in seconds, applied once per control period):

    outflow      = valve_gain * valve * sqrt(pressure / pressure_setpoint)
    level'       = clamp(level + (pump_gain * pump - outflow) * dt, 0, 1)
    p_target     = pressure_setpoint * (outlet / outlet_setpoint)
                   * (1 + pressure_valve_span * (0.5 - valve))
    pressure'    = max(0, pressure + pressure_rate * (p_target - pressure) * dt)
    temp_target  = inlet + heat_gain_c - level_cooling_c * level
    outlet'      = clamp(outlet + temp_rate * (temp_target - outlet) * dt, 0, 600)
    inlet'       = clamp(inlet + inlet_rate * (inlet_nominal - inlet) * dt
                         + noise, 0, 600)

Process noise enters only through the inlet temperature so the water mass
balance stays exact.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Sequence

import numpy as np

ACTUATOR_LEVELS = (0.0, 0.5, 1.0)
N_ACTIONS = len(ACTUATOR_LEVELS) ** 2  # joint pump x valve grid
HISTORY_LENGTH = 10
TEMP_MAX_C = 600.0


@dataclass(frozen=True)
class SafetyEnvelope:
    level_min: float = 0.15
    level_max: float = 0.95
    pressure_max_kpa: float = 1600.0  # 1.6 x nominal
    outlet_temp_max_c: float = 420.0  # 1.4 x nominal

    def __post_init__(self):
        if not (0.0 <= self.level_min < self.level_max <= 1.0):
            raise ValueError("level bounds must satisfy 0 <= min < max <= 1")
        if self.pressure_max_kpa <= 0 or self.outlet_temp_max_c <= 0:
            raise ValueError("pressure and temperature bounds must be positive")

    def violates(self, state: "BoilerState") -> bool:
        return (
            state.water_level < self.level_min
            or state.water_level > self.level_max
            or state.pressure > self.pressure_max_kpa
            or state.outlet_temp > self.outlet_temp_max_c
        )


@dataclass(frozen=True)
class BoilerConfig:
    dt_s: float = 5.0
    # setpoints, doubling as the nominal operating point
    level_setpoint: float = 0.5
    pressure_setpoint_kpa: float = 1000.0
    outlet_setpoint_c: float = 300.0
    inlet_nominal_c: float = 100.0
    # dynamics coefficients (per second); the pump is sized above the valve
    # so centered actuators drift the level upward (~0.25% of range per
    # period) and holding still is not a viable policy
    pump_gain: float = 0.0035
    valve_gain: float = 0.0025
    pressure_rate: float = 0.04
    pressure_valve_span: float = 0.4
    temp_rate: float = 0.02
    heat_gain_c: float = 250.0
    level_cooling_c: float = 100.0
    inlet_rate: float = 0.05
    inlet_noise_std_c: float = 2.0
    reset_noise_scale: float = 1.0
    # reward weights on squared normalized deviations plus actuator motion
    w_level: float = 1.0
    w_pressure: float = 0.3
    w_temp: float = 0.2
    w_action: float = 0.1
    failure_penalty: float = 500.0
    deviation_clamp: float = 100.0  # per-term bound keeping rewards finite
    envelope: SafetyEnvelope = SafetyEnvelope()

    def __post_init__(self):
        if self.dt_s <= 0:
            raise ValueError("dt_s must be positive")
        for name in ("w_level", "w_pressure", "w_temp", "w_action"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be non-negative")


@dataclass(frozen=True)
class BoilerState:
    inlet_temp: float
    outlet_temp: float
    water_level: float
    pressure: float
    pump_pos: float
    valve_pos: float

    def __post_init__(self):
        if not (0.0 <= self.water_level <= 1.0):
            raise ValueError(f"water_level out of [0,1]: {self.water_level}")
        if self.pressure < 0.0:
            raise ValueError(f"pressure must be non-negative: {self.pressure}")
        for name in ("inlet_temp", "outlet_temp"):
            value = getattr(self, name)
            if not (0.0 <= value <= TEMP_MAX_C):
                raise ValueError(f"{name} out of [0,{TEMP_MAX_C}]: {value}")


@dataclass(frozen=True)
class ActuatorCommand:
    pump_level: float
    valve_level: float

    def __post_init__(self):
        if self.pump_level not in ACTUATOR_LEVELS or self.valve_level not in ACTUATOR_LEVELS:
            raise ValueError(
                f"actuator levels must be one of {ACTUATOR_LEVELS}: "
                f"({self.pump_level}, {self.valve_level})"
            )

    @classmethod
    def from_index(cls, index: int) -> "ActuatorCommand":
        if not (0 <= index < N_ACTIONS):
            raise ValueError(f"action index out of [0,{N_ACTIONS - 1}]: {index}")
        return cls(ACTUATOR_LEVELS[index // 3], ACTUATOR_LEVELS[index % 3])

    def to_index(self) -> int:
        return ACTUATOR_LEVELS.index(self.pump_level) * 3 + ACTUATOR_LEVELS.index(
            self.valve_level
        )


def nominal_state(config: BoilerConfig) -> BoilerState:
    return BoilerState(
        inlet_temp=config.inlet_nominal_c,
        outlet_temp=config.outlet_setpoint_c,
        water_level=config.level_setpoint,
        pressure=config.pressure_setpoint_kpa,
        pump_pos=0.5,
        valve_pos=0.5,
    )


def reset(config: BoilerConfig, rng: np.random.Generator) -> BoilerState:
    """Return the nominal operating point perturbed by seeded noise.

    Perturbations are clipped well inside the safety envelope so an episode
    never starts in failure.
    """
    scale = config.reset_noise_scale
    state = nominal_state(config)
    if scale == 0.0:
        return state
    level = float(np.clip(state.water_level + rng.normal(0.0, 0.03 * scale), 0.30, 0.70))
    pressure = float(
        np.clip(state.pressure + rng.normal(0.0, 20.0 * scale), 700.0, 1300.0)
    )
    outlet = float(np.clip(state.outlet_temp + rng.normal(0.0, 8.0 * scale), 240.0, 360.0))
    inlet = float(np.clip(state.inlet_temp + rng.normal(0.0, 3.0 * scale), 80.0, 120.0))
    return replace(
        state, water_level=level, pressure=pressure, outlet_temp=outlet, inlet_temp=inlet
    )


def reward(config: BoilerConfig, state: BoilerState, cmd: ActuatorCommand) -> float:
    """Dense control cost: 0 at the setpoint with no actuator motion, else negative.

    Each squared normalized deviation is clamped so the reward stays bounded
    for any in-domain state. The failure penalty is added by step(), not here.
    """
    clamp = config.deviation_clamp
    dl = (state.water_level - config.level_setpoint) / config.level_setpoint
    dp = (state.pressure - config.pressure_setpoint_kpa) / config.pressure_setpoint_kpa
    dt_ = (state.outlet_temp - config.outlet_setpoint_c) / config.outlet_setpoint_c
    move = (cmd.pump_level - state.pump_pos) ** 2 + (cmd.valve_level - state.valve_pos) ** 2
    return -(
        config.w_level * min(dl * dl, clamp)
        + config.w_pressure * min(dp * dp, clamp)
        + config.w_temp * min(dt_ * dt_, clamp)
        + config.w_action * move
    )


def outflow_rate(config: BoilerConfig, valve: float, pressure: float) -> float:
    """Valve outflow in level fraction per second at the given pressure."""
    return config.valve_gain * valve * math.sqrt(
        max(pressure, 0.0) / config.pressure_setpoint_kpa
    )


def step(
    config: BoilerConfig,
    state: BoilerState,
    cmd: ActuatorCommand,
    rng: np.random.Generator | None = None,
    inlet_disturbance_c: float = 0.0,
) -> tuple[BoilerState, float, bool]:
    """Advance the plant one control period.

    Returns (next_state, reward, failed). Failure is absorbing: stepping an
    envelope-violating state returns it unchanged with the bare penalty.
    The reward is the control cost of the state the command was issued
    from, minus the failure penalty when the step ends in failure.
    """
    if config.envelope.violates(state):
        return state, -config.failure_penalty, True

    dt = config.dt_s
    out = outflow_rate(config, cmd.valve_level, state.pressure)
    level = state.water_level + (config.pump_gain * cmd.pump_level - out) * dt
    level = min(max(level, 0.0), 1.0)

    p_target = (
        config.pressure_setpoint_kpa
        * (state.outlet_temp / config.outlet_setpoint_c)
        * (1.0 + config.pressure_valve_span * (0.5 - cmd.valve_level))
    )
    pressure = max(
        0.0, state.pressure + config.pressure_rate * (p_target - state.pressure) * dt
    )

    temp_target = state.inlet_temp + config.heat_gain_c - config.level_cooling_c * state.water_level
    outlet = state.outlet_temp + config.temp_rate * (temp_target - state.outlet_temp) * dt
    outlet = min(max(outlet, 0.0), TEMP_MAX_C)

    noise = 0.0
    if rng is not None and config.inlet_noise_std_c > 0.0:
        noise = float(rng.normal(0.0, config.inlet_noise_std_c))
    inlet = (
        state.inlet_temp
        + config.inlet_rate * (config.inlet_nominal_c - state.inlet_temp) * dt
        + noise
        + inlet_disturbance_c
    )
    inlet = min(max(inlet, 0.0), TEMP_MAX_C)

    next_state = BoilerState(
        inlet_temp=inlet,
        outlet_temp=outlet,
        water_level=level,
        pressure=pressure,
        pump_pos=cmd.pump_level,
        valve_pos=cmd.valve_level,
    )
    failed = config.envelope.violates(next_state)
    r = reward(config, state, cmd)
    if failed:
        r -= config.failure_penalty
    return next_state, r, failed


def state_features(config: BoilerConfig, state: BoilerState) -> np.ndarray:
    """Normalized feature vector: deviations from the nominal point, O(1) scale."""
    return np.array(
        [
            state.water_level - config.level_setpoint,
            (state.pressure - config.pressure_setpoint_kpa) / config.pressure_setpoint_kpa,
            (state.outlet_temp - config.outlet_setpoint_c) / config.outlet_setpoint_c,
            (state.inlet_temp - config.inlet_nominal_c) / config.inlet_nominal_c,
            state.pump_pos - 0.5,
            state.valve_pos - 0.5,
        ],
        dtype=np.float64,
    )


N_STATE_FEATURES = 6
OBSERVATION_LENGTH = N_STATE_FEATURES + HISTORY_LENGTH * (N_STATE_FEATURES + 1)


def observe(
    config: BoilerConfig,
    current: BoilerState,
    history: Sequence[tuple[BoilerState, float]],
) -> np.ndarray:
    """Fixed-length observation: current features plus the last 10 (state, reward) pairs.

    History is given oldest-first; the window is laid out most recent first
    and zero-padded when fewer than 10 entries exist.
    """
    obs = np.zeros(OBSERVATION_LENGTH, dtype=np.float64)
    obs[:N_STATE_FEATURES] = state_features(config, current)
    span = N_STATE_FEATURES + 1
    recent = history[-HISTORY_LENGTH:]
    for slot, (past_state, past_reward) in enumerate(reversed(recent)):
        base = N_STATE_FEATURES + slot * span
        obs[base : base + N_STATE_FEATURES] = state_features(config, past_state)
        obs[base + N_STATE_FEATURES] = past_reward
    return obs
