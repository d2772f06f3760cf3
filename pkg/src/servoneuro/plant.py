"""Discrete-time DC servo stand-in: first-order dynamics behind a static
dead-zone/saturation map, with Gaussian tachometer noise on the measurement."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class MotorParams:
    gain: float = 1.0  # steady-state tach volts per effective input volt
    tau: float = 0.5  # dominant time constant, seconds
    ts: float = 0.05  # sample period, seconds
    dead_zone: float = 2.5  # volts
    saturation: float = 6.5  # volts
    noise_sigma: float = 0.02  # tach noise std, volts

    def __post_init__(self):
        if self.tau <= 0 or self.ts <= 0:
            raise ValueError("tau and ts must be positive")
        if self.ts >= self.tau:
            raise ValueError("ts must be smaller than tau")
        if self.dead_zone < 0:
            raise ValueError("dead_zone must be nonnegative")
        if self.saturation <= self.dead_zone:
            raise ValueError("saturation must exceed dead_zone")
        if self.noise_sigma < 0:
            raise ValueError("noise_sigma must be nonnegative")

    @property
    def decay(self) -> float:
        """Per-sample pole a = exp(-ts/tau)."""
        return float(np.exp(-self.ts / self.tau))


@dataclass
class PlantState:
    y: float  # noise-free internal tach voltage
    rng: np.random.Generator


def make_state(seed: int, y0: float = 0.0) -> PlantState:
    return PlantState(float(y0), np.random.default_rng(seed))


def static_map(params: MotorParams, u: float) -> float:
    """Effective drive after the dead zone and saturation (unidirectional)."""
    if u <= params.dead_zone:
        return 0.0
    if u >= params.saturation:
        return params.saturation - params.dead_zone
    return u - params.dead_zone


def steady_state(params: MotorParams, u: float) -> float:
    """Noise-free fixed point of `step` under constant input u."""
    return params.gain * static_map(params, u)


def step(state: PlantState, params: MotorParams, u: float):
    """Advance one sample; returns (new_state, measured_y)."""
    if not np.isfinite(u):
        raise ValueError("plant input must be finite")
    a = params.decay
    y_next = a * state.y + (1.0 - a) * params.gain * static_map(params, u)
    measured = y_next
    if params.noise_sigma > 0.0:
        measured = y_next + state.rng.normal(0.0, params.noise_sigma)
    return PlantState(y_next, state.rng), float(measured)
