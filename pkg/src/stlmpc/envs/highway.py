"""Single-lane adaptive cruise control and a kinematic parking lot."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .base import Environment


@dataclass(frozen=True)
class AccParams:
    dt: float = 0.1
    substeps: int = 1  # integration steps per control step, throttle held
    lag: float = 0.2  # first-order throttle lag time constant, seconds
    action_low: float = -3.0
    action_high: float = 3.0
    ado_accel_low: float = -3.0
    ado_accel_high: float = 3.0
    ado_hold_min: int = 5  # steps between ado acceleration changes
    ado_hold_max: int = 20
    ado_speed_max: float = 40.0
    reset_gap_low: float = 25.0
    reset_gap_high: float = 40.0
    reset_speed_low: float = 15.0
    reset_speed_high: float = 25.0


class AdaptiveCruiseControl(Environment):
    """Ego car behind an erratic lead ("ado") car.

    State: ``(x_ego, v_ego, a_ego, d_rel, v_rel, a_rel)`` with relative
    quantities measured as ado minus ego. ``a_rel`` is the one-step finite
    difference of ``v_rel``. The ado car holds a uniformly drawn acceleration
    for a uniformly drawn number of steps; that policy state lives on the
    instance, so this environment is not a pure function of the state.
    """

    id = "acc"
    names = ("x_ego", "v_ego", "a_ego", "d_rel", "v_rel", "a_rel")
    action_names = ("throttle",)
    Params = AccParams
    deterministic = False

    @property
    def dt(self) -> float:
        return self.params.dt * self.params.substeps

    def _reset(self):
        p = self.params
        gap = self.rng.uniform(p.reset_gap_low, p.reset_gap_high)
        # both cars start at one common speed
        speed = self.rng.uniform(p.reset_speed_low, p.reset_speed_high)
        self.ado_accel = 0.0
        self.ado_hold = 0
        return np.array([0.0, speed, 0.0, gap, 0.0, 0.0])

    def _next_ado_accel(self) -> float:
        p = self.params
        if self.ado_hold <= 0:
            self.ado_accel = float(self.rng.uniform(p.ado_accel_low, p.ado_accel_high))
            self.ado_hold = int(self.rng.integers(p.ado_hold_min, p.ado_hold_max + 1))
        self.ado_hold -= 1
        return self.ado_accel

    def _step(self, state, action):
        p = self.params
        dt = p.dt
        u = float(action[0])
        x, v, a, d, v_rel, _ = state
        v_rel0 = v_rel
        crashed = False
        for _ in range(p.substeps):
            a = a + (dt / p.lag) * (u - a)
            v_new = max(0.0, v + a * dt)
            x = x + 0.5 * (v + v_new) * dt
            v_ado = v + v_rel
            v_ado_new = min(max(v_ado + self._next_ado_accel() * dt, 0.0), p.ado_speed_max)
            v_rel_new = v_ado_new - v_new
            d = d + 0.5 * (v_rel + v_rel_new) * dt
            v, v_rel = v_new, v_rel_new
            crashed = crashed or d <= 0.0
        nxt = np.array([x, v, a, d, v_rel, (v_rel - v_rel0) / self.dt])
        return nxt, None, crashed


@dataclass(frozen=True)
class ParkingParams:
    dt: float = 0.1
    wheelbase: float = 0.05
    accel_scale: float = 0.05
    max_speed: float = 0.1
    action_low: tuple[float, float] = (-1.0, -0.5)
    action_high: tuple[float, float] = (1.0, 0.5)
    goal_radius_low: float = 0.2
    goal_radius_high: float = 0.5


def parking_dynamics(states: np.ndarray, actions: np.ndarray, p: ParkingParams) -> np.ndarray:
    """Kinematic bicycle step on ``(x, y, v_x, v_y, cos, sin, x_g, y_g)`` rows."""
    x, y, vx, vy, c, s, xg, yg = np.moveaxis(states, -1, 0)
    accel, steer = np.moveaxis(actions, -1, 0)
    v = vx * c + vy * s
    v = np.clip(v + accel * p.dt * p.accel_scale, -p.max_speed, p.max_speed)
    dtheta = (v / p.wheelbase) * np.tan(steer) * p.dt
    cd, sd = np.cos(dtheta), np.sin(dtheta)
    c_rot = c * cd - s * sd
    s_rot = s * cd + c * sd
    norm = np.hypot(c_rot, s_rot)
    # no yaw: keep the heading bits untouched
    c_new = np.where(dtheta == 0, c, c_rot / norm)
    s_new = np.where(dtheta == 0, s, s_rot / norm)
    vx_new = v * c_new
    vy_new = v * s_new
    return np.stack([x + vx_new * p.dt, y + vy_new * p.dt, vx_new, vy_new,
                     c_new, s_new, xg, yg], axis=-1)


class Parking(Environment):
    """Car starting at the origin with random heading; goal spot on a ring."""

    id = "parking"
    names = ("x", "y", "v_x", "v_y", "cos_h", "sin_h", "x_g", "y_g")
    action_names = ("accel", "steer")
    Params = ParkingParams

    def _reset(self):
        p = self.params
        heading = self.rng.uniform(-math.pi, math.pi)
        radius = self.rng.uniform(p.goal_radius_low, p.goal_radius_high)
        bearing = self.rng.uniform(-math.pi, math.pi)
        return np.array([0.0, 0.0, 0.0, 0.0, math.cos(heading), math.sin(heading),
                         radius * math.cos(bearing), radius * math.sin(bearing)])

    def _step(self, state, action):
        return parking_dynamics(state, action, self.params), None, False

    def batch_step(self, states, actions):
        return parking_dynamics(states, actions, self.params)
