"""Cart-pole and continuous mountain car.

Both step functions are written over arrays with a leading batch axis so the
same code serves the simulator and the oracle model used in planning tests.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .base import Environment


@dataclass(frozen=True)
class CartPoleParams:
    gravity: float = 9.8
    masscart: float = 1.0
    masspole: float = 0.1
    half_length: float = 0.5
    dt: float = 0.02
    substeps: int = 1  # Euler steps per control step, force held constant
    theta_limit: float = 0.2094  # 12 degrees
    x_limit: float = 2.4
    reset_range: float = 0.05
    action_low: float = -10.0
    action_high: float = 10.0


def cartpole_dynamics(states: np.ndarray, force: np.ndarray, p: CartPoleParams) -> np.ndarray:
    """``substeps`` explicit Euler steps on ``(theta, x, theta_dot, x_dot)`` rows."""
    force = np.reshape(force, np.shape(states)[:-1])
    for _ in range(p.substeps):
        states = _cartpole_euler(states, force, p)
    return states


def _cartpole_euler(states, force, p: CartPoleParams):
    theta, x, theta_dot, x_dot = np.moveaxis(states, -1, 0)
    total_mass = p.masscart + p.masspole
    polemass_length = p.masspole * p.half_length
    cos, sin = np.cos(theta), np.sin(theta)
    temp = (force + polemass_length * theta_dot ** 2 * sin) / total_mass
    theta_acc = (p.gravity * sin - cos * temp) / (
        p.half_length * (4.0 / 3.0 - p.masspole * cos ** 2 / total_mass))
    x_acc = temp - polemass_length * theta_acc * cos / total_mass
    return np.stack([theta + p.dt * theta_dot,
                     x + p.dt * x_dot,
                     theta_dot + p.dt * theta_acc,
                     x_dot + p.dt * x_acc], axis=-1)


class CartPole(Environment):
    id = "cartpole"
    names = ("theta", "x", "theta_dot", "x_dot")
    action_names = ("force",)
    Params = CartPoleParams
    has_reward = True

    @property
    def dt(self) -> float:
        return self.params.dt * self.params.substeps

    def _reset(self):
        r = self.params.reset_range
        return self.rng.uniform(-r, r, size=4)

    def _step(self, state, action):
        p = self.params
        nxt = cartpole_dynamics(state, action[0], p)
        ok = abs(nxt[0]) < p.theta_limit and abs(nxt[1]) < p.x_limit
        return nxt, 1.0 if ok else 0.0, not ok

    def batch_step(self, states, actions):
        return cartpole_dynamics(states, actions[..., 0], self.params)


@dataclass(frozen=True)
class MountainCarParams:
    power: float = 0.0015
    gravity: float = 0.0025
    max_speed: float = 0.07
    min_position: float = -1.2
    max_position: float = 0.6
    goal_position: float = 0.4
    goal_reward: float = 100.0
    action_cost: float = 0.1
    reset_low: float = -0.6
    reset_high: float = -0.4
    dt: float = 1.0
    action_low: float = -1.0
    action_high: float = 1.0


def mountain_car_dynamics(states: np.ndarray, throttle: np.ndarray, p: MountainCarParams) -> np.ndarray:
    x, v = np.moveaxis(states, -1, 0)
    throttle = np.clip(np.reshape(throttle, np.shape(x)), p.action_low, p.action_high)
    v = v + p.power * throttle - p.gravity * np.cos(3 * x)
    v = np.clip(v, -p.max_speed, p.max_speed)
    x = np.clip(x + v, p.min_position, p.max_position)
    v = np.where((x <= p.min_position) & (v < 0), 0.0, v)
    return np.stack([x, v], axis=-1)


class MountainCar(Environment):
    id = "mountain_car"
    names = ("x", "x_dot")
    action_names = ("throttle",)
    Params = MountainCarParams
    has_reward = True

    def _reset(self):
        p = self.params
        return np.array([self.rng.uniform(p.reset_low, p.reset_high), 0.0])

    def _step(self, state, action):
        p = self.params
        nxt = mountain_car_dynamics(state, action[0], p)
        done = bool(nxt[0] > p.goal_position)
        reward = -p.action_cost * float(action[0]) ** 2
        if done:
            reward += p.goal_reward
        return nxt, reward, done

    def batch_step(self, states, actions):
        return mountain_car_dynamics(states, actions[..., 0], self.params)
