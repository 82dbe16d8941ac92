from __future__ import annotations

import dataclasses
from typing import Any, ClassVar, NamedTuple

import numpy as np

from ..trace import Dataset, as_vector


class StepResult(NamedTuple):
    state: np.ndarray
    reward: float | None
    done: bool


class Environment:
    """Simulator contract shared by the built-in benchmarks.

    Subclasses set the class attributes and implement :meth:`_reset` and
    :meth:`_step`. ``step`` clips the action to the box before stepping. An
    instance owns a seeded RNG stream and is therefore single-owner.
    """

    id: ClassVar[str]
    names: ClassVar[tuple[str, ...]]
    action_names: ClassVar[tuple[str, ...]]
    Params: ClassVar[type]
    has_reward: ClassVar[bool] = False
    # True when the step is a pure function of (state, action)
    deterministic: ClassVar[bool] = True

    def __init__(self, **constants: Any):
        self.params = self.Params(**constants)
        self.rng = np.random.default_rng(0)
        self.state: np.ndarray | None = None

    @property
    def state_dim(self) -> int:
        return len(self.names)

    @property
    def action_dim(self) -> int:
        return len(self.action_names)

    @property
    def action_low(self) -> np.ndarray:
        return np.array(self.params.action_low, dtype=float).reshape(-1)

    @property
    def action_high(self) -> np.ndarray:
        return np.array(self.params.action_high, dtype=float).reshape(-1)

    @property
    def dt(self) -> float:
        return float(self.params.dt)

    def reset(self, seed: int | None = None) -> np.ndarray:
        if seed is not None:
            self.rng = np.random.default_rng(seed)
        self.state = as_vector(self._reset(), self.state_dim, "reset state")
        return self.state.copy()

    def step(self, state, action) -> StepResult:
        state = as_vector(state, self.state_dim, "state")
        action = np.clip(as_vector(np.atleast_1d(action), self.action_dim, "action"),
                         self.action_low, self.action_high)
        nxt, reward, done = self._step(state, action)
        nxt = np.asarray(nxt, dtype=float)
        self.state = nxt
        return StepResult(nxt.copy(), reward, bool(done))

    def batch_step(self, states: np.ndarray, actions: np.ndarray) -> np.ndarray:
        """Vectorized next states; only available for deterministic envs."""
        raise NotImplementedError(f"{self.id} has no pure batched step")

    def _reset(self) -> np.ndarray:
        raise NotImplementedError

    def _step(self, state: np.ndarray, action: np.ndarray):
        raise NotImplementedError

    def constants(self) -> dict:
        return dataclasses.asdict(self.params)


class OracleModel:
    """Adapter exposing an environment's own batched step as a model."""

    def __init__(self, env: Environment):
        if not env.deterministic:
            raise ValueError(f"{env.id} is not deterministic; no oracle model available")
        self.env = env
        self.state_dim = env.state_dim
        self.action_dim = env.action_dim

    def predict(self, states, actions):
        actions = np.clip(actions, self.env.action_low, self.env.action_high)
        return self.env.batch_step(np.asarray(states, dtype=float), actions)


def collect(env: Environment, n_traj: int, episode_len: int, seed: int = 0,
            split_fraction: float = 0.9) -> Dataset:
    """Random-controller exploration: uniform actions over the action box.

    An episode ends early when the environment reports ``done``.
    """
    if n_traj < 1:
        raise ValueError(f"n_traj must be >= 1, got {n_traj}")
    if episode_len < 1:
        raise ValueError(f"episode_len must be >= 1, got {episode_len}")
    rng = np.random.default_rng(seed)
    lo, hi = env.action_low, env.action_high
    states, actions, nexts = [], [], []
    for _ in range(n_traj):
        s = env.reset(int(rng.integers(2**63 - 1)))
        for _ in range(episode_len):
            a = rng.uniform(lo, hi)
            res = env.step(s, a)
            states.append(s)
            actions.append(np.clip(a, lo, hi))
            nexts.append(res.state)
            s = res.state
            if res.done:
                break
    return Dataset(np.array(states), np.array(actions), np.array(nexts), split_fraction)
