"""Receding-horizon control maximizing STL robustness of predicted rollouts.

At every step CMA-ES searches over flattened ``(H, m)`` action sequences in
a normalized box ``[-1, 1]^(H*m)``. Candidates are clipped to the box and
mapped affinely onto the action bounds, rolled out through the model and
scored by robustness at t=0 of the ``H + 1`` predicted states. Only the first
action of the best sequence is executed.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .cmaes import CmaEs
from .dynamics import rollout_batch
from .stl import CAP, Formula, check_names, robustness, robustness_batch
from .trace import Trajectory

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class MpcConfig:
    horizon: int = 10
    n_iter: int = 5
    n_samples: int = 1000
    sigma0: float = 0.5  # in normalized action units, box half-width = 1
    warm_start: bool = True
    action_low: tuple[float, ...] = (-1.0,)
    action_high: tuple[float, ...] = (1.0,)
    seed: int = 0

    def __post_init__(self):
        lo = tuple(float(v) for v in np.atleast_1d(self.action_low))
        hi = tuple(float(v) for v in np.atleast_1d(self.action_high))
        object.__setattr__(self, "action_low", lo)
        object.__setattr__(self, "action_high", hi)
        if self.horizon < 1 or self.n_iter < 1:
            raise ValueError("horizon and n_iter must be >= 1")
        if self.n_samples < 2:
            raise ValueError("n_samples must be >= 2")
        if len(lo) != len(hi) or any(h <= l for l, h in zip(lo, hi)):
            raise ValueError(f"invalid action bounds {lo} .. {hi}")
        if not self.sigma0 > 0:
            raise ValueError("sigma0 must be positive")

    @property
    def action_dim(self) -> int:
        return len(self.action_low)

    def decode(self, x: np.ndarray) -> np.ndarray:
        """Map normalized flat vectors ``(..., H*m)`` to clipped ``(..., H, m)`` actions."""
        x = np.clip(np.asarray(x, dtype=float), -1.0, 1.0)
        x = x.reshape(*x.shape[:-1], self.horizon, self.action_dim)
        lo, hi = np.array(self.action_low), np.array(self.action_high)
        return lo + (x + 1.0) * 0.5 * (hi - lo)

    def encode(self, actions: np.ndarray) -> np.ndarray:
        lo, hi = np.array(self.action_low), np.array(self.action_high)
        x = 2.0 * (np.asarray(actions, dtype=float) - lo) / (hi - lo) - 1.0
        return x.reshape(*x.shape[:-2], -1)


@dataclass
class PlanResult:
    actions: np.ndarray  # (H, m), within bounds
    solution: np.ndarray  # normalized flat vector, clipped to [-1, 1]
    predicted_robustness: float
    log: list[tuple[int, float, float]] = field(default_factory=list)  # (generation, best, sigma)


def score(model, phi: Formula, names: Sequence[str], state, actions) -> np.ndarray:
    """Robustness of predicted rollouts; non-finite results score ``-CAP``."""
    states = rollout_batch(model, state, actions)
    with np.errstate(invalid="ignore"):
        rho = robustness_batch(phi, tuple(names), states)
    return np.where(np.isfinite(rho), rho, -CAP)


def plan(model, phi: Formula, state, cfg: MpcConfig, names: Sequence[str],
         prev_solution: np.ndarray | None = None,
         rng: np.random.Generator | None = None) -> PlanResult:
    """Optimize an ``H``-step action sequence from ``state``.

    ``prev_solution`` (a normalized flat vector) becomes the initial CMA-ES
    mean; otherwise the search starts at the centre of the action box. The
    covariance always starts at ``sigma0**2 * I``.
    """
    dim = cfg.horizon * cfg.action_dim
    mean0 = np.zeros(dim) if prev_solution is None else np.asarray(prev_solution, dtype=float)
    rng = np.random.default_rng(cfg.seed) if rng is None else rng
    es = CmaEs.init(dim, mean0, cfg.sigma0, cfg.n_samples, rng)
    state = np.asarray(state, dtype=float)
    history = []
    for gen in range(cfg.n_iter):
        x = es.ask()
        es.tell(x, score(model, phi, names, state, cfg.decode(x)))
        history.append((gen, es.best_f, es.sigma))
    best_x, best_f = es.best()
    solution = np.clip(best_x, -1.0, 1.0)
    return PlanResult(cfg.decode(solution), solution, best_f, history)


def shift_solution(solution: np.ndarray, action_dim: int) -> np.ndarray:
    """Drop the executed first action and repeat the last one."""
    seq = solution.reshape(-1, action_dim)
    return np.concatenate([seq[1:], seq[-1:]]).reshape(-1)


@dataclass
class EpisodeResult:
    trajectory: Trajectory
    actions: np.ndarray
    robustness: float
    reward: float | None
    done: bool
    plan_log: list[dict] = field(default_factory=list)

    @property
    def steps(self) -> int:
        return len(self.actions)

    def to_dict(self) -> dict:
        return {
            "names": list(self.trajectory.names),
            "dt": self.trajectory.dt,
            "trajectory": self.trajectory.samples.tolist(),
            "actions": self.actions.tolist(),
            "robustness": self.robustness,
            "reward": self.reward,
            "done": self.done,
            "steps": self.steps,
        }


def run_episode(env, model, phi: Formula, cfg: MpcConfig, max_steps: int,
                state=None, log_plans: bool = True) -> EpisodeResult:
    """Closed-loop episode: plan, execute the first action, observe, repeat.

    Starts from ``state`` or else from ``env.state`` (set by ``env.reset``).
    The episode ends after ``max_steps`` steps or when the environment
    reports ``done``; robustness is evaluated on the executed trajectory.
    """
    check_names(phi, env.names)
    if state is None:
        if env.state is None:
            raise RuntimeError("environment has not been reset")
        state = env.state
    s = np.asarray(state, dtype=float)
    rng = np.random.default_rng(cfg.seed)
    states = [s]
    actions = []
    reward = 0.0 if env.has_reward else None
    done = False
    plan_log = []
    warm = None
    lo, hi = np.array(cfg.action_low), np.array(cfg.action_high)
    for step in range(max_steps):
        result = plan(model, phi, s, cfg, env.names,
                      prev_solution=warm if cfg.warm_start else None, rng=rng)
        a = np.clip(result.actions[0], lo, hi)
        if log_plans:
            plan_log.extend({"step": step, "generation": g, "best_rho": b, "sigma": sg}
                            for g, b, sg in result.log)
        try:
            out = env.step(s, a)
        except Exception:
            log.exception("environment step %d failed; returning partial episode", step)
            done = True
            break
        actions.append(a)
        states.append(out.state)
        if reward is not None and out.reward is not None:
            reward += out.reward
        s = out.state
        warm = shift_solution(result.solution, cfg.action_dim)
        if out.done:
            done = True
            break
    traj = Trajectory(env.names, np.array(states), env.dt)
    acts = np.array(actions).reshape(-1, cfg.action_dim)
    return EpisodeResult(traj, acts, robustness(phi, traj, 0), reward, done, plan_log)
