"""Quantitative and Boolean semantics over finite discrete-time signals.

Temporal operators range over the available suffix ``[t, T]`` of the signal.
The quantitative evaluator works bottom-up on whole arrays, so a leading batch
axis (for example one row per candidate plan) costs a single pass. The
Boolean evaluator is a separate, direct recursion over time indices and is
used to cross-check the robustness evaluator.
"""

from __future__ import annotations

from typing import Mapping

import numpy as np

from ..trace import DimensionError, Trajectory
from .ast import (CAP, Abs, Add, Always, And, Const, Eventually, Formula, Not,
                  Or, Predicate, Scale, SignalExpr, Sub, Until, Var, names)


def eval_expr(e: SignalExpr, signals: Mapping[str, np.ndarray]):
    """Evaluate a signal expression elementwise over ``signals``."""
    if isinstance(e, Var):
        try:
            return signals[e.name]
        except KeyError:
            raise DimensionError(f"unknown dimension name {e.name!r}; "
                                 f"available: {sorted(signals)}") from None
    if isinstance(e, Const):
        return e.value
    if isinstance(e, Add):
        return eval_expr(e.left, signals) + eval_expr(e.right, signals)
    if isinstance(e, Sub):
        return eval_expr(e.left, signals) - eval_expr(e.right, signals)
    if isinstance(e, Scale):
        return e.factor * eval_expr(e.expr, signals)
    if isinstance(e, Abs):
        return abs(eval_expr(e.expr, signals))
    raise TypeError(f"not a signal expression: {e!r}")


def _suffix_min(x: np.ndarray) -> np.ndarray:
    return np.minimum.accumulate(x[..., ::-1], axis=-1)[..., ::-1]


def _suffix_max(x: np.ndarray) -> np.ndarray:
    return np.maximum.accumulate(x[..., ::-1], axis=-1)[..., ::-1]


def robustness_signal(phi: Formula, signals: Mapping[str, np.ndarray]) -> np.ndarray:
    """Robustness of ``phi`` at every time index.

    ``signals`` maps names to arrays of shape ``(..., T)``; the result has the
    same shape. Values are clamped to ``[-CAP, CAP]``; NaN inputs propagate.
    """
    shape = np.shape(next(iter(signals.values())))
    return _rob(phi, signals, shape)


def _rob(phi: Formula, sig, shape) -> np.ndarray:
    if isinstance(phi, Predicate):
        f = eval_expr(phi.expr, sig)
        r = f - phi.c if phi.op in (">", ">=") else phi.c - f
        r = np.broadcast_to(np.asarray(r, dtype=float), shape)
    elif isinstance(phi, Not):
        r = -_rob(phi.child, sig, shape)
    elif isinstance(phi, And):
        r = np.minimum(_rob(phi.left, sig, shape), _rob(phi.right, sig, shape))
    elif isinstance(phi, Or):
        r = np.maximum(_rob(phi.left, sig, shape), _rob(phi.right, sig, shape))
    elif isinstance(phi, Always):
        r = _suffix_min(_rob(phi.child, sig, shape))
    elif isinstance(phi, Eventually):
        r = _suffix_max(_rob(phi.child, sig, shape))
    elif isinstance(phi, Until):
        r1 = _rob(phi.left, sig, shape)
        r2 = _rob(phi.right, sig, shape)
        # U(T) = r2(T);  U(t) = max(r2(t), min(r1(t), U(t+1)))
        r = np.empty(shape)
        acc = r2[..., -1]
        r[..., -1] = acc
        for t in range(shape[-1] - 2, -1, -1):
            acc = np.maximum(r2[..., t], np.minimum(r1[..., t], acc))
            r[..., t] = acc
    else:
        raise TypeError(f"not an STL formula: {phi!r}")
    return np.clip(r, -CAP, CAP)


def check_names(phi: Formula, available) -> None:
    missing = sorted(names(phi) - set(available))
    if missing:
        raise DimensionError(
            f"formula references unknown dimension name(s) {', '.join(map(repr, missing))}; "
            f"available: {list(available)}")


def _check_t(traj: Trajectory, t: int) -> None:
    if not 0 <= t < len(traj):
        raise IndexError(f"time index {t} out of range for trajectory of length {len(traj)}")


def robustness(phi: Formula, traj: Trajectory, t: int = 0) -> float:
    """Robustness of ``phi`` on ``traj`` at time index ``t``."""
    _check_t(traj, t)
    check_names(phi, traj.names)
    return float(robustness_signal(phi, traj.signals())[t])


def robustness_batch(phi: Formula, names_: tuple[str, ...], states: np.ndarray) -> np.ndarray:
    """Robustness at t=0 for a batch of trajectories.

    ``states`` has shape ``(B, T, n)`` with columns ordered as ``names_``.
    """
    check_names(phi, names_)
    states = np.asarray(states, dtype=float)
    sig = {name: states[..., i] for i, name in enumerate(names_)}
    return robustness_signal(phi, sig)[..., 0]


def satisfies(phi: Formula, traj: Trajectory, t: int = 0) -> bool:
    """Boolean satisfaction, honouring strict versus non-strict comparisons."""
    _check_t(traj, t)
    check_names(phi, traj.names)
    rows = [dict(zip(traj.names, map(float, row))) for row in traj.samples]
    return _sat(phi, rows, t)


def _sat(phi: Formula, rows: list[dict], t: int) -> bool:
    last = len(rows) - 1
    if isinstance(phi, Predicate):
        f = eval_expr(phi.expr, rows[t])
        return {">": f > phi.c, ">=": f >= phi.c, "<": f < phi.c, "<=": f <= phi.c}[phi.op]
    if isinstance(phi, Not):
        return not _sat(phi.child, rows, t)
    if isinstance(phi, And):
        return _sat(phi.left, rows, t) and _sat(phi.right, rows, t)
    if isinstance(phi, Or):
        return _sat(phi.left, rows, t) or _sat(phi.right, rows, t)
    if isinstance(phi, Always):
        return all(_sat(phi.child, rows, k) for k in range(t, last + 1))
    if isinstance(phi, Eventually):
        return any(_sat(phi.child, rows, k) for k in range(t, last + 1))
    if isinstance(phi, Until):
        for k in range(t, last + 1):
            if _sat(phi.right, rows, k):
                return True
            if not _sat(phi.left, rows, k):
                return False
        return False
    raise TypeError(f"not an STL formula: {phi!r}")
