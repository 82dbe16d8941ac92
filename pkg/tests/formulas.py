"""Random STL formulas and traces shared by the property tests."""

import numpy as np
from hypothesis import strategies as st

from stlmpc.stl import (Abs, Always, And, Eventually, Not, Or, Predicate, Scale,
                        Sub, Until, Var)
from stlmpc.trace import Trajectory

NAMES = ("a", "b")
OPS = (">", ">=", "<", "<=")
# a coarse grid makes exact ties (robustness 0) and strictness matter
GRID = (-1.0, -0.5, 0.0, 0.5, 1.0)


def _expr(rng):
    kind = rng.integers(4)
    name = Var(NAMES[rng.integers(len(NAMES))])
    if kind == 0:
        return name
    if kind == 1:
        return Abs(name)
    if kind == 2:
        return Sub(Var("a"), Var("b"))
    return Scale(float(rng.choice([-2.0, 0.5, 3.0])), name)


def random_formula(rng, depth: int = 4):
    """Formula of depth at most ``depth`` drawn from a numpy generator."""
    if depth == 0 or rng.random() < 0.25:
        return Predicate(_expr(rng), OPS[rng.integers(4)], float(rng.choice(GRID)))
    kind = rng.integers(6)
    sub = lambda: random_formula(rng, depth - 1)  # noqa: E731
    if kind == 0:
        return Not(sub())
    if kind == 1:
        return And(sub(), sub())
    if kind == 2:
        return Or(sub(), sub())
    if kind == 3:
        return Always(sub())
    if kind == 4:
        return Eventually(sub())
    return Until(sub(), sub())


def random_trace(rng, max_len: int = 8) -> Trajectory:
    n = int(rng.integers(1, max_len + 1))
    if rng.random() < 0.5:
        data = rng.choice(GRID, size=(n, len(NAMES)))
    else:
        data = np.round(rng.uniform(-2, 2, size=(n, len(NAMES))), 2)
    return Trajectory(NAMES, data)


# hypothesis strategies

exprs = st.one_of(
    st.sampled_from(NAMES).map(Var),
    st.sampled_from(NAMES).map(lambda n: Abs(Var(n))),
    st.just(Sub(Var("a"), Var("b"))),
    st.tuples(st.sampled_from([-2.0, 0.5, 3.0]), st.sampled_from(NAMES)).map(
        lambda t: Scale(t[0], Var(t[1]))),
)

predicates = st.builds(Predicate, exprs, st.sampled_from(OPS), st.sampled_from(GRID))


def _extend(children):
    return st.one_of(
        children.map(Not),
        st.builds(And, children, children),
        st.builds(Or, children, children),
        children.map(Always),
        children.map(Eventually),
        st.builds(Until, children, children),
    )


formulas = st.recursive(predicates, _extend, max_leaves=8)

values = st.one_of(st.sampled_from(GRID), st.floats(-5, 5, allow_nan=False).map(lambda v: round(v, 3)))


@st.composite
def traces(draw, max_len: int = 8):
    n = draw(st.integers(1, max_len))
    rows = draw(st.lists(st.tuples(values, values), min_size=n, max_size=n))
    return Trajectory(NAMES, np.array(rows, dtype=float))


def brute_until(r1: np.ndarray, r2: np.ndarray) -> np.ndarray:
    """Until robustness at every t straight from the sup/inf definition.

    ``r1`` and ``r2`` have shape ``(B, T)``. O(T^2) and independent of the
    backward recursion used by the library.
    """
    r1 = np.asarray(r1, dtype=float)
    r2 = np.asarray(r2, dtype=float)
    batch, n = r1.shape
    out = np.empty((batch, n))
    for t in range(n):
        best = np.full(batch, -np.inf)
        for tp in range(t, n):
            # empty infimum over [t, t) is +inf
            inf1 = r1[:, t:tp].min(axis=1) if tp > t else np.full(batch, np.inf)
            best = np.maximum(best, np.minimum(r2[:, tp], inf1))
        out[:, t] = best
    return out


def all_grid_traces(length: int, grid=(-1.0, 0.5, 2.0)) -> np.ndarray:
    """Every two-dimensional trace of ``length`` samples over ``grid``: (B, T, 2)."""
    points = np.array([(a, b) for a in grid for b in grid])
    idx = np.indices((len(points),) * length).reshape(length, -1).T
    return points[idx]
