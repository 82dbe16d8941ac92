"""Abstract syntax for signal expressions and STL formulas.

Nodes are frozen dataclasses so formulas hash, compare structurally and can be
shared between threads. ``str(node)`` prints the canonical concrete syntax
accepted by :func:`stlmpc.stl.parse`.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Union

# Robustness values are clamped to [-CAP, CAP].
CAP = 1e9

COMPARISONS = (">", ">=", "<", "<=")


def _num(c: float) -> str:
    c = float(c)
    if c.is_integer() and abs(c) < 1e15:
        return str(int(c)) if c != 0 else "0"
    return repr(c)


# -- signal expressions -------------------------------------------------------

@dataclass(frozen=True)
class Var:
    name: str

    def __str__(self):
        return self.name


@dataclass(frozen=True)
class Const:
    value: float

    def __str__(self):
        return _num(self.value)


@dataclass(frozen=True)
class Add:
    left: "SignalExpr"
    right: "SignalExpr"

    def __str__(self):
        return f"({self.left} + {self.right})"


@dataclass(frozen=True)
class Sub:
    left: "SignalExpr"
    right: "SignalExpr"

    def __str__(self):
        return f"({self.left} - {self.right})"


@dataclass(frozen=True)
class Scale:
    factor: float
    expr: "SignalExpr"

    def __str__(self):
        return f"({_num(self.factor)} * {self.expr})"


@dataclass(frozen=True)
class Abs:
    expr: "SignalExpr"

    def __str__(self):
        return f"abs({self.expr})"


SignalExpr = Union[Var, Const, Add, Sub, Scale, Abs]


def expr_names(e: SignalExpr) -> frozenset[str]:
    if isinstance(e, Var):
        return frozenset([e.name])
    if isinstance(e, Const):
        return frozenset()
    if isinstance(e, (Add, Sub)):
        return expr_names(e.left) | expr_names(e.right)
    return expr_names(e.expr)


# -- formulas -----------------------------------------------------------------

@dataclass(frozen=True)
class Predicate:
    """``expr op c`` with ``op`` one of ``>``, ``>=``, ``<``, ``<=``."""

    expr: SignalExpr
    op: str
    c: float

    def __post_init__(self):
        if self.op not in COMPARISONS:
            raise ValueError(f"unsupported comparison {self.op!r}")
        object.__setattr__(self, "c", float(self.c))

    def __str__(self):
        return f"{self.expr} {self.op} {_num(self.c)}"


@dataclass(frozen=True)
class Not:
    child: "Formula"

    def __str__(self):
        return f"!({self.child})"


@dataclass(frozen=True)
class And:
    left: "Formula"
    right: "Formula"

    def __str__(self):
        return f"({self.left} & {self.right})"


@dataclass(frozen=True)
class Or:
    left: "Formula"
    right: "Formula"

    def __str__(self):
        return f"({self.left} | {self.right})"


@dataclass(frozen=True)
class Always:
    child: "Formula"

    def __str__(self):
        return f"G ({self.child})"


@dataclass(frozen=True)
class Eventually:
    child: "Formula"

    def __str__(self):
        return f"F ({self.child})"


@dataclass(frozen=True)
class Until:
    left: "Formula"
    right: "Formula"

    def __str__(self):
        return f"(({self.left}) U ({self.right}))"


Formula = Union[Predicate, Not, And, Or, Always, Eventually, Until]


def true_formula() -> Predicate:
    """A predicate with robustness exactly ``CAP`` everywhere."""
    return Predicate(Const(0.0), ">=", -CAP)


def names(phi: Formula) -> frozenset[str]:
    """Dimension names referenced anywhere in ``phi``."""
    if isinstance(phi, Predicate):
        return expr_names(phi.expr)
    if isinstance(phi, (Not, Always, Eventually)):
        return names(phi.child)
    return names(phi.left) | names(phi.right)


def depth(phi: Formula) -> int:
    if isinstance(phi, Predicate):
        return 0
    if isinstance(phi, (Not, Always, Eventually)):
        return 1 + depth(phi.child)
    return 1 + max(depth(phi.left), depth(phi.right))
