"""Signal Temporal Logic: parsing, robustness and Boolean satisfaction."""

from .ast import (CAP, Abs, Add, Always, And, Const, Eventually, Formula, Not,
                  Or, Predicate, Scale, SignalExpr, Sub, Until, Var, depth,
                  names, true_formula)
from .parser import StlSyntaxError, UnknownFunctionError, parse, parse_expr
from .semantics import (check_names, eval_expr, robustness, robustness_batch,
                        robustness_signal, satisfies)

__all__ = [
    "CAP", "Abs", "Add", "Always", "And", "Const", "Eventually", "Formula",
    "Not", "Or", "Predicate", "Scale", "SignalExpr", "Sub", "Until", "Var",
    "depth", "names", "true_formula", "StlSyntaxError", "UnknownFunctionError",
    "parse", "parse_expr", "check_names", "eval_expr", "robustness",
    "robustness_batch", "robustness_signal", "satisfies",
]
