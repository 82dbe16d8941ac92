"""Recursive-descent parser for the STL text syntax.

Grammar, loosest binding first::

    formula    := and ('|' and)*
    and        := until ('&' until)*
    until      := unary ('U' until)?              right associative
    unary      := '!' unary | 'G' unary | 'F' unary | atom
    atom       := comparison | '(' formula ')'
    comparison := expr (CMP expr (CMP expr)?)?    a chain becomes a conjunction,
                                                  a bare expr means expr >= 0
    expr       := term (('+' | '-') term)*
    term       := factor ('*' factor)*            one side must be a constant
    factor     := '-' factor | NUMBER | NAME | 'abs' '(' expr ')' | '(' expr ')'

``G``, ``F`` and ``U`` are reserved words and cannot name signal dimensions.
"""

from __future__ import annotations

import re
from dataclasses import dataclass

from .ast import (Abs, Add, Always, And, Const, Eventually, Formula, Not, Or,
                  Predicate, Scale, SignalExpr, Sub, Until, Var)

KEYWORDS = {"G", "F", "U"}
FUNCTIONS = {"abs"}

_TOKEN_RE = re.compile(r"""
    (?P<ws>\s+)
  | (?P<num>(?:\d+\.\d*|\.\d+|\d+)(?:[eE][+-]?\d+)?)
  | (?P<name>[A-Za-z_][A-Za-z0-9_]*)
  | (?P<op>>=|<=|>|<|\(|\)|&|\||!|\+|-|\*)
""", re.VERBOSE)

_FLIP = {">": "<", ">=": "<=", "<": ">", "<=": ">="}


class StlSyntaxError(ValueError):
    def __init__(self, message: str, position: int, text: str = ""):
        self.message = message
        self.position = position
        self.text = text
        detail = f"{message} at position {position}"
        if text:
            detail += f"\n  {text}\n  {' ' * position}^"
        super().__init__(detail)


class UnknownFunctionError(StlSyntaxError):
    pass


@dataclass(frozen=True)
class Token:
    kind: str  # "num", "name", "kw", "op", "eof"
    text: str
    pos: int


def tokenize(text: str) -> list[Token]:
    tokens = []
    pos = 0
    while pos < len(text):
        m = _TOKEN_RE.match(text, pos)
        if m is None:
            raise StlSyntaxError(f"unexpected character {text[pos]!r}", pos, text)
        kind = m.lastgroup
        if kind != "ws":
            tok = m.group()
            if kind == "name" and tok in KEYWORDS:
                kind = "kw"
            tokens.append(Token(kind, tok, pos))
        pos = m.end()
    tokens.append(Token("eof", "", len(text)))
    return tokens


class _Parser:
    def __init__(self, text: str):
        self.text = text
        self.tokens = tokenize(text)
        self.i = 0

    @property
    def tok(self) -> Token:
        return self.tokens[self.i]

    def error(self, message: str, tok: Token | None = None) -> StlSyntaxError:
        tok = tok or self.tok
        return StlSyntaxError(message, tok.pos, self.text)

    def accept(self, text: str) -> bool:
        if self.tok.kind in ("op", "kw") and self.tok.text == text:
            self.i += 1
            return True
        return False

    def expect(self, text: str) -> None:
        if not self.accept(text):
            found = self.tok.text or "end of input"
            raise self.error(f"expected {text!r} but found {found!r}")

    # formulas

    def parse(self) -> Formula:
        phi = self.formula()
        if self.tok.kind != "eof":
            raise self.error(f"unexpected {self.tok.text!r}")
        return phi

    def formula(self) -> Formula:
        phi = self.conjunction()
        while self.accept("|"):
            phi = Or(phi, self.conjunction())
        return phi

    def conjunction(self) -> Formula:
        phi = self.until()
        while self.accept("&"):
            phi = And(phi, self.until())
        return phi

    def until(self) -> Formula:
        phi = self.unary()
        if self.accept("U"):
            return Until(phi, self.until())
        return phi

    def unary(self) -> Formula:
        if self.accept("!"):
            return Not(self.unary())
        if self.accept("G"):
            return Always(self.unary())
        if self.accept("F"):
            return Eventually(self.unary())
        return self.atom()

    def atom(self) -> Formula:
        if self.tok.text != "(" or self.tok.kind != "op":
            return self.comparison()
        # '(' opens either a signal expression or a sub-formula; try the former
        start = self.i
        try:
            return self.comparison()
        except UnknownFunctionError:
            raise
        except StlSyntaxError as first:
            self.i = start
            try:
                self.expect("(")
                phi = self.formula()
                self.expect(")")
                return phi
            except UnknownFunctionError:
                raise
            except StlSyntaxError as second:
                raise max(first, second, key=lambda e: e.position) from None

    def comparison(self) -> Formula:
        lhs = self.expr()
        if not (self.tok.kind == "op" and self.tok.text in _FLIP):
            # a bare expression stands for ``expr >= 0``
            return Predicate(lhs, ">=", 0.0)
        op = self.comparator()
        rhs = self.expr()
        phi = _make_predicate(lhs, op, rhs)
        if self.tok.kind == "op" and self.tok.text in _FLIP:
            op2 = self.comparator()
            phi = And(phi, _make_predicate(rhs, op2, self.expr()))
        return phi

    def comparator(self) -> str:
        tok = self.tok
        if tok.kind == "op" and tok.text in _FLIP:
            self.i += 1
            return tok.text
        found = tok.text or "end of input"
        raise self.error(f"expected a comparison operator but found {found!r}")

    # signal expressions

    def expr(self) -> SignalExpr:
        e = self.term()
        while True:
            if self.accept("+"):
                e = Add(e, self.term())
            elif self.accept("-"):
                e = Sub(e, self.term())
            else:
                return e

    def term(self) -> SignalExpr:
        e = self.factor()
        while self.tok.kind == "op" and self.tok.text == "*":
            star = self.tok
            self.i += 1
            rhs = self.factor()
            if isinstance(e, Const):
                e = Scale(e.value, rhs)
            elif isinstance(rhs, Const):
                e = Scale(rhs.value, e)
            else:
                raise self.error("multiplication needs a constant operand", star)
        return e

    def factor(self) -> SignalExpr:
        tok = self.tok
        if self.accept("-"):
            inner = self.factor()
            if isinstance(inner, Const):
                return Const(-inner.value)
            return Scale(-1.0, inner)
        if tok.kind == "num":
            self.i += 1
            return Const(float(tok.text))
        if tok.kind == "name":
            self.i += 1
            if self.tok.kind == "op" and self.tok.text == "(":
                if tok.text not in FUNCTIONS:
                    raise UnknownFunctionError(f"unknown function {tok.text!r}", tok.pos, self.text)
                self.expect("(")
                inner = self.expr()
                self.expect(")")
                return Abs(inner)
            return Var(tok.text)
        if self.accept("("):
            e = self.expr()
            self.expect(")")
            return e
        found = tok.text or "end of input"
        raise self.error(f"expected a signal expression but found {found!r}")


def _make_predicate(lhs: SignalExpr, op: str, rhs: SignalExpr) -> Predicate:
    if isinstance(rhs, Const):
        return Predicate(lhs, op, rhs.value)
    if isinstance(lhs, Const):
        return Predicate(rhs, _FLIP[op], lhs.value)
    return Predicate(Sub(lhs, rhs), op, 0.0)


def parse(text: str) -> Formula:
    """Parse STL text into a formula AST.

    >>> str(parse("F (x > 0.4)"))
    'F (x > 0.4)'
    """
    return _Parser(text).parse()


def parse_expr(text: str) -> SignalExpr:
    p = _Parser(text)
    e = p.expr()
    if p.tok.kind != "eof":
        raise p.error(f"unexpected {p.tok.text!r}")
    return e
