"""Recursive-descent parser for the formula DSL.

Grammar (loosest binding first)::

    formula  := conj ('or' conj)*
    conj     := until ('and' until)*
    until    := spatial ('U' tint spatial)*
    spatial  := unary (('R' dint | 'surround' '[' num ']') unary)*
    unary    := 'not' unary | ('G'|'F') tint unary
              | ('E'|'somewhere'|'everywhere') dint unary | atom
    atom     := 'true' | 'false' | arith ('>='|'<=') arith | '(' formula ')'
"""
from __future__ import annotations

import math
import re
from dataclasses import dataclass

from . import ast as A
from .expr import (
    Add,
    Comparison,
    Const,
    MinDist,
    MinMax,
    Mul,
    Neg,
    Norm,
    Ref,
    Sub,
)

DIALECTS = ("stl", "strel")

_TOKEN = re.compile(
    r"""
    (?P<ws>\s+)
  | (?P<num>(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)
  | (?P<ident>[A-Za-z_][A-Za-z_0-9]*)
  | (?P<op>>=|<=|==|!=|[<>\[\](){},+\-*|])
    """,
    re.VERBOSE,
)

_SPATIAL_PREFIX = {"E": A.Escape, "somewhere": A.Somewhere, "everywhere": A.Everywhere}
_FUNCS = {"min", "max", "norm2", "norminf", "mindist_inf", "mindist2"}


class FormulaSyntaxError(ValueError):
    def __init__(self, message: str, line: int, column: int):
        super().__init__(f"line {line}, column {column}: {message}")
        self.message = message
        self.line = line
        self.column = column


@dataclass(frozen=True)
class _Tok:
    kind: str
    value: str
    pos: int


def _tokenize(text: str) -> list:
    toks = []
    pos = 0
    while pos < len(text):
        m = _TOKEN.match(text, pos)
        if m is None:
            raise _error(text, pos, f"unexpected character {text[pos]!r}")
        if m.lastgroup != "ws":
            toks.append(_Tok(m.lastgroup, m.group(), pos))
        pos = m.end()
    toks.append(_Tok("eof", "", len(text)))
    return toks


def _error(text: str, pos: int, msg: str) -> FormulaSyntaxError:
    line = text.count("\n", 0, pos) + 1
    col = pos - (text.rfind("\n", 0, pos) + 1) + 1
    return FormulaSyntaxError(msg, line, col)


class _Parser:
    def __init__(self, text: str, dialect: str):
        self.text = text
        self.dialect = dialect
        self.toks = _tokenize(text)
        self.i = 0

    # token helpers
    @property
    def tok(self) -> _Tok:
        return self.toks[self.i]

    def peek(self, k: int = 1) -> _Tok:
        return self.toks[min(self.i + k, len(self.toks) - 1)]

    def fail(self, msg: str, tok: _Tok | None = None):
        tok = tok or self.tok
        raise _error(self.text, tok.pos, msg)

    def at(self, value: str) -> bool:
        return self.tok.kind in ("op", "ident") and self.tok.value == value

    def expect(self, value: str) -> _Tok:
        if not self.at(value):
            shown = self.tok.value or "end of input"
            self.fail(f"expected {value!r}, found {shown!r}")
        t = self.tok
        self.i += 1
        return t

    # formulas
    def formula(self) -> A.Formula:
        left = self.conj()
        while self.at("or"):
            self.i += 1
            left = A.Or(left, self.conj())
        return left

    def conj(self) -> A.Formula:
        left = self.until()
        while self.at("and"):
            self.i += 1
            left = A.And(left, self.until())
        return left

    def until(self) -> A.Formula:
        left = self.spatial()
        while self.at("U"):
            self.i += 1
            iv = self.time_interval()
            left = A.Until(iv, left, self.spatial())
        return left

    def spatial(self) -> A.Formula:
        left = self.unary()
        while self.at("R") or self.at("surround"):
            tok = self.tok
            self._check_spatial(tok)
            self.i += 1
            if tok.value == "R":
                iv = self.dist_interval()
                left = A.Reach(iv, left, self.unary())
            else:
                self.expect("[")
                start = self.tok
                bound = self.number(allow_inf=False)
                self.expect("]")
                try:
                    left = A.Surround(bound, left, self.unary())
                except A.FormulaError as exc:
                    self.fail(str(exc), start)
        return left

    def _check_spatial(self, tok: _Tok):
        if self.dialect == "stl":
            self.fail(f"spatial operator {tok.value!r} is not allowed in the stl dialect", tok)

    def unary(self) -> A.Formula:
        tok = self.tok
        if self.at("not"):
            self.i += 1
            return A.Not(self.unary())
        if (self.at("G") or self.at("F")) and self.peek().value == "[":
            self.i += 1
            iv = self.time_interval()
            cls = A.Always if tok.value == "G" else A.Eventually
            return cls(iv, self.unary())
        if tok.kind == "ident" and tok.value in _SPATIAL_PREFIX:
            self._check_spatial(tok)
            self.i += 1
            iv = self.dist_interval()
            return _SPATIAL_PREFIX[tok.value](iv, self.unary())
        return self.atom()

    def atom(self) -> A.Formula:
        if self.at("true"):
            self.i += 1
            return A.TrueF()
        if self.at("false"):
            self.i += 1
            return A.FalseF()
        start = self.i
        pred_err = None
        try:
            return self.predicate()
        except FormulaSyntaxError as exc:
            pred_err = (self.i, exc)
            self.i = start
        if self.at("("):
            self.i += 1
            try:
                inner = self.formula()
                self.expect(")")
                return inner
            except FormulaSyntaxError as exc:
                if pred_err[0] > self.i:
                    raise pred_err[1] from None
                raise
        raise pred_err[1]

    def predicate(self) -> A.Predicate:
        lhs = self.arith()
        tok = self.tok
        if tok.value in ("<", ">", "==", "!="):
            self.fail(f"comparison {tok.value!r} is not supported; use >= or <=")
        if tok.value not in (">=", "<="):
            self.fail(f"expected comparison, found {tok.value or 'end of input'!r}")
        self.i += 1
        rhs = self.arith()
        return A.Predicate(Comparison(lhs, tok.value, rhs))

    # intervals
    def number(self, allow_inf: bool = True) -> float:
        tok = self.tok
        if tok.kind == "num":
            self.i += 1
            return float(tok.value)
        if tok.value == "inf" and allow_inf:
            self.i += 1
            return math.inf
        self.fail(f"expected number, found {tok.value or 'end of input'!r}")

    def _bounds(self):
        self.expect("[")
        start = self.tok
        lo = self.number()
        self.expect(",")
        hi = self.number()
        self.expect("]")
        return start, lo, hi

    def time_interval(self) -> A.TimeInterval:
        start, lo, hi = self._bounds()
        if math.isinf(hi):
            self.fail("unbounded time interval", start)
        try:
            return A.TimeInterval(lo, hi)
        except A.FormulaError as exc:
            self.fail(str(exc), start)

    def dist_interval(self) -> A.DistInterval:
        start, lo, hi = self._bounds()
        try:
            return A.DistInterval(lo, hi)
        except A.FormulaError as exc:
            self.fail(str(exc), start)

    # arithmetic
    def arith(self):
        left = self.term()
        while self.at("+") or self.at("-"):
            op = self.tok.value
            self.i += 1
            right = self.term()
            left = Add(left, right) if op == "+" else Sub(left, right)
        return left

    def term(self):
        left = self.factor()
        while self.at("*"):
            self.i += 1
            left = Mul(left, self.factor())
        return left

    def factor(self):
        tok = self.tok
        if self.at("-"):
            self.i += 1
            inner = self.factor()
            if isinstance(inner, Const):
                return Const(-inner.value)
            return Neg(inner)
        if tok.kind == "num":
            self.i += 1
            return Const(float(tok.value))
        if self.at("s"):
            self.i += 1
            self.expect("[")
            idx = self.tok
            if idx.kind != "num" or not idx.value.isdigit():
                self.fail("state index must be a non-negative integer")
            self.i += 1
            self.expect("]")
            return Ref(int(idx.value))
        if tok.kind == "ident" and tok.value in _FUNCS:
            return self.call()
        if self.at("("):
            self.i += 1
            inner = self.arith()
            self.expect(")")
            return inner
        self.fail(f"unexpected token {tok.value or 'end of input'!r}")

    def arg_list(self) -> tuple:
        args = [self.arith()]
        while self.at(","):
            self.i += 1
            args.append(self.arith())
        return tuple(args)

    def call(self):
        name = self.tok.value
        self.i += 1
        self.expect("(")
        if name.startswith("mindist"):
            if self.at("s") and self.peek().value != "[":
                self.i += 1
                vec = None
            else:
                self.expect("(")
                vec = self.arg_list()
                self.expect(")")
            self.expect(",")
            pts = self.point_set()
            self.expect(")")
            dims = {len(p) for p in pts}
            if len(dims) != 1 or (vec is not None and dims != {len(vec)}):
                self.fail("mindist points must match the vector dimension")
            return MinDist("inf" if name == "mindist_inf" else "2", vec, pts)
        args = self.arg_list()
        self.expect(")")
        if name in ("min", "max"):
            return MinMax(name, args)
        return Norm("2" if name == "norm2" else "inf", args)

    def point_set(self) -> tuple:
        self.expect("{")
        pts = [self.point()]
        while self.at(","):
            self.i += 1
            pts.append(self.point())
        self.expect("}")
        return tuple(pts)

    def point(self) -> tuple:
        self.expect("(")
        coords = [self.signed_number()]
        while self.at(","):
            self.i += 1
            coords.append(self.signed_number())
        self.expect(")")
        return tuple(coords)

    def signed_number(self) -> float:
        sign = 1.0
        if self.at("-"):
            self.i += 1
            sign = -1.0
        return sign * self.number(allow_inf=False)


def parse(text: str, dialect: str = "stl") -> A.Formula:
    """Parse DSL text into a formula with predicate ids numbered left to right."""
    if dialect not in DIALECTS:
        raise ValueError(f"unknown dialect {dialect!r}")
    p = _Parser(text, dialect)
    f = p.formula()
    if p.tok.kind != "eof":
        p.fail(f"unexpected trailing input {p.tok.value!r}")
    return A.number_predicates(f)
