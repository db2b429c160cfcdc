"""Immutable formula AST for STL and STREL."""
from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Iterator

from .expr import Comparison, format_number


class FormulaError(ValueError):
    """Raised for structurally invalid formulas."""


@dataclass(frozen=True)
class TimeInterval:
    lo: float
    hi: float

    def __post_init__(self):
        if not (0 <= self.lo <= self.hi):
            raise FormulaError(f"invalid time interval [{self.lo}, {self.hi}]")
        if math.isinf(self.hi):
            raise FormulaError("time intervals must be bounded")
        if self.first > self.last:
            raise FormulaError(f"time interval [{self.lo}, {self.hi}] contains no integer")

    @property
    def first(self) -> int:
        return int(math.ceil(self.lo))

    @property
    def last(self) -> int:
        return int(math.floor(self.hi))

    def text(self) -> str:
        return f"[{format_number(self.lo)},{format_number(self.hi)}]"


@dataclass(frozen=True)
class DistInterval:
    lo: float
    hi: float

    def __post_init__(self):
        if math.isnan(self.lo) or math.isnan(self.hi) or not (0 <= self.lo <= self.hi):
            raise FormulaError(f"invalid distance interval [{self.lo}, {self.hi}]")
        if math.isinf(self.lo):
            raise FormulaError("distance lower bound must be finite")

    @property
    def bounded(self) -> bool:
        return not math.isinf(self.hi)

    def contains(self, d: float) -> bool:
        return self.lo <= d <= self.hi

    def text(self) -> str:
        return f"[{format_number(self.lo)},{format_number(self.hi)}]"


class Formula:
    """Base class; subclasses are frozen dataclasses."""

    spatial = False

    @property
    def children(self) -> tuple:
        return ()

    def walk(self) -> Iterator["Formula"]:
        """Pre-order, left to right."""
        yield self
        for c in self.children:
            yield from c.walk()

    def predicates(self) -> list:
        return [n for n in self.walk() if isinstance(n, Predicate)]

    def is_spatial(self) -> bool:
        return any(n.spatial for n in self.walk())

    def text(self) -> str:
        raise NotImplementedError

    def __str__(self) -> str:
        return self.text()


@dataclass(frozen=True)
class TrueF(Formula):
    def text(self):
        return "true"


@dataclass(frozen=True)
class FalseF(Formula):
    def text(self):
        return "false"


@dataclass(frozen=True)
class Predicate(Formula):
    comparison: Comparison
    id: int = -1

    def text(self):
        return f"({self.comparison.text()})"


@dataclass(frozen=True)
class Not(Formula):
    arg: Formula

    @property
    def children(self):
        return (self.arg,)

    def text(self):
        return f"not {self.arg.text()}"


@dataclass(frozen=True)
class And(Formula):
    left: Formula
    right: Formula

    @property
    def children(self):
        return (self.left, self.right)

    def text(self):
        return f"({self.left.text()} and {self.right.text()})"


@dataclass(frozen=True)
class Or(Formula):
    left: Formula
    right: Formula

    @property
    def children(self):
        return (self.left, self.right)

    def text(self):
        return f"({self.left.text()} or {self.right.text()})"


@dataclass(frozen=True)
class Until(Formula):
    interval: TimeInterval
    left: Formula
    right: Formula

    @property
    def children(self):
        return (self.left, self.right)

    def text(self):
        return f"({self.left.text()} U{self.interval.text()} {self.right.text()})"


@dataclass(frozen=True)
class Eventually(Formula):
    interval: TimeInterval
    arg: Formula

    @property
    def children(self):
        return (self.arg,)

    def text(self):
        return f"F{self.interval.text()} {self.arg.text()}"


@dataclass(frozen=True)
class Always(Formula):
    interval: TimeInterval
    arg: Formula

    @property
    def children(self):
        return (self.arg,)

    def text(self):
        return f"G{self.interval.text()} {self.arg.text()}"


@dataclass(frozen=True)
class Reach(Formula):
    interval: DistInterval
    left: Formula
    right: Formula
    spatial = True

    @property
    def children(self):
        return (self.left, self.right)

    def text(self):
        return f"({self.left.text()} R{self.interval.text()} {self.right.text()})"


@dataclass(frozen=True)
class Escape(Formula):
    interval: DistInterval
    arg: Formula
    spatial = True

    @property
    def children(self):
        return (self.arg,)

    def text(self):
        return f"E{self.interval.text()} {self.arg.text()}"


@dataclass(frozen=True)
class Somewhere(Formula):
    interval: DistInterval
    arg: Formula
    spatial = True

    @property
    def children(self):
        return (self.arg,)

    def text(self):
        return f"somewhere{self.interval.text()} {self.arg.text()}"


@dataclass(frozen=True)
class Everywhere(Formula):
    interval: DistInterval
    arg: Formula
    spatial = True

    @property
    def children(self):
        return (self.arg,)

    def text(self):
        return f"everywhere{self.interval.text()} {self.arg.text()}"


@dataclass(frozen=True)
class Surround(Formula):
    bound: float
    left: Formula
    right: Formula
    spatial = True

    def __post_init__(self):
        if math.isnan(self.bound) or self.bound < 0 or math.isinf(self.bound):
            raise FormulaError(f"invalid surround bound {self.bound}")

    @property
    def children(self):
        return (self.left, self.right)

    def text(self):
        return f"({self.left.text()} surround[{format_number(self.bound)}] {self.right.text()})"


def rebuild(node: Formula, children: tuple) -> Formula:
    """Copy ``node`` with new children (same order as ``node.children``)."""
    if isinstance(node, (Not, Eventually, Always, Escape, Somewhere, Everywhere)):
        return replace(node, arg=children[0])
    if isinstance(node, (And, Or, Until, Reach, Surround)):
        return replace(node, left=children[0], right=children[1])
    return node


def number_predicates(f: Formula, start: int = 0) -> Formula:
    """Assign predicate ids in left-to-right order."""
    counter = [start]

    def go(node):
        if isinstance(node, Predicate):
            out = Predicate(node.comparison, counter[0])
            counter[0] += 1
            return out
        kids = node.children
        if not kids:
            return node
        return rebuild(node, tuple(go(c) for c in kids))

    return go(f)


def check_unique_ids(f: Formula) -> None:
    ids = [p.id for p in f.predicates()]
    if len(ids) != len(set(ids)):
        raise FormulaError("predicate ids must be unique within a formula")
