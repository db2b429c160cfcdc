"""Formula length, desugaring, positive normal form and printing."""
from __future__ import annotations

import math

from . import ast as A


class NegationNotEliminable(ValueError):
    """Negation over an operator without a dual (until, reach, escape)."""


def formula_length(f: A.Formula) -> int:
    """Number of future steps needed to evaluate ``f``.

    Spatial operators add nothing on top of their operands.
    """
    if isinstance(f, (A.TrueF, A.FalseF, A.Predicate)):
        return 0
    if isinstance(f, (A.Until, A.Eventually, A.Always)):
        return f.interval.last + max(formula_length(c) for c in f.children)
    return max(formula_length(c) for c in f.children)


def to_text(f: A.Formula) -> str:
    """Fully parenthesized DSL text; ``parse(to_text(f))`` rebuilds ``f``."""
    return f.text()


def desugar_surround(f: A.Surround) -> A.Formula:
    a, b = f.left, f.right
    reach = A.Reach(A.DistInterval(0.0, f.bound), a, A.Not(A.Or(a, b)))
    esc = A.Escape(A.DistInterval(f.bound, math.inf), a)
    return A.And(A.And(a, A.Not(reach)), A.Not(esc))


def desugar(f: A.Formula) -> A.Formula:
    """Expand every derived operator into the core syntax (true, pred, not, and, U, R, E)."""
    kids = tuple(desugar(c) for c in f.children)
    if isinstance(f, A.FalseF):
        return A.Not(A.TrueF())
    if isinstance(f, A.Or):
        return A.Not(A.And(A.Not(kids[0]), A.Not(kids[1])))
    if isinstance(f, A.Eventually):
        return A.Until(f.interval, A.TrueF(), kids[0])
    if isinstance(f, A.Always):
        return A.Not(A.Until(f.interval, A.TrueF(), A.Not(kids[0])))
    if isinstance(f, A.Somewhere):
        return A.Reach(f.interval, A.TrueF(), kids[0])
    if isinstance(f, A.Everywhere):
        return A.Not(A.Reach(f.interval, A.TrueF(), A.Not(kids[0])))
    if isinstance(f, A.Surround):
        return desugar(desugar_surround(A.Surround(f.bound, kids[0], kids[1])))
    return A.rebuild(f, kids) if kids else f


_DUAL = {
    A.Eventually: A.Always,
    A.Always: A.Eventually,
    A.Somewhere: A.Everywhere,
    A.Everywhere: A.Somewhere,
}


def to_pnf(f: A.Formula) -> A.Formula:
    """Push negations down to predicates.

    Negated predicates flip their comparison and receive fresh ids above the
    largest existing id.
    """
    ids = [p.id for p in f.predicates()]
    counter = [max(ids, default=-1) + 1]

    def go(node, neg):
        if isinstance(node, A.TrueF):
            return A.FalseF() if neg else node
        if isinstance(node, A.FalseF):
            return A.TrueF() if neg else node
        if isinstance(node, A.Predicate):
            if not neg:
                return node
            out = A.Predicate(node.comparison.negated(), counter[0])
            counter[0] += 1
            return out
        if isinstance(node, A.Not):
            return go(node.arg, not neg)
        if isinstance(node, (A.And, A.Or)):
            l, r = go(node.left, neg), go(node.right, neg)
            swap = neg
            cls = type(node)
            if swap:
                cls = A.Or if cls is A.And else A.And
            return cls(l, r)
        if type(node) in _DUAL:
            cls = _DUAL[type(node)] if neg else type(node)
            return cls(node.interval, go(node.arg, neg))
        if isinstance(node, A.Surround):
            return go(desugar_surround(node), neg)
        if neg:
            raise NegationNotEliminable(
                f"negation over {type(node).__name__.lower()} has no dual operator"
            )
        return A.rebuild(node, tuple(go(c, False) for c in node.children))

    return go(f, False)


def is_negation_free(f: A.Formula) -> bool:
    return not any(isinstance(n, A.Not) for n in f.walk())
