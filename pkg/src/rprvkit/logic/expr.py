"""Arithmetic expressions over a single state vector and predicate comparisons.

Expressions are evaluated on arrays whose last axis is the state dimension,
so one call covers every time step (and every agent) at once.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

BALL_NORMS = ("2", "inf")


def format_number(value: float) -> str:
    value = float(value)
    if np.isinf(value):
        return "inf" if value > 0 else "-inf"
    if value.is_integer() and abs(value) < 1e15:
        return str(int(value))
    return repr(value)


def _norm_order(order: str):
    return 2 if order == "2" else np.inf


class Expr:
    """Base class of the expression tree."""

    def evaluate(self, x: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def refs(self) -> frozenset:
        raise NotImplementedError

    def linear_form(self) -> Optional[tuple[dict, float]]:
        """Return ``(coefficients, offset)`` if the expression is affine, else None."""
        return None

    def is_affine(self) -> bool:
        return self.linear_form() is not None

    def lipschitz(self, norm: str = "2") -> Optional[float]:
        """Lipschitz constant with respect to ``norm`` on the state, or None if unknown."""
        raise NotImplementedError

    def is_constant(self) -> bool:
        return not self.refs()

    def text(self) -> str:
        raise NotImplementedError

    def __str__(self) -> str:
        return self.text()


@dataclass(frozen=True)
class Ref(Expr):
    index: int

    def evaluate(self, x):
        if self.index >= x.shape[-1]:
            raise IndexError(
                f"s[{self.index}] out of range for state dimension {x.shape[-1]}"
            )
        return x[..., self.index]

    def refs(self):
        return frozenset({self.index})

    def linear_form(self):
        return {self.index: 1.0}, 0.0

    def lipschitz(self, norm="2"):
        return 1.0

    def text(self):
        return f"s[{self.index}]"


@dataclass(frozen=True)
class Const(Expr):
    value: float

    def evaluate(self, x):
        return np.full(x.shape[:-1], float(self.value))

    def refs(self):
        return frozenset()

    def linear_form(self):
        return {}, float(self.value)

    def lipschitz(self, norm="2"):
        return 0.0

    def text(self):
        return format_number(self.value)


def _combine(a: dict, b: dict, sb: float = 1.0) -> dict:
    out = dict(a)
    for k, v in b.items():
        out[k] = out.get(k, 0.0) + sb * v
    return out


@dataclass(frozen=True)
class Add(Expr):
    left: Expr
    right: Expr

    def evaluate(self, x):
        return self.left.evaluate(x) + self.right.evaluate(x)

    def refs(self):
        return self.left.refs() | self.right.refs()

    def linear_form(self):
        a, b = self.left.linear_form(), self.right.linear_form()
        if a is None or b is None:
            return None
        return _combine(a[0], b[0]), a[1] + b[1]

    def lipschitz(self, norm="2"):
        la, lb = self.left.lipschitz(norm), self.right.lipschitz(norm)
        if la is None or lb is None:
            return None
        return la + lb

    def text(self):
        return f"({self.left.text()} + {self.right.text()})"


@dataclass(frozen=True)
class Sub(Expr):
    left: Expr
    right: Expr

    def evaluate(self, x):
        return self.left.evaluate(x) - self.right.evaluate(x)

    def refs(self):
        return self.left.refs() | self.right.refs()

    def linear_form(self):
        a, b = self.left.linear_form(), self.right.linear_form()
        if a is None or b is None:
            return None
        return _combine(a[0], b[0], -1.0), a[1] - b[1]

    def lipschitz(self, norm="2"):
        la, lb = self.left.lipschitz(norm), self.right.lipschitz(norm)
        if la is None or lb is None:
            return None
        return la + lb

    def text(self):
        return f"({self.left.text()} - {self.right.text()})"


@dataclass(frozen=True)
class Mul(Expr):
    left: Expr
    right: Expr

    def evaluate(self, x):
        return self.left.evaluate(x) * self.right.evaluate(x)

    def refs(self):
        return self.left.refs() | self.right.refs()

    def _scalar_side(self):
        if self.left.is_constant():
            return float(self.left.evaluate(np.zeros(1))), self.right
        if self.right.is_constant():
            return float(self.right.evaluate(np.zeros(1))), self.left
        return None

    def linear_form(self):
        split = self._scalar_side()
        if split is None:
            return None
        c, other = split
        form = other.linear_form()
        if form is None:
            return None
        return {k: c * v for k, v in form[0].items()}, c * form[1]

    def lipschitz(self, norm="2"):
        split = self._scalar_side()
        if split is None:
            return None
        c, other = split
        lo = other.lipschitz(norm)
        return None if lo is None else abs(c) * lo

    def text(self):
        return f"({self.left.text()} * {self.right.text()})"


@dataclass(frozen=True)
class Neg(Expr):
    arg: Expr

    def evaluate(self, x):
        return -self.arg.evaluate(x)

    def refs(self):
        return self.arg.refs()

    def linear_form(self):
        form = self.arg.linear_form()
        if form is None:
            return None
        return {k: -v for k, v in form[0].items()}, -form[1]

    def lipschitz(self, norm="2"):
        return self.arg.lipschitz(norm)

    def text(self):
        return f"(-{self.arg.text()})"


@dataclass(frozen=True)
class MinMax(Expr):
    """``min(...)`` or ``max(...)`` over a finite argument list."""

    op: str
    args: tuple

    def evaluate(self, x):
        vals = np.stack([a.evaluate(x) for a in self.args], axis=-1)
        return vals.min(axis=-1) if self.op == "min" else vals.max(axis=-1)

    def refs(self):
        return frozenset().union(*(a.refs() for a in self.args))

    def lipschitz(self, norm="2"):
        ls = [a.lipschitz(norm) for a in self.args]
        if any(v is None for v in ls):
            return None
        return max(ls)

    def text(self):
        return f"{self.op}({', '.join(a.text() for a in self.args)})"


def _operator_norm(rows: np.ndarray, ball: str, order: str) -> float:
    # Lipschitz constant of z -> ||A z||_order w.r.t. ||.||_ball (upper bound for inf->2).
    if ball == "2" and order == "2":
        return float(np.linalg.norm(rows, 2))
    if ball == "2":
        return float(np.max(np.linalg.norm(rows, axis=1)))
    row1 = np.abs(rows).sum(axis=1)
    if order == "inf":
        return float(row1.max())
    return float(np.sqrt((row1**2).sum()))


def _rows(args: tuple) -> Optional[np.ndarray]:
    forms = [a.linear_form() for a in args]
    if any(f is None for f in forms):
        return None
    width = 1 + max([k for f in forms for k in f[0]] + [0])
    rows = np.zeros((len(forms), width))
    for i, (coef, _) in enumerate(forms):
        for k, v in coef.items():
            rows[i, k] = v
    return rows


def _vector_lipschitz(args: tuple, ball: str, order: str) -> Optional[float]:
    rows = _rows(args)
    if rows is not None:
        return _operator_norm(rows, ball, order)
    ls = [a.lipschitz(ball) for a in args]
    if any(v is None for v in ls):
        return None
    ls = np.asarray(ls)
    return float(ls.max() if order == "inf" else np.sqrt((ls**2).sum()))


@dataclass(frozen=True)
class Norm(Expr):
    """``norm2(e1, ..., ek)`` or ``norminf(e1, ..., ek)``."""

    order: str
    args: tuple

    def evaluate(self, x):
        vals = np.stack([a.evaluate(x) for a in self.args], axis=-1)
        return np.linalg.norm(vals, ord=_norm_order(self.order), axis=-1)

    def refs(self):
        return frozenset().union(*(a.refs() for a in self.args))

    def lipschitz(self, norm="2"):
        return _vector_lipschitz(self.args, norm, self.order)

    def text(self):
        name = "norm2" if self.order == "2" else "norminf"
        return f"{name}({', '.join(a.text() for a in self.args)})"


@dataclass(frozen=True)
class MinDist(Expr):
    """Minimum ``order``-norm distance from a state sub-vector to a fixed point set.

    ``args`` is None when the whole state vector is used (``s`` in the DSL).
    """

    order: str
    args: Optional[tuple]
    points: tuple

    def _vector(self, x):
        if self.args is None:
            if x.shape[-1] != len(self.points[0]):
                raise ValueError("mindist point dimension does not match the state")
            return x
        return np.stack([a.evaluate(x) for a in self.args], axis=-1)

    def evaluate(self, x):
        u = self._vector(x)
        pts = np.asarray(self.points, dtype=float)
        diff = u[..., None, :] - pts
        return np.linalg.norm(diff, ord=_norm_order(self.order), axis=-1).min(axis=-1)

    def refs(self):
        if self.args is None:
            return frozenset(range(len(self.points[0])))
        return frozenset().union(*(a.refs() for a in self.args))

    def vector_args(self) -> tuple:
        if self.args is None:
            return tuple(Ref(i) for i in range(len(self.points[0])))
        return self.args

    def lipschitz(self, norm="2"):
        return _vector_lipschitz(self.vector_args(), norm, self.order)

    def text(self):
        name = "mindist_inf" if self.order == "inf" else "mindist2"
        first = "s" if self.args is None else "(" + ", ".join(a.text() for a in self.args) + ")"
        pts = ", ".join("(" + ", ".join(format_number(c) for c in p) + ")" for p in self.points)
        return f"{name}({first}, {{{pts}}})"


def _ball_inf_distance(a: np.ndarray, radius: np.ndarray, ball: str, order: str) -> np.ndarray:
    """Lower bound of ``min ||a + d||_order`` over ``||d||_ball <= radius`` (exact up to 1e-12).

    ``a`` has shape ``(..., k)``; ``radius`` broadcasts against ``a[..., 0]``.
    """
    radius = np.broadcast_to(radius, a.shape[:-1]).astype(float)
    absa = np.abs(a)
    if ball == order:
        return np.maximum(0.0, np.linalg.norm(a, ord=_norm_order(order), axis=-1) - radius)
    if ball == "inf":
        return np.sqrt((np.maximum(0.0, absa - radius[..., None]) ** 2).sum(axis=-1))
    # Euclidean ball, max-norm distance: smallest s with dist_2(a, cube_s) <= radius.
    lo = np.zeros(a.shape[:-1])
    hi = absa.max(axis=-1)
    done = np.sqrt((absa**2).sum(axis=-1)) <= radius
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        ok = np.sqrt((np.maximum(0.0, absa - mid[..., None]) ** 2).sum(axis=-1)) <= radius
        hi = np.where(ok, mid, hi)
        lo = np.where(ok, lo, mid)
        if np.all(hi - lo <= 1e-12 * np.maximum(1.0, hi)):
            break
    return np.where(done, 0.0, lo)


def _selection(args: tuple) -> Optional[list]:
    """For args of the form ``+-s[i] + b`` with distinct i, return [(i, sign, b)]."""
    out = []
    for a in args:
        form = a.linear_form()
        if form is None or len(form[0]) != 1:
            return None
        (idx, coef), = form[0].items()
        if abs(coef) != 1.0:
            return None
        out.append((idx, coef, form[1]))
    if len({i for i, _, _ in out}) != len(out):
        return None
    return out


@dataclass(frozen=True)
class Comparison:
    """``lhs >= rhs`` or ``lhs <= rhs``; normalized to ``h(x) >= 0``."""

    lhs: Expr
    op: str
    rhs: Expr

    def __post_init__(self):
        if self.op not in (">=", "<="):
            raise ValueError(f"unsupported comparison {self.op!r}")

    @property
    def h(self) -> Expr:
        if self.op == ">=":
            return Sub(self.lhs, self.rhs)
        return Sub(self.rhs, self.lhs)

    def evaluate(self, x: np.ndarray) -> np.ndarray:
        lhs = self.lhs.evaluate(x)
        rhs = self.rhs.evaluate(x)
        return lhs - rhs if self.op == ">=" else rhs - lhs

    def negated(self) -> "Comparison":
        return Comparison(self.lhs, "<=" if self.op == ">=" else ">=", self.rhs)

    def refs(self) -> frozenset:
        return self.lhs.refs() | self.rhs.refs()

    def is_affine(self) -> bool:
        return self.h.is_affine()

    def lipschitz(self, norm: str = "2") -> Optional[float]:
        return self.h.lipschitz(norm)

    def text(self) -> str:
        return f"{self.lhs.text()} {self.op} {self.rhs.text()}"

    def _distance_split(self):
        # h = D - k with D a norm/mindist over a coordinate selection.
        if self.op == ">=":
            dist, other = self.lhs, self.rhs
        else:
            dist, other = self.rhs, self.lhs
        if not other.is_constant():
            return None
        if isinstance(dist, Norm):
            sel = _selection(dist.args)
            points = ((0.0,) * len(dist.args),)
        elif isinstance(dist, MinDist):
            sel = _selection(dist.vector_args())
            points = dist.points
        else:
            return None
        if sel is None:
            return None
        return dist.order, sel, points, float(other.evaluate(np.zeros(1)))

    def ball_infimum(self, center: np.ndarray, radius, ball: str = "2",
                     exact_distance: bool = False) -> np.ndarray:
        """Sound lower bound of ``inf h(z)`` over ``||z - center||_ball <= radius``.

        Exact for affine predicates. Other predicates get the Lipschitz bound
        ``h(center) - L * radius``. With ``exact_distance=True``, distance atoms
        (``norm``/``mindist`` over a coordinate selection compared against a
        constant) get the exact infimum instead.
        """
        if ball not in BALL_NORMS:
            raise ValueError(f"unknown ball norm {ball!r}")
        center = np.asarray(center, dtype=float)
        radius = np.broadcast_to(np.asarray(radius, dtype=float), center.shape[:-1])
        hc = self.evaluate(center)
        form = self.h.linear_form()
        if form is not None:
            grad = np.zeros(max(form[0], default=-1) + 1)
            for k, v in form[0].items():
                grad[k] = v
            dual = np.abs(grad).sum() if ball == "inf" else np.sqrt((grad**2).sum())
            return _shrink(hc, dual, radius)
        split = self._distance_split() if exact_distance else None
        if split is not None:
            order, sel, points, k = split
            idx = [i for i, _, _ in sel]
            signs = np.array([s for _, s, _ in sel])
            offs = np.array([b for _, _, b in sel])
            best = None
            for p in points:
                target = signs * (np.asarray(p, dtype=float) - offs)
                d = _ball_inf_distance(center[..., idx] - target, radius, ball, order)
                best = d if best is None else np.minimum(best, d)
            return np.where(np.isinf(radius), -np.inf, best - k)
        lip = self.lipschitz(ball)
        if lip is None:
            raise ValueError(
                f"predicate {self.text()!r} has no derivable Lipschitz constant"
            )
        return _shrink(hc, lip, radius)


def _shrink(value: np.ndarray, slope: float, radius: np.ndarray) -> np.ndarray:
    if slope == 0.0:
        return np.asarray(value, dtype=float) + np.zeros_like(radius)
    return value - slope * radius
