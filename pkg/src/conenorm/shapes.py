"""Positive shape functions k(t) used as cone multipliers and density weights."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

_EXPR_NAMESPACE = {
    name: getattr(np, name)
    for name in ("exp", "log", "log1p", "expm1", "sqrt", "sin", "cos", "tanh", "abs", "minimum", "maximum", "pi", "e")
}


def compile_expr(expr: str, variables: tuple[str, ...]) -> Callable:
    """Compile a numpy expression in the given variables (no builtins)."""
    code = compile(expr, "<expr>", "eval")
    unknown = set(code.co_names) - set(_EXPR_NAMESPACE) - set(variables)
    if unknown:
        raise ValueError(f"unknown names in expression {expr!r}: {sorted(unknown)}")

    def fn(*args):
        env = dict(_EXPR_NAMESPACE)
        env.update(zip(variables, args))
        return eval(code, {"__builtins__": {}}, env)

    return fn


class Shape:
    """Base class: a positive continuous function of one variable."""

    def __call__(self, t):
        raise NotImplementedError

    def pow(self, power: float) -> "Shape":
        if power == 1:
            return self
        return _Composite(lambda t, s=self, a=power: np.asarray(s(t), dtype=float) ** a, f"({self})^{power}")

    def __mul__(self, other: "Shape") -> "Shape":
        if isinstance(other, ConstShape):
            return other * self
        return _Composite(lambda t, a=self, b=other: np.asarray(a(t), dtype=float) * b(t), f"{self}*{other}")

    @property
    def is_const(self) -> bool:
        return False


@dataclass(frozen=True)
class ConstShape(Shape):
    c: float = 1.0

    def __post_init__(self):
        if not self.c > 0:
            raise ValueError("constant shape must be positive")

    def __call__(self, t):
        return np.full(np.shape(t), self.c, dtype=float) if np.ndim(t) else float(self.c)

    def pow(self, power):
        return ConstShape(self.c**power)

    def __mul__(self, other):
        if isinstance(other, ConstShape):
            return ConstShape(self.c * other.c)
        if isinstance(other, PowerShape):
            return PowerShape(other.kappa, self.c * other.c)
        if self.c == 1.0:
            return other
        return _Composite(lambda t, a=self.c, b=other: a * np.asarray(b(t), dtype=float), f"{self.c}*{other}")

    @property
    def is_const(self):
        return True


@dataclass(frozen=True)
class PowerShape(Shape):
    """k(t) = c * t**kappa on t > 0."""

    kappa: float
    c: float = 1.0

    def __call__(self, t):
        return self.c * np.asarray(t, dtype=float) ** self.kappa

    def pow(self, power):
        return PowerShape(self.kappa * power, self.c**power)

    def __mul__(self, other):
        if isinstance(other, ConstShape):
            return PowerShape(self.kappa, self.c * other.c)
        if isinstance(other, PowerShape):
            return PowerShape(self.kappa + other.kappa, self.c * other.c)
        return Shape.__mul__(self, other)

    @property
    def is_const(self):
        return self.kappa == 0


@dataclass(frozen=True, eq=False)
class ExprShape(Shape):
    """User expression in ``t``; positivity and continuity are assumed."""

    expr: str

    def __post_init__(self):
        object.__setattr__(self, "_fn", compile_expr(self.expr, ("t",)))

    def __call__(self, t):
        out = self._fn(np.asarray(t, dtype=float))
        return np.broadcast_to(np.asarray(out, dtype=float), np.shape(t)).copy() if np.ndim(t) else float(out)


class _Composite(Shape):
    def __init__(self, fn, label):
        self._fn = fn
        self._label = label

    def __call__(self, t):
        return self._fn(t)

    def __repr__(self):
        return self._label


ONE = ConstShape(1.0)
