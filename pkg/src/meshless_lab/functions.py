"""Callable functions with derivative access (``FunctionSample``)."""
from __future__ import annotations

from functools import lru_cache

import numpy as np
import sympy

from . import jets

COORDS = sympy.symbols("x y z")


class FunctionSample:
    """A function on ``R^n`` with partial derivatives up to ``max_order``.

    Subclasses implement :meth:`jet`; everything else derives from it.
    """

    def __init__(self, dim: int, max_order: int):
        self.dim = dim
        self.max_order = max_order

    def _check(self, order):
        if order > self.max_order:
            from .kernels import JetOrderError

            raise JetOrderError(order, self.max_order)

    def jet(self, x: np.ndarray, order: int) -> np.ndarray:
        """All derivatives ``|alpha| <= order`` at points ``x`` (N, n)."""
        raise NotImplementedError

    def derivative(self, x, alpha) -> np.ndarray:
        alpha = tuple(alpha)
        order = sum(alpha)
        return self.jet(x, order)[:, jets.index_map(self.dim, order)[alpha]]

    def __call__(self, x) -> np.ndarray:
        return self.jet(x, 0)[:, 0]

    def __add__(self, other):
        return Combination([(1.0, self), (1.0, other)])

    def __sub__(self, other):
        return Combination([(1.0, self), (-1.0, other)])

    def __rmul__(self, c):
        return Combination([(float(c), self)])


class Combination(FunctionSample):
    """Linear combination ``sum_i c_i f_i``."""

    def __init__(self, terms):
        dims = {f.dim for _, f in terms}
        if len(dims) != 1:
            raise ValueError("dimension mismatch in combination")
        super().__init__(dims.pop(), min(f.max_order for _, f in terms))
        self.terms = list(terms)

    def jet(self, x, order):
        self._check(order)
        return sum(c * f.jet(x, order) for c, f in self.terms)


class Zero(FunctionSample):
    def __init__(self, dim: int):
        super().__init__(dim, 1_000)

    def jet(self, x, order):
        x = np.atleast_2d(x)
        return np.zeros((x.shape[0], jets.count(self.dim, order)))


@lru_cache(maxsize=None)
def _derivative(expr_src: str, dim: int, alpha: tuple[int, ...]):
    syms = COORDS[:dim]
    if not any(alpha):
        return sympy.sympify(expr_src, locals=dict(zip(map(str, syms), syms)))
    # differentiate the cached parent once more
    i = max(j for j, a in enumerate(alpha) if a)
    parent = alpha[:i] + (alpha[i] - 1,) + alpha[i + 1 :]
    return sympy.diff(_derivative(expr_src, dim, parent), syms[i])


@lru_cache(maxsize=None)
def _lambdified(expr_src: str, dim: int, alpha: tuple[int, ...]):
    return sympy.lambdify(COORDS[:dim], _derivative(expr_src, dim, alpha), modules="numpy", cse=True)


class SymbolicFunction(FunctionSample):
    """Function given by a sympy expression in ``x`` (and ``y``).

    >>> f = SymbolicFunction("sin(pi*x)", dim=1)
    >>> float(f.derivative([[0.0]], (1,))[0])  # doctest: +ELLIPSIS
    3.14159...
    """

    def __init__(self, expr, dim: int, max_order: int = 12):
        super().__init__(dim, max_order)
        self.expr = str(expr)

    def jet(self, x, order):
        self._check(order)
        x = np.atleast_2d(np.asarray(x, dtype=float))
        if x.shape[1] != self.dim:
            raise ValueError(f"dimension mismatch: points are {x.shape[1]}D, function is {self.dim}D")
        out = np.empty((x.shape[0], jets.count(self.dim, order)))
        cols = [x[:, i] for i in range(self.dim)]
        with np.errstate(all="ignore"):
            for k, alpha in enumerate(jets.multi_indices(self.dim, order)):
                vals = _lambdified(self.expr, self.dim, alpha)(*cols)
                out[:, k] = np.broadcast_to(np.asarray(vals, dtype=float), (x.shape[0],))
        return out

    def sympy_expr(self):
        syms = COORDS[: self.dim]
        return sympy.sympify(self.expr, locals=dict(zip(map(str, syms), syms)))

    def __repr__(self):
        return f"SymbolicFunction({self.expr!r}, dim={self.dim})"
