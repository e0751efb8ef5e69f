"""Multi-indices and truncated multivariate Taylor arithmetic.

A *jet* of order ``K`` in ``n`` variables is stored as an array whose last
axis runs over all multi-indices ``|alpha| <= K`` in graded lexicographic
order (degree ascending, and within one degree lexicographically
descending, so ``(0,0), (1,0), (0,1), (2,0), (1,1), (0,2), ...``).

Two conventions share that layout:

* *derivative jets* hold ``d^alpha u(x)``;
* *Taylor jets* hold ``d^alpha u(x) / alpha!``, i.e. the coefficients of
  ``u(x + delta)`` as a polynomial in ``delta``.

Products and compositions are done on Taylor jets; :func:`to_taylor` and
:func:`to_derivative` convert between the two.
"""
from __future__ import annotations

from functools import lru_cache
from itertools import product
from math import factorial

import numpy as np


@lru_cache(maxsize=None)
def multi_indices(n: int, order: int) -> tuple[tuple[int, ...], ...]:
    """All multi-indices of ``n`` variables with total degree ``<= order``."""
    if n == 0:
        return ((),)
    out = []
    for deg in range(order + 1):
        level = [a for a in product(range(deg + 1), repeat=n) if sum(a) == deg]
        out.extend(sorted(level, reverse=True))
    return tuple(out)


@lru_cache(maxsize=None)
def index_map(n: int, order: int) -> dict[tuple[int, ...], int]:
    return {a: i for i, a in enumerate(multi_indices(n, order))}


def count(n: int, order: int) -> int:
    """Number of multi-indices with ``|alpha| <= order`` in ``n`` variables."""
    return len(multi_indices(n, order))


@lru_cache(maxsize=None)
def _factorials(n: int, order: int) -> np.ndarray:
    return np.array([float(np.prod([factorial(k) for k in a])) for a in multi_indices(n, order)])


def to_taylor(jet: np.ndarray, n: int, order: int) -> np.ndarray:
    return jet / _factorials(n, order)


def to_derivative(jet: np.ndarray, n: int, order: int) -> np.ndarray:
    return jet * _factorials(n, order)


@lru_cache(maxsize=None)
def _product_table(n: int, order: int):
    idx = index_map(n, order)
    mis = multi_indices(n, order)
    table = []
    for k, c in enumerate(mis):
        left, right = [], []
        for i, a in enumerate(mis):
            b = tuple(ci - ai for ci, ai in zip(c, a))
            if min(b, default=0) >= 0:
                left.append(i)
                right.append(idx[b])
        table.append((k, np.array(left), np.array(right)))
    return table


def multiply(a: np.ndarray, b: np.ndarray, n: int, order: int) -> np.ndarray:
    """Truncated product of two Taylor jets (broadcasting over leading axes)."""
    shape = np.broadcast_shapes(a.shape, b.shape)
    out = np.empty(shape)
    for k, left, right in _product_table(n, order):
        out[..., k] = np.sum(a[..., left] * b[..., right], axis=-1)
    return out


def compose_univariate(coeffs: np.ndarray, inner: np.ndarray, n: int, order: int) -> np.ndarray:
    """Evaluate ``sum_j coeffs[..., j] * inner**j`` as a truncated Taylor jet.

    ``inner`` must have a zero constant term; ``coeffs[..., j]`` are the
    Taylor coefficients ``g^(j)(z) / j!`` of the outer function at the base
    point.  Horner's scheme keeps this to ``order`` jet products.
    """
    nterms = coeffs.shape[-1]
    shape = np.broadcast_shapes(coeffs.shape[:-1], inner.shape[:-1]) + (inner.shape[-1],)
    result = np.zeros(shape)
    for j in range(nterms - 1, -1, -1):
        if j < nterms - 1:
            result = multiply(result, inner, n, order)
        result[..., 0] += coeffs[..., j]
    return result


def shift(jet: np.ndarray, n: int, order: int, e: tuple[int, ...]) -> np.ndarray:
    """Derivative jet of ``d^e u`` of order ``order - |e|`` from that of ``u``."""
    idx = index_map(n, order)
    low = multi_indices(n, order - sum(e))
    pick = [idx[tuple(a + b for a, b in zip(alpha, e))] for alpha in low]
    return jet[..., pick]


def truncate(jet: np.ndarray, n: int, order: int) -> np.ndarray:
    """Restrict a jet to total degree ``<= order``."""
    return jet[..., : count(n, order)]


def compose_with_curve(jet: np.ndarray, delta: np.ndarray, order: int) -> np.ndarray:
    """Derivatives of ``t -> u(p + delta(t))`` at ``t = 0``.

    Parameters
    ----------
    jet : array (..., count(n, order))
        Derivative jet of ``u`` at ``p``.
    delta : array (..., n, order + 1)
        Univariate Taylor coefficients of the displacement ``delta(t)``;
        ``delta[..., :, 0]`` must vanish.

    Returns
    -------
    array (..., order + 1)
        ``d^a/dt^a u(p + delta(t))`` for ``a = 0..order``.
    """
    n = delta.shape[-2]
    taylor = to_taylor(jet, n, order)
    lead = np.broadcast_shapes(taylor.shape[:-1], delta.shape[:-2])
    # powers[i][b] = delta_i(t)**b as univariate Taylor coefficients
    powers = []
    for i in range(n):
        p = [np.zeros(lead + (order + 1,))]
        p[0][..., 0] = 1.0
        for _ in range(order):
            p.append(multiply(p[-1], delta[..., i, :], 1, order))
        powers.append(p)
    out = np.zeros(lead + (order + 1,))
    for k, beta in enumerate(multi_indices(n, order)):
        term = powers[0][beta[0]]
        for i in range(1, n):
            term = multiply(term, powers[i][beta[i]], 1, order)
        out += taylor[..., k : k + 1] * term
    return out * np.array([float(factorial(a)) for a in range(order + 1)])
