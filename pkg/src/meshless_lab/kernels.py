"""Radial kernels, their derivative jets, and kernel trial spaces.

Every kernel is written as ``Phi(x, c) = g(|x - c|**2)``.  Derivative jets
come from forward-mode Taylor arithmetic: the jet of ``z = |x - c|**2`` is a
quadratic polynomial, and composing it with the univariate Taylor series of
``g`` yields all partials at once (see :mod:`meshless_lab.jets`).  The
derivatives ``g^(j)`` are exact: with ``D = (1/rho) d/drho`` one has
``g^(j)(z) = 2**-j D^j phi(rho)``, and for Matern and Wendland profiles
``D^j phi`` stays in the class ``exp(-a rho) * Laurent(rho)``, which is
closed under ``D`` and handled with rational coefficients.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from functools import cached_property
from math import comb, factorial
from typing import Optional

import numpy as np

from . import jets
from .functions import FunctionSample

# distances below this (in units of 1/shape) are treated as coincident
_COINCIDENT = 1e-12


class JetOrderError(ValueError):
    """Requested derivative order exceeds what a function supports."""

    def __init__(self, requested, supported):
        super().__init__(f"jet order exceeded: requested {requested}, supported {supported}")
        self.requested = requested
        self.supported = supported


class _ExpLaurent:
    """``exp(-a x) * sum_k c_k x**k`` with exact rational coefficients."""

    def __init__(self, coeffs: dict[int, Fraction], a: int):
        self.coeffs = {k: Fraction(v) for k, v in coeffs.items() if v != 0}
        self.a = a

    def D(self) -> "_ExpLaurent":
        out: dict[int, Fraction] = {}
        for k, c in self.coeffs.items():
            if k:
                out[k - 2] = out.get(k - 2, 0) + k * c
            if self.a:
                out[k - 1] = out.get(k - 1, 0) - self.a * c
        return _ExpLaurent(out, self.a)

    @property
    def regular_at_zero(self) -> bool:
        return all(k >= 0 for k in self.coeffs)

    def __call__(self, x: np.ndarray) -> np.ndarray:
        with np.errstate(divide="ignore", invalid="ignore"):
            total = np.zeros_like(x)
            for k, c in sorted(self.coeffs.items()):
                total = total + float(c) * x**k
            if self.a:
                total = total * np.exp(-self.a * x)
        return total


def _matern_profile(p: int) -> _ExpLaurent:
    # x**nu K_nu(x) for nu = p + 1/2, normalised to 1 at the origin
    scale = Fraction(factorial(p), factorial(2 * p))
    coeffs = {
        p - i: scale * Fraction(factorial(p + i), factorial(i) * factorial(p - i)) * 2 ** (p - i)
        for i in range(p + 1)
    }
    return _ExpLaurent(coeffs, 1)


def _poly_mul(a: dict[int, Fraction], b: dict[int, Fraction]) -> dict[int, Fraction]:
    out: dict[int, Fraction] = {}
    for i, x in a.items():
        for j, y in b.items():
            out[i + j] = out.get(i + j, 0) + x * y
    return out


def _wendland_profile(d: int, k: int) -> _ExpLaurent:
    ell = d // 2 + k + 1
    poly = {j: Fraction(comb(ell, j) * (-1) ** j) for j in range(ell + 1)}  # (1 - x)**ell
    for _ in range(k):
        # I phi(x) = int_x^1 t phi(t) dt
        integ = {j + 2: c / (j + 2) for j, c in poly.items()}
        at_one = sum(integ.values())
        poly = {j: -c for j, c in integ.items()}
        poly[0] = poly.get(0, 0) + at_one
    c0 = poly[0]
    return _ExpLaurent({j: c / c0 for j, c in poly.items()}, 0)


FAMILIES = ("gaussian", "matern", "wendland")


@dataclass(frozen=True)
class Kernel:
    """Radial kernel ``Phi(x, c) = phi(shape * |x - c|)``.

    Parameters
    ----------
    family : {"gaussian", "matern", "wendland"}
    shape : float
        Inverse length scale, ``> 0``.
    smoothness : float
        Matern: ``nu`` (half-integer, ``>= 1/2``).  Wendland: the index
        ``k`` of ``phi_{3,k}``.  Ignored for the Gaussian.
    """

    family: str
    shape: float = 1.0
    smoothness: float = 2.5

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise ValueError(f"unknown kernel family {self.family!r}")
        if not self.shape > 0:
            raise ValueError("shape parameter must be positive")
        if self.family == "matern":
            p = self.smoothness - 0.5
            if p < 0 or p != int(p):
                raise ValueError("matern smoothness must be a half-integer >= 1/2")
        if self.family == "wendland":
            if self.smoothness < 0 or self.smoothness != int(self.smoothness):
                raise ValueError("wendland index must be a nonnegative integer")

    @cached_property
    def _profile(self) -> Optional[_ExpLaurent]:
        if self.family == "matern":
            return _matern_profile(int(self.smoothness - 0.5))
        if self.family == "wendland":
            # d = 3 keeps the kernel positive definite for n <= 3
            return _wendland_profile(3, int(self.smoothness))
        return None

    @property
    def max_order(self) -> int:
        """Highest total derivative order with classical derivatives."""
        if self.family == "gaussian":
            return 16
        if self.family == "matern":
            return 2 * int(self.smoothness - 0.5)
        return 2 * int(self.smoothness)

    def native_smoothness(self, n: int) -> float:
        """Sobolev order ``tau`` of the native space on ``R^n``."""
        if self.family == "gaussian":
            return float("inf")
        if self.family == "matern":
            return self.smoothness + n / 2
        return n / 2 + self.smoothness + 0.5

    def m_tilde(self, n: int) -> float:
        """Regularity index ``tau - 2`` matching ``U~ = H^(m~ + 2)``."""
        return self.native_smoothness(n) - 2

    def profile(self, rho: np.ndarray) -> np.ndarray:
        """``phi(shape * rho)``."""
        x = self.shape * np.asarray(rho, dtype=float)
        if self.family == "gaussian":
            return np.exp(-(x**2))
        vals = self._profile(x)
        if self.family == "wendland":
            vals = np.where(x < 1.0, vals, 0.0)
        return vals

    @cached_property
    def _derived_profiles(self) -> list[_ExpLaurent]:
        prof = [self._profile]
        for _ in range(self.max_order):
            prof.append(prof[-1].D())
        return prof

    def g_derivatives(self, z: np.ndarray, order: int) -> np.ndarray:
        """Taylor coefficients ``g^(j)(z) / j!`` for ``j = 0..order``.

        Entries that are singular at ``z = 0`` and multiply only truncated
        terms are returned as zero there.
        """
        z = np.asarray(z, dtype=float)
        eps2 = self.shape**2
        out = np.empty(z.shape + (order + 1,))
        if self.family == "gaussian":
            base = np.exp(-eps2 * z)
            for j in range(order + 1):
                out[..., j] = (-eps2) ** j * base / factorial(j)
            return out
        x = np.sqrt(eps2 * z)
        zero = x < _COINCIDENT
        xs = np.where(zero, 1.0, x)
        inside = x < 1.0 if self.family == "wendland" else np.ones_like(zero)
        for j in range(order + 1):
            prof = self._derived_profiles[j]
            vals = prof(xs)
            if prof.regular_at_zero:
                vals = np.where(zero, float(prof.coeffs.get(0, 0)), vals)
            else:
                # only reachable through w**j with 2j > order at t = 0
                vals = np.where(zero, 0.0, vals)
            vals = np.where(inside, vals, 0.0)
            out[..., j] = (eps2 / 2) ** j * vals / factorial(j)
        return out

    def jet(self, x: np.ndarray, c: np.ndarray, order: int) -> np.ndarray:
        """Derivative jet of ``Phi(., c)`` at ``x`` with respect to ``x``.

        ``x`` has shape (..., n) and ``c`` broadcasts against it; the result
        has shape (..., count(n, order)).
        """
        if order > self.max_order:
            raise JetOrderError(order, self.max_order)
        x = np.asarray(x, dtype=float)
        c = np.asarray(c, dtype=float)
        t = x - c
        n = t.shape[-1]
        z = np.sum(t**2, axis=-1)
        idx = jets.index_map(n, order)
        w = np.zeros(t.shape[:-1] + (jets.count(n, order),))
        if order >= 1:
            for i in range(n):
                e = tuple(int(i == k) for k in range(n))
                w[..., idx[e]] = 2 * t[..., i]
                if order >= 2:
                    w[..., idx[tuple(2 * v for v in e)]] = 1.0
        coeffs = self.g_derivatives(z, order)
        taylor = jets.compose_univariate(coeffs, w, n, order)
        return jets.to_derivative(taylor, n, order)


def kernel_jet(kern: Kernel, x, c, max_order: int) -> np.ndarray:
    """All ``d^alpha_x Phi(x, c)`` for ``|alpha| <= max_order`` (graded lex)."""
    return kern.jet(np.atleast_1d(np.asarray(x, float)), np.atleast_1d(np.asarray(c, float)), max_order)


def polynomial_jet(x: np.ndarray, degree: int, order: int) -> np.ndarray:
    """Derivative jets of the monomials ``x**beta``, ``|beta| <= degree``.

    Returns shape (N, count(n, degree), count(n, order)).
    """
    x = np.atleast_2d(np.asarray(x, dtype=float))
    n = x.shape[1]
    betas = jets.multi_indices(n, degree)
    alphas = jets.multi_indices(n, order)
    out = np.zeros((x.shape[0], len(betas), len(alphas)))
    for j, beta in enumerate(betas):
        for k, alpha in enumerate(alphas):
            if any(a > b for a, b in zip(alpha, beta)):
                continue
            coef = 1.0
            val = np.ones(x.shape[0])
            for i, (a, b) in enumerate(zip(alpha, beta)):
                coef *= factorial(b) / factorial(b - a)
                val = val * x[:, i] ** (b - a)
            out[:, j, k] = coef * val
    return out


@dataclass(frozen=True, eq=False)
class TrialSpace:
    """Span of ``Phi(., x_j)`` over the centers, optionally plus ``P_k``.

    When a polynomial tail is present the kernel coefficients are subject
    to the moment conditions ``sum_j c_j p(x_j) = 0`` for ``p`` in ``P_k``.
    """

    kernel: Kernel
    centers: np.ndarray
    tail_degree: Optional[int] = None

    def __post_init__(self):
        c = np.atleast_2d(np.asarray(self.centers, dtype=float))
        if c.shape[0] == 1 and c.shape[1] > 1 and np.ndim(self.centers) == 1:
            c = c.T
        object.__setattr__(self, "centers", c)

    @property
    def dim(self) -> int:
        return self.centers.shape[1]

    @property
    def n_centers(self) -> int:
        return self.centers.shape[0]

    @property
    def n_tail(self) -> int:
        return 0 if self.tail_degree is None else jets.count(self.dim, self.tail_degree)

    @property
    def size(self) -> int:
        return self.n_centers + self.n_tail

    @property
    def max_order(self) -> int:
        return self.kernel.max_order

    def column_labels(self) -> list[str]:
        labels = [f"center:{j}" for j in range(self.n_centers)]
        if self.tail_degree is not None:
            labels += ["tail:" + "".join(map(str, b)) for b in jets.multi_indices(self.dim, self.tail_degree)]
        return labels

    def basis_jets(self, x: np.ndarray, order: int) -> np.ndarray:
        """Jets of every basis function at every point: (N, size, count)."""
        x = np.atleast_2d(np.asarray(x, dtype=float))
        if x.shape[1] != self.dim:
            raise ValueError(f"dimension mismatch: points are {x.shape[1]}D, space is {self.dim}D")
        if order > self.max_order:
            raise JetOrderError(order, self.max_order)
        out = self.kernel.jet(x[:, None, :], self.centers[None, :, :], order)
        if self.tail_degree is not None:
            out = np.concatenate([out, polynomial_jet(x, self.tail_degree, order)], axis=1)
        return out

    def moment_matrix(self) -> Optional[np.ndarray]:
        """``P^T`` with ``P[j, i] = p_i(x_j)``; ``None`` without tail."""
        if self.tail_degree is None:
            return None
        return polynomial_jet(self.centers, self.tail_degree, 0)[:, :, 0].T

    def constraint_basis(self) -> np.ndarray:
        """Columns spanning admissible coefficient vectors."""
        if self.tail_degree is None:
            return np.eye(self.size)
        pt = self.moment_matrix()
        _, sv, vt = np.linalg.svd(pt)
        rank = int(np.sum(sv > 1e-12 * sv.max()))
        z = vt[rank:].T
        basis = np.zeros((self.size, z.shape[1] + self.n_tail))
        basis[: self.n_centers, : z.shape[1]] = z
        basis[self.n_centers :, z.shape[1] :] = np.eye(self.n_tail)
        return basis

    def function(self, coeffs) -> "TrialFunction":
        return TrialFunction(self, np.asarray(coeffs, dtype=float))


class TrialFunction(FunctionSample):
    """A fixed element of a trial space."""

    def __init__(self, space: TrialSpace, coeffs: np.ndarray):
        if coeffs.shape != (space.size,):
            raise ValueError(f"dimension mismatch: {coeffs.shape[0]} coefficients for space of size {space.size}")
        super().__init__(space.dim, space.max_order)
        self.space = space
        self.coeffs = coeffs

    def jet(self, x, order):
        self._check(order)
        x = np.atleast_2d(np.asarray(x, dtype=float))
        out = np.zeros((x.shape[0], jets.count(self.dim, order)))
        # chunk to bound memory on dense quadrature grids
        step = max(1, 2_000_000 // max(1, self.space.size * out.shape[1]))
        for lo in range(0, x.shape[0], step):
            b = self.space.basis_jets(x[lo : lo + step], order)
            out[lo : lo + step] = np.einsum("ijk,j->ik", b, self.coeffs)
        return out


def trial_eval(space: TrialSpace, coeffs, x, alpha) -> float:
    """``sum_j c_j d^alpha Phi(x, x_j)`` plus tail derivatives."""
    coeffs = np.asarray(coeffs, dtype=float)
    x = np.atleast_1d(np.asarray(x, dtype=float))
    if x.shape[0] != space.dim or len(alpha) != space.dim:
        raise ValueError("dimension mismatch")
    if coeffs.shape != (space.size,):
        raise ValueError("dimension mismatch: coefficient length")
    return float(space.function(coeffs).derivative(x[None, :], tuple(alpha))[0])


@dataclass
class BestFit:
    coeffs: np.ndarray
    error: float
    relative_error: float
    rank: int
    diagnostics: dict = field(default_factory=dict)


def trial_best_fit(space: TrialSpace, target: FunctionSample, order: int, quad, domain,
                   truncation: float = 1e-12) -> BestFit:
    """Least-squares projection onto the trial space in a discrete ``H^order`` norm.

    The norm is ``sum_{|alpha| <= order} int |d^alpha (u - target)|^2``
    evaluated on the dense quadrature rule ``quad`` over ``domain``.  A
    truncated SVD handles the (typically severe) ill-conditioning; the
    effective rank is reported.
    """
    from .sobolev import domain_rule

    nodes, weights = domain_rule(domain, quad)
    sw = np.sqrt(weights)
    basis = space.basis_jets(nodes, order)  # (N, size, M)
    tj = target.jet(nodes, order)  # (N, M)
    m = basis.shape[2]
    a = (basis * sw[:, None, None]).transpose(0, 2, 1).reshape(-1, space.size)
    b = (tj * sw[:, None]).reshape(-1)
    t = space.constraint_basis()
    u, sv, vt = np.linalg.svd(a @ t, full_matrices=False)
    keep = sv > truncation * sv[0]
    y = vt[keep].T @ ((u[:, keep].T @ b) / sv[keep])
    coeffs = t @ y
    resid = float(np.linalg.norm(a @ coeffs - b))
    ref = float(np.linalg.norm(b))
    return BestFit(coeffs, resid, resid / ref if ref > 0 else 0.0, int(keep.sum()),
                   {"rows": a.shape[0], "derivatives": m, "sigma_max": float(sv[0])})
