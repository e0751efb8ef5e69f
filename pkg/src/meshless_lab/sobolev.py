"""Integer and fractional Sobolev (semi-)norms by quadrature.

Fractional semi-norms use the Sobolev-Slobodeckij convention: for
``l = floor(l) + sigma`` with ``0 < sigma < 1``

    |u|_{l,q}^q = sum_{|alpha| = floor(l)}  int int |d^alpha u(x) - d^alpha u(y)|^q
                                               / |x - y|^(n + sigma q)  dx dy.

The double integral is written in difference coordinates,
``y = x + rho * theta``, so the diagonal singularity becomes a one-sided
power singularity in ``rho`` that composite Gauss rules on geometrically
graded intervals integrate accurately.  Pairs with ``|x - y| < h_cut`` are
excluded without correction; ``h_cut`` is a fixed fraction of the domain
diameter, which keeps the rule exactly scale-covariant under dilations.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from . import jets
from .functions import FunctionSample
from .geometry import Domain


class QuadratureBudgetError(ValueError):
    pass


@dataclass(frozen=True)
class QuadSpec:
    """Resolution knobs for composite Gauss quadrature.

    cells, order
        Uniform cells per axis (radial cells on a disk) and Gauss points per cell.
    grading
        Extra geometrically graded cells toward the boundary (halving each level).
    directions
        Angular nodes for 2D difference integrals and disk rules.
    radial_cells, cut_exponent
        Graded cells in the difference variable and ``h_cut = diam * 2**-cut_exponent``.
    max_pairs
        Budget for the number of (x, y) pairs of a double integral.
    """

    cells: int = 16
    order: int = 8
    grading: int = 0
    directions: int = 32
    radial_cells: int = 20
    cut_exponent: float = 40.0
    max_pairs: int = 1_000_000

    def __post_init__(self):
        if min(self.cells, self.order, self.directions, self.radial_cells) < 1 or self.grading < 0:
            raise ValueError("quadrature resolution must be positive")

    def refined(self) -> "QuadSpec":
        return QuadSpec(2 * self.cells, self.order, self.grading + 4, 2 * self.directions,
                        self.radial_cells + 6, self.cut_exponent + 8, 4 * self.max_pairs)


DEFAULT_QUAD = QuadSpec()
GAGLIARDO_1D = QuadSpec(cells=12, order=8, grading=30, radial_cells=160, cut_exponent=400.0,
                        max_pairs=4_000_000)
GAGLIARDO_2D = QuadSpec(cells=4, order=4, grading=6, directions=16, radial_cells=12, cut_exponent=30.0,
                        max_pairs=4_000_000)


@lru_cache(maxsize=None)
def _gauss(order: int):
    return np.polynomial.legendre.leggauss(order)


def _composite(breaks: np.ndarray, order: int):
    x, w = _gauss(order)
    a, b = breaks[:-1, None], breaks[1:, None]
    nodes = (0.5 * (b - a) * x + 0.5 * (a + b)).ravel()
    weights = (0.5 * (b - a) * w).ravel()
    return nodes, weights


def _graded_breaks(lo: float, hi: float, cells: int, grading: int, both: bool = True) -> np.ndarray:
    br = np.linspace(lo, hi, cells + 1)
    if grading:
        h = br[1] - br[0]
        g = h * 0.5 ** np.arange(1, grading + 1)
        br = np.concatenate([br[:1], (lo + g)[::-1], br[1:]])
        if both:
            br = np.concatenate([br[:-1], (hi - g), br[-1:]])
    return br


def rule_1d(lo: float, hi: float, quad: QuadSpec):
    return _composite(_graded_breaks(lo, hi, quad.cells, quad.grading), quad.order)


def domain_rule(dom: Domain, quad: QuadSpec = DEFAULT_QUAD):
    """Quadrature nodes (N, n) and weights (N,) over the domain."""
    if dom.kind == "interval":
        x, w = rule_1d(dom.lower[0], dom.upper[0], quad)
        return x[:, None], w
    if dom.kind == "square":
        x, w = rule_1d(dom.lower[0], dom.upper[0], quad)
        y, v = rule_1d(dom.lower[1], dom.upper[1], quad)
        X, Y = np.meshgrid(x, y, indexing="ij")
        return np.stack([X.ravel(), Y.ravel()], axis=1), np.outer(w, v).ravel()
    # radial cells graded toward the rim only
    br = np.linspace(0.0, dom.radius, quad.cells + 1)
    if quad.grading:
        rim = dom.radius - (dom.radius / quad.cells) * 0.5 ** np.arange(1, quad.grading + 1)
        br = np.unique(np.concatenate([br, rim]))
    r, wr = _composite(br, quad.order)
    m = 2 * max(quad.directions, quad.cells)
    th = 2 * math.pi * np.arange(m) / m
    R, T = np.meshgrid(r, th, indexing="ij")
    nodes = np.stack([R.ravel() * np.cos(T.ravel()), R.ravel() * np.sin(T.ravel())], axis=1) + np.asarray(dom.center)
    weights = (np.outer(wr * r, np.full(m, 2 * math.pi / m))).ravel()
    return nodes, weights


# ---------------------------------------------------------------------------
# orders


@dataclass(frozen=True)
class SobolevOrder:
    """Smoothness ``l >= 0`` with integrability ``q in [1, inf]``."""

    l: float
    q: float = 2.0

    def __post_init__(self):
        if self.l < 0:
            raise ValueError("order must be nonnegative")
        if not (self.q >= 1):
            raise ValueError("q must lie in [1, inf]")

    @property
    def floor(self) -> int:
        return int(math.floor(self.l + 1e-12))

    @property
    def sigma(self) -> float:
        s = self.l - self.floor
        return 0.0 if abs(s) < 1e-12 else s

    @property
    def is_integer(self) -> bool:
        return self.sigma == 0.0

    @property
    def ceil_defect(self) -> float:
        """``ceil(l) - l``."""
        return 0.0 if self.is_integer else 1.0 - self.sigma

    @property
    def K(self) -> float:
        return correction_factor(self)


def correction_factor(order: SobolevOrder) -> float:
    """``K(ceil(l) - l, q)``: 1 for integer ``l`` or ``q = inf``, else ``(ceil(l) - l)**(-1/q)``."""
    if order.is_integer or math.isinf(order.q):
        return 1.0
    return order.ceil_defect ** (-1.0 / order.q)


# ---------------------------------------------------------------------------
# semi-norms


def _alphas(n: int, m: int):
    return [a for a in jets.multi_indices(n, m) if sum(a) == m]


def integer_seminorm(u: FunctionSample, m: int, q: float, dom: Domain, quad: QuadSpec = DEFAULT_QUAD) -> float:
    """``(sum_{|alpha| = m} int |d^alpha u|^q)^(1/q)``; max over nodes for ``q = inf``."""
    nodes, weights = domain_rule(dom, quad)
    J = u.jet(nodes, m)
    cols = [jets.index_map(dom.dim, m)[a] for a in _alphas(dom.dim, m)]
    vals = np.abs(J[:, cols])
    if math.isinf(q):
        return float(vals.max())
    return float(np.sum(weights[:, None] * vals**q) ** (1.0 / q))


def _ray_lengths(dom: Domain, x: np.ndarray, theta: np.ndarray) -> np.ndarray:
    """Distance from interior points ``x`` (N, n) to the boundary along ``theta`` (D, n)."""
    if dom.kind == "disk":
        rel = x - np.asarray(dom.center)
        b = rel @ theta.T
        c = np.sum(rel**2, axis=1)[:, None] - dom.radius**2
        return np.maximum(-b + np.sqrt(np.maximum(b**2 - c, 0.0)), 0.0)
    lo, hi = np.asarray(dom.lower), np.asarray(dom.upper)
    with np.errstate(divide="ignore", invalid="ignore"):
        t_hi = (hi[None, None, :] - x[:, None, :]) / theta[None, :, :]
        t_lo = (lo[None, None, :] - x[:, None, :]) / theta[None, :, :]
    t = np.where(theta[None, :, :] > 0, t_hi, np.where(theta[None, :, :] < 0, t_lo, np.inf))
    return np.maximum(t.min(axis=2), 0.0)


def _directions(n: int, count: int):
    if n == 1:
        return np.array([[1.0], [-1.0]]), np.ones(2)
    th = 2 * math.pi * (np.arange(count) + 0.5) / count
    return np.stack([np.cos(th), np.sin(th)], axis=1), np.full(count, 2 * math.pi / count)


def _difference_polynomials(u: FunctionSample, xs: np.ndarray, dirs: np.ndarray, m: int, extra: int) -> np.ndarray:
    """Taylor coefficients in ``rho`` of ``d^a u(x + rho theta) - d^a u(x)``, ``|a| = m``.

    Returns (Nx, D, A, extra): entry ``k - 1`` holds
    ``sum_{|b| = k} d^{a+b} u(x) theta^b / b!``.
    """
    n = xs.shape[1]
    J = u.jet(xs, m + extra)
    out = np.zeros((xs.shape[0], dirs.shape[0], len(_alphas(n, m)), extra))
    for j, a in enumerate(_alphas(n, m)):
        g = jets.shift(J, n, m + extra, a)  # jet of d^a u, order `extra`
        idx = jets.index_map(n, extra)
        for b in jets.multi_indices(n, extra):
            k = sum(b)
            if k == 0:
                continue
            mono = np.prod([dirs[:, i] ** b[i] / math.factorial(b[i]) for i in range(n)], axis=0)  # (D,)
            out[:, :, j, k - 1] += g[:, idx[b], None] * mono[None, :]
    return out


def gagliardo_seminorm(u: FunctionSample, order: SobolevOrder, dom: Domain, quad: QuadSpec | None = None) -> float:
    """Slobodeckij semi-norm ``|u|_{l,q}`` for fractional ``l``.

    For ``q = inf`` the Holder quotient ``|d^a u(x) - d^a u(y)| / |x-y|^sigma``
    is maximised over the quadrature pairs (a one-sided under-estimate).
    """
    sigma = order.sigma
    if not 0 < sigma < 1:
        raise ValueError("not fractional")
    quad = quad or (GAGLIARDO_1D if dom.dim == 1 else GAGLIARDO_2D)
    n, m, q = dom.dim, order.floor, order.q
    xs, wx = domain_rule(dom, quad)
    dirs, wd = _directions(n, quad.directions)
    gx, gw = _gauss(quad.order)
    per_ray = quad.radial_cells * quad.order
    pairs = xs.shape[0] * dirs.shape[0] * per_ray
    if pairs > quad.max_pairs:
        raise QuadratureBudgetError(f"quadrature budget exceeded: {pairs} pairs required (limit {quad.max_pairs})")
    h_cut = dom.diameter * 2.0 ** (-quad.cut_exponent)
    cols = [jets.index_map(n, m)[a] for a in _alphas(n, m)]
    base = u.jet(xs, m)[:, cols]  # (Nx, A)
    # below rho_taylor the difference is taken from the jet at x, since
    # d^a u(x + rho theta) - d^a u(x) loses all digits to cancellation there
    extra = min(2, u.max_order - m)
    rho_taylor = dom.diameter * (1e-4 if extra >= 2 else 1e-6) if extra >= 1 else 0.0
    poly = _difference_polynomials(u, xs, dirs, m, extra) if extra >= 1 else None  # (Nx, D, A, extra)
    rmax = _ray_lengths(dom, xs, dirs)  # (Nx, D)
    live = rmax > h_cut
    ratio = np.where(live, rmax / h_cut, 1.0)
    # geometric breakpoints between h_cut and rho_max, Gauss nodes inside each
    t = np.arange(quad.radial_cells + 1) / quad.radial_cells
    br = h_cut * ratio[..., None] ** t  # (Nx, D, J+1)
    a, b = br[..., :-1, None], br[..., 1:, None]
    rho = (0.5 * (b - a) * gx + 0.5 * (a + b)).reshape(*rmax.shape, -1)  # (Nx, D, P)
    wrho = (0.5 * (b - a) * gw).reshape(*rmax.shape, -1)
    total = 0.0 if not math.isinf(q) else -np.inf
    chunk = max(1, 200_000 // (dirs.shape[0] * per_ray))
    for lo in range(0, xs.shape[0], chunk):
        sl = slice(lo, lo + chunk)
        ys = xs[sl, None, None, :] + rho[sl, :, :, None] * dirs[None, :, None, :]
        vy = u.jet(ys.reshape(-1, n), m)[:, cols].reshape(*rho[sl].shape, len(cols))
        diff = np.abs(vy - base[sl, None, None, :])
        if poly is not None:
            powers = rho[sl][..., None, None] ** np.arange(1, extra + 1)  # (c, D, P, 1, extra)
            near = np.abs(np.sum(poly[sl][:, :, None] * powers, axis=-1))
            diff = np.where((rho[sl] < rho_taylor)[..., None], near, diff)
        mask = live[sl][..., None]
        if math.isinf(q):
            quot = np.where(mask[..., None], diff / rho[sl][..., None] ** sigma, 0.0)
            total = max(total, float(quot.max()))
        else:
            # (diff / rho)^q rho^{(1 - sigma) q - 1} stays finite for tiny rho
            integrand = np.sum((diff / rho[sl][..., None]) ** q, axis=-1) * rho[sl] ** ((1.0 - sigma) * q - 1.0)
            inner = np.sum(np.where(mask, integrand * wrho[sl], 0.0), axis=-1)  # (chunk, D)
            total += float(np.sum(wx[sl] * (inner @ wd)))
    if math.isinf(q):
        return total
    return total ** (1.0 / q)


def seminorm(u: FunctionSample, order: SobolevOrder, dom: Domain, quad: QuadSpec | None = None) -> float:
    if order.is_integer:
        return integer_seminorm(u, order.floor, order.q, dom, quad or DEFAULT_QUAD)
    return gagliardo_seminorm(u, order, dom, quad)


def sobolev_norm(u: FunctionSample, order: SobolevOrder, dom: Domain, quad: QuadSpec | None = None,
                 frac_quad: QuadSpec | None = None) -> float:
    """``||u||_{l,q}``: q-sum of the semi-norms of orders ``0..floor(l)`` and the fractional top."""
    q = order.q
    parts = [integer_seminorm(u, j, q, dom, quad or DEFAULT_QUAD) for j in range(order.floor + 1)]
    if not order.is_integer:
        parts.append(gagliardo_seminorm(u, order, dom, frac_quad))
    if math.isinf(q):
        return max(parts)
    return float(sum(p**q for p in parts) ** (1.0 / q))


# ---------------------------------------------------------------------------
# admissibility (Sobolev bounds with higher-order data)


@dataclass(frozen=True)
class SamplingParameters:
    """Parameters ``(r, mu, p, q, kappa)`` of a sampling inequality in ``n`` dimensions."""

    r: float
    mu: int = 0
    p: float = 2.0
    q: float = 2.0
    kappa: float = 2.0
    n: int = 1

    def __post_init__(self):
        if self.mu < 0 or int(self.mu) != self.mu:
            raise ValueError("mu must be a nonnegative integer")
        for e in (self.p, self.q, self.kappa):
            if not e >= 1:
                raise ValueError("exponents must lie in [1, inf]")
        s = self.r - self.mu
        if math.isinf(self.p):
            if s < 1 or abs(s - round(s)) > 1e-12:
                raise ValueError("r - mu must be a positive integer when p = inf")
        elif self.p == 1:
            if s < self.n:
                raise ValueError("r - mu >= n required when p = 1")
        elif not s > self.n / self.p:
            raise ValueError("r - mu > n/p required")

    @property
    def gamma(self) -> float:
        return max(self.p, self.q, self.kappa)

    @property
    def excess(self) -> float:
        """``(1/p - 1/q)_+``."""
        return max(0.0, 1.0 / self.p - 1.0 / self.q)

    @property
    def l0(self) -> float:
        return self.r - self.mu - self.n * self.excess


def _is_natural(v: float, positive: bool = False) -> bool:
    return abs(v - round(v)) < 1e-12 and (round(v) >= 1 if positive else round(v) >= 0)


@dataclass(frozen=True)
class Admissibility:
    l0: float
    l_max: float
    attained: bool  # l_max == l0
    fractional_ok: bool  # real l in [0, l_max] admissible


def admissible_lmax(params: SamplingParameters, n: int | None = None) -> Admissibility:
    """Largest admissible order ``l_max`` of the left-hand semi-norm.

    ``l_max = l0`` when ``r`` is a positive integer and one of
    (i) ``p < q < inf`` with integer ``l0``, (ii) ``(p, q) = (1, inf)``,
    (iii) ``p >= q`` holds; otherwise ``ceil(l0) - 1``.
    """
    if n is not None and n != params.n:
        params = SamplingParameters(params.r, params.mu, params.p, params.q, params.kappa, n)
    p, q, l0 = params.p, params.q, params.l0
    cond = (p < q < math.inf and _is_natural(l0)) or (p == 1 and math.isinf(q)) or p >= q
    attained = _is_natural(params.r, positive=True) and cond
    lmax = l0 if attained else math.ceil(l0 - 1e-12) - 1
    return Admissibility(l0, float(lmax), attained, p <= q)
