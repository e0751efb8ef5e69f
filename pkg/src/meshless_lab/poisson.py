"""The mixed Poisson operator ``L u = (-Lap u, u|_D, du/dn|_N)`` and manufactured problems.

Derivatives on boundary components are intrinsic: tangential (arc-length)
derivatives along the boundary curve in 2D, and none at all on the
0-dimensional boundary of an interval.
"""
from __future__ import annotations

from dataclasses import dataclass
from math import factorial
from typing import Optional

import numpy as np
import sympy

from . import jets
from .functions import COORDS, FunctionSample, SymbolicFunction
from .geometry import Domain, PointSet

COMPONENT_NAMES = {1: "interior", 2: "dirichlet", 3: "neumann"}


# ---------------------------------------------------------------------------
# component functionals on derivative jets
#
# ``J`` is a derivative jet with arbitrary leading (batch) axes; curve
# expansions broadcast against those axes.


def interior_functional(J: np.ndarray, n: int, mu: int) -> np.ndarray:
    """``d^alpha (-Lap u)`` for ``|alpha| <= mu`` from a jet of order ``mu + 2``."""
    out = np.zeros(J.shape[:-1] + (jets.count(n, mu),))
    for i in range(n):
        e = tuple(2 * int(i == k) for k in range(n))
        out -= jets.shift(J, n, mu + 2, e)
    return out


def trace_functional(J: np.ndarray, delta: np.ndarray, mu: int) -> np.ndarray:
    """Tangential derivatives ``d^a/ds^a u(gamma(s))``, ``a <= mu``, from a jet of order ``mu``."""
    return jets.compose_with_curve(J, delta, mu)


def flux_functional(J: np.ndarray, delta: np.ndarray, normal: np.ndarray, mu: int) -> np.ndarray:
    """Tangential derivatives of ``n(s) . grad u(gamma(s))`` from a jet of order ``mu + 1``."""
    n = delta.shape[-2]
    fact = np.array([float(factorial(a)) for a in range(mu + 1)])
    total = 0.0
    for i in range(n):
        e = tuple(int(i == k) for k in range(n))
        gi = jets.compose_with_curve(jets.shift(J, n, mu + 1, e), delta, mu) / fact
        total = total + jets.multiply(gi, normal[..., i, :], 1, mu)
    return total * fact


def jet_order(k: int, mu: int) -> int:
    """Jet order of ``u`` needed to evaluate component ``k`` with ``mu`` derivatives."""
    return mu + {1: 2, 2: 0, 3: 1}[k]


def apply_components(J: np.ndarray, k: int, mu: int, n: int, points: Optional[PointSet] = None,
                     batch_axes: int = 0) -> np.ndarray:
    """Component ``k`` of ``L u`` and its intrinsic derivatives at the nodes of ``points``.

    ``J`` has shape (N, *batch, M); ``batch_axes`` counts the extra axes
    (e.g. one axis over trial basis functions).
    """
    if k == 1:
        return interior_functional(J, n, mu)
    delta, nrm = points.curve_taylor(mu)
    expand = (slice(None),) + (None,) * batch_axes
    delta, nrm = delta[expand], nrm[expand]
    if k == 2:
        return trace_functional(J, delta, mu)
    return flux_functional(J, delta, nrm, mu)


def apply_L_component(u: FunctionSample, x, k: int, alpha=0, normal=None, domain: Optional[Domain] = None) -> float:
    """``d^alpha`` of the ``k``-th component of ``L u`` at a single point ``x``.

    For ``k = 1`` ``alpha`` is a multi-index.  For boundary components it is
    the tangential derivative order; orders above zero need ``domain`` to
    know the boundary curve through ``x``.
    """
    x = np.atleast_1d(np.asarray(x, dtype=float))
    n = x.size
    if k == 1:
        alpha = tuple(alpha) if not isinstance(alpha, int) else (alpha,) + (0,) * (n - 1)
        mu = sum(alpha)
        vals = interior_functional(u.jet(x[None, :], mu + 2), n, mu)
        return float(vals[0, jets.index_map(n, mu)[alpha]])
    a = int(alpha if isinstance(alpha, int) else sum(alpha))
    if k not in (2, 3):
        raise ValueError(f"unknown component {k}")
    if domain is not None:
        ps = PointSet(domain, COMPONENT_NAMES[k], x[None, :])
        delta, nrm = ps.curve_taylor(a)
    else:
        if a:
            raise ValueError("tangential derivatives need the domain")
        delta = np.zeros((1, n, 1))
        nrm = np.zeros((1, n, 1))
        if k == 3:
            if normal is None:
                raise ValueError("normal vector required for the Neumann component")
            nrm[0, :, 0] = normal
    J = u.jet(x[None, :], jet_order(k, a))
    if k == 2:
        return float(trace_functional(J, delta, a)[0, a])
    return float(flux_functional(J, delta, nrm, a)[0, a])


# ---------------------------------------------------------------------------
# component data


class ComponentData:
    """Data on one component, sampled with intrinsic derivatives."""

    k: int

    def sample(self, points: PointSet, mu: int) -> np.ndarray:
        """Values (N, count(n_k, mu)) at the nodes."""
        raise NotImplementedError


class InteriorSource(ComponentData):
    """``f`` on the interior; sampled derivatives are plain partials."""

    k = 1

    def __init__(self, func: FunctionSample):
        self.func = func

    def sample(self, points, mu):
        return self.func.jet(points.nodes, mu)


class BoundaryTrace(ComponentData):
    """Boundary data given as the trace of an ambient function."""

    k = 2

    def __init__(self, func: FunctionSample):
        self.func = func

    def sample(self, points, mu):
        delta, _ = points.curve_taylor(mu)
        return trace_functional(self.func.jet(points.nodes, mu), delta, mu)


class BoundaryFlux(ComponentData):
    """Neumann data ``n . grad w`` of an ambient potential ``w``."""

    k = 3

    def __init__(self, potential: FunctionSample):
        self.potential = potential

    def sample(self, points, mu):
        delta, nrm = points.curve_taylor(mu)
        return flux_functional(self.potential.jet(points.nodes, mu + 1), delta, nrm, mu)


class LComponent(ComponentData):
    """Component ``k`` of ``L u`` for a function ``u``."""

    def __init__(self, u: FunctionSample, k: int):
        self.u = u
        self.k = k

    def sample(self, points, mu):
        J = self.u.jet(points.nodes, jet_order(self.k, mu))
        return apply_components(J, self.k, mu, self.u.dim, points)


def L_data(u: FunctionSample) -> tuple[ComponentData, ComponentData, ComponentData]:
    return LComponent(u, 1), LComponent(u, 2), LComponent(u, 3)


# ---------------------------------------------------------------------------
# problems


@dataclass
class PoissonProblem:
    """Mixed Poisson problem with data ``(f, g_D, g_N)``.

    ``m`` is the data scale (``U = H^(m+2)``) and ``m_tilde`` the regularity
    scale; their difference must be a nonnegative integer.
    """

    domain: Domain
    f: ComponentData
    g_D: ComponentData
    g_N: ComponentData
    exact: Optional[FunctionSample] = None
    m: float = 2.0
    m_tilde: Optional[float] = None
    name: str = "custom"

    def __post_init__(self):
        if self.m_tilde is not None:
            d = self.m_tilde - self.m
            if d < -1e-12 or abs(d - round(d)) > 1e-12:
                raise ValueError("m_tilde - m must be a nonnegative integer")

    @property
    def data(self) -> tuple[ComponentData, ComponentData, ComponentData]:
        return self.f, self.g_D, self.g_N

    def smoothness_labels(self) -> tuple[float, float, float]:
        """``(m_1, m_2, m_3) = (m, m + 3/2, m + 1/2)``."""
        return self.m, self.m + 1.5, self.m + 0.5


CATALOG = {
    "poly2": {1: "x**2", 2: "x**2 + y**2"},
    "trig": {1: "sin(3*x)", 2: "sin(pi*x)*cos(pi*y)"},
    # smooth bump supported in the ball of radius 0.4 about the domain centre
    "bump": {
        1: "Piecewise((exp(1 - 1/(1 - (x - 1/2)**2/(2/5)**2)), (x - 1/2)**2 < (2/5)**2), (0, True))",
        2: "Piecewise((exp(1 - 1/(1 - ((x - 1/2)**2 + (y - 1/2)**2)/(2/5)**2)), "
           "(x - 1/2)**2 + (y - 1/2)**2 < (2/5)**2), (0, True))",
    },
}


def negative_laplacian(expr: str, dim: int) -> str:
    syms = COORDS[:dim]
    e = sympy.sympify(expr, locals=dict(zip(map(str, syms), syms)))
    return str(-sum(sympy.diff(e, s, 2) for s in syms))


def problem_from_solution(u: FunctionSample, dom: Domain, source: Optional[FunctionSample] = None, **labels):
    """Problem whose data are generated from the exact solution ``u``."""
    f = InteriorSource(source) if source is not None else LComponent(u, 1)
    return PoissonProblem(dom, f, BoundaryTrace(u), BoundaryFlux(u), exact=u, **labels)


def manufactured(problem_id: str, dom: Domain, m: float = 2.0, m_tilde: Optional[float] = None) -> PoissonProblem:
    """Catalog problem with exact solution: ``poly2``, ``trig`` or ``bump``."""
    if problem_id not in CATALOG:
        raise ValueError(f"unknown problem id {problem_id!r}")
    expr = CATALOG[problem_id][dom.dim]
    u = SymbolicFunction(expr, dom.dim)
    f = SymbolicFunction(negative_laplacian(expr, dom.dim), dom.dim)
    return problem_from_solution(u, dom, source=f, m=m, m_tilde=m_tilde, name=problem_id)
