"""Strong test discretizations: sampled residual components and their weighted norm.

Stacking order of sampled vectors is fixed: components ascending
(interior, Dirichlet, Neumann), nodes in generation order, multi-indices
in graded lexicographic order.  On a 2D boundary the "multi-index" is the
tangential derivative order ``(a,)``.
"""
from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass
from statistics import median
from typing import Optional, Sequence

import numpy as np

from . import jets
from .functions import FunctionSample
from .geometry import COMPONENTS, Domain, PointSet, generate_point_set
from .poisson import BoundaryTrace, ComponentData, InteriorSource, PoissonProblem
from .sobolev import QuadSpec, SobolevOrder, _gauss, sobolev_norm

SCALE_TOLERANCE = 1.5


@dataclass(frozen=True, eq=False)
class TestComponent:
    """Nodes ``Y^k`` of one component with sampled derivative order ``mu``."""

    __test__ = False

    k: int
    points: PointSet
    mu: int

    @property
    def n_k(self) -> int:
        return self.points.dim

    @property
    def n_alpha(self) -> int:
        return jets.count(self.n_k, self.mu) if self.n_k else 1

    @property
    def size(self) -> int:
        return len(self.points) * self.n_alpha

    def alphas(self) -> list[tuple[int, ...]]:
        return list(jets.multi_indices(max(self.n_k, 1), self.mu)) if self.n_k else [()]


@dataclass(frozen=True, eq=False)
class TestDiscretization:
    """The sampling operator ``pi_s`` with its weighted Euclidean norm.

    Component ``k`` contributes rows weighted by ``s^(n_k/2)``.
    """

    __test__ = False

    domain: Domain
    components: tuple[TestComponent, ...]
    s: float

    def __post_init__(self):
        ks = [c.k for c in self.components]
        if ks != sorted(ks) or len(set(ks)) != len(ks):
            raise ValueError("components must be distinct and in ascending order")
        for c in self.components:
            if c.mu < 0:
                raise ValueError("derivative orders must be nonnegative")
            if c.n_k == 0 and c.mu != 0:
                raise ValueError("0-dimensional components admit only mu = 0")
            if c.n_k > 0 and len(c.points) and not (c.points.fill <= SCALE_TOLERANCE * self.s
                                                    and self.s <= SCALE_TOLERANCE * c.points.fill):
                raise ValueError(f"component {c.k} fill distance {c.points.fill:.4g} is off the common scale s={self.s:.4g}")

    @property
    def n(self) -> int:
        return self.domain.dim

    @property
    def mu(self) -> dict[int, int]:
        return {c.k: c.mu for c in self.components}

    @property
    def mu1(self) -> int:
        return self.mu.get(1, 0)

    def component(self, k: int) -> Optional[TestComponent]:
        return next((c for c in self.components if c.k == k), None)

    def weight(self, comp: TestComponent) -> float:
        return self.s ** (comp.n_k / 2)

    @property
    def n_rows(self) -> int:
        return sum(c.size for c in self.components)

    def blocks(self) -> list[slice]:
        out, lo = [], 0
        for c in self.components:
            out.append(slice(lo, lo + c.size))
            lo += c.size
        return out

    def row_weights(self) -> np.ndarray:
        return np.concatenate([np.full(c.size, self.weight(c)) for c in self.components]) if self.components else np.zeros(0)

    def row_labels(self) -> list[tuple[int, int, tuple[int, ...]]]:
        """``(k, node id, alpha)`` for every row."""
        return [(c.k, i, a) for c in self.components for i in range(len(c.points)) for a in c.alphas()]

    def smoothness_gaps(self, m: float) -> dict[int, float]:
        """``m_k - mu_k - n_k/2`` with ``(m_1, m_2, m_3) = (m, m + 3/2, m + 1/2)``."""
        mk = {1: m, 2: m + 1.5, 3: m + 0.5}
        return {c.k: mk[c.k] - c.mu - c.n_k / 2 for c in self.components}

    def check_smoothness(self, m: float):
        """Raise unless every gap is positive (and, in 2D, all gaps agree)."""
        gaps = self.smoothness_gaps(m)
        bad = [k for k, g in gaps.items() if g <= 0]
        if bad:
            raise ValueError(f"m_k - mu_k - n_k/2 must be positive; fails for components {bad}")
        if self.n > 1 and max(gaps.values()) - min(gaps.values()) > 1e-12:
            raise ValueError("m_k - mu_k - n_k/2 must not depend on k")
        return gaps


def derived_orders(mu1: int, n: int) -> dict[int, int]:
    """``mu_k`` for all components given the interior order."""
    if n == 1:
        return {1: mu1, 2: 0, 3: 0}
    return {1: mu1, 2: mu1 + 2, 3: mu1 + 1}


def reference_orders(m: float, n: int) -> dict[int, int]:
    """Derivative orders ``floor(m_k)`` of a discretization standing in for the ``T`` norm.

    Sampling up to order ``m_k`` on a much finer set approximates the
    ``H^{m_k}`` norms of the test space, up to the fractional part.
    """
    if n == 1:
        return {1: math.floor(m), 2: 0, 3: 0}
    return {1: math.floor(m), 2: math.floor(m + 1.5), 3: math.floor(m + 0.5)}


def build_test_discretization(dom: Domain, s: float, mu1: int, strategy: str = "uniform-grid",
                              seed: int = 0, orders: Optional[dict[int, int]] = None) -> TestDiscretization:
    """Test sets at scale ``s`` with ``mu_2, mu_3`` derived from ``mu1``.

    ``s`` of the result is the measured interior fill distance; boundary sets
    are generated to match it.  Components absent from the partition are
    omitted.  ``orders`` overrides all derivative orders.
    """
    mu = dict(orders) if orders is not None else derived_orders(mu1, dom.dim)
    interior = generate_point_set(dom, "interior", s, strategy, seed)
    s_meas = interior.fill
    comps = [TestComponent(1, interior, mu[1])]
    for k, name in ((2, "dirichlet"), (3, "neumann")):
        if dom.pieces(name):
            pts = generate_point_set(dom, name, s_meas, strategy, seed + k)
            if len(pts):
                comps.append(TestComponent(k, pts, mu[k]))
    return TestDiscretization(dom, tuple(comps), s_meas)


# ---------------------------------------------------------------------------


def _as_data(f, k: int) -> ComponentData:
    if isinstance(f, ComponentData):
        return f
    if isinstance(f, FunctionSample):
        return InteriorSource(f) if k == 1 else BoundaryTrace(f)
    raise TypeError(f"cannot sample {type(f).__name__} on component {k}")


def _component_data(data, k: int):
    if isinstance(data, PoissonProblem):
        return data.data[k - 1]
    if isinstance(data, dict):
        return data[k]
    if isinstance(data, (FunctionSample, ComponentData)):
        return data
    return data[k - 1]


def discretize(td: TestDiscretization, data) -> np.ndarray:
    """``pi_s f``: stacked samples of the components of ``data``.

    ``data`` is a :class:`PoissonProblem`, a triple (or ``{k: ...}`` dict)
    of per-component data, or a single ambient function used on every
    component.  Ambient functions are restricted to boundary components.
    """
    parts = []
    for c in td.components:
        d = _as_data(_component_data(data, c.k), c.k)
        vals = d.sample(c.points, c.mu)
        parts.append(np.asarray(vals, dtype=float).reshape(-1))
    return np.concatenate(parts) if parts else np.zeros(0)


def discrete_norm(td: TestDiscretization, v) -> float:
    """``(sum_k s^{n_k} ||v_k||_2^2)^{1/2}``."""
    v = np.asarray(v, dtype=float)
    if v.shape != (td.n_rows,):
        raise ValueError(f"length mismatch: vector has {v.size} entries, discretization has {td.n_rows}")
    return float(np.linalg.norm(v * td.row_weights()))


def export_csv(td: TestDiscretization, v) -> str:
    """Rows ``component, node, alpha, value`` for debugging."""
    v = np.asarray(v, dtype=float)
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["component", "node", "alpha", "value"])
    for (k, i, a), val in zip(td.row_labels(), v):
        w.writerow([COMPONENTS[k - 1], i, "".join(map(str, a)), repr(float(val))])
    return buf.getvalue()


# ---------------------------------------------------------------------------
# boundedness of pi_s


def _boundary_norm(data: ComponentData, dom: Domain, component: str, order: int, cells: int = 16,
                   gauss: int = 8) -> float:
    """``H^order`` norm along the boundary curve (tangential derivatives)."""
    pcs = dom.pieces(component)
    if dom.dim == 1:
        pts = PointSet(dom, component, np.array([pc.start for pc in pcs]))
        return float(np.linalg.norm(data.sample(pts, 0)))
    xg, wg = _gauss(gauss)
    total = 0.0
    for idx, pc in enumerate(pcs):
        br = np.linspace(0.0, pc.length, cells + 1)
        h = np.diff(br)
        s = (br[:-1, None] + h[:, None] * xg[None, :]).ravel()
        w = (h[:, None] * wg[None, :]).ravel()
        pts = PointSet(dom, component, pc.point(s), np.full(s.size, idx), s)
        vals = data.sample(pts, order)
        total += float(np.sum(w[:, None] * vals**2))
    return math.sqrt(total)


def t_norm_surrogate(data, dom: Domain, m: float, quad: Optional[QuadSpec] = None) -> float:
    """``(sum_k ||f_k||^2_{H^{m_k}(Omega_k)})^{1/2}`` with boundary orders rounded up.

    The interior term uses the full (possibly fractional) Sobolev norm; the
    boundary terms use the integer order ``ceil(m_k)``, which bounds the
    fractional norm from above up to a constant.
    """
    mk = {1: m, 2: m + 1.5, 3: m + 0.5}
    total = 0.0
    f1 = _component_data(data, 1)
    if isinstance(f1, InteriorSource):
        f1 = f1.func
    if not isinstance(f1, FunctionSample):
        raise TypeError("interior probe must be a FunctionSample")
    total += sobolev_norm(f1, SobolevOrder(mk[1], 2.0), dom, quad) ** 2
    for k, name in ((2, "dirichlet"), (3, "neumann")):
        if dom.pieces(name):
            d = _as_data(_component_data(data, k), k)
            total += _boundary_norm(d, dom, name, math.ceil(mk[k])) ** 2
    return math.sqrt(total)


@dataclass
class NormRatioTable:
    s: list[float]
    ratios: dict[str, list[float]]
    verdicts: dict[str, str]
    notices: list[str]


def operator_norm_estimate(tds: Sequence[TestDiscretization], probes: dict[str, object], m: float,
                           quad: Optional[QuadSpec] = None) -> NormRatioTable:
    """Ratios ``||pi_s f||_{T_s} / ||f||_T`` over a sequence of discretizations.

    ``probes`` maps a name to an ambient :class:`FunctionSample` (used on
    every component) or a per-component triple.  The verdict is
    ``bounded`` when the largest ratio is at most 1.2 times the median.
    Probes with vanishing norm are skipped with a notice.
    """
    if not tds:
        raise ValueError("empty discretization sequence")
    dom = tds[0].domain
    ratios, verdicts, notices = {}, {}, []
    for name, f in probes.items():
        denom = t_norm_surrogate(f, dom, m, quad)
        if not denom > 0:
            notices.append(f"probe {name!r} skipped: zero norm")
            continue
        r = [discrete_norm(td, discretize(td, f)) / denom for td in tds]
        ratios[name] = r
        verdicts[name] = "bounded" if max(r) <= 1.2 * median(r) else "unbounded"
    return NormRatioTable([td.s for td in tds], ratios, verdicts, notices)
