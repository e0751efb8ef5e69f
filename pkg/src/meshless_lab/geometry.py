"""Domains, boundary partitions, scattered point sets and their metrics."""
from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import Optional, Sequence

import numpy as np
from scipy.spatial import cKDTree
from scipy.stats import qmc

COMPONENTS = ("interior", "dirichlet", "neumann")
COMPONENT_INDEX = {"interior": 1, "dirichlet": 2, "neumann": 3}
MAX_NODES = 400_000
_TOL = 1e-10


class GeometryError(ValueError):
    pass


# ---------------------------------------------------------------------------
# boundary pieces


@dataclass(frozen=True)
class BoundaryPiece:
    """A boundary face: a point (1D), a straight edge or a circular arc (2D).

    Edges and arcs are parametrized by arc length ``s in [0, length]``.
    """

    kind: str  # "point" | "edge" | "arc"
    tag: str  # "D" | "N"
    start: tuple = ()
    end: tuple = ()
    center: tuple = ()
    radius: float = 0.0
    theta0: float = 0.0
    theta1: float = 0.0
    normal_1d: float = 0.0
    name: str = ""

    @property
    def length(self) -> float:
        if self.kind == "point":
            return 0.0
        if self.kind == "edge":
            return float(np.hypot(*(np.subtract(self.end, self.start))))
        return self.radius * (self.theta1 - self.theta0)

    def point(self, s) -> np.ndarray:
        s = np.atleast_1d(np.asarray(s, dtype=float))
        if self.kind == "point":
            return np.tile(np.asarray(self.start, float), (s.size, 1))
        if self.kind == "edge":
            a, b = np.asarray(self.start, float), np.asarray(self.end, float)
            return a + (s / self.length)[:, None] * (b - a)
        th = self.theta0 + s / self.radius
        return np.asarray(self.center) + self.radius * np.stack([np.cos(th), np.sin(th)], axis=1)

    def normal(self, s) -> np.ndarray:
        s = np.atleast_1d(np.asarray(s, dtype=float))
        if self.kind == "point":
            return np.full((s.size, 1), self.normal_1d)
        if self.kind == "edge":
            t = (np.subtract(self.end, self.start)) / self.length
            # boundary is traversed counter-clockwise, outward normal is (t_y, -t_x)
            return np.tile([t[1], -t[0]], (s.size, 1))
        th = self.theta0 + s / self.radius
        return np.stack([np.cos(th), np.sin(th)], axis=1)

    def taylor(self, s, order: int):
        """Taylor coefficients in ``t`` of ``gamma(s + t) - gamma(s)`` and of ``normal(s + t)``.

        Returns arrays of shape (N, n, order + 1).
        """
        s = np.atleast_1d(np.asarray(s, dtype=float))
        n = 1 if self.kind == "point" else 2
        delta = np.zeros((s.size, n, order + 1))
        nrm = np.zeros((s.size, n, order + 1))
        nrm[:, :, 0] = self.normal(s)
        if self.kind == "edge" and order >= 1:
            delta[:, :, 1] = (np.subtract(self.end, self.start)) / self.length
        elif self.kind == "arc":
            th = self.theta0 + s / self.radius
            for k in range(1, order + 1):
                ph = th + k * math.pi / 2
                scale = self.radius ** (1 - k) / math.factorial(k)
                delta[:, 0, k] = scale * np.cos(ph)
                delta[:, 1, k] = scale * np.sin(ph)
                nrm[:, 0, k] = scale / self.radius * np.cos(ph)
                nrm[:, 1, k] = scale / self.radius * np.sin(ph)
        return delta, nrm

    def distance(self, x: np.ndarray) -> np.ndarray:
        """Euclidean distance of points ``x`` to the piece."""
        x = np.atleast_2d(x)
        if self.kind == "point":
            return np.abs(x[:, 0] - self.start[0])
        if self.kind == "edge":
            a, b = np.asarray(self.start, float), np.asarray(self.end, float)
            t = np.clip((x - a) @ (b - a) / np.dot(b - a, b - a), 0, 1)
            return np.linalg.norm(x - (a + t[:, None] * (b - a)), axis=1)
        rel = x - np.asarray(self.center)
        ang = np.mod(np.arctan2(rel[:, 1], rel[:, 0]) - self.theta0, 2 * math.pi)
        on = ang <= self.theta1 - self.theta0 + 1e-14
        d_arc = np.abs(np.linalg.norm(rel, axis=1) - self.radius)
        ends = np.minimum(
            np.linalg.norm(x - self.point(0.0)[0], axis=1),
            np.linalg.norm(x - self.point(self.length)[0], axis=1),
        )
        return np.where(on, d_arc, ends)


# ---------------------------------------------------------------------------
# domains


@dataclass(frozen=True)
class Domain:
    """Interval, axis-aligned square, or disk with a Dirichlet/Neumann partition.

    ``partition`` maps boundary face names to ``"D"`` or ``"N"``:

    * interval: ``left``, ``right``;
    * square: ``bottom``, ``right``, ``top``, ``left``;
    * disk: ``arcs`` -> list of ``(theta0, theta1, tag)`` covering ``[0, 2 pi)``.

    Missing faces default to Dirichlet.
    """

    kind: str
    lower: tuple = (0.0,)
    upper: tuple = (1.0,)
    center: tuple = ()
    radius: float = 0.0
    partition: dict = field(default_factory=dict, hash=False, compare=False)

    def __post_init__(self):
        if self.kind not in ("interval", "square", "disk"):
            raise GeometryError(f"unknown domain kind {self.kind!r}")
        tags = [t for _, _, t in self.partition.get("arcs", [])] + [
            v for k, v in self.partition.items() if k != "arcs"
        ]
        if any(t not in ("D", "N") for t in tags):
            raise GeometryError("boundary tags must be 'D' or 'N'")
        if not self.pieces("dirichlet"):
            raise GeometryError("Dirichlet boundary must be nonempty")

    # constructors -------------------------------------------------------
    @classmethod
    def interval(cls, a: float = 0.0, b: float = 1.0, left: str = "D", right: str = "D"):
        return cls("interval", (float(a),), (float(b),), partition={"left": left, "right": right})

    @classmethod
    def square(cls, a: float = 0.0, b: float = 1.0, **tags):
        return cls("square", (float(a), float(a)), (float(b), float(b)), partition=dict(tags))

    @classmethod
    def disk(cls, center=(0.0, 0.0), radius: float = 1.0, arcs=None):
        part = {"arcs": list(arcs)} if arcs else {}
        return cls("disk", (center[0] - radius, center[1] - radius), (center[0] + radius, center[1] + radius),
                   tuple(map(float, center)), float(radius), partition=part)

    @classmethod
    def ball(cls, center, radius: float):
        """``B(center, radius)`` in 1D (an interval) or 2D (a disk)."""
        center = np.atleast_1d(np.asarray(center, dtype=float))
        if center.size == 1:
            return cls.interval(center[0] - radius, center[0] + radius)
        return cls.disk(tuple(center), radius)

    # basic properties ---------------------------------------------------
    @property
    def dim(self) -> int:
        return 1 if self.kind == "interval" else 2

    @property
    def diameter(self) -> float:
        if self.kind == "disk":
            return 2 * self.radius
        return float(np.linalg.norm(np.subtract(self.upper, self.lower)))

    def component_dim(self, component: str) -> int:
        return self.dim if component == "interior" else self.dim - 1

    def contains(self, x: np.ndarray, tol: float = _TOL) -> np.ndarray:
        """Membership in the closed domain."""
        x = np.atleast_2d(x)
        if self.kind == "disk":
            return np.linalg.norm(x - np.asarray(self.center), axis=1) <= self.radius + tol
        lo, hi = np.asarray(self.lower), np.asarray(self.upper)
        return np.all((x >= lo - tol) & (x <= hi + tol), axis=1)

    def all_pieces(self) -> list[BoundaryPiece]:
        p = self.partition
        if self.kind == "interval":
            a, b = self.lower[0], self.upper[0]
            return [
                BoundaryPiece("point", p.get("left", "D"), start=(a,), normal_1d=-1.0, name="left"),
                BoundaryPiece("point", p.get("right", "D"), start=(b,), normal_1d=1.0, name="right"),
            ]
        if self.kind == "square":
            (x0, y0), (x1, y1) = self.lower, self.upper
            corners = [(x0, y0), (x1, y0), (x1, y1), (x0, y1)]
            names = ["bottom", "right", "top", "left"]
            return [
                BoundaryPiece("edge", p.get(nm, "D"), start=corners[i], end=corners[(i + 1) % 4], name=nm)
                for i, nm in enumerate(names)
            ]
        arcs = p.get("arcs") or [(0.0, 2 * math.pi, "D")]
        return [
            BoundaryPiece("arc", tag, center=self.center, radius=self.radius, theta0=float(t0), theta1=float(t1),
                          name=f"arc{i}")
            for i, (t0, t1, tag) in enumerate(arcs)
        ]

    def pieces(self, component: str) -> list[BoundaryPiece]:
        if component == "interior":
            return []
        tag = "D" if component == "dirichlet" else "N"
        return [pc for pc in self.all_pieces() if pc.tag == tag]

    def corners(self) -> np.ndarray:
        """Points where two boundary faces meet (never assigned to Neumann)."""
        if self.kind == "interval":
            return np.zeros((0, 1))
        pcs = self.all_pieces()
        if self.kind == "disk" and len(pcs) == 1:
            return np.zeros((0, 2))
        return np.array([pc.point(0.0)[0] for pc in pcs])

    # probes -------------------------------------------------------------
    def probe_grid(self, resolution: int) -> np.ndarray:
        """Tensor grid over the bounding box, masked to the closed domain."""
        axes = [np.linspace(lo, hi, resolution) for lo, hi in zip(self.lower, self.upper)]
        grid = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, self.dim)
        return grid[self.contains(grid, tol=0.0)]

    def boundary_probes(self, component: str, resolution: int) -> np.ndarray:
        pts = [pc.point(np.linspace(0.0, pc.length, resolution)) for pc in self.pieces(component)]
        return np.concatenate(pts) if pts else np.zeros((0, self.dim))

    def on_component(self, x: np.ndarray, component: str, tol: float = 1e-9) -> np.ndarray:
        x = np.atleast_2d(x)
        if component == "interior":
            return self.contains(x, tol)
        d = np.min([pc.distance(x) for pc in self.pieces(component)], axis=0)
        ok = d <= tol
        if component == "neumann" and len(self.corners()):
            dc = np.min(np.linalg.norm(x[:, None, :] - self.corners()[None], axis=2), axis=1)
            ok &= dc > tol
        return ok

    def to_config(self) -> dict:
        cfg = {"kind": self.kind}
        if self.kind == "disk":
            cfg.update(center=list(self.center), radius=self.radius)
        else:
            cfg.update(lower=self.lower[0], upper=self.upper[0])
        cfg["partition"] = {k: ([list(a) for a in v] if k == "arcs" else v) for k, v in self.partition.items()}
        return cfg

    @classmethod
    def from_config(cls, cfg: dict) -> "Domain":
        kind = cfg.get("kind", "interval")
        part = dict(cfg.get("partition", {}))
        if kind == "disk":
            return cls.disk(tuple(cfg.get("center", (0.0, 0.0))), float(cfg.get("radius", 1.0)),
                            arcs=[tuple(a) for a in part.get("arcs", [])] or None)
        a, b = float(cfg.get("lower", 0.0)), float(cfg.get("upper", 1.0))
        if kind == "interval":
            return cls.interval(a, b, **part)
        return cls.square(a, b, **part)


# ---------------------------------------------------------------------------
# point sets


def fill_distance(A: "PointSet", dom: Optional[Domain] = None, resolution: Optional[int] = None) -> float:
    """Largest distance from the component to its nearest node.

    The supremum is taken over a deterministic probe grid (tensor grid over
    the region, or an arc-length grid on boundary pieces), so the result is
    a lower bound of the true fill distance with error at most the probe
    spacing.  0-dimensional components have fill distance 0.
    """
    dom = dom or A.domain
    nodes = A.nodes
    if nodes.shape[0] == 0:
        raise GeometryError("empty sample set")
    if not np.all(dom.on_component(nodes, A.component)):
        raise GeometryError("node outside domain")
    ndim = dom.component_dim(A.component)
    if ndim == 0:
        return 0.0
    if resolution is None:
        resolution = 100_001 if ndim == 1 else 1_001
    if resolution < 2:
        raise ValueError("resolution must be at least 2")
    if A.component == "interior":
        probes = dom.probe_grid(resolution)
    else:
        probes = dom.boundary_probes(A.component, resolution)
    dist, _ = cKDTree(nodes).query(probes)
    return float(dist.max())


def separation_distance(A) -> float:
    """Half the minimum pairwise distance between nodes."""
    nodes = A.nodes if isinstance(A, PointSet) else np.atleast_2d(np.asarray(A, dtype=float))
    if nodes.ndim == 2 and nodes.shape[0] == 1 and nodes.shape[1] > 1 and not isinstance(A, PointSet):
        nodes = nodes.T
    if nodes.shape[0] < 2:
        raise GeometryError("degenerate set")
    dist, _ = cKDTree(nodes).query(nodes, k=2)
    return float(dist[:, 1].min() / 2)


@dataclass(frozen=True, eq=False)
class PointSet:
    """Nodes on one domain component.

    Boundary nodes additionally carry ``pieces`` (index into
    ``domain.pieces(component)``) and arc-length ``params`` so intrinsic
    derivatives can be taken along the boundary.
    """

    domain: Domain
    component: str
    nodes: np.ndarray
    pieces: Optional[np.ndarray] = None
    params: Optional[np.ndarray] = None

    def __post_init__(self):
        if self.component not in COMPONENTS:
            raise GeometryError(f"unknown component {self.component!r}")
        nodes = np.asarray(self.nodes, dtype=float)
        if nodes.ndim == 1:
            nodes = nodes.reshape(-1, self.domain.dim)
        object.__setattr__(self, "nodes", nodes)
        if self.component != "interior" and self.pieces is None:
            self._locate()

    def _locate(self):
        pcs = self.domain.pieces(self.component)
        d = np.stack([pc.distance(self.nodes) for pc in pcs]) if len(self.nodes) else np.zeros((len(pcs), 0))
        which = np.argmin(d, axis=0)
        params = np.empty(len(self.nodes))
        for i, (k, x) in enumerate(zip(which, self.nodes)):
            pc = pcs[k]
            if pc.kind == "point":
                params[i] = 0.0
            elif pc.kind == "edge":
                a = np.asarray(pc.start)
                params[i] = float(np.linalg.norm(x - a))
            else:
                rel = x - np.asarray(pc.center)
                params[i] = pc.radius * float(np.mod(np.arctan2(rel[1], rel[0]) - pc.theta0, 2 * math.pi))
        object.__setattr__(self, "pieces", which.astype(int))
        object.__setattr__(self, "params", params)

    def __len__(self):
        return self.nodes.shape[0]

    @property
    def dim(self) -> int:
        return self.domain.component_dim(self.component)

    @cached_property
    def fill(self) -> float:
        return fill_distance(self)

    @cached_property
    def separation(self) -> Optional[float]:
        return separation_distance(self) if len(self) >= 2 else None

    @property
    def mesh_ratio(self) -> Optional[float]:
        if self.separation is None or self.fill == 0:
            return None
        return self.fill / self.separation

    def normals(self) -> np.ndarray:
        pcs = self.domain.pieces(self.component)
        return np.concatenate([pcs[k].normal(s) for k, s in zip(self.pieces, self.params)]) if len(self) else np.zeros((0, self.domain.dim))

    def curve_taylor(self, order: int):
        """Per-node curve expansions ``(delta, normal)``, each (N, n, order + 1)."""
        pcs = self.domain.pieces(self.component)
        n = self.domain.dim
        delta = np.zeros((len(self), n, order + 1))
        nrm = np.zeros((len(self), n, order + 1))
        for k, pc in enumerate(pcs):
            sel = self.pieces == k
            if np.any(sel):
                delta[sel], nrm[sel] = pc.taylor(self.params[sel], order)
        return delta, nrm

    def union(self, extra: np.ndarray) -> "PointSet":
        return PointSet(self.domain, self.component, np.concatenate([self.nodes, np.atleast_2d(extra)]))

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["component", "x", "y"][: 1 + self.domain.dim])
        for p in self.nodes:
            w.writerow([self.component] + [repr(float(v)) for v in p])
        return buf.getvalue()

    @classmethod
    def from_csv(cls, text: str, domain: Domain) -> list["PointSet"]:
        rows = list(csv.DictReader(io.StringIO(text)))
        out = []
        for comp in COMPONENTS:
            pts = [[float(r[k]) for k in ("x", "y")[: domain.dim]] for r in rows if r["component"] == comp]
            if pts:
                out.append(cls(domain, comp, np.array(pts)))
        return out


# ---------------------------------------------------------------------------
# generation


def _grid_1d(length: float, target_d: float) -> np.ndarray:
    k = max(1, math.ceil(length / (2 * target_d) - 1e-9))
    return np.linspace(0.0, length, k + 1)


def _centered_grid_1d(length: float, target_d: float) -> np.ndarray:
    # cell midpoints: fill distance target_d without using the endpoints
    k = max(1, math.ceil(length / (2 * target_d) - 1e-9))
    return (np.arange(k) + 0.5) * (length / k)


def _van_der_corput(count: int, seed: int) -> np.ndarray:
    return qmc.Halton(d=1, scramble=True, seed=seed).random(count)[:, 0]


def _check_budget(count: int):
    if count > MAX_NODES:
        raise GeometryError(f"budget exceeded: {count} nodes required (limit {MAX_NODES})")


def _generate_boundary(dom: Domain, component: str, target_d: float, strategy: str, seed: int) -> PointSet:
    pcs = dom.pieces(component)
    if not pcs:
        return PointSet(dom, component, np.zeros((0, dom.dim)), np.zeros(0, int), np.zeros(0))
    if dom.dim == 1:
        return PointSet(dom, component, np.array([pc.start for pc in pcs]), np.arange(len(pcs)), np.zeros(len(pcs)))
    rng = np.random.default_rng(seed)
    corners = dom.corners()
    nodes, which, params = [], [], []
    for k, pc in enumerate(pcs):
        _check_budget(int(pc.length / target_d))
        # Neumann pieces whose ends are corners must avoid them
        open_ends = component == "neumann" and len(corners) > 0
        if strategy == "uniform-grid":
            s = _centered_grid_1d(pc.length, target_d) if open_ends else _grid_1d(pc.length, target_d)
        elif strategy == "jittered-grid":
            s = (_centered_grid_1d if open_ends else _grid_1d)(pc.length, target_d / 1.25)
            h = pc.length / (s.size if open_ends else s.size - 1)
            inner = slice(None) if open_ends else slice(1, -1)
            s[inner] += rng.uniform(-0.25 * h, 0.25 * h, size=s[inner].size)
        elif strategy == "halton":
            count = max(2, math.ceil(pc.length / (2 * target_d)))
            while True:
                s = pc.length * _van_der_corput(count, seed + k)
                if not open_ends:
                    s = np.concatenate([[0.0, pc.length], s])
                s.sort()
                gaps = np.concatenate([[2 * s[0], 2 * (pc.length - s[-1])], np.diff(s)])
                if np.max(gaps) / 2 <= target_d or count > MAX_NODES:
                    break
                count = math.ceil(count * 1.25)
        else:
            raise ValueError(f"unknown strategy {strategy!r}")
        pts = pc.point(s)
        keep = np.ones(len(s), dtype=bool)
        if component == "neumann" and len(corners):
            dc = np.min(np.linalg.norm(pts[:, None, :] - corners[None], axis=2), axis=1)
            keep &= dc > 1e-12
        nodes.append(pts[keep])
        which.append(np.full(int(keep.sum()), k))
        params.append(s[keep])
    nodes, which, params = np.concatenate(nodes), np.concatenate(which), np.concatenate(params)
    # corners shared by two Dirichlet pieces appear twice; keep the first
    _, first = np.unique(np.round(nodes, 12), axis=0, return_index=True)
    first = np.sort(first)
    nodes, which, params = nodes[first], which[first], params[first]
    return PointSet(dom, component, nodes, which, params)


def _interior_grid(dom: Domain, spacing: float) -> np.ndarray:
    if dom.kind == "interval":
        return _grid_1d(dom.upper[0] - dom.lower[0], spacing / 2)[:, None] + dom.lower[0]
    if dom.kind == "square":
        ax = _grid_1d(dom.upper[0] - dom.lower[0], spacing / 2) + dom.lower[0]
        return np.stack(np.meshgrid(ax, ax, indexing="ij"), axis=-1).reshape(-1, 2)
    # disk: masked lattice plus a ring of boundary nodes at the same spacing
    r = dom.radius
    k = math.ceil(2 * r / spacing)
    ax = np.linspace(-r, r, k + 1)
    g = np.stack(np.meshgrid(ax, ax, indexing="ij"), axis=-1).reshape(-1, 2)
    g = g[np.linalg.norm(g, axis=1) < r - 0.5 * spacing]
    m = max(8, math.ceil(2 * math.pi * r / spacing))
    th = 2 * math.pi * np.arange(m) / m
    ring = r * np.stack([np.cos(th), np.sin(th)], axis=1)
    return np.concatenate([g, ring]) + np.asarray(dom.center)


def generate_point_set(dom: Domain, component: str, target_d: float, strategy: str = "uniform-grid",
                       seed: int = 0) -> PointSet:
    """Nodes on ``component`` with measured fill distance near ``target_d``.

    Strategies: ``uniform-grid`` (tensor grid including the boundary),
    ``jittered-grid`` (grid perturbed by at most 25% of its spacing) and
    ``halton`` (scrambled Halton points, count increased until the fill
    distance target is met).  Output is deterministic in ``(strategy, seed)``.
    """
    if not target_d > 0:
        raise ValueError("target_d must be positive")
    if component not in COMPONENTS:
        raise GeometryError(f"unknown component {component!r}")
    if component != "interior":
        return _generate_boundary(dom, component, target_d, strategy, seed)
    if target_d >= dom.diameter:
        raise ValueError("target_d must be smaller than the component diameter")
    n = dom.dim
    _check_budget(int(math.ceil(dom.diameter / target_d) ** n))
    rng = np.random.default_rng(seed)
    if strategy == "uniform-grid":
        spacing = 2 * target_d / math.sqrt(n)
        if dom.kind == "disk":
            spacing = target_d
        nodes = _interior_grid(dom, spacing)
    elif strategy == "jittered-grid":
        spacing = (2 * target_d / math.sqrt(n)) / 1.5
        nodes = _interior_grid(dom, spacing)
        jitter = rng.uniform(-0.25 * spacing, 0.25 * spacing, size=nodes.shape)
        moved = nodes + jitter
        # boundary nodes only slide along the boundary
        if dom.kind != "disk":
            lo, hi = np.asarray(dom.lower), np.asarray(dom.upper)
            on_face = (np.abs(nodes - lo) < 1e-12) | (np.abs(nodes - hi) < 1e-12)
            moved = np.where(on_face, nodes, moved)
            nodes = np.clip(moved, lo, hi)
        else:
            inner = np.linalg.norm(nodes - np.asarray(dom.center), axis=1) < dom.radius - 1e-12
            ok = dom.contains(moved, tol=0.0) & inner
            nodes = np.where(ok[:, None], moved, nodes)
    elif strategy == "halton":
        count = max(4, math.ceil((dom.diameter / target_d) ** n / 4))
        sampler_seed = seed
        lo, hi = np.asarray(dom.lower), np.asarray(dom.upper)
        while True:
            _check_budget(count)
            pts = lo + (hi - lo) * qmc.Halton(d=n, scramble=True, seed=sampler_seed).random(count)
            pts = pts[dom.contains(pts, tol=0.0)]
            if dom.kind != "disk":
                # the bounding-box corners are the worst-covered spots
                box = np.stack(np.meshgrid(*zip(lo, hi), indexing="ij"), axis=-1).reshape(-1, n)
                pts = np.concatenate([pts, box])
            cand = PointSet(dom, "interior", pts)
            if fill_distance(cand) <= target_d:
                nodes = pts
                break
            count = math.ceil(count * 1.3)
    else:
        raise ValueError(f"unknown strategy {strategy!r}")
    return PointSet(dom, "interior", nodes)
