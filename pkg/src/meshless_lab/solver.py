"""Overdetermined strong collocation systems, their least-squares solution and stability factor."""
from __future__ import annotations

import csv
import io
import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from .geometry import COMPONENTS
from .kernels import JetOrderError, TrialSpace
from .poisson import PoissonProblem, apply_components, jet_order
from .testing import TestDiscretization, discretize

DEFAULT_TRUNCATION = 1e-12
_CHUNK = 4_000_000


class UntestableError(ValueError):
    pass


@dataclass(eq=False)
class CollocationSystem:
    """Weighted design matrix ``s^{n_k/2} d^alpha (L Phi_j)_k(y)`` and right-hand side.

    ``constraint`` maps reduced coordinates to admissible coefficient vectors
    (identity unless the trial space carries a polynomial tail).
    """

    matrix: np.ndarray
    rhs: np.ndarray
    weights: np.ndarray
    row_map: list
    column_map: list
    constraint: np.ndarray

    @property
    def shape(self) -> tuple[int, int]:
        return self.matrix.shape

    def residual(self, coeffs) -> float:
        return float(np.linalg.norm(self.matrix @ np.asarray(coeffs, dtype=float) - self.rhs))

    def dump_csv(self) -> str:
        """Long-format dump: ``row, component, node, alpha, column, value`` plus rhs rows."""
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["row", "component", "node", "alpha", "column", "value"])
        for i, (k, node, a) in enumerate(self.row_map):
            lab = [i, COMPONENTS[k - 1], node, "".join(map(str, a))]
            for j, col in enumerate(self.column_map):
                w.writerow(lab + [col, repr(float(self.matrix[i, j]))])
            w.writerow(lab + ["rhs", repr(float(self.rhs[i]))])
        return buf.getvalue()


def component_matrix(space: TrialSpace, td: TestDiscretization, k: int) -> np.ndarray:
    """Unweighted rows of component ``k``: (rows, space.size)."""
    c = td.component(k)
    order = jet_order(k, c.mu)
    if order > space.max_order:
        raise JetOrderError(order, space.max_order)
    pts = c.points
    N = len(pts)
    out = np.empty((N, c.n_alpha, space.size))
    step = max(1, _CHUNK // max(1, space.size * (order + 1) ** space.dim))
    for lo in range(0, N, step):
        sub = pts if (lo == 0 and step >= N) else _subset(pts, slice(lo, lo + step))
        J = space.basis_jets(sub.nodes, order)
        vals = apply_components(J, k, c.mu, space.dim, sub, batch_axes=1)
        if c.n_k == 0:
            vals = vals[..., : 1]
        out[lo : lo + step] = vals.transpose(0, 2, 1)
    return out.reshape(N * c.n_alpha, space.size)


def _subset(pts, sl):
    from .geometry import PointSet

    if pts.pieces is None:
        return PointSet(pts.domain, pts.component, pts.nodes[sl])
    return PointSet(pts.domain, pts.component, pts.nodes[sl], pts.pieces[sl], pts.params[sl])


def design_matrix(space: TrialSpace, td: TestDiscretization) -> np.ndarray:
    """Weighted stacked matrix over all components."""
    if td.n_rows == 0:
        raise ValueError("empty test sets")
    blocks = [td.weight(c) * component_matrix(space, td, c.k) for c in td.components]
    return np.concatenate(blocks, axis=0)


def assemble(space: TrialSpace, td: TestDiscretization, prob: PoissonProblem) -> CollocationSystem:
    """Strong-testing system for ``prob`` on the trial space."""
    if any(len(c.points) == 0 for c in td.components) or not td.components:
        raise ValueError("empty test sets")
    if space.dim != td.n:
        raise ValueError("dimension mismatch between trial space and test discretization")
    A = design_matrix(space, td)
    w = td.row_weights()
    b = w * discretize(td, prob)
    if A.shape[0] < A.shape[1]:
        warnings.warn(f"collocation system is underdetermined ({A.shape[0]} rows, {A.shape[1]} columns)")
    return CollocationSystem(A, b, w, td.row_labels(), space.column_labels(), space.constraint_basis())


@dataclass
class SolveReport:
    coeffs: np.ndarray
    residual: float
    rank: int
    threshold: float
    condition: float
    diagnostics: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {"residual": self.residual, "rank": self.rank, "threshold": self.threshold,
                "condition": self.condition, **self.diagnostics}


def _truncated_svd(a: np.ndarray, truncation: float):
    u, sv, vt = np.linalg.svd(a, full_matrices=False)
    if sv.size == 0 or not sv[0] > 0:
        return u[:, :0], sv[:0], vt[:0], 0.0
    cut = truncation * sv[0]
    # singular values come sorted; equal values keep the lower index
    keep = int(np.sum(sv > cut))
    return u[:, :keep], sv[:keep], vt[:keep], cut


def solve_least_squares(sys: CollocationSystem, truncation: float = DEFAULT_TRUNCATION) -> SolveReport:
    """Minimum-norm truncated-SVD least-squares solution."""
    if not 0 <= truncation < 1:
        raise ValueError("truncation must lie in [0, 1)")
    T = sys.constraint
    u, sv, vt, cut = _truncated_svd(sys.matrix @ T, truncation)
    if sv.size == 0:
        raise ValueError("system numerically zero")
    y = vt.T @ ((u.T @ sys.rhs) / sv)
    coeffs = T @ y
    return SolveReport(coeffs, sys.residual(coeffs), int(sv.size), float(cut), float(sv[0] / sv[-1]),
                       {"rows": sys.shape[0], "columns": sys.shape[1], "sigma_max": float(sv[0])})


def estimate_stability_factor(space: TrialSpace, td: TestDiscretization, reference_td: TestDiscretization,
                              truncation: float = DEFAULT_TRUNCATION) -> float:
    """``max_u ||pi_ref L u|| / ||pi_s L u||`` over the trial space.

    Computed from the SVD of the stacked pair ``[A; B]``: with ``U_A`` the
    coarse block of its left singular vectors and ``c`` the smallest
    singular value of ``U_A``, the quotient is ``sqrt(1 - c^2) / c``.
    Directions invisible to both discretizations are truncated away.
    """
    if reference_td is not td and reference_td.s > td.s / 8 * 1.5:
        warnings.warn(f"reference scale {reference_td.s:.3g} is not below s/8 = {td.s / 8:.3g}")
    T = space.constraint_basis()
    A = design_matrix(space, td) @ T
    if not np.linalg.norm(A) > 0:
        raise UntestableError("untestable trial space")
    B = A if reference_td is td else design_matrix(space, reference_td) @ T
    u, sv, _, _ = _truncated_svd(np.concatenate([A, B]), truncation)
    ua = u[: A.shape[0]]
    c = np.linalg.svd(ua, compute_uv=False)
    cmin = float(min(c.min(), 1.0)) if c.size and ua.shape[0] >= ua.shape[1] else 0.0
    if cmin < 1e-14:
        raise UntestableError("untestable trial space")
    return math.sqrt(max(0.0, 1.0 - cmin * cmin)) / cmin
