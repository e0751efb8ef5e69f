"""Empirical checks of fractional scaling bounds and sampling inequalities.

Constants in these inequalities are not constructive, so every check is a
boundedness test of an empirical constant over a refinement sequence.
"""
from __future__ import annotations

import csv
import io
import math
from dataclasses import asdict, dataclass, field
from statistics import median
from typing import Optional, Sequence

import numpy as np

from .functions import FunctionSample
from .geometry import Domain, PointSet, generate_point_set
from .sobolev import (QuadSpec, SamplingParameters, SobolevOrder, admissible_lmax, correction_factor,
                      integer_seminorm, seminorm, sobolev_norm)

RATIO_SPREAD = 1.5
CEMP_FACTOR = 2.0


class HypothesisError(ValueError):
    pass


def _slope(x, y) -> float:
    x, y = np.log(np.asarray(x, float)), np.log(np.asarray(y, float))
    return float(np.polyfit(x, y, 1)[0])


# ---------------------------------------------------------------------------
# fractional vs first-order semi-norm on shrinking balls


@dataclass
class ScalingReport:
    eps: float
    q: float
    radii: list[float]
    lhs: list[float]
    first_order: list[float]
    ratios: list[float]
    slope: Optional[float]
    predicted_slope: float
    factor: float
    verdict: str
    notices: list[str] = field(default_factory=list)

    def to_dict(self) -> dict:
        return asdict(self)


def verify_fractional_relation(v: FunctionSample, eps: float, q: float, radii: Sequence[float], center=None,
                               quad: Optional[QuadSpec] = None) -> ScalingReport:
    """Ratios ``|v|_{eps,q,B_r} / (r^{1-eps} |v|_{1,q,B_r})`` over balls ``B_r``.

    The verdict is ``bounded`` when max/min of the ratios is at most 1.5;
    ``slope`` is the log-log slope of ``|v|_{eps,q,B_r}`` against ``r``
    (``n/q + 1 - eps`` for linear ``v``).  ``factor`` is ``(1-eps)^{-1/q}``.
    """
    if not 0 < eps < 1:
        raise ValueError("eps must lie in (0, 1)")
    n = v.dim
    center = np.zeros(n) if center is None else np.asarray(center, dtype=float)
    lhs, first, ratios, notices = [], [], [], []
    for r in radii:
        ball = Domain.ball(center, r)
        a = seminorm(v, SobolevOrder(eps, q), ball, quad)
        b = integer_seminorm(v, 1, q, ball)
        lhs.append(a)
        first.append(b)
        if b > 0:
            ratios.append(a / (r ** (1 - eps) * b))
        else:
            notices.append(f"radius {r!r} skipped: first-order semi-norm vanishes")
    pred = (n / q if not math.isinf(q) else 0.0) + 1 - eps
    factor = (1 - eps) ** (-1 / q) if not math.isinf(q) else 1.0
    if len(ratios) < 2:
        return ScalingReport(eps, q, list(radii), lhs, first, ratios, None, pred, factor, "skipped", notices)
    slope = _slope(radii, lhs) if min(lhs) > 0 else None
    verdict = "bounded" if max(ratios) / min(ratios) <= RATIO_SPREAD else "unbounded"
    return ScalingReport(eps, q, list(radii), lhs, first, ratios, slope, pred, factor, verdict, notices)


def fractional_factor_table(v: FunctionSample, eps_values: Sequence[float], q: float, dom: Domain,
                            quad: Optional[QuadSpec] = None) -> list[dict]:
    """Measured ``|v|_{eps,q} / |v|_{1,q}`` next to ``(1-eps)^{-1/q}`` on a fixed domain."""
    b = integer_seminorm(v, 1, q, dom)
    rows = []
    for e in eps_values:
        a = seminorm(v, SobolevOrder(e, q), dom, quad)
        f = (1 - e) ** (-1 / q)
        rows.append({"eps": e, "ratio": a / b if b > 0 else None, "factor": f,
                     "normalized": a / b / f if b > 0 else None})
    return rows


# ---------------------------------------------------------------------------
# sampling inequality with derivative data


def check_hypotheses(params: SamplingParameters, l: float) -> list[str]:
    """Violated preconditions of the derivative-data sampling inequality (empty if none)."""
    out = []
    if not (params.p == params.q == params.kappa == 2):
        out.append("only p = q = kappa = 2 is supported")
    if l < 0:
        out.append("l must be nonnegative")
    d = params.r - l
    if d < -1e-12 or abs(d - round(d)) > 1e-12:
        out.append("r - l must be a nonnegative integer")
    if l > params.r - params.mu + 1e-12:
        out.append("l must not exceed r - mu")
    if not params.r - params.mu > params.n / 2:
        out.append("r - mu > n/2 required")
    if not out:
        adm = admissible_lmax(params)
        if l > adm.l_max + 1e-12:
            out.append(f"l exceeds l_max = {adm.l_max}")
    return out


@dataclass
class InequalityTrial:
    """Terms of ``||u||_l <= C (d^{r-l} ||u||_r + d^{n/2+mu-l} ||samples||_2)`` per ``d``."""

    function: str
    domain: dict
    params: dict
    l: float
    d: list[float]
    lhs: list[float]
    term1: list[float]
    term2: list[float]
    c_emp: list[float]
    k_factor: float
    verdict: str
    notices: list[str] = field(default_factory=list)

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["d", "lhs", "term1", "term2", "c_emp"])
        for row in zip(self.d, self.lhs, self.term1, self.term2, self.c_emp):
            w.writerow([repr(float(x)) for x in row])
        return buf.getvalue()

    def to_dict(self) -> dict:
        return asdict(self)


def _point_sets(dom: Domain, sets, strategy: str = "uniform-grid", seed: int = 0) -> list[PointSet]:
    out = []
    for s in sets:
        out.append(s if isinstance(s, PointSet) else generate_point_set(dom, "interior", float(s), strategy, seed))
    return out


def sample_norm(u: FunctionSample, A: PointSet, mu: int) -> float:
    """Euclidean norm of all derivatives ``|alpha| <= mu`` of ``u`` at the nodes."""
    return float(np.linalg.norm(u.jet(A.nodes, mu)))


def cemp_verdict(d: Sequence[float], c: Sequence[float]) -> str:
    """``consistent`` if ``C(d) <= 2 median(C)`` for every ``d`` below the largest."""
    med = median(c)
    top = max(d)
    ok = all(ci <= CEMP_FACTOR * med for di, ci in zip(d, c) if di < top)
    return "consistent" if ok else "inconsistent"


def verify_sampling_inequality(u: FunctionSample, params: SamplingParameters, l: float, dom: Domain, sets,
                               name: str = "u", quad: Optional[QuadSpec] = None,
                               frac_quad: Optional[QuadSpec] = None) -> InequalityTrial:
    """Empirical constant of the sampling inequality over a sequence of node sets.

    ``sets`` holds :class:`PointSet` objects or target fill distances; ``d``
    is the measured fill distance.  The largest ``d`` stands in for the
    threshold below which the inequality holds, so the verdict only
    quantifies over smaller ``d``.
    """
    if params.n != dom.dim:
        params = SamplingParameters(params.r, params.mu, params.p, params.q, params.kappa, dom.dim)
    bad = check_hypotheses(params, l)
    if bad:
        raise HypothesisError("; ".join(bad))
    n, r, mu = dom.dim, params.r, params.mu
    pts = _point_sets(dom, sets)
    lhs_val = sobolev_norm(u, SobolevOrder(l, 2.0), dom, quad, frac_quad)
    top_val = sobolev_norm(u, SobolevOrder(r, 2.0), dom, quad, frac_quad)
    d, lhs, t1, t2, c, notices = [], [], [], [], [], []
    for A in pts:
        dA = A.fill
        a = dA ** (r - l) * top_val
        b = dA ** (n / 2 + mu - l) * sample_norm(u, A, mu)
        d.append(dA)
        lhs.append(lhs_val)
        t1.append(a)
        t2.append(b)
        if a + b > 0:
            c.append(lhs_val / (a + b))
        else:
            c.append(0.0)
            notices.append(f"d={dA!r}: both sides vanish")
    verdict = cemp_verdict(d, c) if any(ci > 0 for ci in c) else "consistent"
    return InequalityTrial(name, dom.to_config(), asdict(params), l, d, lhs, t1, t2, c,
                           correction_factor(SobolevOrder(l, 2.0)), verdict, notices)


@dataclass
class MuComparison:
    d: list[float]
    l: float
    exponents: dict[int, float]
    predicted_slopes: dict[int, float]
    measured_slopes: dict[int, float]
    terms: dict[int, list[float]]

    @property
    def exponent_difference(self) -> float:
        ks = sorted(self.exponents)
        return self.exponents[ks[-1]] - self.exponents[ks[0]]

    def to_dict(self) -> dict:
        return {**asdict(self), "exponent_difference": self.exponent_difference}


def compare_mu_orders(u: FunctionSample, r: float, l: float, dom: Domain, sets, mus: Sequence[int] = (0, 1)) -> MuComparison:
    """Sample-term prefactor exponents ``n/2 + mu - l`` and measured slopes.

    Since ``#A ~ d^{-n}``, the scaled sample term ``d^{n/2+mu-l} ||samples||_2``
    behaves like ``d^{mu-l}``; that is the predicted slope reported.
    """
    n = dom.dim
    for mu in mus:
        bad = check_hypotheses(SamplingParameters(r, mu, n=n), l)
        if bad:
            raise HypothesisError(f"mu={mu}: " + "; ".join(bad))
    pts = _point_sets(dom, sets)
    d = [A.fill for A in pts]
    exps, pred, meas, terms = {}, {}, {}, {}
    for mu in mus:
        exps[mu] = n / 2 + mu - l
        pred[mu] = mu - l
        terms[mu] = [dA ** exps[mu] * sample_norm(u, A, mu) for dA, A in zip(d, pts)]
        meas[mu] = _slope(d, terms[mu])
    return MuComparison(d, l, exps, pred, meas, terms)
