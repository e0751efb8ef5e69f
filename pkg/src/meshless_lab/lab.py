"""Convergence studies: predicted orders, measured rates and stability traces."""
from __future__ import annotations

import csv
import io
import json
import math
import warnings
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path
from typing import Optional, Sequence

import numpy as np
import yaml

from .functions import FunctionSample
from .geometry import Domain, PointSet, generate_point_set
from .kernels import Kernel, TrialFunction, TrialSpace, trial_best_fit
from .poisson import L_data, PoissonProblem, manufactured
from .sobolev import QuadSpec, SobolevOrder, sobolev_norm
from .solver import assemble, estimate_stability_factor, solve_least_squares
from .testing import build_test_discretization, reference_orders

MAX_CENTERS = 2_000
MAX_ROWS = 20_000
EXACT_TOLERANCE = 1e-6


class ConfigError(ValueError):
    pass


def load_mapping(path) -> dict:
    """Read a YAML key-value config file."""
    try:
        data = yaml.safe_load(Path(path).read_text()) or {}
    except (OSError, yaml.YAMLError) as exc:
        raise ConfigError(f"cannot read config: {exc}") from exc
    if not isinstance(data, dict):
        raise ConfigError("config must be a key-value mapping")
    return data


# ---------------------------------------------------------------------------
# formulas and regression


def predicted_order(m: float, m_tilde: float, mu1: int, n: int) -> Optional[float]:
    """Convergence order ``(m_tilde - m) + (mu1 - m)`` in the ``H^{m+2}`` norm.

    ``None`` when ``m - mu1 <= n/2``: the interior test order is then too
    close to the data smoothness for the sampled norm to be bounded.

    >>> predicted_order(2, 6, 0, 2)
    2
    >>> predicted_order(2, 6, 1, 2) is None
    True
    """
    if m_tilde < m:
        raise ValueError("m_tilde must be at least m")
    if not m - mu1 > n / 2:
        return None
    return (m_tilde - m) + (mu1 - m)


def fit_rate(pairs: Sequence[tuple[float, float]]) -> tuple[float, float]:
    """Least-squares slope of ``log(error)`` against ``log(h)`` and its standard error.

    Pairs with nonpositive error are dropped with a warning.
    """
    kept = [(h, e) for h, e in pairs if e > 0 and h > 0]
    if len(kept) < len(pairs):
        warnings.warn(f"dropped {len(pairs) - len(kept)} pair(s) with nonpositive error")
    if len(kept) < 3:
        raise ValueError("rate fit needs at least 3 positive pairs")
    x = np.log([h for h, _ in kept])
    y = np.log([e for _, e in kept])
    xc = x - x.mean()
    sxx = float(xc @ xc)
    if sxx == 0:
        raise ValueError("rate fit needs distinct h")
    rate = float(xc @ (y - y.mean()) / sxx)
    res = y - y.mean() - rate * xc
    dof = len(kept) - 2
    stderr = math.sqrt(float(res @ res) / dof / sxx) if dof > 0 else 0.0
    return rate, stderr


@dataclass
class EpsilonTable:
    r: list[float]
    eps: list[float]
    slope: Optional[float]
    predicted: Optional[float]


def measure_epsilon(spaces: Sequence[TrialSpace], target: FunctionSample, order: int, dom: Domain,
                    quad: Optional[QuadSpec] = None) -> EpsilonTable:
    """Best-fit errors in ``H^order`` per trial space and their log-log slope.

    ``r`` is the fill distance of the centers.  ``predicted`` is
    ``native smoothness - order`` when all spaces share one kernel.
    """
    quad = quad or QuadSpec(cells=128, order=8)
    r, eps = [], []
    for sp in spaces:
        r.append(PointSet(dom, "interior", sp.centers).fill)
        eps.append(trial_best_fit(sp, target, order, quad, dom).error)
    slope = None
    if len(r) >= 3 and min(eps) > 0:
        slope = fit_rate(list(zip(r, eps)))[0]
    kerns = {sp.kernel for sp in spaces}
    pred = kerns.pop().native_smoothness(dom.dim) - order if len(kerns) == 1 else None
    return EpsilonTable(r, eps, slope, pred)


# ---------------------------------------------------------------------------
# configuration


@dataclass
class StudyConfig:
    """A convergence study.  Field names are the config file keys."""

    problem: str = "trig"
    domain: dict = field(default_factory=lambda: {"kind": "interval", "lower": 0.0, "upper": 1.0})
    kernel: dict = field(default_factory=lambda: {"family": "matern", "shape": 3.0, "smoothness": 6.5})
    m: float = 2.0
    m_tilde: Optional[float] = None
    mu1: int = 0
    h: list = field(default_factory=lambda: [0.2, 0.1, 0.05, 0.025])
    ratio: float = 0.5
    norms: list = field(default_factory=lambda: [[0, 2], [1, 2], [2, 2], [4, 2]])
    quadrature: dict = field(default_factory=lambda: {"cells": 64, "order": 10})
    fractional_quadrature: Optional[dict] = None
    truncation: float = 1e-12
    strategy: str = "uniform-grid"
    tail_degree: Optional[int] = None
    beta: bool = True
    reference_factor: float = 8.0
    rate_tolerance: float = 0.5
    output: Optional[str] = None
    seed: int = 0

    @classmethod
    def from_dict(cls, d: dict, min_levels: int = 3) -> "StudyConfig":
        known = {f.name for f in fields(cls)}
        extra = set(d) - known
        if extra:
            raise ConfigError(f"unknown config keys: {sorted(extra)}")
        cfg = cls(**d)
        cfg.validate(min_levels)
        return cfg

    @classmethod
    def load(cls, path, min_levels: int = 3) -> "StudyConfig":
        return cls.from_dict(load_mapping(path), min_levels)

    def to_dict(self) -> dict:
        return asdict(self)

    # derived ------------------------------------------------------------
    def make_domain(self) -> Domain:
        try:
            return Domain.from_config(self.domain)
        except (ValueError, TypeError) as exc:
            raise ConfigError(f"bad domain: {exc}") from exc

    def make_kernel(self) -> Kernel:
        try:
            return Kernel(**self.kernel)
        except (ValueError, TypeError) as exc:
            raise ConfigError(f"bad kernel: {exc}") from exc

    def norm_orders(self) -> list[SobolevOrder]:
        out = []
        for item in self.norms:
            l, q = (item["l"], item.get("q", 2)) if isinstance(item, dict) else (item[0], item[1])
            out.append(SobolevOrder(float(l), float(q)))
        return out

    def resolved_m_tilde(self) -> float:
        """``m_tilde`` from the config, or the largest ``m + k`` (``k`` natural) not above the kernel's."""
        if self.m_tilde is not None:
            return float(self.m_tilde)
        n = self.make_domain().dim
        return self.m + math.floor(self.make_kernel().m_tilde(n) - self.m + 1e-12)

    def validate(self, min_levels: int = 3):
        n = self.make_domain().dim
        kern = self.make_kernel()
        h = list(self.h)
        if len(h) < min_levels:
            raise ConfigError(f"h-sequence needs at least {min_levels} values")
        if any(b >= a for a, b in zip(h, h[1:])) or min(h) <= 0:
            raise ConfigError("h-sequence must be positive and strictly decreasing")
        mt = self.resolved_m_tilde()
        k = mt - self.m
        if k < -1e-12 or abs(k - round(k)) > 1e-12:
            raise ConfigError(f"m_tilde - m must be a nonnegative integer (m={self.m}, m_tilde={mt})")
        if not self.m - self.mu1 > n / 2:
            raise ConfigError(f"m - mu1 = {self.m - self.mu1} must exceed n/2 = {n / 2}; "
                              "the predicted order is None for this combination")
        if self.mu1 < 0 or int(self.mu1) != self.mu1:
            raise ConfigError("mu1 must be a nonnegative integer")
        # every component needs jets of order mu_1 + 2; the reference needs floor(m) + 2
        need = self.mu1 + 2
        if self.beta:
            need = max(need, reference_orders(self.m, n)[1] + 2)
        if kern.max_order < need:
            raise ConfigError(f"kernel supports derivatives up to {kern.max_order}, study needs {need}")
        if not 0 < self.ratio:
            raise ConfigError("ratio must be positive")
        if not 0 <= self.truncation < 1:
            raise ConfigError("truncation must lie in [0, 1)")
        try:
            self.norm_orders()
        except (ValueError, TypeError, KeyError, IndexError) as exc:
            raise ConfigError(f"bad norms: {exc}") from exc
        for key in ("quadrature", "fractional_quadrature"):
            try:
                QuadSpec(**(getattr(self, key) or {}))
            except (ValueError, TypeError) as exc:
                raise ConfigError(f"bad {key}: {exc}") from exc
        if self.problem not in ("poly2", "trig", "bump", "synthesized"):
            raise ConfigError(f"unknown problem id {self.problem!r}")


# ---------------------------------------------------------------------------
# studies


def norm_label(o: SobolevOrder) -> str:
    return f"H^{o.l:g},{o.q:g}"


@dataclass
class ConvergenceReport:
    config: dict
    m_tilde: float
    predicted: Optional[float]
    levels: list[dict]
    rates: list[dict]
    beta: dict
    verdict: str
    notices: list[str] = field(default_factory=list)

    def to_dict(self) -> dict:
        return _clean(asdict(self))

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n"

    def errors_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["h", "norm_l", "norm_q", "error"])
        for lev in self.levels:
            for e in lev.get("errors", []):
                w.writerow([repr(lev["h"]), repr(e["l"]), repr(e["q"]), repr(e["error"])])
        return buf.getvalue()

    def rates_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["norm", "fitted", "stderr", "predicted", "verdict"])
        for r in self.rates:
            w.writerow([r["norm"], _fmt(r["fitted"]), _fmt(r["stderr"]), _fmt(r["predicted"]), r["verdict"]])
        return buf.getvalue()

    def write(self, out_dir):
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        (out / "report.json").write_text(self.to_json())
        (out / "errors.csv").write_text(self.errors_csv())
        (out / "rates.csv").write_text(self.rates_csv())

    def rate(self, l: float, q: float = 2.0) -> Optional[float]:
        lab = norm_label(SobolevOrder(l, q))
        return next((r["fitted"] for r in self.rates if r["norm"] == lab), None)


def _fmt(v) -> str:
    return "" if v is None else (v if isinstance(v, str) else repr(float(v)))


def _clean(obj):
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, (np.floating, float)):
        v = float(obj)
        return v if math.isfinite(v) else None
    if isinstance(obj, np.integer):
        return int(obj)
    return obj


def make_problem(cfg: StudyConfig, dom: Domain, kern: Kernel) -> PoissonProblem:
    mt = cfg.resolved_m_tilde()
    if cfg.problem != "synthesized":
        return manufactured(cfg.problem, dom, m=cfg.m, m_tilde=mt)
    # a fixed element of the coarsest trial space; nested grids keep it in every space
    centers = generate_point_set(dom, "interior", cfg.h[0], cfg.strategy, cfg.seed).nodes
    space = TrialSpace(kern, centers, cfg.tail_degree)
    rng = np.random.default_rng(cfg.seed)
    coeffs = space.constraint_basis() @ rng.standard_normal(space.constraint_basis().shape[1])
    u = space.function(coeffs)
    f, g, gn = L_data(u)
    return PoissonProblem(dom, f, g, gn, exact=u, m=cfg.m, m_tilde=mt, name="synthesized")


def _check_caps(cfg: StudyConfig, dom: Domain):
    for h in cfg.h:
        nc = len(generate_point_set(dom, "interior", h, cfg.strategy, cfg.seed))
        if nc > MAX_CENTERS:
            raise ConfigError(f"h={h}: {nc} trial centers exceed the cap of {MAX_CENTERS}")
        td = build_test_discretization(dom, cfg.ratio * h, cfg.mu1, cfg.strategy, cfg.seed)
        if td.n_rows > MAX_ROWS:
            raise ConfigError(f"h={h}: {td.n_rows} test rows exceed the cap of {MAX_ROWS}")


def run_level(cfg: StudyConfig, dom: Domain, kern: Kernel, prob: PoissonProblem, h: float) -> dict:
    """Solve at one trial scale and measure errors."""
    quad = QuadSpec(**cfg.quadrature)
    fquad = QuadSpec(**cfg.fractional_quadrature) if cfg.fractional_quadrature else None
    centers = generate_point_set(dom, "interior", h, cfg.strategy, cfg.seed)
    nodes = centers.nodes
    if isinstance(prob.exact, TrialFunction):
        # keep the synthesized solution inside every trial space
        anchor = prob.exact.space.centers
        dist = np.min(np.linalg.norm(anchor[:, None, :] - nodes[None, :, :], axis=2), axis=1)
        nodes = np.vstack([nodes, anchor[dist > 1e-12]])
    space = TrialSpace(kern, nodes, cfg.tail_degree)
    td = build_test_discretization(dom, cfg.ratio * h, cfg.mu1, cfg.strategy, cfg.seed)
    if dom.dim > 1:
        td.check_smoothness(cfg.m)
    system = assemble(space, td, prob)
    sol = solve_least_squares(system, cfg.truncation)
    level = {"h": float(h), "r": float(centers.fill), "s": float(td.s), "centers": space.size,
             "rows": td.n_rows, "solve": sol.to_dict()}
    if prob.exact is not None:
        err = prob.exact - space.function(sol.coeffs)
        level["errors"] = [{"l": o.l, "q": o.q, "error": sobolev_norm(err, o, dom, quad, fquad)}
                           for o in cfg.norm_orders()]
    if cfg.beta:
        ref_s = td.s / cfg.reference_factor
        ref = build_test_discretization(dom, ref_s, cfg.mu1, cfg.strategy, cfg.seed,
                                        orders=reference_orders(cfg.m, dom.dim))
        if ref.n_rows > 10 * MAX_ROWS:
            level["beta_notice"] = f"reference discretization has {ref.n_rows} rows; stability factor skipped"
        else:
            level["beta"] = estimate_stability_factor(space, td, ref, cfg.truncation)
    return level


def run_study(cfg: StudyConfig) -> ConvergenceReport:
    """Run every level, fit rates and compare them with the predicted order."""
    cfg.validate()
    dom, kern = cfg.make_domain(), cfg.make_kernel()
    _check_caps(cfg, dom)
    prob = make_problem(cfg, dom, kern)
    mt = cfg.resolved_m_tilde()
    pred = predicted_order(cfg.m, mt, cfg.mu1, dom.dim)
    levels, notices = [], []
    for h in cfg.h:
        try:
            with warnings.catch_warnings():
                warnings.simplefilter("ignore")
                levels.append(run_level(cfg, dom, kern, prob, h))
        except Exception as exc:  # one failed level must not sink the study
            levels.append({"h": float(h), "diagnostic": f"{type(exc).__name__}: {exc}"})
            notices.append(f"h={h!r} aborted: {exc}")
    rates = []
    exact = prob.name == "synthesized"
    for i, o in enumerate(cfg.norm_orders()):
        pairs = [(lev["r"], lev["errors"][i]["error"]) for lev in levels if "errors" in lev]
        p = pred if o.l <= cfg.m + 2 + 1e-12 else None
        row = {"norm": norm_label(o), "l": o.l, "q": o.q, "fitted": None, "stderr": None, "predicted": p}
        if exact and pairs and max(e for _, e in pairs) <= EXACT_TOLERANCE:
            row.update(fitted="exact", verdict="pass")
        else:
            try:
                with warnings.catch_warnings(record=True) as caught:
                    warnings.simplefilter("always")
                    rate, se = fit_rate(pairs)
                notices.extend(f"{norm_label(o)}: {w.message}" for w in caught)
                row.update(fitted=rate, stderr=se)
                if p is None:
                    row["verdict"] = "n/a"
                else:
                    row["verdict"] = "pass" if rate >= p - cfg.rate_tolerance else "fail"
            except ValueError as exc:
                row["verdict"] = "fail"
                notices.append(f"{norm_label(o)}: {exc}")
        rates.append(row)
    beta = {"s": [lev["s"] for lev in levels if "beta" in lev],
            "values": [lev["beta"] for lev in levels if "beta" in lev],
            "predicted_slope": cfg.mu1 - cfg.m, "slope": None}
    if len(beta["values"]) >= 3:
        beta["slope"] = fit_rate(list(zip(beta["s"], beta["values"])))[0]
    failed_level = any("diagnostic" in lev for lev in levels)
    verdict = "pass" if all(r["verdict"] in ("pass", "n/a") for r in rates) and not failed_level else "fail"
    return ConvergenceReport(cfg.to_dict(), mt, pred, levels, rates, beta, verdict, notices)
