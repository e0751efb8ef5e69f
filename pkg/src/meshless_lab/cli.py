"""Command line interface.

Exit codes: 0 when every verdict passes, 1 when any fails, 2 on usage or
configuration errors.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import sys
import warnings
from pathlib import Path

from .functions import SymbolicFunction
from .geometry import Domain
from .lab import (ConfigError, StudyConfig, _clean, load_mapping, make_problem, predicted_order, run_level,
                  run_study)
from .poisson import CATALOG
from .sobolev import SamplingParameters
from .verifier import HypothesisError, verify_fractional_relation, verify_sampling_inequality

EXIT_OK, EXIT_FAIL, EXIT_USAGE = 0, 1, 2


def _write_json(out: Path, name: str, obj):
    out.mkdir(parents=True, exist_ok=True)
    (out / name).write_text(json.dumps(_clean(obj), indent=2, sort_keys=True) + "\n")


def _function(spec, dim: int) -> SymbolicFunction:
    expr = CATALOG[spec][dim] if spec in CATALOG else str(spec)
    return SymbolicFunction(expr, dim)


def _require(cfg: dict, *keys):
    missing = [k for k in keys if k not in cfg]
    if missing:
        raise ConfigError(f"missing config keys: {missing}")


def cmd_verify_fractional(cfg: dict, out: Path, say) -> int:
    _require(cfg, "function", "eps", "radii")
    dim = int(cfg.get("dim", 1))
    v = _function(cfg["function"], dim)
    q = float(cfg.get("q", 2))
    eps = cfg["eps"] if isinstance(cfg["eps"], list) else [cfg["eps"]]
    reports = [verify_fractional_relation(v, float(e), q, [float(r) for r in cfg["radii"]], cfg.get("center"))
               for e in eps]
    for r in reports:
        say(f"eps={r.eps:g}: {r.verdict} (ratio spread {max(r.ratios) / min(r.ratios) if r.ratios else float('nan'):.4f}, "
            f"slope {r.slope if r.slope is not None else float('nan'):.4f} vs {r.predicted_slope:.4f})")
    _write_json(out, "report.json", {"config": cfg, "reports": [r.to_dict() for r in reports]})
    return EXIT_OK if all(r.verdict in ("bounded", "skipped") for r in reports) else EXIT_FAIL


def cmd_verify_sampling(cfg: dict, out: Path, say) -> int:
    _require(cfg, "function", "r", "l", "d")
    dom = Domain.from_config(cfg.get("domain", {"kind": "interval"}))
    u = _function(cfg["function"], dom.dim)
    params = SamplingParameters(float(cfg["r"]), int(cfg.get("mu", 0)), n=dom.dim)
    trial = verify_sampling_inequality(u, params, float(cfg["l"]), dom, [float(d) for d in cfg["d"]],
                                       name=str(cfg["function"]))
    say(f"r={params.r:g} l={trial.l:g} mu={params.mu}: {trial.verdict} "
        f"(C_emp {', '.join(f'{c:.4g}' for c in trial.c_emp)}; K={trial.k_factor:.4g})")
    _write_json(out, "report.json", {"config": cfg, "trial": trial.to_dict()})
    (out / "sampling.csv").write_text(trial.to_csv())
    return EXIT_OK if trial.verdict == "consistent" else EXIT_FAIL


def cmd_solve(cfg: dict, out: Path, say) -> int:
    scfg = StudyConfig.from_dict(cfg, min_levels=1)
    dom, kern = scfg.make_domain(), scfg.make_kernel()
    prob = make_problem(scfg, dom, kern)
    levels = []
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        for h in scfg.h:
            lev = run_level(scfg, dom, kern, prob, h)
            levels.append(lev)
            errs = ", ".join(f"H^{e['l']:g}: {e['error']:.3e}" for e in lev.get("errors", []))
            say(f"h={h:g}: residual {lev['solve']['residual']:.3e}, rank {lev['solve']['rank']}; {errs}")
    _write_json(out, "report.json", {"config": scfg.to_dict(), "levels": levels})
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["h", "norm_l", "norm_q", "error"])
    for lev in levels:
        for e in lev.get("errors", []):
            w.writerow([repr(lev["h"]), repr(e["l"]), repr(e["q"]), repr(e["error"])])
    (out / "errors.csv").write_text(buf.getvalue())
    return EXIT_OK


def cmd_convergence(cfg: dict, out: Path, say) -> int:
    scfg = StudyConfig.from_dict(cfg)
    rep = run_study(scfg)
    rep.write(out)
    for r in rep.rates:
        fitted = r["fitted"] if isinstance(r["fitted"], str) or r["fitted"] is None else f"{r['fitted']:.3f}"
        pred = "None" if r["predicted"] is None else f"{r['predicted']:g}"
        say(f"{r['norm']}: fitted {fitted}, predicted {pred}, {r['verdict']}")
    for n in rep.notices:
        say(f"notice: {n}")
    return EXIT_OK if rep.verdict == "pass" else EXIT_FAIL


def _as_list(v):
    return v if isinstance(v, list) else [v]


def cmd_predict(cfg: dict, out: Path, say) -> int:
    ms = _as_list(cfg.get("m", [1, 2, 3, 4]))
    mus = _as_list(cfg.get("mu1", [0, 1, 2, 3]))
    ns = _as_list(cfg.get("n", 2))
    mt = cfg.get("m_tilde")
    rows = []
    for n in ns:
        for mu1 in mus:
            for m in ms:
                # without m_tilde, report the offset from m_tilde - m
                p = predicted_order(float(m), float(mt) if mt is not None else float(m), int(mu1), int(n))
                if p is None:
                    text = "None"
                elif mt is None:
                    text = f"m_tilde-m{p:+g}"
                else:
                    text = f"{p:g}"
                rows.append({"n": n, "m": m, "mu1": mu1, "U": f"H^{float(m) + 2:g}", "order": p, "text": text})
                say(f"n={n} mu1={mu1} U=H^{float(m) + 2:g}: {text}")
    _write_json(out, "report.json", {"config": cfg, "predictions": rows})
    return EXIT_OK


COMMANDS = {
    "verify-fractional": cmd_verify_fractional,
    "verify-sampling": cmd_verify_sampling,
    "solve": cmd_solve,
    "convergence": cmd_convergence,
    "predict": cmd_predict,
}


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="meshless-lab", description="Meshless collocation convergence lab.")
    ap.add_argument("command", choices=sorted(COMMANDS))
    ap.add_argument("--config", help="YAML config file")
    ap.add_argument("--out", help="output directory (default: config 'output' or '.')")
    ap.add_argument("--seed", type=int, help="override the config seed")
    ap.add_argument("--quiet", action="store_true", help="suppress progress output")
    return ap


def main(argv=None) -> int:
    ap = build_parser()
    try:
        args = ap.parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code else EXIT_OK

    def say(msg):
        if not args.quiet:
            print(msg)

    try:
        if args.config:
            cfg = load_mapping(args.config)
        elif args.command == "predict":
            cfg = {}
        else:
            raise ConfigError(f"{args.command} needs --config")
        if args.seed is not None:
            cfg["seed"] = args.seed
        out = Path(args.out or cfg.get("output") or ".")
        return COMMANDS[args.command](cfg, out, say)
    except (ConfigError, HypothesisError, KeyError, TypeError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    raise SystemExit(main())
