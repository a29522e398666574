# Command-line front door. Batch-oriented: every run resolves its full
# configuration up front and, when an output path is given, logs it next to
# the artifact. Exit codes: 0 success, 2 validation error, 3 numerical
# non-convergence.

from __future__ import annotations

import argparse
import json
import math
import os
import sys
from pathlib import Path

import numpy as np

from . import model
from .diagnostics import certify_design
from .experiments import SweepConfig, run_sweep
from .lower_bounds import (PackingBudgetError, betamin_experiment, st_moment_exact,
                           vg_signed_packing)
from .model import DesignError, gen_design, load_design
from .solvers import PenaltySpec, SolverNonConvergence, lasso_solve
from .trace_regression import TraceSolverNonConvergence, nuclear_lower_experiment
from .tuning import (BelowCriticalRange, KINDS, f_sqrt_loglog, f_zero,
                     sparsity_bracket, tuning_level)

EXIT_OK = 0
EXIT_VALIDATION = 2
EXIT_NONCONVERGENCE = 3


def _write_sidecar(out_path, config: dict):
    side = Path(str(out_path) + ".config.json")
    side.write_text(json.dumps(config, indent=2, sort_keys=True, default=str) + "\n")


def _load_vector(path):
    return np.loadtxt(path, delimiter=",", dtype=np.float64).reshape(-1)


def _cmd_solve(args) -> int:
    X = load_design(args.design)
    y = _load_vector(args.y)
    beta_star = _load_vector(args.beta_star) if args.beta_star else None
    res = lasso_solve((X, y), PenaltySpec("l1", args.lam), tol=args.tol,
                      max_iter=args.max_iter, beta_star=beta_star)
    print(f"kkt_residual {res.kkt_residual:.6e}")
    print(f"objective {res.objective:.17g}")
    print(f"iterations {res.iterations}")
    print(f"nonzeros {int(np.count_nonzero(res.beta_hat))}")
    if res.risk is not None:
        print(f"risk {res.risk:.17g}")
    if args.out:
        np.savetxt(args.out, res.beta_hat.reshape(-1, 1), delimiter=",", fmt="%.17g")
        _write_sidecar(args.out, vars(args) | {"command": "solve"})
    return EXIT_OK


def _cmd_tune(args) -> int:
    f = f_sqrt_loglog if args.f == "sqrt-loglog" else f_zero
    kinds = list(KINDS) if args.kind == "all" else [args.kind]
    lines = []
    for kind in kinds:
        try:
            lvl = tuning_level(args.sigma, args.p, args.k, kind, f=f)
            lines.append(f"{kind:12s} {lvl.value:.6f}")
        except BelowCriticalRange as e:
            lines.append(f"{kind:12s} undefined (min p/k ~ {e.min_ratio:.4g})")
    try:
        br = sparsity_bracket(args.p, args.k)
        lines.append(f"{'zeta':12s} {br.zeta:.6f}")
        lines.append(f"{'k_plus':12s} {br.k_plus}")
        lines.append(f"{'k_minus':12s} {br.k_minus}")
    except ValueError:
        pass
    text = "\n".join(lines)
    print(text)
    if args.out:
        Path(args.out).write_text(text + "\n")
        _write_sidecar(args.out, vars(args) | {"command": "tune"})
    return EXIT_OK


def _cmd_certify(args) -> int:
    X = load_design(args.design)
    design = gen_design(X.shape[0], X.shape[1], ("matrix", X), seed=args.seed)
    T = [int(s) for s in args.support.split(",") if s != ""]
    consts = certify_design(design, T, c0=args.c0, d=args.d, s_tilde=args.s_tilde,
                            penalty_lam=args.lam, seed=args.seed)
    report = {
        "phi": consts.phi.phi,
        "phi_method": consts.phi.method,
        "theta_bracket": [consts.theta.lower, consts.theta.upper],
        "psi": consts.sparse.psi,
        "psi_method": consts.sparse.method,
        "delta": consts.delta_2d,
        "lsb_bracket": [consts.lsb.lower, consts.lsb.upper] if consts.lsb else None,
    }
    text = json.dumps(report, indent=2, sort_keys=True)
    print(text)
    if args.out:
        Path(args.out).write_text(text + "\n")
        _write_sidecar(args.out, vars(args) | {"command": "certify"})
    return EXIT_OK


def _cmd_lower_bound(args) -> int:
    if args.mode == "stmoment":
        val = st_moment_exact(args.lam, args.sigma)
        print(f"st_moment {val:.12g}")
        return EXIT_OK
    X = load_design(args.design)
    design = gen_design(X.shape[0], X.shape[1], ("matrix", X), seed=args.seed)
    if args.mode == "packing":
        pk = vg_signed_packing(design, args.d, seed=args.seed)
        lines = [",".join(str(int(v)) for v in row) for row in pk.omega]
        text = "\n".join(lines) + "\n"
        print(f"cardinality {pk.omega.shape[0]}")
        print(f"log_card {pk.log_card:.6f}")
        print(f"max_energy {pk.max_energy:.6f}")
        if args.out:
            Path(args.out).write_text(text)
            _write_sidecar(args.out, vars(args) | {"command": "lower-bound"})
        return EXIT_OK
    if args.mode == "betamin":
        rep = betamin_experiment(design, args.k, args.lam, args.gamma,
                                 args.replicates, seed=args.seed,
                                 sigma=args.sigma, amplitude=args.amplitude)
        print(f"nu {rep.nu:.6f}")
        print(f"event_rate {rep.event_rate:.4f} (reference probability 1/3)")
        print(f"shift_ratio {rep.shift_ratio:.6f}")
        return EXIT_OK
    raise DesignError(f"unknown lower-bound mode {args.mode!r}")


def _cmd_nuclear(args) -> int:
    grid = [float(s) for s in args.lambda_grid.split(",") if s != ""]
    table = nuclear_lower_experiment(args.m, args.t, args.n, args.r, grid,
                                     args.replicates, seed=args.seed,
                                     sigma=args.sigma, amplitude=args.amplitude)
    print(f"# {table['note']}")
    print(f"reference_scale {table['reference_scale']:.6f}")
    print(f"observed_threshold {table['observed_threshold']:.6f}")
    for lam, risk in zip(table["lambda_grid"], table["mean_risk"]):
        print(f"lambda {lam:.6f} mean_risk {risk:.6f}")
    if args.out:
        payload = {k: v for k, v in table.items() if k != "risks"}
        Path(args.out).write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n")
        _write_sidecar(args.out, vars(args) | {"command": "nuclear"})
    return EXIT_OK


def _cmd_sweep(args) -> int:
    cfg = SweepConfig.from_json(args.config)
    if args.out:
        cfg.out = args.out
    if args.seed_override is not None:
        cfg.seed = args.seed_override
    cfg.threads = args.threads
    records, summary = run_sweep(cfg)
    print(f"replicates_ok {summary['replicates_ok']}")
    print(f"median_R {summary['median_R']:.6f}")
    print(f"median_V {summary['median_V']:.6f}")
    if cfg.out:
        _write_sidecar(cfg.out, summary["config"] | {"command": "sweep"})
    return EXIT_OK


def _svg_report(csv_text: str) -> str:
    rows = csv_text.strip().split("\n")
    header = rows[0].split(",")
    i_risk = header.index("risk")
    i_nb = header.index("nb")
    risk, nb = [], []
    for line in rows[1:]:
        parts = line.split(",")
        risk.append(float(parts[i_risk]))
        nb.append(float(parts[i_nb]))
    width, height, pad = 640, 360, 40
    finite = [v for v in risk + nb if math.isfinite(v)]
    vmax = max(finite) if finite else 1.0
    vmax = vmax if vmax > 0 else 1.0
    m = len(risk)

    def poly(vals):
        pts = []
        for i, v in enumerate(vals):
            if not math.isfinite(v):
                continue
            x = pad + (width - 2 * pad) * (i / max(m - 1, 1))
            y = height - pad - (height - 2 * pad) * (v / vmax)
            pts.append(f"{x:.2f},{y:.2f}")
        return " ".join(pts)

    return (
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}">\n'
        f'<rect width="{width}" height="{height}" fill="white"/>\n'
        f'<polyline points="{poly(risk)}" fill="none" stroke="black" stroke-width="1"/>\n'
        f'<polyline points="{poly(nb)}" fill="none" stroke="gray" stroke-width="1"/>\n'
        f'<text x="{pad}" y="20" font-size="12">risk (black), noise barrier (gray); '
        f'max {vmax:.6g}, replicates {m}</text>\n'
        f'</svg>\n')


def _cmd_report(args) -> int:
    csv_text = Path(args.csv).read_text()
    svg = _svg_report(csv_text)
    out = args.out or (args.csv + ".svg")
    Path(out).write_text(svg)
    print(f"wrote {out}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="lasso-barrier",
                                 description=sys.modules[__package__].__doc__)
    ap.add_argument("--seed", type=int, default=0, help="base seed (env LBL_SEED overrides)")
    ap.add_argument("--threads", type=int, default=os.cpu_count() or 1)
    ap.add_argument("--out", type=str, default=None, help="output artifact path")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("solve", help="solve one l1-penalized problem from files")
    p.add_argument("--design", required=True)
    p.add_argument("--y", required=True)
    p.add_argument("--beta-star", dest="beta_star", default=None)
    p.add_argument("--lam", type=float, required=True)
    p.add_argument("--tol", type=float, default=1e-8)
    p.add_argument("--max-iter", dest="max_iter", type=int, default=100_000)
    p.set_defaults(func=_cmd_solve)

    p = sub.add_parser("tune", help="print the tuning-level table")
    p.add_argument("--sigma", type=float, required=True)
    p.add_argument("--p", type=int, required=True)
    p.add_argument("--k", type=int, required=True)
    p.add_argument("--kind", choices=list(KINDS) + ["all"], default="all")
    p.add_argument("--f", choices=["zero", "sqrt-loglog"], default="zero")
    p.set_defaults(func=_cmd_tune)

    p = sub.add_parser("certify", help="emit the design-constant report as JSON")
    p.add_argument("--design", required=True)
    p.add_argument("--support", required=True, help="comma-separated indices, e.g. 1,3,7")
    p.add_argument("--c0", type=float, default=1.0)
    p.add_argument("--d", type=int, default=None)
    p.add_argument("--s-tilde", dest="s_tilde", type=float, default=None)
    p.add_argument("--lam", type=float, default=1.0)
    p.set_defaults(func=_cmd_certify)

    p = sub.add_parser("lower-bound", help="packing / betamin / stmoment experiments")
    p.add_argument("--mode", choices=["packing", "betamin", "stmoment"], required=True)
    p.add_argument("--design", default=None)
    p.add_argument("--d", type=int, default=10)
    p.add_argument("--k", type=int, default=1)
    p.add_argument("--lam", type=float, default=1.0)
    p.add_argument("--sigma", type=float, default=1.0)
    p.add_argument("--gamma", type=float, default=0.05)
    p.add_argument("--amplitude", type=float, default=10.0)
    p.add_argument("--replicates", type=int, default=100)
    p.set_defaults(func=_cmd_lower_bound)

    p = sub.add_parser("nuclear", help="nuclear-norm penalty level sweep")
    p.add_argument("--m", type=int, required=True)
    p.add_argument("--t", type=int, required=True)
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--r", type=int, required=True)
    p.add_argument("--lambda-grid", dest="lambda_grid", required=True)
    p.add_argument("--replicates", type=int, default=50)
    p.add_argument("--sigma", type=float, default=1.0)
    p.add_argument("--amplitude", type=float, default=10.0)
    p.set_defaults(func=_cmd_nuclear)

    p = sub.add_parser("sweep", help="run a Monte-Carlo sweep from a JSON config")
    p.add_argument("--config", required=True)
    p.set_defaults(func=_cmd_sweep)

    p = sub.add_parser("report", help="regenerate the SVG chart from a sweep CSV")
    p.add_argument("--csv", required=True)
    p.set_defaults(func=_cmd_report)
    return ap


def dispatch(argv=None) -> int:
    ap = build_parser()
    try:
        args = ap.parse_args(argv)
    except SystemExit as e:
        # argparse exits 2 on bad flags, matching the validation exit code
        return EXIT_VALIDATION if e.code else EXIT_OK
    env_seed = os.environ.get("LBL_SEED")
    args.seed_override = None
    if env_seed is not None:
        args.seed = int(env_seed)
        args.seed_override = int(env_seed)
    try:
        return args.func(args)
    except (SolverNonConvergence, TraceSolverNonConvergence, PackingBudgetError) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_NONCONVERGENCE
    except (DesignError, BelowCriticalRange, ValueError, OSError, KeyError,
            json.JSONDecodeError) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_VALIDATION


def main() -> None:
    sys.exit(dispatch())


if __name__ == "__main__":
    main()
