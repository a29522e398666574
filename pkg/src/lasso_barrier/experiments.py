# Monte-Carlo harness: penalty-level sweeps with per-replicate diagnostics,
# the correlation-necessity experiment, and the cross-validated penalty check.

from __future__ import annotations

import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, asdict
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from . import model
from .diagnostics import lsb_bracket, noise_barrier
from .lower_bounds import vg_signed_packing, sudakov_lower, SignedPacking
from .model import DesignMatrix, RegressionInstance
from .rng import keyed_rng, subseed
from .solvers import PenaltySpec, SolverNonConvergence, lasso_solve
from .tuning import tuning_level

SCHEMA_VERSION = 1
CSV_HEADER = "replicate,lambda,risk,nb,lsb_lo,lsb_hi,B,V,R,flags"

# keyed stream ids for the independent random ingredients of a replicate
_STREAM_DESIGN = 101
_STREAM_SUPPORT = 102
_STREAM_NOISE = 103


@dataclass
class SweepConfig:
    """Configuration of one Monte-Carlo sweep (JSON schema version 1)."""

    n: int
    p: int
    k: int
    design: dict = field(default_factory=lambda: {"kind": "gaussian"})
    sigma: float = 1.0
    beta_amplitude: float = 10.0
    support_rule: str = "random"  # "random" | "prefix"
    lambda_rule: tuple = ("L0-at", None)  # resolved k' defaults to k
    replicates: int = 100
    seed: int = 0
    out: Optional[str] = None
    compute_lsb: bool = True
    tol: float = 1e-8
    threads: int = 1

    def __post_init__(self):
        if min(self.n, self.p, self.k, self.replicates) < 1:
            raise ValueError("n, p, k, replicates must be positive")
        if not self.sigma > 0:
            raise ValueError("sigma must be positive")
        if self.support_rule not in ("random", "prefix"):
            raise ValueError(f"unknown support rule {self.support_rule!r}")
        self.lambda_rule = tuple(self.lambda_rule) if not isinstance(self.lambda_rule, str) \
            else (self.lambda_rule,)
        self.resolve_lambda()  # validate resolvability

    def resolve_lambda(self) -> Optional[float]:
        """Resolve the penalty level; None means cross-validated per replicate."""
        rule = self.lambda_rule
        kind = rule[0]
        if kind == "fixed":
            return float(rule[1])
        if kind == "L0-at":
            kprime = self.k if len(rule) < 2 or rule[1] is None else int(rule[1])
            return tuning_level(self.sigma, self.p, kprime, "L0").value
        if kind == "universal":
            return tuning_level(self.sigma, self.p, self.k, "universal").value
        if kind == "cv":
            return None
        raise ValueError(f"unknown lambda rule {rule!r}")

    def cv_folds(self) -> int:
        return int(self.lambda_rule[1]) if self.lambda_rule[0] == "cv" else 0

    def to_dict(self) -> dict:
        d = asdict(self)
        d["schema"] = SCHEMA_VERSION
        d["lambda_rule"] = list(self.lambda_rule)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "SweepConfig":
        d = dict(d)
        schema = d.pop("schema", SCHEMA_VERSION)
        if schema != SCHEMA_VERSION:
            raise ValueError(f"unsupported config schema {schema}")
        d["lambda_rule"] = tuple(d.get("lambda_rule", ("L0-at", None)))
        return cls(**d)

    @classmethod
    def from_json(cls, path) -> "SweepConfig":
        return cls.from_dict(json.loads(Path(path).read_text()))


@dataclass
class ExperimentRecord:
    replicate: int
    lam: float
    risk: float
    nb: float
    lsb_lo: float
    lsb_hi: float
    B: float
    V: float
    R: float
    flags: str
    ok: bool = True


def _fmt(x: float) -> str:
    return format(x, ".17g")


def records_to_csv(records: Sequence[ExperimentRecord]) -> str:
    lines = [CSV_HEADER]
    for r in records:
        lines.append(",".join([
            str(r.replicate), _fmt(r.lam), _fmt(r.risk), _fmt(r.nb),
            _fmt(r.lsb_lo), _fmt(r.lsb_hi), _fmt(r.B), _fmt(r.V), _fmt(r.R),
            r.flags]))
    return "\n".join(lines) + "\n"


def build_design(cfg: SweepConfig, replicate: int) -> DesignMatrix:
    """Design for one replicate: sampled designs are redrawn per replicate,
    deterministic ones are identical across replicates (same key)."""
    spec = model._normalize_spec(cfg.design)
    if spec[0] == "gaussian":
        seed = subseed(cfg.seed, _STREAM_DESIGN, replicate)
    else:
        seed = subseed(cfg.seed, _STREAM_DESIGN)
    return model.gen_design(cfg.n, cfg.p, spec, seed=seed)


def draw_replicate(cfg: SweepConfig, replicate: int,
                   design: Optional[DesignMatrix] = None) -> RegressionInstance:
    """Instance for one replicate: target on a random (or prefix) support with
    entries beta_amplitude * sigma, plus fresh Gaussian noise."""
    if design is None:
        design = build_design(cfg, replicate)
    beta = np.zeros(cfg.p)
    if cfg.beta_amplitude != 0.0:
        if cfg.support_rule == "prefix":
            supp = np.arange(cfg.k)
        else:
            rng = keyed_rng(cfg.seed, _STREAM_SUPPORT, replicate)
            supp = np.sort(rng.choice(cfg.p, size=cfg.k, replace=False))
        beta[supp] = cfg.beta_amplitude * cfg.sigma
    return model.sample_instance(
        design, beta, sigma=cfg.sigma, noise_spec="gaussian",
        seed=subseed(cfg.seed, _STREAM_NOISE, replicate), k=cfg.k)


def cv_lambda(X, y, sigma: float, folds: int, seed: int = 0, tol: float = 1e-8,
              grid: Optional[np.ndarray] = None) -> float:
    """K-fold cross-validated penalty level over a fixed 30-point log grid
    spanning [0.01, 4] times sigma sqrt(2 log p)."""
    n, p = X.shape
    if grid is None:
        top = sigma * math.sqrt(2.0 * math.log(p))
        grid = np.exp(np.linspace(math.log(0.01 * top), math.log(4.0 * top), 30))
    grid = np.sort(np.asarray(grid, dtype=np.float64))[::-1]  # descending, for warm starts
    idx = np.arange(n)
    err = np.zeros(grid.size)
    for f in range(folds):
        val = idx[idx % folds == f]
        trn = idx[idx % folds != f]
        Xt, yt = X[trn], y[trn]
        Xv, yv = X[val], y[val]
        warm = None
        for gi, lam in enumerate(grid):
            res = lasso_solve((Xt, yt), PenaltySpec("l1", float(lam)), tol=tol,
                              warm_start=warm)
            warm = res.beta_hat
            resid = Xv @ res.beta_hat - yv
            err[gi] += float(resid @ resid)
    # ties (e.g. the all-zero plateau on pure noise) resolve to the smallest level
    best = grid.size - 1 - int(np.argmin(err[::-1]))
    return float(grid[best])


def _sweep_one(cfg: SweepConfig, rid: int, lam_fixed: Optional[float],
               norm_rate: float, c_min_proxy: float, c_max_proxy: float,
               base_design: Optional[DesignMatrix]) -> ExperimentRecord:
    design = base_design if base_design is not None else build_design(cfg, rid)
    inst = draw_replicate(cfg, rid, design=design)
    lam = lam_fixed
    if lam is None:
        lam = cv_lambda(design.entries, inst.y, cfg.sigma, cfg.cv_folds(),
                        seed=cfg.seed, tol=cfg.tol)
    pen = PenaltySpec("l1", lam)
    try:
        res = lasso_solve(inst, pen, tol=cfg.tol)
        nb = noise_barrier(inst, pen, tol=cfg.tol)
        risk = float(res.risk)
        nbv = nb.value
        if not np.any(inst.beta_star):
            lsb_lo = lsb_hi = 0.0  # bias of the zero target is zero by convention
        elif cfg.compute_lsb:
            br = lsb_bracket(design, inst.beta_star, pen, seed=cfg.seed)
            lsb_lo, lsb_hi = br.lower, br.upper
        else:
            lsb_lo = lsb_hi = float("nan")
        rate = norm_rate
        upper_event = risk <= math.sqrt(2.0) * lam * math.sqrt(cfg.k) / c_min_proxy
        lower_event = risk >= lam * math.sqrt(cfg.k) / c_max_proxy
        flags = ("U" if upper_event else "-") + ("L" if lower_event else "-")
        return ExperimentRecord(
            replicate=rid, lam=lam, risk=risk, nb=nbv,
            lsb_lo=lsb_lo, lsb_hi=lsb_hi,
            B=lsb_lo / rate, V=nbv / rate, R=risk / rate, flags=flags)
    except SolverNonConvergence:
        nan = float("nan")
        return ExperimentRecord(replicate=rid, lam=lam, risk=nan, nb=nan,
                                lsb_lo=nan, lsb_hi=nan, B=nan, V=nan, R=nan,
                                flags="EE", ok=False)


def run_sweep(cfg: SweepConfig):
    """Run the sweep; returns (records, summary dict).

    Per replicate: draw the instance, resolve the penalty level, solve,
    re-solve on the pure-noise problem for the noise barrier, bracket the
    signal bias, and normalize by sigma sqrt(2 k log(p/k)). Solver failures
    yield a flagged record, never abort the sweep. Identical config and seed
    give identical records (and CSV bytes) regardless of thread count.
    """
    lam_fixed = cfg.resolve_lambda()
    norm_rate = cfg.sigma * math.sqrt(2.0 * cfg.k * math.log(cfg.p / cfg.k))
    spec = model._normalize_spec(cfg.design)
    base_design = None if spec[0] == "gaussian" else build_design(cfg, 0)
    ref_design = base_design if base_design is not None else build_design(cfg, 0)
    evals = np.linalg.eigvalsh(ref_design.sigma_bar)
    c_min_proxy = math.sqrt(max(float(evals[0]), 1e-300))
    c_max_proxy = math.sqrt(max(float(evals[-1]), 1e-300))

    rids = list(range(cfg.replicates))
    if cfg.threads > 1:
        with ThreadPoolExecutor(max_workers=cfg.threads) as ex:
            records = list(ex.map(
                lambda rid: _sweep_one(cfg, rid, lam_fixed, norm_rate,
                                       c_min_proxy, c_max_proxy, base_design),
                rids))
    else:
        records = [_sweep_one(cfg, rid, lam_fixed, norm_rate,
                              c_min_proxy, c_max_proxy, base_design)
                   for rid in rids]

    ok = [r for r in records if r.ok]
    summary = {
        "schema": SCHEMA_VERSION,
        "config": cfg.to_dict(),
        "replicates_ok": len(ok),
        "upper_event_rate": float(np.mean([r.flags[0] == "U" for r in ok])) if ok else float("nan"),
        "lower_event_rate": float(np.mean([r.flags[1] == "L" for r in ok])) if ok else float("nan"),
        "median_R": float(np.median([r.R for r in ok])) if ok else float("nan"),
        "median_V": float(np.median([r.V for r in ok])) if ok else float("nan"),
        "c_min_proxy": c_min_proxy,
        "c_max_proxy": c_max_proxy,
        "regime_ratio_klog3_over_n": cfg.k * math.log(cfg.p / cfg.k) ** 3 / cfg.n,
        "note": "theorem events use the spectrum of sigma_bar as stand-ins for the "
                "population constants; frequencies are empirical",
    }
    if cfg.out:
        out = Path(cfg.out)
        out.write_text(records_to_csv(records))
        sidecar = out.with_suffix(out.suffix + ".summary.json")
        sidecar.write_text(json.dumps(summary, indent=2, sort_keys=True) + "\n")
    return records, summary


def compatibility_necessity_experiment(design: DesignMatrix, T: Sequence[int],
                                       lam: float, amplitudes: Sequence[float],
                                       replicates: int, seed: int = 0,
                                       gamma: float = 0.1, sigma: float = 1.0,
                                       tol: float = 1e-8) -> dict:
    """Estimate E[risk] for targets t * u_T along the compatibility witness u
    and compare against the bound (1 - gamma) lam sqrt(|T|) / phi(1, T).

    Bound satisfaction is expected for all amplitudes above a finite
    threshold; the observed threshold index is reported (-1 when never
    satisfied from some amplitude on).
    """
    from .diagnostics import compatibility_constant

    comp = compatibility_constant(design, T, c0=1.0, mode="exhaustive", seed=seed)
    X = design.entries
    u = comp.witness / float(np.linalg.norm(X @ comp.witness))
    T = np.asarray(sorted(set(int(j) for j in T)), dtype=np.int64)
    u_T = np.zeros(design.p)
    u_T[T] = u[T]
    bound = (1.0 - gamma) * lam * math.sqrt(T.size) / comp.phi
    rows = []
    for ai, t in enumerate(amplitudes):
        beta_star = t * u_T
        risks = []
        for rep in range(replicates):
            eps = sigma * keyed_rng(seed, 53, ai, rep).standard_normal(design.n)
            y = X @ beta_star + eps
            res = lasso_solve((X, y), PenaltySpec("l1", lam), tol=tol, beta_star=beta_star)
            risks.append(float(res.risk))
        mean_risk = float(np.mean(risks))
        rows.append({"amplitude": float(t), "mean_risk": mean_risk,
                     "bound": bound, "satisfied": bool(mean_risk >= bound)})
    threshold_idx = -1
    for i in range(len(rows)):
        if all(r["satisfied"] for r in rows[i:]):
            threshold_idx = i
            break
    return {"phi": comp.phi, "bound": bound, "rows": rows,
            "threshold_index": threshold_idx}


def data_driven_check(cfg: SweepConfig, d: int, packing: Optional[SignedPacking] = None,
                      forced_lambda: Optional[float] = None,
                      delta_2d: float = 0.0) -> dict:
    """Check the packing-based lower bound against the risk of the estimator
    with a data-driven (cross-validated) penalty level.

    Per replicate: draw the instance (same keyed path as run_sweep), choose
    lambda_hat by K-fold CV (or use forced_lambda), solve, and test

        max_w eps' X u_w  -  lambda_hat sqrt(d)  <=  risk

    with u_w = w / sqrt(d n) over the signed packing. The left side is also
    compared against its Sudakov evaluation (direct sup >= Sudakov bound).
    """
    spec = model._normalize_spec(cfg.design)
    base_design = None if spec[0] == "gaussian" else build_design(cfg, 0)
    rows = []
    folds = cfg.cv_folds() or 5
    for rid in range(cfg.replicates):
        design = base_design if base_design is not None else build_design(cfg, rid)
        inst = draw_replicate(cfg, rid, design=design)
        pk = packing if packing is not None else vg_signed_packing(design, d, seed=cfg.seed)
        X = design.entries
        n = design.n
        if forced_lambda is not None:
            lam_hat = float(forced_lambda)
        else:
            lam_hat = cv_lambda(X, inst.y, cfg.sigma, folds, seed=cfg.seed, tol=cfg.tol)
        res = lasso_solve(inst, PenaltySpec("l1", lam_hat), tol=cfg.tol)
        U = pk.omega.astype(np.float64) / math.sqrt(d * n)
        sup_direct = float(np.max(U @ (X.T @ inst.epsilon)))
        sud = sudakov_lower(pk, design, cfg.sigma, delta_2d)
        lhs = sup_direct - lam_hat * math.sqrt(d)
        rows.append({
            "replicate": rid,
            "lambda_hat": lam_hat,
            "risk": float(res.risk),
            "sup_direct": sup_direct,
            "sudakov_bound": sud.bound_from_cardinality,
            "lhs": lhs,
            "holds": bool(lhs <= float(res.risk) + 1e-7),
        })
    holds_rate = float(np.mean([r["holds"] for r in rows]))
    return {"rows": rows, "holds_rate": holds_rate,
            "mean_lambda_hat": float(np.mean([r["lambda_hat"] for r in rows]))}
