# Structural design constants and the two headline diagnostics.
#
# noise_barrier: almost-sure lower bound on the prediction error, computed
#   exactly as the error of the penalized estimator on the pure-noise problem.
# lsb_bracket: certified two-sided bracket of the large-signal bias, the
#   amplitude-invariant lower bound induced by the penalty on strong signals.
# compatibility_constant / cone_eigenvalue_theta / sparse_eigenvalues:
#   the cone-restricted and sparse spectra of the design that enter the upper
#   and lower risk bounds.

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Iterable, Optional, Sequence

import numpy as np

from .model import DesignMatrix, RegressionInstance
from .rng import keyed_rng
from .solvers import PenaltySpec, SolveResult, lasso_solve


class NotMinimalH(ValueError):
    """beta_star is not a minimal-penalty representative of its fit X beta_star."""


# ---------------------------------------------------------------------------
# Noise barrier
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class NoiseBarrierValue:
    value: float
    method: str  # "zero-signal-lasso" | "restricted-supremum"
    solve: Optional[SolveResult] = None


def noise_barrier(instance: RegressionInstance, penalty: PenaltySpec,
                  tol: float = 1e-8, max_iter: int = 100_000) -> NoiseBarrierValue:
    """Noise barrier of the l1 penalty at the instance's noise realization.

    Equals the prediction error of the penalized estimator on the
    zero-signal problem y = eps, which is solved here directly.
    """
    if penalty.kind != "l1":
        raise ValueError("noise_barrier handles the l1 penalty; see trace_regression")
    X = instance.design.entries
    res = lasso_solve((X, instance.epsilon), penalty, tol=tol, max_iter=max_iter,
                      beta_star=np.zeros(X.shape[1]))
    return NoiseBarrierValue(value=float(res.risk), method="zero-signal-lasso", solve=res)


def nb_restricted_supremum(design: DesignMatrix, epsilon, penalty: PenaltySpec,
                           candidates: Iterable) -> float:
    """Supremum of eps' X u - h(u) over a finite candidate set, each candidate
    rescaled onto the sphere ||X u|| = 1. Always a lower bound on the noise
    barrier (u = 0 contributes 0)."""
    X = design.entries
    n = X.shape[0]
    eps = np.asarray(epsilon, dtype=np.float64)
    best = 0.0
    for u in candidates:
        u = np.asarray(u, dtype=np.float64)
        nu = float(np.linalg.norm(X @ u))
        if nu <= 0:
            continue
        u = u / nu
        val = float(eps @ (X @ u)) - math.sqrt(n) * penalty.lam * float(np.sum(np.abs(u)))
        best = max(best, val)
    return best


# ---------------------------------------------------------------------------
# Sign-pattern quadratic programs (shared by compatibility and lsb)
# ---------------------------------------------------------------------------

def _project_nonneg_hyperplane(y: np.ndarray, c: np.ndarray) -> np.ndarray:
    """Euclidean projection onto {z >= 0, c'z = 1}.

    The projection is max(0, y + nu c) where nu solves the piecewise-linear
    scalar equation c' max(0, y + nu c) = 1, located by bisection.
    """
    def val(nu):
        return float(c @ np.maximum(0.0, y + nu * c))

    lo, hi = -1.0, 1.0
    for _ in range(200):
        if val(lo) <= 1.0:
            break
        lo *= 2.0
    for _ in range(200):
        if val(hi) >= 1.0:
            break
        hi *= 2.0
    for _ in range(120):
        mid = 0.5 * (lo + hi)
        if val(mid) < 1.0:
            lo = mid
        else:
            hi = mid
    return np.maximum(0.0, y + hi * c)


def _operator_norm_sq(X: np.ndarray, iters: int = 200, seed: int = 0) -> float:
    """lambda_max(X'X) by power iteration with a small safety factor."""
    rng = keyed_rng(seed, 999)
    v = rng.standard_normal(X.shape[1])
    v /= np.linalg.norm(v)
    lam = 0.0
    for _ in range(iters):
        w = X.T @ (X @ v)
        nw = float(np.linalg.norm(w))
        if nw == 0.0:
            return 0.0
        lam = nw
        v = w / nw
    return 1.02 * lam


def _pattern_qp(X: np.ndarray, T: np.ndarray, s: np.ndarray, c0: float,
                tol: float = 1e-10, max_iter: int = 100_000):
    """min ||X u|| subject to s'u_T - (1/c0)||u_{T^c}||_1 = 1 and s_j u_j >= 0
    on T. Returns (min value, witness u).

    Lifted to nonnegative variables z = (a, b+, b-) with u_T = s*a and
    u_{T^c} = b+ - b-, the constraint becomes linear and the feasible set is
    {z >= 0, c'z = 1}; accelerated projected gradient plus an exact KKT
    polish on the identified support.
    """
    n, p = X.shape
    Tc = np.setdiff1d(np.arange(p), T)
    kT, kB = T.size, Tc.size
    m = kT + 2 * kB

    XT = X[:, T] * s  # columns pre-signed
    XB = X[:, Tc]
    cvec = np.concatenate([np.ones(kT), np.full(2 * kB, -1.0 / c0)])

    def to_u(z):
        u = np.zeros(p)
        u[T] = s * z[:kT]
        if kB:
            u[Tc] = z[kT:kT + kB] - z[kT + kB:]
        return u

    def apply_M(z):
        v = XT @ z[:kT]
        if kB:
            v = v + XB @ (z[kT:kT + kB] - z[kT + kB:])
        return v

    def apply_Mt(v):
        g = np.empty(m)
        g[:kT] = XT.T @ v
        if kB:
            gb = XB.T @ v
            g[kT:kT + kB] = gb
            g[kT + kB:] = -gb
        return g

    L = 2.0 * _operator_norm_sq(np.hstack([XT, XB, -XB]) if kB else XT)
    if L <= 0:
        # zero design: objective 0 along any feasible z
        z0 = np.zeros(m)
        z0[0] = 1.0
        return 0.0, to_u(z0)
    step = 1.0 / L

    z = np.zeros(m)
    z[:kT] = 1.0 / kT
    zprev = z.copy()
    tmom = 1.0

    def fval(zz):
        v = apply_M(zz)
        return float(v @ v)

    best_val, best_z = fval(z), z.copy()

    def try_polish(zz):
        """Exact KKT solve on the active support; returns (value, z) when the
        polished point is feasible and globally optimal, else None."""
        act = np.flatnonzero(zz > 1e-11 * max(1.0, float(np.max(zz))))
        if act.size == 0 or act.size > 4 * (kT + 1) + 64:
            return None
        cols = np.hstack([XT, XB, -XB])[:, act] if kB else XT[:, act]
        G = 2.0 * cols.T @ cols
        ca = cvec[act]
        K = np.zeros((act.size + 1, act.size + 1))
        K[:act.size, :act.size] = G
        K[:act.size, -1] = -ca
        K[-1, :act.size] = ca
        rhs = np.zeros(act.size + 1)
        rhs[-1] = 1.0
        try:
            sol = np.linalg.lstsq(K, rhs, rcond=None)[0]
        except np.linalg.LinAlgError:
            return None
        za = sol[:act.size]
        nu = sol[-1]
        if np.min(za) < -1e-12:
            return None
        zp = np.zeros(m)
        zp[act] = np.maximum(za, 0.0)
        if abs(float(cvec @ zp) - 1.0) > 1e-9:
            return None
        grad = 2.0 * apply_Mt(apply_M(zp))
        # KKT: grad_i == nu c_i on the support, grad_i >= nu c_i off it
        if float(np.max(np.abs(grad[act] - nu * cvec[act]))) > 1e-7 * (1.0 + abs(nu)):
            return None
        off = np.setdiff1d(np.arange(m), act)
        if off.size and float(np.min(grad[off] - nu * cvec[off])) < -1e-9 * (1.0 + abs(nu)):
            return None
        return fval(zp), zp

    it = 0
    while it < max_iter:
        chunk = min(400, max_iter - it)
        for _ in range(chunk):
            w = z + ((tmom - 1.0) / (tmom + 2.0)) * (z - zprev)
            g = 2.0 * apply_Mt(apply_M(w))
            znew = _project_nonneg_hyperplane(w - step * g, cvec)
            zprev, z = z, znew
            tmom += 1.0
            it += 1
        v = fval(z)
        if v < best_val:
            best_val, best_z = v, z.copy()
        polished = try_polish(best_z)
        if polished is not None:
            pv, pz = polished
            if pv <= best_val + 1e-12:
                best_val, best_z = pv, pz
            return math.sqrt(max(best_val, 0.0)), to_u(best_z)
        # restart momentum if the accelerated sequence stalls
        if v > best_val * (1.0 + 1e-12):
            zprev = z.copy()
            tmom = 1.0
    return math.sqrt(max(best_val, 0.0)), to_u(best_z)


@dataclass(frozen=True)
class CompatibilityResult:
    phi: float
    witness: np.ndarray
    method: str  # "exhaustive" | "heuristic"
    c0: float
    T: tuple
    pattern: tuple  # sign pattern attaining the reported value


def _canonical_patterns(kT: int):
    """All sign patterns over T modulo the global sign flip (s and -s give the
    same program value), i.e. patterns with s[0] = +1."""
    for bits in itertools.product((1.0, -1.0), repeat=kT - 1):
        yield np.array((1.0,) + bits)


def compatibility_constant(design, T: Sequence[int], c0: float = 1.0,
                           mode: str = "auto", seed: int = 0,
                           max_patterns: int = 64) -> CompatibilityResult:
    """Compatibility constant phi(c0, T) of the design with a witness vector.

    Exhaustive mode (|T| <= 12) solves one convex program per sign pattern of
    u_T and minimizes over patterns; heuristic mode samples patterns and
    applies single-flip local descent, reporting an upper bound on phi.
    """
    X = design.entries if isinstance(design, DesignMatrix) else np.asarray(design, dtype=np.float64)
    n, p = X.shape
    T = np.asarray(sorted(set(int(j) for j in T)), dtype=np.int64)
    if T.size == 0:
        raise ValueError("support T must be non-empty")
    if T.size and (T[0] < 0 or T[-1] >= p):
        raise ValueError("support indices out of range")
    if not c0 >= 1.0:
        raise ValueError("c0 must be >= 1")
    kT = T.size
    if mode == "auto":
        mode = "exhaustive" if kT <= 12 else "heuristic"

    scale = math.sqrt(kT) / math.sqrt(n)
    cache = {}

    def value_of(pattern: np.ndarray):
        key = tuple(pattern)
        if key not in cache:
            cache[key] = _pattern_qp(X, T, pattern, c0)
        return cache[key]

    if mode == "exhaustive":
        if kT > 12:
            raise ValueError("exhaustive mode supports |T| <= 12")
        best = None
        for s in _canonical_patterns(kT) if kT > 1 else [np.array([1.0])]:
            val, u = value_of(s)
            if best is None or val < best[0]:
                best = (val, u, s)
        return CompatibilityResult(phi=scale * best[0], witness=best[1],
                                   method="exhaustive", c0=c0, T=tuple(T.tolist()),
                                   pattern=tuple(best[2].tolist()))

    # heuristic: random patterns + 1-flip descent from the best
    rng = keyed_rng(seed, 7)
    tried = {tuple(np.ones(kT))}
    pats = [np.ones(kT)]
    n_distinct = 2 ** (kT - 1)
    target = min(max(4, max_patterns // 4), n_distinct)
    draws = 0
    while len(pats) < target and draws < 50 * target:
        draws += 1
        s = np.where(rng.random(kT) < 0.5, 1.0, -1.0)
        s = s * s[0]  # canonical
        if tuple(s) not in tried:
            tried.add(tuple(s))
            pats.append(s)
    best = None
    for s in pats:
        val, u = value_of(s)
        if best is None or val < best[0]:
            best = (val, u, s)
    improved = True
    budget = max_patterns
    while improved and budget > 0:
        improved = False
        s0 = best[2]
        for j in range(kT):
            if budget <= 0:
                break
            s = s0.copy()
            s[j] = -s[j]
            s = s * s[0]
            if tuple(s) in cache:
                continue
            budget -= 1
            val, u = value_of(s)
            if val < best[0] - 1e-14:
                best = (val, u, s)
                improved = True
    return CompatibilityResult(phi=scale * best[0], witness=best[1],
                               method="heuristic", c0=c0, T=tuple(T.tolist()),
                               pattern=tuple(best[2].tolist()))


# ---------------------------------------------------------------------------
# Large signal bias bracket
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class LsbBracket:
    """Certified bracket for the large-signal bias of beta_star.

    ``lower`` is the best value over an explicit candidate family (each a
    feasible point of the defining supremum); ``upper`` is the norm of a
    dual certificate w with X'w in the penalty subdifferential at beta_star.
    """

    lower: float
    upper: float
    witness_beta: np.ndarray
    certificate_w: np.ndarray
    candidates: dict
    box_violation: float

    def __post_init__(self):
        if not self.lower <= self.upper + 1e-8:
            raise ValueError(
                f"bias bracket inconsistent: lower {self.lower:.12g} exceeds "
                f"upper {self.upper:.12g} beyond tolerance")


def _dual_certificate(X: np.ndarray, T: np.ndarray, s_T: np.ndarray,
                      tol: float = 1e-10, max_iter: int = 200_000):
    """Min-norm w with X_T'w = sqrt(n) s_T and |X_j'w| <= sqrt(n) off T,
    solved at unit penalty level via the penalized dual; raises NotMinimalH
    when that program is infeasible (dual unbounded below)."""
    n, p = X.shape
    rn = math.sqrt(n)
    # the box half-width is tightened by a hair so the returned certificate
    # satisfies the true constraints despite finite solver precision
    rn_box = rn * (1.0 - 1e-9)
    Tc = np.setdiff1d(np.arange(p), T)
    XT = X[:, T]
    XB = X[:, Tc]
    c = rn * s_T

    L = _operator_norm_sq(X)
    if L <= 0:
        raise NotMinimalH("design maps beta_star to zero")
    step = 1.0 / L

    u = np.zeros(T.size)
    z = np.zeros(Tc.size)
    up, zp = u.copy(), z.copy()
    tmom = 1.0
    div_bar = -1e12 * max(1.0, float(n))

    def smooth_obj(uu, zz):
        v = XT @ uu + (XB @ zz if zz.size else 0.0)
        return 0.5 * float(v @ v) + float(c @ uu)

    best = np.inf
    last_check = np.inf
    for it in range(max_iter):
        au = u + ((tmom - 1.0) / (tmom + 2.0)) * (u - up)
        az = z + ((tmom - 1.0) / (tmom + 2.0)) * (z - zp)
        v = XT @ au + (XB @ az if az.size else 0.0)
        gu = XT.T @ v + c
        up, zp = u, z
        u = au - step * gu
        if az.size:
            gz = XB.T @ v
            zt = az - step * gz
            z = np.sign(zt) * np.maximum(np.abs(zt) - step * rn_box, 0.0)
        tmom += 1.0
        if (it + 1) % 200 == 0:
            obj = smooth_obj(u, z) + rn_box * float(np.sum(np.abs(z)))
            if obj < div_bar:
                raise NotMinimalH(
                    "dual certificate program is infeasible: beta_star is not a "
                    "minimal-penalty representative of its fit")
            best = min(best, obj)
            # gradient-mapping stationarity test
            v = XT @ u + (XB @ z if z.size else 0.0)
            gu = XT.T @ v + c
            gm = float(np.linalg.norm(gu))
            if z.size:
                gz = XB.T @ v
                zt = z - step * gz
                znew = np.sign(zt) * np.maximum(np.abs(zt) - step * rn_box, 0.0)
                gm = max(gm, float(np.max(np.abs(z - znew))) / step)
            if gm <= tol * L * max(1.0, rn) or abs(last_check - obj) <= 1e-16 * max(1.0, abs(obj)):
                last_check = obj
                break
            last_check = obj

    w = -(XT @ u + (XB @ z if z.size else 0.0))
    # restore exact equality feasibility on T (tiny correction)
    G = XT.T @ XT
    resid = c - XT.T @ w
    try:
        alpha = np.linalg.lstsq(G, resid, rcond=None)[0]
    except np.linalg.LinAlgError:
        alpha = np.zeros(T.size)
    w = w + XT @ alpha
    box = float(np.max(np.abs(XB.T @ w)) / rn) if Tc.size else 0.0
    return w, max(0.0, box - 1.0)


def _ratio_at(X, b, beta, lam_unit_h):
    num = lam_unit_h * (float(np.sum(np.abs(b))) - float(np.sum(np.abs(beta))))
    den = float(np.linalg.norm(X @ (b - beta)))
    if den <= 1e-14:
        return -np.inf
    return num / den


def lsb_bracket(design, beta_star, penalty: PenaltySpec, seed: int = 0,
                extra_directions: Sequence = (), ascent_starts: int = 6,
                ascent_iters: int = 300) -> LsbBracket:
    """Two-sided bracket of the large-signal bias of beta_star for the l1
    penalty at level penalty.lam.

    The computation runs at unit penalty level on the normalized target
    b = beta_star / ||X beta_star|| and scales by lam afterwards, so the
    bracket is exactly linear in the penalty level and exactly invariant
    under rescaling of beta_star.

    Lower bound: best of (i) the zero candidate h(b)/||X b||, (ii) shrinking
    along the sign vector, (iii) shrinking along compatibility witnesses,
    (iv) multi-start local ascent of the defining ratio. Upper bound: norm of
    the min-norm dual certificate; infeasibility raises NotMinimalH.
    """
    X = design.entries if isinstance(design, DesignMatrix) else np.asarray(design, dtype=np.float64)
    if penalty.kind != "l1":
        raise ValueError("lsb_bracket handles the l1 penalty; see trace_regression")
    lam = penalty.lam
    n, p = X.shape
    beta_star = np.asarray(beta_star, dtype=np.float64)
    if not np.any(beta_star):
        raise ValueError("beta_star must be nonzero (the bias of 0 is 0 by convention)")
    xb = float(np.linalg.norm(X @ beta_star))
    if xb <= 0:
        raise NotMinimalH("X beta_star = 0 with beta_star != 0 cannot be minimal")
    b = beta_star / xb
    T = np.flatnonzero(b)
    s_T = np.sign(b[T])
    rn = math.sqrt(n)

    w, box_violation = _dual_certificate(X, T, s_T)
    upper_unit = float(np.linalg.norm(w))

    cands = {}
    cands["zero"] = rn * float(np.sum(np.abs(b)))  # ||X b|| == 1 after normalization

    def shrink_candidate(v):
        v = np.asarray(v, dtype=np.float64)
        on_T = v[T]
        mask = on_T != 0.0
        if np.any(mask):
            t = 0.5 * float(np.min(np.abs(b[T][mask]) / np.abs(on_T[mask])))
        else:
            vmax = float(np.max(np.abs(v)))
            if vmax == 0.0:
                return -np.inf, None
            t = 0.5 * float(np.min(np.abs(b[T]))) / vmax
        beta = b - t * v
        return _ratio_at(X, b, beta, rn), beta

    sign_full = np.zeros(p)
    sign_full[T] = s_T
    val, beta_sign = shrink_candidate(sign_full)
    cands["sign-shrink"] = val

    comp = _pattern_qp(X, T, s_T, 1.0)
    val_w, beta_wit = shrink_candidate(comp[1])
    cands["compatibility-witness"] = val_w

    for i, v in enumerate(extra_directions):
        val_e, _ = shrink_candidate(v)
        cands[f"extra-{i}"] = val_e

    # multi-start local ascent of (h(b) - h(b - v)) / ||X v||
    rng = keyed_rng(seed, 11)
    G = X.T @ X
    starts = [sign_full, comp[1], b.copy()]
    for _ in range(max(0, ascent_starts - len(starts))):
        v = np.zeros(p)
        v[T] = s_T * (0.5 + rng.random(T.size))
        off = rng.integers(0, p, size=min(p, 3))
        v[off] += 0.1 * rng.standard_normal(off.size)
        starts.append(v)
    best_ascent = -np.inf
    best_ascent_beta = None
    for v0 in starts:
        v = np.array(v0, dtype=np.float64)
        nv = float(np.linalg.norm(X @ v))
        if nv <= 1e-14:
            continue
        v /= nv
        rho = _ratio_at(X, b, b - v, rn)
        step = 0.5
        for _ in range(ascent_iters):
            d = b - v
            g_num = rn * np.sign(d)
            xv = X @ v
            den = float(np.linalg.norm(xv))
            if den <= 1e-14:
                break
            g_den = (G @ v) / den
            num = rn * (float(np.sum(np.abs(b))) - float(np.sum(np.abs(d))))
            grad = (g_num * den - num * g_den) / den ** 2
            vn = v + step * grad
            rho_n = _ratio_at(X, b, b - vn, rn)
            if rho_n > rho:
                v, rho = vn, rho_n
            else:
                step *= 0.5
                if step < 1e-10:
                    break
        if rho > best_ascent:
            best_ascent = rho
            best_ascent_beta = b - v
    cands["ascent"] = best_ascent

    lower_unit = max(v for v in cands.values() if np.isfinite(v))
    best_name = max((name for name in cands if np.isfinite(cands[name])),
                    key=lambda name: cands[name])
    if best_name == "zero":
        wit_beta = np.zeros(p)
    elif best_name == "sign-shrink":
        wit_beta = beta_sign
    elif best_name == "compatibility-witness":
        wit_beta = beta_wit
    else:
        wit_beta = best_ascent_beta if best_ascent_beta is not None else np.zeros(p)

    return LsbBracket(
        lower=lam * lower_unit,
        upper=lam * upper_unit,
        witness_beta=xb * wit_beta,
        certificate_w=lam * w,
        candidates={name: lam * v for name, v in cands.items()},
        box_violation=box_violation)


# ---------------------------------------------------------------------------
# Cone and sparse eigenvalues
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ThetaBracket:
    """Bracket for the minimal cone-restricted eigenvalue of sigma_bar^(1/2).

    ``upper`` is the smallest Rayleigh root found over feasible cone
    directions (a certified upper bound for the infimum); ``lower`` is the
    global bound sqrt(lambda_min(sigma_bar)).
    """

    lower: float
    upper: float
    witness: np.ndarray
    s_tilde: float


def _cone_repair(u: np.ndarray, T: np.ndarray, sqrt_st: float) -> Optional[np.ndarray]:
    """Shrink the off-support block of u until ||u_{T^c}||_1 <= sqrt_st ||u||;
    returns None when u cannot be repaired (no mass on T)."""
    p = u.size
    mask = np.zeros(p, dtype=bool)
    mask[T] = True
    uT = u[mask]
    uB = u[~mask]
    l1 = float(np.sum(np.abs(uB)))
    nrm = float(np.linalg.norm(u))
    if nrm == 0.0:
        return None
    if l1 <= sqrt_st * nrm:
        return u / nrm
    A2 = float(uT @ uT)
    B2 = float(uB @ uB)
    den = l1 * l1 - sqrt_st ** 2 * B2
    if A2 <= 0.0 or den <= 0.0:
        out = np.zeros(p)
        if T.size == 0:
            return None
        out[T[0]] = 1.0
        return out
    gamma = math.sqrt(sqrt_st ** 2 * A2 / den) * (1.0 - 1e-12)
    out = u.copy()
    out[~mask] *= gamma
    return out / float(np.linalg.norm(out))


def cone_eigenvalue_theta(sigma_bar, T: Sequence[int], s_tilde: float,
                          seed: int = 0, n_starts: int = 40,
                          iters: int = 400, n_probe: int = 2000) -> ThetaBracket:
    """Bracket the infimum of ||sigma_bar^(1/2) u|| / ||u|| over the cone
    ||u_{T^c}||_1 <= sqrt(s_tilde) ||u||.

    Multi-start projected gradient descent on the sphere with feasibility
    repair; every evaluated point is feasible, so the minimum found is a
    valid upper bound. The lower end is sqrt(lambda_min(sigma_bar)).
    """
    S = np.asarray(sigma_bar, dtype=np.float64)
    p = S.shape[0]
    T = np.asarray(sorted(set(int(j) for j in T)), dtype=np.int64)
    if not s_tilde > 0:
        raise ValueError("s_tilde must be positive")
    sqrt_st = math.sqrt(s_tilde)
    evals, evecs = np.linalg.eigh(S)
    lam_min = max(float(evals[0]), 0.0)
    lam_max = float(evals[-1])
    lower = math.sqrt(lam_min)

    def q(u):
        return float(u @ (S @ u))

    rng = keyed_rng(seed, 13)
    cand = []
    cand.append(evecs[:, 0])
    for j in T[:8]:
        e = np.zeros(p)
        e[j] = 1.0
        cand.append(e)
    # cheap random probing; every feasible sample is a certified upper bound
    probes = rng.standard_normal((n_probe, p))
    pn = np.linalg.norm(probes, axis=1, keepdims=True)
    probes /= np.maximum(pn, 1e-300)
    mask = np.zeros(p, dtype=bool)
    mask[T] = True
    feas = np.sum(np.abs(probes[:, ~mask]), axis=1) <= sqrt_st
    vals = np.einsum("ij,jk,ik->i", probes, S, probes)
    vals = np.where(feas, vals, np.inf)
    order = np.argsort(vals)
    for i in order[:8]:
        if np.isfinite(vals[i]):
            cand.append(probes[i])
    while len(cand) < n_starts:
        u = rng.standard_normal(p)
        cand.append(u)

    best_val = np.inf
    best_u = None
    eta_step = 1.0 / max(lam_max, 1e-300)
    for u0 in cand:
        u = _cone_repair(np.array(u0, dtype=np.float64), T, sqrt_st)
        if u is None:
            continue
        val = q(u)
        if val < best_val:
            best_val, best_u = val, u.copy()
        for _ in range(iters):
            g = S @ u
            ray = float(u @ g)
            grad = g - ray * u
            un = u - eta_step * grad
            un = _cone_repair(un, T, sqrt_st)
            if un is None:
                break
            vn = q(un)
            u = un
            if vn < best_val:
                best_val, best_u = vn, un.copy()
            if abs(vn - val) <= 1e-15 * max(1.0, abs(val)):
                break
            val = vn
    upper = math.sqrt(max(best_val, 0.0))
    upper = max(upper, lower)  # a found value below the global floor is noise
    return ThetaBracket(lower=lower, upper=upper, witness=best_u, s_tilde=s_tilde)


@dataclass(frozen=True)
class SparseEigReport:
    """Extreme sparse eigenvalues of sigma_bar over supports of size d.

    ``psi`` is the maximal sparse eigenvalue sqrt(max lambda_max) found;
    ``min_sparse`` the minimal sqrt(min lambda_min). In heuristic mode each
    value is one side of its bracket, the other side being the global
    eigenvalue bound of the full matrix.
    """

    psi: float
    min_sparse: float
    d: int
    method: str  # "exhaustive" | "heuristic"
    psi_bracket: tuple
    min_bracket: tuple
    supports_checked: int


def sparse_eigenvalues(sigma_bar, d: int, mode: str = "auto", seed: int = 0,
                       samples: int = 32,
                       exhaustive_limit: int = 1_000_000) -> SparseEigReport:
    """Extreme eigenvalues of d x d principal submatrices of sigma_bar.

    Exhaustive when C(p, d) <= exhaustive_limit; otherwise sampled supports
    plus greedy forward selection (for small d), tagged heuristic.
    """
    S = np.asarray(sigma_bar, dtype=np.float64)
    p = S.shape[0]
    if not 1 <= d <= p:
        raise ValueError(f"support size d must satisfy 1 <= d <= p={p}")
    n_supports = math.comb(p, d)
    evals_full = np.linalg.eigvalsh(S)
    glob_lo, glob_hi = max(float(evals_full[0]), 0.0), float(evals_full[-1])

    def extremes(idx):
        sub = S[np.ix_(idx, idx)]
        w = np.linalg.eigvalsh(sub)
        return float(w[0]), float(w[-1])

    if mode == "auto":
        mode = "exhaustive" if n_supports <= exhaustive_limit else "heuristic"

    if mode == "exhaustive":
        if n_supports > exhaustive_limit:
            raise ValueError(f"C({p},{d}) = {n_supports} exceeds the exhaustive limit")
        mn, mx = np.inf, -np.inf
        count = 0
        for idx in itertools.combinations(range(p), d):
            lo, hi = extremes(np.asarray(idx))
            mn = min(mn, lo)
            mx = max(mx, hi)
            count += 1
        psi = math.sqrt(max(mx, 0.0))
        msp = math.sqrt(max(mn, 0.0))
        return SparseEigReport(psi=psi, min_sparse=msp, d=d, method="exhaustive",
                               psi_bracket=(psi, psi), min_bracket=(msp, msp),
                               supports_checked=count)

    rng = keyed_rng(seed, 17)
    mn, mx = np.inf, -np.inf
    count = 0
    for _ in range(samples):
        idx = np.sort(rng.choice(p, size=d, replace=False))
        lo, hi = extremes(idx)
        mn = min(mn, lo)
        mx = max(mx, hi)
        count += 1
    if d <= 48:
        # greedy forward selection guided by the current extreme eigenvector
        for target_max in (True, False):
            diag = np.diag(S)
            j0 = int(np.argmax(diag) if target_max else np.argmin(diag))
            sel = [j0]
            for _ in range(d - 1):
                sub = S[np.ix_(sel, sel)]
                w, V = np.linalg.eigh(sub)
                v = V[:, -1] if target_max else V[:, 0]
                scores = np.abs(S[:, sel] @ v)
                scores[sel] = -np.inf if target_max else np.inf
                j = int(np.argmax(scores)) if target_max else int(np.argmin(scores))
                sel.append(j)
            lo, hi = extremes(np.asarray(sel))
            mn = min(mn, lo)
            mx = max(mx, hi)
            count += 1
    psi_found = math.sqrt(max(mx, 0.0))
    min_found = math.sqrt(max(mn, 0.0))
    return SparseEigReport(psi=psi_found, min_sparse=min_found, d=d, method="heuristic",
                           psi_bracket=(psi_found, math.sqrt(glob_hi)),
                           min_bracket=(math.sqrt(glob_lo), min_found),
                           supports_checked=count)


def rip_delta(design: DesignMatrix, d: int, **kwargs) -> float:
    """Restricted-isometry deficit delta_{2d} = 1 - smallest restricted
    singular value of X / sqrt(n) over supports of size 2d."""
    X = design.entries
    n = X.shape[0]
    gram = X.T @ X / n
    rep = sparse_eigenvalues(gram, min(2 * d, X.shape[1]), **kwargs)
    return 1.0 - rep.min_sparse


# ---------------------------------------------------------------------------
# Aggregate certification
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class DesignConstants:
    phi: CompatibilityResult
    theta: ThetaBracket
    sparse: SparseEigReport
    delta_2d: float
    lsb: Optional[LsbBracket]

    def __post_init__(self):
        if self.delta_2d < 0.0 - 1e-12:
            raise ValueError("delta_2d must be nonnegative")


def certify_design(design: DesignMatrix, T: Sequence[int], c0: float = 1.0,
                   d: Optional[int] = None, s_tilde: Optional[float] = None,
                   penalty_lam: float = 1.0, seed: int = 0,
                   with_lsb: bool = True) -> DesignConstants:
    """One-stop certification of the structural constants for a support T.

    Defaults: d = |T|; s_tilde = |T| (24 log(p/|T|))^2 (the cone width used
    by the upper bounds), clipped to p^2 for tiny p. The bias bracket is
    evaluated at the compatibility witness direction restricted to T.
    """
    T = sorted(set(int(j) for j in T))
    k = len(T)
    p = design.p
    if d is None:
        d = k
    if s_tilde is None:
        s_tilde = k * (24.0 * math.log(p / k)) ** 2 if p > k else float(p * p)
        s_tilde = max(s_tilde, 1.0)
    phi = compatibility_constant(design, T, c0=c0, seed=seed)
    theta = cone_eigenvalue_theta(design.sigma_bar, T, s_tilde, seed=seed)
    sparse = sparse_eigenvalues(design.sigma_bar, min(d, p), seed=seed)
    delta = rip_delta(design, d, seed=seed)
    lsb = None
    if with_lsb:
        beta_dir = np.zeros(p)
        wT = phi.witness[T]
        if not np.any(wT):
            wT = np.asarray(phi.pattern)
        beta_dir[T] = wT
        lsb = lsb_bracket(design, beta_dir, PenaltySpec("l1", penalty_lam), seed=seed)
    return DesignConstants(phi=phi, theta=theta, sparse=sparse, delta_2d=delta, lsb=lsb)
