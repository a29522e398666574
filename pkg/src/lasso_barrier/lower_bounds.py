# Constructive machinery behind the lower-bound experiments: Gaussian
# soft-thresholding statistics with their closed-form moments, tail bounds
# for top-order statistics, signed packing constructions with the Sudakov
# evaluation, and the shrinkage experiment under the beta-min condition.

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .model import DesignMatrix
from .rng import keyed_rng
from .solvers import PenaltySpec, lasso_solve
from .tuning import normal_pdf


def gaussian_upper_tail(t: float) -> float:
    """Q(t) = P(g > t) for standard normal g, via the complementary error
    function at double precision."""
    return 0.5 * math.erfc(t / math.sqrt(2.0))


# ---------------------------------------------------------------------------
# Soft-thresholding statistics
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class SoftThresholdStats:
    """Soft-thresholded score vector u and its norm z = ||u||."""

    z: float
    u_st: np.ndarray
    sparsity_of_u: int


def soft_threshold(values, lam: float) -> np.ndarray:
    v = np.asarray(values, dtype=np.float64)
    return np.sign(v) * np.maximum(np.abs(v) - lam, 0.0)


def soft_threshold_stats(g, lam: float) -> SoftThresholdStats:
    u = soft_threshold(g, lam)
    return SoftThresholdStats(z=float(np.linalg.norm(u)), u_st=u,
                              sparsity_of_u=int(np.count_nonzero(u)))


def st_moment_exact(lam: float, sigma: float = 1.0) -> float:
    """E (|g| - lam)_+^2 for g ~ N(0, sigma^2), in closed form:
    2 sigma^2 [ -t phi(t) + (t^2 + 1) Q(t) ] with t = lam / sigma."""
    if not lam >= 0:
        raise ValueError("lam must be >= 0")
    if not sigma > 0:
        raise ValueError("sigma must be positive")
    t = lam / sigma
    return 2.0 * sigma ** 2 * (-t * normal_pdf(t) + (t * t + 1.0) * gaussian_upper_tail(t))


def q_series_bounds(lam: float) -> tuple:
    """Series bracket for the normal upper tail Q(lam), lam > 0:
    phi(lam)(1/lam - 1/lam^3 + 3/lam^5 - 15/lam^7) <= Q(lam) <= phi(lam)/lam.
    The lower end may be negative for small lam; it is still a valid bound."""
    if not lam > 0:
        raise ValueError("lam must be positive")
    ph = normal_pdf(lam)
    lower = ph * (1.0 / lam - lam ** -3 + 3.0 * lam ** -5 - 15.0 * lam ** -7)
    upper = ph / lam
    return lower, upper


def omega1_bound(mu: float, sigma: float, d: int, p: int) -> float:
    """Bound on E [ (1/(2 d sigma^2)) sum_{j<=d} (g_j_sorted - mu)_+^2 ] for
    scores whose tails are dominated by N(0, sigma^2):
    log(1 + (2p/d) phi(mu/sigma) / (mu/sigma)^3)."""
    if not mu > 0:
        raise ValueError("mu must be positive")
    if not (1 <= d <= p):
        raise ValueError("need 1 <= d <= p")
    t = mu / sigma
    return math.log1p((2.0 * p / d) * normal_pdf(t) / t ** 3)


def omega1_mc_estimate(mu: float, sigma: float, d: int, p: int,
                       replicates: int = 10_000, seed: int = 0) -> float:
    """Monte-Carlo estimate of the statistic bounded by omega1_bound, over
    iid N(0, sigma^2) score vectors."""
    rng = keyed_rng(seed, 23)
    total = 0.0
    batch = max(1, min(replicates, 10_000_000 // max(p, 1)))
    done = 0
    while done < replicates:
        b = min(batch, replicates - done)
        g = sigma * rng.standard_normal((b, p))
        top = -np.sort(-np.abs(g), axis=1)[:, :d]
        stat = np.sum(np.maximum(top - mu, 0.0) ** 2, axis=1) / (2.0 * d * sigma ** 2)
        total += float(np.sum(stat))
        done += b
    return total / replicates


# ---------------------------------------------------------------------------
# Signed packings
# ---------------------------------------------------------------------------

class PackingBudgetError(RuntimeError):
    """The draw budget cannot realize the certified cardinality bound."""

    def __init__(self, message, achieved: int, required: int):
        super().__init__(message)
        self.achieved = achieved
        self.required = required


@dataclass(frozen=True)
class SignedPacking:
    """Weight-d sign vectors with pairwise separation and bounded energy.

    omega0 holds the unsigned supports (0/1 rows), omega the signed vectors
    (-1/0/1 rows). Every element has exactly d nonzeros, pairwise squared
    distance exceeds d, log cardinality meets (d/2) log(p/(5d)), and each
    ||X w||^2 / n is at most d times the maximal column energy.
    """

    omega0: np.ndarray
    omega: np.ndarray
    d: int
    log_card: float
    max_energy: float

    def verify(self, design: Optional[DesignMatrix] = None) -> None:
        """Exhaustively check the three construction invariants; raises
        AssertionError on any violation."""
        W0 = self.omega0
        W = self.omega
        d = self.d
        p = W0.shape[1]
        assert np.all(np.sum(W0 != 0, axis=1) == d), "weight violated in omega0"
        assert np.all(np.sum(W != 0, axis=1) == d), "weight violated in omega"
        assert np.array_equal(np.abs(W).astype(np.uint8), W0), "omega supports differ from omega0"
        M = W0.shape[0]
        for i in range(M):
            overlaps = W0[i + 1:] @ W0[i]
            assert overlaps.size == 0 or np.max(overlaps) < d / 2.0, \
                "pairwise separation violated in omega0"
            dist_signed = np.sum((W[i + 1:] - W[i]) ** 2, axis=1)
            assert dist_signed.size == 0 or np.min(dist_signed) > d, \
                "pairwise separation violated in omega"
        assert math.log(M) >= (d / 2.0) * math.log(p / (5.0 * d)) - 1e-12, \
            "cardinality bound violated"
        if design is not None:
            X = design.entries
            n = X.shape[0]
            cap = d * float(np.max(np.sum(X * X, axis=0))) / n
            energies = np.sum((X @ W.T.astype(np.float64)) ** 2, axis=0) / n
            assert float(np.max(energies)) <= cap * (1.0 + 1e-12), "energy bound violated"
            assert abs(float(np.max(energies)) - self.max_energy) <= 1e-9 * max(1.0, cap)


def _derandomized_signs(X: np.ndarray, support: np.ndarray) -> np.ndarray:
    """Assign signs over the support one coordinate at a time, each chosen so
    the running combination's energy does not exceed its mean over random
    signs; guarantees ||X w||^2 <= sum of column energies."""
    combo = np.zeros(X.shape[0])
    signs = np.zeros(support.size)
    for t, j in enumerate(support):
        col = X[:, j]
        cross = float(col @ combo)
        sgn = -1.0 if cross > 0 else 1.0
        signs[t] = sgn
        combo += sgn * col
    return signs


def vg_signed_packing(design: DesignMatrix, d: int, seed: int = 0,
                      draw_budget: int = 1_000_000) -> SignedPacking:
    """Randomized greedy construction of a signed packing.

    Weight-d supports are drawn uniformly and kept when their overlap with
    every kept support stays below d/2 (squared distance > d), until the
    cardinality target ceil(exp((d/2) log(p/(5d)))) is met. Since each draw
    adds at most one element, a target beyond the draw budget is
    unreachable and raises PackingBudgetError immediately.

    Signs are then fixed per support by conditional-expectation
    derandomization, which guarantees the energy bound deterministically.
    """
    X = design.entries
    n, p = X.shape
    if not (1 <= d and d <= p / 5.0):
        raise ValueError(f"packing weight must satisfy 1 <= d <= p/5 = {p / 5.0:g}")
    log_target = (d / 2.0) * math.log(p / (5.0 * d))
    required = int(math.floor(math.exp(log_target)))
    if required < 1 or math.log(required) < log_target - 1e-12:
        required += 1
    if required > draw_budget:
        raise PackingBudgetError(
            f"cardinality target {required} (= exp((d/2) log(p/(5d))) at p={p}, d={d}) "
            f"exceeds the draw budget {draw_budget}; the greedy cannot certify the "
            f"bound since each draw adds at most one element", 0, required)

    rng = keyed_rng(seed, 29)
    kept = np.zeros((required, p), dtype=np.uint8)
    count = 0
    draws = 0
    half = d / 2.0
    while count < required:
        if draws >= draw_budget:
            raise PackingBudgetError(
                f"draw budget {draw_budget} exhausted with {count} of {required} "
                f"elements kept", count, required)
        draws += 1
        supp = rng.choice(p, size=d, replace=False)
        row = np.zeros(p, dtype=np.uint8)
        row[supp] = 1
        if count:
            overlaps = kept[:count] @ row
            if np.max(overlaps) >= half:
                continue
        kept[count] = row
        count += 1

    omega0 = kept[:count]
    omega = np.zeros((count, p), dtype=np.int8)
    col_energy = np.sum(X * X, axis=0) / n
    max_energy = 0.0
    for i in range(count):
        supp = np.flatnonzero(omega0[i])
        signs = _derandomized_signs(X, supp)
        omega[i, supp] = signs.astype(np.int8)
        e = float(np.sum((X @ omega[i].astype(np.float64)) ** 2)) / n
        max_energy = max(max_energy, e)
    return SignedPacking(omega0=omega0, omega=omega, d=d,
                         log_card=math.log(count), max_energy=max_energy)


@dataclass(frozen=True)
class SudakovBounds:
    """Expected-supremum lower bounds induced by a packing, plus the penalty
    threshold below which the packing forces risk at least lam sqrt(d)."""

    bound_from_cardinality: float
    bound_from_dimensions: float
    lambda_threshold: float


def sudakov_lower(packing: SignedPacking, design: DesignMatrix, sigma: float,
                  delta_2d: float) -> SudakovBounds:
    """Evaluate (sigma/2)(1-delta) sqrt(log |Omega|), its closed-form
    relaxation (sigma/4)(1-delta) sqrt(d log(p/(5d))), and the implied
    penalty threshold (sigma(1-delta)/8) sqrt(log(p/(5d)))."""
    p = design.p
    d = packing.d
    b1 = 0.5 * sigma * (1.0 - delta_2d) * math.sqrt(packing.log_card)
    b2 = 0.25 * sigma * (1.0 - delta_2d) * math.sqrt(d * math.log(p / (5.0 * d)))
    thr = sigma * (1.0 - delta_2d) / 8.0 * math.sqrt(math.log(p / (5.0 * d)))
    return SudakovBounds(bound_from_cardinality=b1, bound_from_dimensions=b2,
                         lambda_threshold=thr)


# ---------------------------------------------------------------------------
# Beta-min shrinkage experiment
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class BetaMinReport:
    """Outcome rates of the shrinkage experiment for separated coefficients.

    nu is 2 max(gamma, ||X s||/sqrt(nk) - 1) averaged over replicates;
    event_rate is the fraction of replicates where
    lam sqrt(k) (1 + nu/2)(1 - sqrt(nu)) <= risk held; shift_ratio is the
    mean of ||X(beta_hat - beta_star + (lam/sqrt n) s)||^2 / risk^2.
    """

    nu: float
    event_rate: float
    shift_ratio: float
    shift_bound_rate: float
    replicates: int


def betamin_experiment(design: DesignMatrix, k: int, lam: float, gamma: float,
                       replicates: int, seed: int = 0, sigma: float = 1.0,
                       amplitude: float = 10.0, tol: float = 1e-8) -> BetaMinReport:
    """Run the shrinkage experiment: targets with all nonzero entries equal
    to amplitude * lam / sqrt(n) on a random size-k support.

    Per replicate the penalized problem is solved, the lower-bound event
    lam sqrt(k)(1 + nu/2)(1 - sqrt(nu)) <= risk is recorded, and the shift
    ratio is compared against 40 sqrt(nu) when nu is in (0, 1/2).
    """
    if amplitude < 1.0:
        raise ValueError("amplitude factor must be >= 1 to separate coefficients")
    X = design.entries
    n, p = X.shape
    rn = math.sqrt(n)
    nus, events, shifts, shift_ok = [], [], [], []
    for r in range(replicates):
        rng = keyed_rng(seed, 31, r)
        supp = np.sort(rng.choice(p, size=k, replace=False))
        beta_star = np.zeros(p)
        beta_star[supp] = amplitude * lam / rn
        s_vec = np.zeros(p)
        s_vec[supp] = 1.0
        psi_s = float(np.linalg.norm(X @ s_vec) / math.sqrt(n * k)) if k else 0.0
        nu = 2.0 * max(gamma, psi_s - 1.0)
        eps = sigma * rng.standard_normal(n) if sigma > 0 else np.zeros(n)
        y = X @ beta_star + eps
        res = lasso_solve((X, y), PenaltySpec("l1", lam), tol=tol, beta_star=beta_star)
        risk = float(res.risk)
        if lam > 0:
            bound = lam * math.sqrt(k) * (1.0 + nu / 2.0) * (1.0 - math.sqrt(nu))
            events.append(bound <= risk + 1e-12)
            shift = float(np.linalg.norm(X @ (res.beta_hat - beta_star + (lam / rn) * s_vec))) ** 2
            ratio = shift / risk ** 2 if risk > 0 else 0.0
            shifts.append(ratio)
            if 0.0 < nu < 0.5:
                shift_ok.append(ratio <= 40.0 * math.sqrt(nu) + 1e-9)
        nus.append(nu)
    return BetaMinReport(
        nu=float(np.mean(nus)) if nus else 0.0,
        event_rate=float(np.mean(events)) if events else 0.0,
        shift_ratio=float(np.mean(shifts)) if shifts else 0.0,
        shift_bound_rate=float(np.mean(shift_ok)) if shift_ok else 1.0,
        replicates=replicates)
