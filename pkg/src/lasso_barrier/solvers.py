# Penalized least-squares solver for the l1 penalty, with KKT certification.
#
# The objective solved throughout is
#
#     f(beta) = ||X beta - y||^2 + 2 sqrt(n) lam ||beta||_1,
#
# i.e. the penalty level lam is quoted in the same units as the noise level
# sigma; the sqrt(n) scaling is applied internally.

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Union

import numpy as np
from numba import njit

from .model import DesignMatrix, RegressionInstance


class SolverNonConvergence(RuntimeError):
    """Sweep cap exceeded; carries the last iterate and its KKT residual."""

    def __init__(self, message, beta, kkt_residual, iterations):
        super().__init__(message)
        self.beta = beta
        self.kkt_residual = kkt_residual
        self.iterations = iterations


@dataclass(frozen=True)
class PenaltySpec:
    """Seminorm descriptor: kind "l1" or "nuclear" with level lam >= 0.

    The effective weight applied inside solvers is sqrt(n) * lam.
    """

    kind: str = "l1"
    lam: float = 1.0

    def __post_init__(self):
        if self.kind not in ("l1", "nuclear"):
            raise ValueError(f"unknown penalty kind {self.kind!r}")
        if not self.lam >= 0:
            raise ValueError("penalty level must be >= 0")


@dataclass
class SolveResult:
    beta_hat: np.ndarray
    fitted: np.ndarray
    risk: Optional[float]
    objective: float
    kkt_residual: float
    iterations: int
    objective_history: Optional[np.ndarray] = None


@njit(cache=True, nogil=True)
def _cd_sweep(XT, col_sq, r, beta, thresh, idx):
    """One pass of cyclic coordinate descent over the coordinates in idx.

    XT is the p x n transposed design (contiguous rows), r the residual
    y - X beta maintained in place. Returns the largest coordinate change.
    """
    max_delta = 0.0
    for t in range(idx.size):
        j = idx[t]
        cj = col_sq[j]
        if cj <= 0.0:
            continue
        bj = beta[j]
        rho = np.dot(XT[j], r) + cj * bj
        if rho > thresh:
            bnew = (rho - thresh) / cj
        elif rho < -thresh:
            bnew = (rho + thresh) / cj
        else:
            bnew = 0.0
        d = bnew - bj
        if d != 0.0:
            row = XT[j]
            for i in range(r.size):
                r[i] -= d * row[i]
            beta[j] = bnew
            if abs(d) > max_delta:
                max_delta = abs(d)
    return max_delta


def _kkt_residual_from_corr(corr, beta, thresh):
    """Max stationarity violation given corr = X'(y - X beta)."""
    active = beta != 0.0
    viol_inactive = np.maximum(np.abs(corr) - thresh, 0.0)
    viol = np.where(active, np.abs(corr - thresh * np.sign(beta)), viol_inactive)
    return float(np.max(viol)) if viol.size else 0.0


def kkt_certificate(X, y, beta_hat, lam: float) -> float:
    """Stationarity residual of beta_hat for the l1-penalized objective.

    Returns max_j of |X_j'(y - X beta) - sqrt(n) lam sign(beta_j)| on active
    coordinates and of (|X_j'(y - X beta)| - sqrt(n) lam)_+ on inactive ones.
    """
    X = np.asarray(X, dtype=np.float64)
    beta_hat = np.asarray(beta_hat, dtype=np.float64)
    corr = X.T @ (np.asarray(y, dtype=np.float64) - X @ beta_hat)
    return _kkt_residual_from_corr(corr, beta_hat, np.sqrt(X.shape[0]) * lam)


def lasso_solve(problem, penalty: Union[PenaltySpec, float], tol: float = 1e-8,
                max_iter: int = 100_000, beta_star=None, warm_start=None,
                track_objective: bool = False) -> SolveResult:
    """Solve the l1-penalized least squares problem by coordinate descent.

    ``problem`` is a RegressionInstance or an (X, y) pair. Cyclic sweeps
    alternate with active-set passes; termination requires the KKT
    stationarity residual (see :func:`kkt_certificate`) to drop to ``tol``
    after a full pass. Zero columns keep coefficient 0.

    Raises :class:`SolverNonConvergence` past ``max_iter`` sweeps.
    """
    if isinstance(problem, RegressionInstance):
        X = problem.design.entries
        y = problem.y
        if beta_star is None:
            beta_star = problem.beta_star
    else:
        X, y = problem
        X = np.asarray(X, dtype=np.float64)
        y = np.asarray(y, dtype=np.float64)
    if isinstance(penalty, PenaltySpec):
        if penalty.kind != "l1":
            raise ValueError("lasso_solve handles the l1 penalty only")
        lam = penalty.lam
    else:
        lam = float(penalty)
    if not tol > 0:
        raise ValueError("tol must be positive")
    if not lam >= 0:
        raise ValueError("lam must be >= 0")

    n, p = X.shape
    thresh = np.sqrt(n) * lam
    XT = np.ascontiguousarray(X.T)
    col_sq = np.sum(XT * XT, axis=1)

    beta = (np.zeros(p) if warm_start is None
            else np.array(warm_start, dtype=np.float64, copy=True))
    r = y - X @ beta if warm_start is not None else y.copy()
    history = [] if track_objective else None

    inner_break = 0.1 * tol / max(float(np.max(col_sq)), 1e-300)
    all_idx = np.arange(p, dtype=np.int64)
    sweeps = 0
    kkt = np.inf
    while sweeps < max_iter:
        # full pass, then KKT check
        _cd_sweep(XT, col_sq, r, beta, thresh, all_idx)
        sweeps += 1
        if track_objective:
            history.append(float(r @ r) + 2.0 * thresh * float(np.sum(np.abs(beta))))
        corr = XT @ r
        kkt = _kkt_residual_from_corr(corr, beta, thresh)
        if kkt <= tol:
            break
        # active-set passes until they stall
        for _ in range(9):
            if sweeps >= max_iter:
                break
            idx = np.flatnonzero(beta).astype(np.int64)
            if idx.size == 0:
                break
            delta = _cd_sweep(XT, col_sq, r, beta, thresh, idx)
            sweeps += 1
            if track_objective:
                history.append(float(r @ r) + 2.0 * thresh * float(np.sum(np.abs(beta))))
            if delta <= inner_break:
                break
    else:
        raise SolverNonConvergence(
            f"coordinate descent did not reach tol={tol:g} within {max_iter} sweeps "
            f"(KKT residual {kkt:g})", beta, kkt, sweeps)

    fitted = X @ beta
    objective = float(np.sum((fitted - y) ** 2)) + 2.0 * thresh * float(np.sum(np.abs(beta)))
    risk = None
    if beta_star is not None:
        risk = float(np.linalg.norm(X @ (beta - np.asarray(beta_star, dtype=np.float64))))
    return SolveResult(
        beta_hat=beta, fitted=fitted, risk=risk, objective=objective,
        kkt_residual=kkt, iterations=sweeps,
        objective_history=np.array(history) if track_objective else None)


def prediction_error(design: Union[DesignMatrix, np.ndarray], beta_hat, beta_star) -> float:
    """||X (beta_hat - beta_star)||."""
    X = design.entries if isinstance(design, DesignMatrix) else np.asarray(design)
    d = np.asarray(beta_hat, dtype=np.float64) - np.asarray(beta_star, dtype=np.float64)
    return float(np.linalg.norm(X @ d))
