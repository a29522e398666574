# Closed-form tuning-parameter family for the l1 penalty.
#
# The central object is the critical level
#
#     L0(x) = sigma * sqrt(2 log x - 5 log log x - log(4 pi)),   x = p/k,
#
# the minimal-penalty threshold for k-sparse targets, together with its
# perturbations L_f / mu_f, the remainder factor entering the upper bounds,
# and the sparsity bracketing pair used to probe the phase transition.

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Optional

LOG_4PI = math.log(4.0 * math.pi)
LOG_8PI = math.log(8.0 * math.pi)

KINDS = ("L0", "Lf", "mu_f", "universal", "universal_pk")


class BelowCriticalRange(ValueError):
    """The closed form is undefined at this p/k (negative radicand).

    ``min_ratio`` is the numerically determined smallest ratio p/k at which
    the requested level becomes well defined.
    """

    def __init__(self, message, min_ratio):
        super().__init__(message)
        self.min_ratio = min_ratio


def f_zero(x: float) -> float:
    return 0.0


def f_sqrt_loglog(x: float) -> float:
    """Slowly growing perturbation sqrt(log log x); admissible for large x."""
    return math.sqrt(math.log(math.log(x)))


def _loglog(x: float) -> float:
    if x <= 1.0:
        raise ValueError("ratio must exceed 1")
    return math.log(math.log(x))


def _radicand_lf(x: float, f: Callable[[float], float]) -> float:
    return 2.0 * math.log(x) - 5.0 * _loglog(x) - LOG_4PI + 2.0 * f(x)


def _radicand_mu(x: float, f: Callable[[float], float]) -> float:
    return 2.0 * math.log(x) - 5.0 * _loglog(x) - LOG_8PI + 2.0 * f(x)


def _min_valid_ratio(radicand: Callable[[float], float]) -> float:
    """Largest root of the radicand, i.e. the boundary of the validity range.

    The base radicand is negative on an interval of moderate ratios and
    increasing beyond it; we locate the upper sign change by log-grid scan
    plus bisection.
    """
    lo = None
    x = 1.0 + 1e-9
    grid = [x * (1.25 ** i) for i in range(140)]  # covers up to ~ 3e13
    last_neg = None
    for g in grid:
        try:
            v = radicand(g)
        except ValueError:
            continue
        if v <= 0.0:
            last_neg = g
    if last_neg is None:
        return 1.0
    a, b = last_neg, last_neg * 1.25
    for _ in range(200):
        m = math.sqrt(a * b)
        if radicand(m) <= 0.0:
            a = m
        else:
            b = m
    return b


@dataclass(frozen=True)
class TuningLevel:
    """A tuning level in noise-level units, with the ratio it was built from."""

    value: float
    kind: str
    x: float
    f_at_x: float
    sigma: float

    def mu_gap(self) -> tuple:
        """For kinds L0/Lf: the exact gap to the companion level mu_f and its
        closed-form lower bound sigma^2 log(2) / (2 value).

        The companion differs only by log(8 pi) in place of log(4 pi), so
        value^2 - mu^2 = sigma^2 log 2 and the gap is that divided by the sum.
        """
        if self.kind not in ("L0", "Lf"):
            raise ValueError("mu gap is defined for the L0/Lf kinds only")
        mu_sq = self.value ** 2 - self.sigma ** 2 * math.log(2.0)
        if mu_sq <= 0.0:
            raise BelowCriticalRange(
                f"companion level undefined at ratio {self.x:g}", None)
        mu = math.sqrt(mu_sq)
        gap = (self.value ** 2 - mu_sq) / (self.value + mu)
        bound = self.sigma ** 2 * math.log(2.0) / (2.0 * self.value)
        return gap, bound


def tuning_level(sigma: float, p: int, k: int, kind: str = "L0",
                 f: Optional[Callable[[float], float]] = None) -> TuningLevel:
    """Evaluate one member of the tuning-level family.

    kind "L0" is the critical level at ratio x = p/k; "Lf" and "mu_f" are its
    perturbations by a non-decreasing f subject to
    0 <= 2 f(x) <= log(4 pi) + 5 log log x (validated at x); "universal" is
    sigma sqrt(2 log p) and "universal_pk" is sigma sqrt(2 log(p/k)).

    Raises BelowCriticalRange when the radicand is not positive, carrying the
    minimal valid ratio rather than clamping.
    """
    if kind not in KINDS:
        raise ValueError(f"unknown tuning kind {kind!r}")
    if not (sigma > 0 and p >= 1 and 1 <= k <= p):
        raise ValueError("need sigma > 0 and 1 <= k <= p")
    x = p / k
    if kind == "universal":
        if p < 2:
            raise ValueError("universal level needs p >= 2")
        return TuningLevel(sigma * math.sqrt(2.0 * math.log(p)), kind, x, 0.0, sigma)
    if kind == "universal_pk":
        if x <= 1.0:
            raise ValueError("universal_pk level needs p/k > 1")
        return TuningLevel(sigma * math.sqrt(2.0 * math.log(x)), kind, x, 0.0, sigma)

    if kind == "L0":
        f = f_zero
    if f is None:
        raise ValueError("kinds Lf and mu_f require the perturbation f")
    if x <= 1.0:
        raise BelowCriticalRange(
            f"ratio p/k = {x:g} is not above 1", _min_valid_ratio(lambda t: _radicand_lf(t, f)))
    fx = f(x)
    if kind in ("Lf", "mu_f") and not (0.0 <= 2.0 * fx <= LOG_4PI + 5.0 * _loglog(x)):
        raise ValueError(
            f"f violates its admissible band at x={x:g}: 2f(x)={2*fx:g} not in "
            f"[0, {LOG_4PI + 5.0 * _loglog(x):g}]")
    radicand = _radicand_lf(x, f) if kind in ("L0", "Lf") else _radicand_mu(x, f)
    if radicand <= 0.0:
        rad_fn = (lambda t: _radicand_lf(t, f)) if kind in ("L0", "Lf") \
            else (lambda t: _radicand_mu(t, f))
        min_ratio = _min_valid_ratio(rad_fn)
        raise BelowCriticalRange(
            f"{kind} level undefined at p/k = {x:g} (radicand {radicand:g}); "
            f"smallest valid ratio is about {min_ratio:g}", min_ratio)
    return TuningLevel(sigma * math.sqrt(radicand), kind, x, fx, sigma)


def normal_pdf(u: float) -> float:
    return math.exp(-0.5 * u * u) / math.sqrt(2.0 * math.pi)


def eta(x: float) -> float:
    """(sqrt(2 log x) / mu_0(x))^5, the prefactor of the tail term in the
    remainder bound at the critical level."""
    mu0_sq = _radicand_mu(x, f_zero)
    if mu0_sq <= 0.0:
        raise BelowCriticalRange(f"mu_0 undefined at ratio {x:g}",
                                 _min_valid_ratio(lambda t: _radicand_mu(t, f_zero)))
    return (2.0 * math.log(x) / mu0_sq) ** 2.5


@dataclass(frozen=True)
class RemainderTerm:
    """Remainder factor sqrt(1 + sigma^2/lam^2 + tail) with its components."""

    rem: float
    components: tuple  # (1, sigma^2/lam^2, tail)

    def __post_init__(self):
        assert self.rem >= 1.0


def remainder(lam: float, mu: float, sigma: float, p: int, k: int) -> RemainderTerm:
    """Remainder factor at levels lam >= mu > 0.

    The tail component is (4 p / k) * phi(mu/sigma) * sigma^5 / (lam^2 mu^3)
    with phi the standard normal density. lam < mu is rejected; lam == mu is
    the variant entering the non-asymptotic upper bound.
    """
    if not (mu > 0 and lam >= mu):
        raise ValueError("remainder requires lam >= mu > 0")
    if not (sigma > 0 and p >= 1 and 1 <= k <= p):
        raise ValueError("need sigma > 0 and 1 <= k <= p")
    c1 = 1.0
    c2 = sigma ** 2 / lam ** 2
    c3 = (4.0 * p / k) * normal_pdf(mu / sigma) * sigma ** 5 / (lam ** 2 * mu ** 3)
    return RemainderTerm(rem=math.sqrt(c1 + c2 + c3), components=(c1, c2, c3))


@dataclass(frozen=True)
class SparsityBracket:
    """Sparsity pair k_plus = k/zeta, k_minus = k*zeta with zeta in (0,1)."""

    k: int
    zeta: float
    k_plus: int
    k_minus: int

    def __post_init__(self):
        assert self.k_minus <= self.k <= self.k_plus


def sparsity_bracket(p: int, k: int, zeta: Optional[float] = None) -> SparsityBracket:
    """Bracketing sparsities around k; default zeta = 1 / log log(p/k).

    Requires zeta in (0,1) (log log(p/k) > 1 for the default choice).
    k_plus and k_minus are rounded to the nearest integer, floored at 1.
    """
    if not (1 <= k <= p):
        raise ValueError("need 1 <= k <= p")
    x = p / k
    if zeta is None:
        if x <= math.exp(math.e):
            raise ValueError("default zeta needs log log(p/k) > 1, i.e. p/k > e^e")
        zeta = 1.0 / _loglog(x)
    if not (0.0 < zeta < 1.0):
        raise ValueError(f"zeta = {zeta:g} is outside (0, 1)")
    k_plus = max(1, int(round(k / zeta)))
    k_minus = max(1, int(round(k * zeta)))
    return SparsityBracket(k=k, zeta=zeta, k_plus=k_plus, k_minus=k_minus)
