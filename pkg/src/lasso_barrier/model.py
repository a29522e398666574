# Data model and generators: design matrices, regression instances, noise,
# and the per-column correlation scores of the noise with the design.

from __future__ import annotations

import struct
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Sequence, Union

import numpy as np

from .rng import keyed_rng

SYM_TOL = 1e-12
PSD_TOL = -1e-10
COLNORM_TOL = 1e-12

_BINARY_MAGIC = b"LBLB1"


class DesignError(ValueError):
    """Invalid design specification or design data."""


@dataclass(frozen=True)
class DesignMatrix:
    """An n x p design together with its second-moment matrix.

    ``sigma_bar`` is the population covariance of the rows for sampled
    designs ("gaussian-rows") and the empirical Gram matrix X'X/n for
    deterministic designs, so restricted/sparse eigenvalue properties can be
    stated uniformly for both kinds.

    ``column_norm_ok`` caches whether max_j ||X e_j||^2 / n <= 1 holds, the
    column normalization under which the headline constants are calibrated.
    """

    entries: np.ndarray
    kind: str  # "deterministic" | "gaussian-rows"
    sigma_bar: np.ndarray
    column_norm_ok: bool = field(default=False)

    def __post_init__(self):
        X = np.asarray(self.entries, dtype=np.float64)
        if X.ndim != 2 or X.shape[0] < 1 or X.shape[1] < 1:
            raise DesignError(f"design must be a 2-d matrix with n,p >= 1, got shape {X.shape}")
        if self.kind not in ("deterministic", "gaussian-rows"):
            raise DesignError(f"unknown design kind {self.kind!r}")
        S = np.asarray(self.sigma_bar, dtype=np.float64)
        p = X.shape[1]
        if S.shape != (p, p):
            raise DesignError(f"sigma_bar must be {p}x{p}, got {S.shape}")
        if np.max(np.abs(S - S.T)) > SYM_TOL:
            raise DesignError("sigma_bar is not symmetric within 1e-12")
        eigmin = float(np.linalg.eigvalsh(S)[0])
        if eigmin < PSD_TOL:
            raise DesignError(f"sigma_bar is not PSD (min eigenvalue {eigmin:g})")
        X = np.ascontiguousarray(X)
        S = np.ascontiguousarray(S)
        X.setflags(write=False)
        S.setflags(write=False)
        object.__setattr__(self, "entries", X)
        object.__setattr__(self, "sigma_bar", S)
        norm_ok = bool(np.max(np.sum(X * X, axis=0)) / X.shape[0] <= 1.0 + COLNORM_TOL)
        object.__setattr__(self, "column_norm_ok", norm_ok)

    @property
    def n(self) -> int:
        return self.entries.shape[0]

    @property
    def p(self) -> int:
        return self.entries.shape[1]

    def column_energies(self) -> np.ndarray:
        """||X e_j||^2 / n for each column j."""
        X = self.entries
        return np.sum(X * X, axis=0) / X.shape[0]


@dataclass(frozen=True)
class RegressionInstance:
    """One fully specified regression problem y = X beta_star + epsilon."""

    design: DesignMatrix
    beta_star: np.ndarray
    support: frozenset
    k: int
    sigma: float
    epsilon: np.ndarray
    y: np.ndarray

    def __post_init__(self):
        n, p = self.design.n, self.design.p
        b = np.asarray(self.beta_star, dtype=np.float64)
        e = np.asarray(self.epsilon, dtype=np.float64)
        yv = np.asarray(self.y, dtype=np.float64)
        if b.shape != (p,):
            raise DesignError(f"beta_star must have length p={p}")
        if e.shape != (n,) or yv.shape != (n,):
            raise DesignError(f"epsilon and y must have length n={n}")
        if self.support != frozenset(np.flatnonzero(b).tolist()):
            raise DesignError("support does not match nonzeros of beta_star")
        if len(self.support) > self.k or self.k > p:
            raise DesignError("sparsity bound k must satisfy |support| <= k <= p")
        if not self.sigma > 0:
            raise DesignError("sigma must be positive")
        for arr, name in ((b, "beta_star"), (e, "epsilon"), (yv, "y")):
            arr = np.ascontiguousarray(arr)
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)


@dataclass(frozen=True)
class CorrelationScores:
    """Scores g_j = eps' X e_j / sqrt(n), plus their sorted magnitudes."""

    g: np.ndarray
    g_sorted_desc: np.ndarray


@dataclass(frozen=True)
class SignVector:
    """Sign pattern of a target vector and its design energy ratio.

    ``psi_s`` is ||X s|| / sqrt(n k) where k is the sparsity of s; it measures
    how much the design amplifies the sign direction relative to a column-
    normalized orthogonal design (where it equals 1).
    """

    s: np.ndarray
    psi_s: float


DesignSpec = Union[str, tuple]


def _normalize_spec(spec) -> tuple:
    """Canonicalize a design spec given as str, tuple, or JSON-style dict."""
    if isinstance(spec, dict):
        kind = spec.get("kind")
        if kind == "orthogonal":
            return ("orthogonal",)
        if kind == "equicorrelated":
            return ("equicorrelated", float(spec["rho"]))
        if kind in ("gaussian", "gaussian-rows"):
            sig = spec.get("sigma_cov")
            return ("gaussian", None if sig is None else np.asarray(sig, dtype=np.float64))
        if kind == "matrix":
            return ("matrix", np.asarray(spec["entries"], dtype=np.float64),
                    bool(spec.get("normalize", False)))
        raise DesignError(f"unknown design kind {kind!r}")
    if isinstance(spec, str):
        return (spec,)
    return tuple(spec)


def gen_design(n: int, p: int, spec: DesignSpec, seed: int = 0) -> DesignMatrix:
    """Generate a design matrix.

    Supported specs:

    - ``"orthogonal"``: deterministic design with X'X/n exactly the identity
      (requires n >= p).
    - ``("equicorrelated", rho)``: deterministic design with Gram matrix
      (1-rho) I + rho 11' (requires n >= p and rho in (-1/(p-1), 1)).
    - ``("gaussian", Sigma_or_None)``: rows sampled iid N(0, Sigma); Sigma
      defaults to the identity and must be PSD.
    - ``("matrix", X[, normalize])``: explicit entries; with normalize=True
      the matrix is rescaled so max_j ||X e_j||^2 / n == 1 exactly.
    """
    spec = _normalize_spec(spec)
    kind = spec[0]
    if kind == "orthogonal":
        if n < p:
            raise DesignError("orthogonal spec requires n >= p")
        rng = keyed_rng(seed, 0)
        A = rng.standard_normal((n, p))
        Q, _ = np.linalg.qr(A)
        X = Q[:, :p] * np.sqrt(n)
        return DesignMatrix(X, "deterministic", np.eye(p))
    if kind == "equicorrelated":
        rho = float(spec[1])
        lo = -1.0 / (p - 1) if p > 1 else -np.inf
        if not (lo < rho < 1.0):
            raise DesignError(f"equicorrelated rho must lie in ({lo:g}, 1)")
        if n < p:
            raise DesignError("equicorrelated spec requires n >= p")
        S = np.full((p, p), rho)
        np.fill_diagonal(S, 1.0)
        rng = keyed_rng(seed, 0)
        Q, _ = np.linalg.qr(rng.standard_normal((n, p)))
        w, V = np.linalg.eigh(S)
        root = (V * np.sqrt(np.maximum(w, 0.0))) @ V.T
        X = Q[:, :p] @ root * np.sqrt(n)
        return DesignMatrix(X, "deterministic", S)
    if kind == "gaussian":
        Sigma = spec[1] if len(spec) > 1 and spec[1] is not None else np.eye(p)
        Sigma = np.asarray(Sigma, dtype=np.float64)
        if Sigma.shape != (p, p):
            raise DesignError(f"covariance must be {p}x{p}")
        if np.max(np.abs(Sigma - Sigma.T)) > SYM_TOL:
            raise DesignError("covariance is not symmetric")
        eigmin = float(np.linalg.eigvalsh(Sigma)[0])
        if eigmin < PSD_TOL:
            raise DesignError(f"covariance is not PSD (min eigenvalue {eigmin:g})")
        try:
            L = np.linalg.cholesky(Sigma)
        except np.linalg.LinAlgError:
            # PSD but singular: use a symmetric square root instead
            w, V = np.linalg.eigh(Sigma)
            L = V * np.sqrt(np.maximum(w, 0.0))
        rng = keyed_rng(seed, 0)
        Z = rng.standard_normal((n, p))
        X = Z @ L.T
        return DesignMatrix(X, "gaussian-rows", Sigma)
    if kind == "matrix":
        X = np.array(spec[1], dtype=np.float64, copy=True)
        if X.shape != (n, p):
            raise DesignError(f"explicit matrix must have shape ({n},{p}), got {X.shape}")
        normalize = bool(spec[2]) if len(spec) > 2 else False
        if normalize:
            max_sq = float(np.max(np.sum(X * X, axis=0)))
            if max_sq <= 0:
                raise DesignError("cannot normalize an all-zero matrix")
            X *= np.sqrt(n / max_sq)
        return DesignMatrix(X, "deterministic", X.T @ X / n)
    raise DesignError(f"unknown design spec {spec!r}")


def sample_instance(design: DesignMatrix, beta_star, sigma: float = 1.0,
                    noise_spec="gaussian", seed: int = 0,
                    k: Optional[int] = None) -> RegressionInstance:
    """Assemble a RegressionInstance with y = X beta_star + epsilon.

    ``noise_spec`` is "gaussian" (epsilon ~ N(0, sigma^2 I), seeded) or
    ``("fixed", eps)`` for a given noise vector; in the fixed case sigma is
    recomputed as ||eps|| / sqrt(n).
    """
    X = design.entries
    n, p = X.shape
    b = np.asarray(beta_star, dtype=np.float64)
    if b.shape != (p,):
        raise DesignError(f"beta_star must have length p={p}, got {b.shape}")
    if isinstance(noise_spec, str) and noise_spec == "gaussian":
        if not sigma > 0:
            raise DesignError("gaussian noise requires sigma > 0")
        eps = sigma * keyed_rng(seed, 1).standard_normal(n)
    else:
        tag, eps = noise_spec[0], np.asarray(noise_spec[1], dtype=np.float64)
        if tag != "fixed":
            raise DesignError(f"unknown noise spec {noise_spec!r}")
        if eps.shape != (n,):
            raise DesignError(f"fixed noise must have length n={n}")
        sigma = float(np.linalg.norm(eps) / np.sqrt(n))
        if sigma == 0.0:
            # noiseless instances keep a positive nominal sigma for bookkeeping
            sigma = 1.0
    support = frozenset(np.flatnonzero(b).tolist())
    kk = len(support) if k is None else int(k)
    y = X @ b + eps
    return RegressionInstance(design, b, support, kk, float(sigma), eps, y)


def correlation_scores(instance: RegressionInstance) -> CorrelationScores:
    """Compute g_j = eps' X e_j / sqrt(n) and the sorted magnitudes."""
    X = instance.design.entries
    g = X.T @ instance.epsilon / np.sqrt(X.shape[0])
    srt = np.sort(np.abs(g))[::-1]
    return CorrelationScores(g=g, g_sorted_desc=srt)


def sign_vector(instance: RegressionInstance) -> SignVector:
    """Sign pattern of beta_star with its design energy ratio psi_s."""
    s = np.sign(instance.beta_star)
    k = int(np.count_nonzero(s))
    if k == 0:
        return SignVector(s=s, psi_s=0.0)
    X = instance.design.entries
    psi = float(np.linalg.norm(X @ s) / np.sqrt(X.shape[0] * k))
    return SignVector(s=s, psi_s=psi)


# ---------------------------------------------------------------------------
# Design matrix persistence: header-free CSV and a compact binary format.
# ---------------------------------------------------------------------------

def save_design_csv(path, X) -> None:
    X = np.asarray(X, dtype=np.float64)
    lines = [",".join(format(v, ".17g") for v in row) for row in X]
    Path(path).write_text("\n".join(lines) + "\n")


def load_design_csv(path) -> np.ndarray:
    X = np.loadtxt(path, delimiter=",", dtype=np.float64, ndmin=2)
    return X


def save_design_binary(path, X) -> None:
    """Binary layout: magic "LBLB1", little-endian u64 dims (n, p), then
    row-major little-endian float64 entries."""
    X = np.ascontiguousarray(X, dtype="<f8")
    n, p = X.shape
    with open(path, "wb") as fh:
        fh.write(_BINARY_MAGIC)
        fh.write(struct.pack("<QQ", n, p))
        fh.write(X.tobytes())


def load_design_binary(path) -> np.ndarray:
    raw = Path(path).read_bytes()
    if raw[:5] != _BINARY_MAGIC:
        raise DesignError(f"{path}: bad magic, not a design binary")
    n, p = struct.unpack("<QQ", raw[5:21])
    data = np.frombuffer(raw[21:], dtype="<f8", count=n * p)
    return data.reshape(n, p).astype(np.float64)


def load_design(path) -> np.ndarray:
    """Load a design from CSV or binary, detected by the magic prefix."""
    with open(path, "rb") as fh:
        head = fh.read(5)
    if head == _BINARY_MAGIC:
        return load_design_binary(path)
    return load_design_csv(path)
