"""Dense linear algebra primitives and deterministic random generation.

Everything downstream (network init, dropout, splits, the kernel-regression
solve) funnels through this module so that numeric behaviour is pinned in
one place. All reals are float64. The random generator is a thin wrapper
over numpy's Philox bit generator (counter-based), chosen over the platform
default so that identical seeds give identical streams on every platform.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg

# Pivot threshold below which the normal-equations solve is declared
# rank-deficient, and the fixed ridge added in that case.
PIVOT_TOL = 1e-12
FALLBACK_RIDGE = 1e-10

_SPLITMIX_GAMMA = 0x9E3779B97F4A7C15
_MASK64 = 0xFFFFFFFFFFFFFFFF


def _splitmix64(state: int) -> int:
    z = (state + _SPLITMIX_GAMMA) & _MASK64
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK64
    return z ^ (z >> 31)


def derive_seed(seed: int, *indices: int) -> int:
    """Deterministically derive a child seed from a parent seed and indices.

    Used to fork independent streams (per fold, per grid point, per epoch)
    without sharing mutable generator state across tasks.
    """
    state = seed & _MASK64
    for ix in indices:
        state = _splitmix64(state ^ ((ix + 1) * _SPLITMIX_GAMMA & _MASK64))
    return state


class Rng:
    """Deterministic random source. Single-owner: fork with ``derive``."""

    def __init__(self, seed: int):
        self.seed = seed & _MASK64
        self._gen = np.random.Generator(np.random.Philox(key=self.seed))

    def derive(self, *indices: int) -> "Rng":
        return Rng(derive_seed(self.seed, *indices))

    def uniform(self, low: float, high: float, size=None) -> np.ndarray:
        return self._gen.uniform(low, high, size)

    def normal(self, loc: float, scale: float, size=None) -> np.ndarray:
        return self._gen.normal(loc, scale, size)

    def permutation(self, n: int) -> np.ndarray:
        return self._gen.permutation(n)

    def integers(self, low: int, high: int, size=None) -> np.ndarray:
        return self._gen.integers(low, high, size=size)

    def gamma(self, shape: float, scale: float, size=None) -> np.ndarray:
        return self._gen.gamma(shape, scale, size)

    def exponential(self, scale: float, size=None) -> np.ndarray:
        return self._gen.exponential(scale, size)


def matmul(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Matrix product with explicit shape validation."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.ndim != 2 or b.ndim != 2:
        raise ValueError(f"matmul expects 2-D operands, got {a.shape} and {b.shape}")
    if a.shape[1] != b.shape[0]:
        raise ValueError(f"matmul dimension mismatch: {a.shape} x {b.shape}")
    return a @ b


@dataclass
class WlsResult:
    """Solution of a weighted least-squares problem.

    ``used_fallback_ridge`` flags systems that were rank-deficient at the
    requested ridge and were re-solved with ``FALLBACK_RIDGE`` added.
    """

    beta: np.ndarray
    used_fallback_ridge: bool


def solve_weighted_least_squares(
    x: np.ndarray, y: np.ndarray, w: np.ndarray, ridge: float = 0.0
) -> WlsResult:
    """Minimize sum_i w_i*(y_i - x_i.beta)^2 + ridge*||beta||^2.

    Normal equations with a symmetric positive-definite (Cholesky) solve;
    adequate for the small systems this artifact produces (p <= 18). When a
    Cholesky pivot falls below ``PIVOT_TOL`` the system is re-solved with
    ``FALLBACK_RIDGE`` added and flagged in the result.
    """
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64).ravel()
    w = np.asarray(w, dtype=np.float64).ravel()
    if x.ndim != 2:
        raise ValueError(f"design matrix must be 2-D, got shape {x.shape}")
    n, p = x.shape
    if n < 1:
        raise ValueError("need at least one observation")
    if y.shape[0] != n or w.shape[0] != n:
        raise ValueError(
            f"inconsistent lengths: x has {n} rows, y has {y.shape[0]}, w has {w.shape[0]}"
        )
    if not np.all(np.isfinite(w)) or np.any(w < 0):
        raise ValueError("weights must be finite and nonnegative")
    if not np.any(w > 0):
        raise ValueError("at least one weight must be positive")
    if ridge < 0:
        raise ValueError("ridge must be nonnegative")

    xw = x * w[:, None]
    a = x.T @ xw
    if ridge > 0:
        a = a + ridge * np.eye(p)
    b = xw.T @ y

    used_fallback = False
    try:
        chol = np.linalg.cholesky(a)
        if np.min(np.diag(chol)) ** 2 < PIVOT_TOL:
            raise np.linalg.LinAlgError("pivot below tolerance")
    except np.linalg.LinAlgError:
        used_fallback = True
        a = a + FALLBACK_RIDGE * np.eye(p)
        chol = np.linalg.cholesky(a)

    beta = scipy.linalg.cho_solve((chol, True), b)
    return WlsResult(beta=beta, used_fallback_ridge=used_fallback)


def xavier_uniform(fan_in: int, fan_out: int, rng: Rng) -> np.ndarray:
    """Glorot-uniform matrix of shape (fan_out, fan_in).

    Entries are i.i.d. uniform on [-L, L] with L = sqrt(6/(fan_in+fan_out)).
    """
    if fan_in < 1 or fan_out < 1:
        raise ValueError(f"fan_in and fan_out must be >= 1, got {fan_in}, {fan_out}")
    limit = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-limit, limit, (fan_out, fan_in))
