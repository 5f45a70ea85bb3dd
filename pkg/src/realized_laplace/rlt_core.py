"""Realized Laplace transform statistics and their asymptotic variances.

For a path observed every ``delta_n`` the realized Laplace transform is

    V_T(u) = sum_i delta_n cos((2u)^{1/beta} delta_n^{-1/beta} dX_i)

and L_hat(u) = V_T(u) / T estimates E exp(-u |sigma_t|^beta). Variance outputs
carry a ``scale`` tag: ``"V"`` for the V_T scale and ``"L"`` for the
per-unit-time (L_hat) scale.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import Literal

import numpy as np

from .errors import InputError, ParameterError
from .levy_sim import PathGrid

__all__ = [
    "RLTCurve",
    "BlockStats",
    "HACResult",
    "VarianceEstimate",
    "rlt",
    "rlt_differenced",
    "empirical_laplace",
    "f_beta",
    "f_beta_tilde",
    "g_beta",
    "fixed_span_variance",
    "block_stats",
    "default_lag_count",
    "kernel_weights",
    "hac_covariance",
    "g_hat",
    "activity_correction_se",
]

# cap on (n_u x n_increments) cells evaluated at once
_CHUNK_CELLS = 4_000_000


@dataclass
class RLTCurve:
    u_grid: np.ndarray
    values: np.ndarray
    beta_used: float
    t_span: float
    delta_n: float
    differenced: bool = False
    meta: dict = field(default_factory=dict)

    def to_rows(self, se=None):
        se = [None] * len(self.u_grid) if se is None else list(se)
        return [(float(u), float(v), s) for u, v, s in zip(self.u_grid, self.values, se)]


@dataclass
class BlockStats:
    """Per-unit-interval RLT pieces Z_hat[t, k] for t = 1..floor(T) and u_grid[k]."""

    z_matrix: np.ndarray
    l_hat: np.ndarray
    u_grid: np.ndarray
    beta_used: float
    delta_n: float
    remainder: np.ndarray

    @property
    def n_blocks(self) -> int:
        return self.z_matrix.shape[0]


@dataclass
class HACResult:
    sigma: np.ndarray
    kernel: str
    lag_count: int
    u_grid: np.ndarray
    n_blocks: int

    def se(self, t_span: float | None = None) -> np.ndarray:
        """Asymptotic standard errors of L_hat on the grid (diag(Sigma) / T)."""
        t = self.n_blocks if t_span is None else t_span
        return np.sqrt(np.clip(np.diag(self.sigma), 0.0, None) / t)


@dataclass
class VarianceEstimate:
    value: float
    scale: Literal["V", "L"]


def _check_beta(beta: float) -> None:
    if not (1.0 < beta <= 2.0):
        raise ParameterError(f"beta must lie in (1, 2], got {beta}")


def _as_grid(u) -> np.ndarray:
    u = np.atleast_1d(np.asarray(u, dtype=float))
    if u.ndim != 1 or np.any(u < 0) or not np.all(np.isfinite(u)):
        raise ParameterError("u values must be finite and non-negative")
    return u


def _scale_factors(u: np.ndarray, beta: float, delta_n: float, pre: float) -> np.ndarray:
    # (pre * u)^{1/beta} delta_n^{-1/beta}, in log space
    out = np.zeros_like(u)
    pos = u > 0
    out[pos] = np.exp((np.log(pre * u[pos]) - np.log(delta_n)) / beta)
    return out


def _cos_sums(x: np.ndarray, factors: np.ndarray, weights_fn=np.cos) -> np.ndarray:
    """sum_i f(factor_k * x_i) for every k, chunked over k."""
    out = np.empty(factors.size)
    step = max(1, _CHUNK_CELLS // max(x.size, 1))
    for lo in range(0, factors.size, step):
        f = factors[lo : lo + step]
        out[lo : lo + step] = weights_fn(np.outer(f, x)).sum(axis=1)
    return out


def _check_path(path: PathGrid, min_obs: int) -> None:
    if path.values.size < min_obs:
        raise InputError(f"need at least {min_obs} observations, got {path.values.size}")


def rlt(path: PathGrid, beta: float, u):
    """V_T(X, delta_n, beta, u). Scalar ``u`` gives a float, arrays give arrays."""
    _check_beta(beta)
    _check_path(path, 2)
    grid = _as_grid(u)
    dx = path.increments
    if grid.size == 1:
        fac = _scale_factors(grid, beta, path.delta_n, 2.0)[0]
        val = path.delta_n * math.fsum(np.cos(fac * dx))
        return val if np.ndim(u) == 0 else np.array([val])
    return path.delta_n * _cos_sums(dx, _scale_factors(grid, beta, path.delta_n, 2.0))


def rlt_differenced(path: PathGrid, beta: float, u):
    """Drift-robust variant on second differences dX_i - dX_{i-1}.

    The scale factor is u^{1/beta} rather than (2u)^{1/beta}: the difference
    of two independent stable increments already doubles the scale.
    """
    _check_beta(beta)
    _check_path(path, 3)
    grid = _as_grid(u)
    ddx = np.diff(path.increments)
    if grid.size == 1:
        fac = _scale_factors(grid, beta, path.delta_n, 1.0)[0]
        val = path.delta_n * math.fsum(np.cos(fac * ddx))
        return val if np.ndim(u) == 0 else np.array([val])
    return path.delta_n * _cos_sums(ddx, _scale_factors(grid, beta, path.delta_n, 1.0))


def empirical_laplace(path: PathGrid, beta: float, u_grid, differenced: bool = False) -> RLTCurve:
    grid = _as_grid(u_grid)
    if np.any(np.diff(grid) <= 0):
        raise ParameterError("u_grid must be strictly ascending")
    fn = rlt_differenced if differenced else rlt
    vals = np.atleast_1d(fn(path, beta, grid)) / path.t_span
    return RLTCurve(grid, vals, float(beta), path.t_span, path.delta_n, differenced)


def f_beta(x, beta: float):
    """Infill variance function (e^{-2^{beta-1} x^beta} - 2 e^{-x^beta} + 1) / 2."""
    xb = np.asarray(x, dtype=float) ** beta
    return (np.exp(-(2.0 ** (beta - 1.0)) * xb) - 2.0 * np.exp(-xb) + 1.0) / 2.0


def f_beta_tilde(x, beta: float):
    """Infill variance function of the differenced statistic."""
    xb = np.asarray(x, dtype=float) ** beta
    a = np.exp(-(2.0 ** (beta - 1.0)) * xb)
    e1 = np.exp(-xb)
    return ((a + 1.0) / 2.0) ** 2 + 2.0 * e1 * (a + 1.0) / 2.0 - 3.0 * np.exp(-2.0 * xb) + ((a - 1.0) / 2.0) ** 2


def g_beta(x, beta: float):
    """beta x^beta e^{-x^beta}."""
    xb = np.asarray(x, dtype=float) ** beta
    return beta * xb * np.exp(-xb)


def fixed_span_variance(
    path: PathGrid,
    beta: float,
    u: float,
    scale: Literal["V", "L"] = "L",
    doubled: bool = False,
) -> VarianceEstimate:
    """Plug-in estimate of the infill variance integral of F_beta.

    On the ``"V"`` scale this is (V_T(2^{beta-1}u) - 2 V_T(u) + T) / 2, an
    estimate of int_0^T F_beta(u^{1/beta} |sigma_s|) ds; ``"L"`` divides by T.

    ``doubled=True`` evaluates the same expression at 2u, which targets
    F_beta((2u)^{1/beta} |sigma_s|), the exact variance of a single cosine
    term cos((2u)^{1/beta} delta_n^{-1/beta} dX_i) under local stability.
    """
    if scale not in ("V", "L"):
        raise ParameterError("scale must be 'V' or 'L'")
    if u < 0:
        raise ParameterError("u must be non-negative")
    t = path.t_span
    uu = 2.0 * u if doubled else u
    v = rlt(path, beta, np.array([2.0 ** (beta - 1.0) * uu, uu]))
    # rlt(u=0) is delta_n * N = T, so u=0 returns exactly 0
    raw = (v[0] - 2.0 * v[1] + path.delta_n * path.n_increments) / 2.0
    return VarianceEstimate(raw if scale == "V" else raw / t, scale)


def _block_bounds(path: PathGrid) -> np.ndarray:
    n_blocks = int(np.floor(path.t_span + 1e-9))
    t = np.arange(n_blocks + 1)
    return np.minimum(np.floor(t / path.delta_n + 1e-9).astype(int), path.n_increments)


def block_stats(path: PathGrid, beta: float, u_grid) -> BlockStats:
    """Z_hat_t(u) = V_t(u) - V_{t-1}(u) on whole unit intervals.

    Increments after the last whole interval go to ``remainder`` so that
    ``z_matrix.sum(0) + remainder`` equals V_T.
    """
    _check_beta(beta)
    _check_path(path, 2)
    grid = _as_grid(u_grid)
    if path.delta_n > 1.0:
        raise InputError("block statistics need delta_n <= 1")
    bounds = _block_bounds(path)
    if bounds.size - 1 < 2:
        raise InputError("need a span of at least two whole unit intervals")
    dx = path.increments
    fac = _scale_factors(grid, beta, path.delta_n, 2.0)
    z = np.empty((bounds.size - 1, grid.size))
    rem = np.empty(grid.size)
    step = max(1, _CHUNK_CELLS // max(dx.size, 1))
    for lo in range(0, grid.size, step):
        c = path.delta_n * np.cos(np.outer(dx, fac[lo : lo + step]))
        z[:, lo : lo + step] = np.add.reduceat(c[: bounds[-1]], bounds[:-1], axis=0)
        rem[lo : lo + step] = c[bounds[-1] :].sum(axis=0)
    return BlockStats(z, z.mean(axis=0), grid, float(beta), path.delta_n, rem)


def default_lag_count(n_blocks: int) -> int:
    """ceil(1.3 T^{1/3}), capped below the number of blocks."""
    return int(min(math.ceil(1.3 * n_blocks ** (1.0 / 3.0)), n_blocks - 1))


def kernel_weights(lag_count: int, kernel: str = "bartlett") -> np.ndarray:
    """Weights omega(i, L) for i = 1..L, evaluated at x = i / (L + 1)."""
    x = np.arange(1, lag_count + 1) / (lag_count + 1.0)
    if kernel == "bartlett":
        return 1.0 - x
    if kernel == "parzen":
        return np.where(x <= 0.5, 1.0 - 6.0 * x**2 + 6.0 * x**3, 2.0 * (1.0 - x) ** 3)
    raise ParameterError(f"unknown kernel {kernel!r}")


def hac_covariance(blocks: BlockStats, kernel: str = "bartlett", lag_count: int | None = None) -> HACResult:
    """Kernel-weighted long-run covariance of the block statistics.

    Sigma(u, v) = C_0(u, v) + sum_i omega(i, L) (C_i(u, v) + C_i(v, u)),
    C_k(u, v) = T^{-1} sum_{t>k} (Z_t(u) - L(u)) (Z_{t-k}(v) - L(v)).
    """
    t = blocks.n_blocks
    if lag_count is None:
        lag_count = default_lag_count(t)
    if lag_count < 0 or lag_count >= t:
        raise ParameterError(f"lag_count must satisfy 0 <= L < {t}, got {lag_count}")
    w = kernel_weights(lag_count, kernel)
    d = blocks.z_matrix - blocks.l_hat
    sigma = d.T @ d / t
    for i in range(1, lag_count + 1):
        c = d[i:].T @ d[:-i] / t
        sigma += w[i - 1] * (c + c.T)
    sigma = (sigma + sigma.T) / 2.0
    return HACResult(sigma, kernel, int(lag_count), blocks.u_grid, t)


def g_hat(path: PathGrid, beta_hat: float, u):
    """(delta_n / T) sum_i y_i sin(y_i), y_i = (2u)^{1/beta} delta_n^{-1/beta} dX_i.

    Estimates E G_beta(u^{1/beta} |sigma_t|), the sensitivity of L_hat to beta.
    """
    _check_beta(beta_hat)
    _check_path(path, 2)
    grid = _as_grid(u)
    fac = _scale_factors(grid, beta_hat, path.delta_n, 2.0)
    dx = path.increments
    sums = _cos_sums(dx, fac, lambda y: y * np.sin(y))
    out = path.delta_n * sums / path.t_span
    return float(out[0]) if np.ndim(u) == 0 else out


def activity_correction_se(
    l_curve: RLTCurve, g_hat_values, beta_se: float, delta_n: float | None = None, u_grid=None
) -> np.ndarray:
    """Variance added to Sigma(u, u)/T when beta is estimated on an initial window.

    [log(2u / delta_n) G_hat(u) / beta_hat^2]^2 beta_se^2, per u.
    """
    if beta_se < 0:
        raise ParameterError("beta_se must be non-negative")
    dn = l_curve.delta_n if delta_n is None else delta_n
    u = l_curve.u_grid if u_grid is None else _as_grid(u_grid)
    g = np.asarray(g_hat_values, dtype=float)
    if l_curve.t_span * dn > 1.0:
        warnings.warn(
            "T * delta_n > 1: the plug-in activity correction assumes T * delta_n -> 0",
            RuntimeWarning,
            stacklevel=2,
        )
    with np.errstate(divide="ignore"):
        logf = np.where(u > 0, np.log(2.0 * u / dn), 0.0)
    return (logf * g / l_curve.beta_used**2) ** 2 * beta_se**2
