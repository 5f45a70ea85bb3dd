"""Two-scale power-variation estimator of the activity index."""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass

import numpy as np

from .errors import EstimationError, InputError, ParameterError
from .levy_sim import PathGrid, RngStream

__all__ = ["ActivityEstimate", "power_variation", "beta_from_phi", "estimate_activity"]

LN2 = math.log(2.0)


@dataclass
class ActivityEstimate:
    beta_hat: float
    p_star: float
    phi_fine: float
    phi_coarse: float
    subsample_span: float
    se: float | None = None
    beta_stage1: float | None = None
    p0: float | None = None
    k_frac: float | None = None
    n_bootstrap: int = 0

    def to_dict(self) -> dict:
        return asdict(self)


def _coarse_increments(dx: np.ndarray) -> np.ndarray:
    # an odd trailing increment has no partner and is dropped
    m = dx.size // 2
    return dx[: 2 * m].reshape(m, 2).sum(axis=1)


def power_variation(path: PathGrid, p: float, stride: int = 1) -> float:
    """sum |dX|^p on the observation grid (stride 1) or on every other point (stride 2)."""
    if not p > 0:
        raise ParameterError("power must be positive")
    if stride not in (1, 2):
        raise ParameterError("stride must be 1 or 2")
    dx = path.increments
    if stride == 2:
        dx = _coarse_increments(dx)
    return float(np.sum(np.abs(dx) ** p))


def beta_from_phi(p: float, phi_fine: float, phi_coarse: float) -> float:
    """ln(2) p / (ln 2 + ln phi_coarse - ln phi_fine)."""
    if not (phi_fine > 0 and phi_coarse > 0):
        raise EstimationError(f"power variations must be positive (fine={phi_fine}, coarse={phi_coarse})")
    denom = LN2 + math.log(phi_coarse) - math.log(phi_fine)
    if denom <= 0:
        raise EstimationError(
            f"non-positive log-ratio denominator {denom:.3g} at p={p}: "
            "coarse-scale variation too small relative to fine scale"
        )
    return LN2 * p / denom


def _day_sums(path: PathGrid, p: float) -> tuple[np.ndarray, np.ndarray]:
    dx = path.increments
    n_days = max(1, int(math.ceil(path.t_span - 1e-9)))
    day_of = np.minimum(np.floor(np.arange(dx.size) * path.delta_n + 1e-9).astype(int), n_days - 1)
    fine = np.bincount(day_of, weights=np.abs(dx) ** p, minlength=n_days)
    coarse_dx = _coarse_increments(dx)
    coarse = np.bincount(day_of[0 : 2 * coarse_dx.size : 2], weights=np.abs(coarse_dx) ** p, minlength=n_days)
    return fine, coarse


def estimate_activity(
    path: PathGrid,
    p0: float = 0.5,
    k_frac: float = 0.4,
    bootstrap: int = 0,
    rng: RngStream | None = None,
) -> ActivityEstimate:
    """Two-stage estimate: beta_0 at power p0, then beta_hat at p* = k_frac beta_0.

    ``bootstrap > 0`` adds an i.i.d. day-block bootstrap standard error with
    p* held fixed.
    """
    if path.n_increments < 4:
        raise InputError("activity estimation needs at least 4 increments")
    if not p0 > 0:
        raise ParameterError("p0 must be positive")
    if not 0 < k_frac < 0.5:
        raise ParameterError("k_frac must lie in (0, 1/2)")

    beta0 = beta_from_phi(p0, power_variation(path, p0, 1), power_variation(path, p0, 2))
    p_star = k_frac * beta0
    phi_f = power_variation(path, p_star, 1)
    phi_c = power_variation(path, p_star, 2)
    est = ActivityEstimate(
        beta_hat=beta_from_phi(p_star, phi_f, phi_c),
        p_star=p_star,
        phi_fine=phi_f,
        phi_coarse=phi_c,
        subsample_span=path.t_span,
        beta_stage1=beta0,
        p0=p0,
        k_frac=k_frac,
    )
    if bootstrap > 0:
        gen = (rng or RngStream(0)).generator()
        fine, coarse = _day_sums(path, p_star)
        idx = gen.integers(0, fine.size, size=(int(bootstrap), fine.size))
        bf, bc = fine[idx].sum(axis=1), coarse[idx].sum(axis=1)
        with np.errstate(divide="ignore", invalid="ignore"):
            denom = LN2 + np.log(bc) - np.log(bf)
            draws = LN2 * p_star / denom
        draws = draws[np.isfinite(draws) & (denom > 0)]
        est.se = float(np.std(draws, ddof=1)) if draws.size > 1 else None
        est.n_bootstrap = int(bootstrap)
    return est
