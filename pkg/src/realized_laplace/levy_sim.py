"""Path simulation for time-changed pure-jump models.

Drivers are symmetric stable or symmetric tempered stable Levy martingales,
the stochastic scale is a square-root (CIR) diffusion, and the composite
model is

    dX_t = V_t^{1/beta} dL_t,    dV_t = kappa (theta - V_t) dt + sigma sqrt(V_t) dB_t.

Stable draws use the convention E exp(iu S_1) = exp(-|u|^beta / 2), which
corresponds to the Levy density A(beta) / |x|^{1+beta} with A from
:func:`stable_level`.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Union

import numpy as np
from scipy import special

from .errors import InputError, ParameterError

__all__ = [
    "RngStream",
    "StableSpec",
    "TemperedStableSpec",
    "CIRSpec",
    "PathGrid",
    "stable_level",
    "sample_stable_increments",
    "sample_tempered_stable_increments",
    "simulate_cir",
    "simulate_model",
    "gamma_laplace",
]


@dataclass(frozen=True)
class RngStream:
    """Reproducible random stream keyed by ``(seed, stream_id)``.

    Every sampler builds a fresh generator from the stream, so calling a
    sampler twice with the same stream returns identical draws. Use
    :meth:`child` to obtain independent substreams.
    """

    seed: int
    stream_id: int = 0
    substream: tuple[int, ...] = ()

    def generator(self) -> np.random.Generator:
        ss = np.random.SeedSequence(self.seed, spawn_key=(self.stream_id, *self.substream))
        return np.random.Generator(np.random.PCG64(ss))

    def child(self, k: int) -> "RngStream":
        return replace(self, substream=self.substream + (int(k),))


def stable_level(beta: float) -> float:
    """Levy density level A(beta) giving E exp(iu S_1) = exp(-|u|^beta / 2)."""
    _check_beta(beta)
    denom = 4.0 * special.gamma(2.0 - beta) * abs(np.cos(beta * np.pi / 2.0))
    return beta * (beta - 1.0) / denom


def _check_beta(beta: float) -> None:
    if not (1.0 < beta < 2.0):
        raise ParameterError(f"activity index must lie in (1, 2), got {beta}")


@dataclass(frozen=True)
class StableSpec:
    """Symmetric beta-stable driver.

    ``c_level=None`` uses A(beta), i.e. the unit characteristic function
    exp(-|u|^beta / 2). Any other level rescales the process by
    (c_level / A(beta))^{1/beta}.
    """

    beta: float = 1.7
    c_level: float | None = None

    def __post_init__(self):
        _check_beta(self.beta)
        if self.c_level is not None and not self.c_level > 0:
            raise ParameterError("c_level must be positive")

    @property
    def level(self) -> float:
        return stable_level(self.beta) if self.c_level is None else float(self.c_level)


@dataclass(frozen=True)
class TemperedStableSpec:
    """Symmetric tempered stable driver with Levy density
    ``c_level * exp(-lambda_temper |x|) / |x|^{1+beta}``.

    ``eps_factor`` sets the small/big jump threshold as
    ``eps_factor * dt^{1/beta}``; ``eps`` overrides it with an absolute value.
    """

    beta: float = 1.7
    c_level: float = 0.11
    lambda_temper: float = 0.25
    eps_factor: float = 0.1
    eps: float | None = None

    def __post_init__(self):
        _check_beta(self.beta)
        if not self.c_level > 0:
            raise ParameterError("c_level must be positive")
        if not self.lambda_temper >= 0:
            raise ParameterError("lambda_temper must be non-negative")
        if not self.eps_factor > 0 or (self.eps is not None and not self.eps > 0):
            raise ParameterError("jump threshold must be positive")

    def threshold(self, dt: float) -> float:
        if self.eps is not None:
            return float(self.eps)
        return self.eps_factor * dt ** (1.0 / self.beta)

    def big_jump_intensity(self, eps: float) -> float:
        """Total mass of the Levy density on |x| > eps (both tails)."""
        b, c, lam = self.beta, self.c_level, self.lambda_temper
        if lam == 0.0:
            return 2.0 * c * eps ** (-b) / b
        # upper incomplete gamma at negative order via two downward recursions
        z = lam * eps
        g2 = special.gammaincc(2.0 - b, z) * special.gamma(2.0 - b)
        g1 = (g2 - z ** (1.0 - b) * np.exp(-z)) / (1.0 - b)
        g0 = (g1 - z ** (-b) * np.exp(-z)) / (-b)
        return 2.0 * c * lam**b * g0

    def small_jump_variance(self, eps: float) -> float:
        """Second moment of the Levy density on |x| <= eps, per unit time."""
        b, c, lam = self.beta, self.c_level, self.lambda_temper
        if lam == 0.0:
            return 2.0 * c * eps ** (2.0 - b) / (2.0 - b)
        z = lam * eps
        return 2.0 * c * lam ** (b - 2.0) * special.gamma(2.0 - b) * special.gammainc(2.0 - b, z)


@dataclass(frozen=True)
class CIRSpec:
    """Square-root scale process. ``v0='stationary'`` draws V_0 from the
    Gamma(2 kappa theta / sigma^2, sigma^2 / (2 kappa)) stationary law."""

    kappa_mr: float = 0.02
    theta_mean: float = 1.0
    sigma_vol: float = 0.05
    v0: Union[float, str] = "stationary"

    def __post_init__(self):
        if not self.kappa_mr > 0 or not self.theta_mean > 0:
            raise ParameterError("kappa_mr and theta_mean must be positive")
        # sigma_vol = 0 is the deterministic mean-reverting ODE
        if not self.sigma_vol >= 0:
            raise ParameterError("sigma_vol must be non-negative")
        if isinstance(self.v0, str):
            if self.v0 != "stationary":
                raise ParameterError(f"unknown v0 flag {self.v0!r}")
            if self.sigma_vol == 0:
                raise ParameterError("stationary start requires sigma_vol > 0")
        elif not self.v0 >= 0:
            raise ParameterError("v0 must be non-negative")

    @property
    def gamma_shape(self) -> float:
        return 2.0 * self.kappa_mr * self.theta_mean / self.sigma_vol**2

    @property
    def gamma_scale(self) -> float:
        return self.sigma_vol**2 / (2.0 * self.kappa_mr)


@dataclass
class PathGrid:
    """Equidistant observations X_0, X_{dn}, ..., X_{N dn}."""

    values: np.ndarray
    delta_n: float
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        if self.values.ndim != 1 or self.values.size < 1:
            raise InputError("path values must be a non-empty 1-d array")
        if not np.all(np.isfinite(self.values)):
            raise InputError("path values must be finite")
        if not self.delta_n > 0:
            raise InputError("delta_n must be positive")

    @classmethod
    def from_increments(cls, increments, delta_n: float, x0: float = 0.0, meta=None) -> "PathGrid":
        inc = np.asarray(increments, dtype=float)
        values = np.concatenate(([x0], x0 + np.cumsum(inc)))
        return cls(values, delta_n, dict(meta or {}))

    @property
    def x0(self) -> float:
        return float(self.values[0])

    @property
    def n_increments(self) -> int:
        return self.values.size - 1

    @property
    def t_span(self) -> float:
        return self.n_increments * self.delta_n

    @property
    def increments(self) -> np.ndarray:
        return np.diff(self.values)

    def head(self, span: float) -> "PathGrid":
        """Initial segment covering ``[0, span]``."""
        n = int(np.floor(span / self.delta_n + 1e-9))
        n = min(max(n, 0), self.n_increments)
        return PathGrid(self.values[: n + 1].copy(), self.delta_n, dict(self.meta))


def _check_n_dt(n: int, dt: float) -> None:
    if int(n) < 1 or not dt > 0:
        raise ParameterError("need n >= 1 and dt > 0")


def _standard_symmetric_stable(beta: float, size: int, gen: np.random.Generator) -> np.ndarray:
    """Chambers-Mallows-Stuck draws with E exp(iuX) = exp(-|u|^beta)."""
    theta = np.pi * (gen.random(size) - 0.5)
    w = gen.standard_exponential(size)
    return (
        np.sin(beta * theta)
        / np.cos(theta) ** (1.0 / beta)
        * (np.cos((1.0 - beta) * theta) / w) ** ((1.0 - beta) / beta)
    )


def sample_stable_increments(spec: StableSpec, n: int, dt: float, rng: RngStream) -> np.ndarray:
    """i.i.d. increments of the stable driver over steps of length ``dt``."""
    _check_n_dt(n, dt)
    scale = (spec.level * dt / (2.0 * stable_level(spec.beta))) ** (1.0 / spec.beta)
    return scale * _standard_symmetric_stable(spec.beta, int(n), rng.generator())


def _tempered_jump_sizes(spec: TemperedStableSpec, eps: float, k: int, gen) -> np.ndarray:
    # Pareto(eps, beta) proposals thinned by exp(-lambda (x - eps))
    out = np.empty(k)
    filled = 0
    b, lam = spec.beta, spec.lambda_temper
    while filled < k:
        need = k - filled
        m = need if lam == 0.0 else int(need * 1.2) + 16
        x = eps * gen.random(m) ** (-1.0 / b)
        if lam > 0.0:
            x = x[gen.random(m) < np.exp(-lam * (x - eps))]
        take = min(need, x.size)
        out[filled : filled + take] = x[:take]
        filled += take
    return out * np.where(gen.random(k) < 0.5, -1.0, 1.0)


def sample_tempered_stable_increments(
    spec: TemperedStableSpec, n: int, dt: float, rng: RngStream
) -> np.ndarray:
    """i.i.d. zero-mean increments of the symmetric tempered stable driver.

    Jumps above the threshold form a compound Poisson process (its
    compensator vanishes by symmetry); jumps below it are replaced by a
    Gaussian with the matching truncated second moment.
    """
    _check_n_dt(n, dt)
    n = int(n)
    gen = rng.generator()
    eps = spec.threshold(dt)
    counts = gen.poisson(spec.big_jump_intensity(eps) * dt, size=n)
    jumps = _tempered_jump_sizes(spec, eps, int(counts.sum()), gen)
    owner = np.repeat(np.arange(n), counts)
    big = np.bincount(owner, weights=jumps, minlength=n)
    small = gen.standard_normal(n) * np.sqrt(spec.small_jump_variance(eps) * dt)
    return big + small


def simulate_cir(spec: CIRSpec, n: int, dt: float, rng: RngStream, method: str = "exact") -> np.ndarray:
    """CIR levels V_0, V_dt, ..., V_{n dt}.

    ``method='exact'`` samples noncentral chi-square transitions;
    ``method='euler'`` is a full-truncation Euler scheme.
    """
    _check_n_dt(n, dt)
    n = int(n)
    gen = rng.generator()
    k, th, s = spec.kappa_mr, spec.theta_mean, spec.sigma_vol
    v = np.empty(n + 1)
    v[0] = gen.gamma(spec.gamma_shape, spec.gamma_scale) if spec.v0 == "stationary" else float(spec.v0)

    if s == 0.0:
        decay = np.exp(-k * dt * np.arange(n + 1))
        return th + (v[0] - th) * decay

    if method == "euler":
        z = gen.standard_normal(n)
        x = v[0]
        for i in range(n):
            xp = max(x, 0.0)
            x = x + k * (th - xp) * dt + s * np.sqrt(xp * dt) * z[i]
            v[i + 1] = max(x, 0.0)
        return v
    if method != "exact":
        raise ParameterError(f"unknown CIR method {method!r}")

    ekd = np.exp(-k * dt)
    c = 2.0 * k / (s**2 * (1.0 - ekd))
    df = 4.0 * k * th / s**2
    if df > 1.0:
        # ncx2(df, nc) = (Z + sqrt(nc))^2 + chi2(df - 1)
        z = gen.standard_normal(n)
        chi = gen.chisquare(df - 1.0, size=n)
        x = v[0]
        for i in range(n):
            x = ((z[i] + np.sqrt(2.0 * c * ekd * x)) ** 2 + chi[i]) / (2.0 * c)
            v[i + 1] = x
    else:
        for i in range(n):
            v[i + 1] = gen.noncentral_chisquare(df, 2.0 * c * ekd * v[i]) / (2.0 * c)
    return v


def _driver_increments(spec, n: int, dt: float, rng: RngStream) -> np.ndarray:
    if isinstance(spec, StableSpec):
        return sample_stable_increments(spec, n, dt, rng)
    if isinstance(spec, TemperedStableSpec):
        return sample_tempered_stable_increments(spec, n, dt, rng)
    raise ParameterError(f"unsupported driver spec {type(spec).__name__}")


def simulate_model(
    driver: StableSpec | TemperedStableSpec,
    cir: CIRSpec,
    t_span: float,
    m_per_day: int,
    rng: RngStream,
    substeps: int = 1,
    cir_method: str = "exact",
    return_scale: bool = False,
):
    """Simulate X on the grid ``i / m_per_day``, i = 0..round(t_span m_per_day).

    The scale is frozen at the left endpoint of each of the ``substeps``
    sub-intervals of an observation step. With ``return_scale=True`` the
    observation-grid scale path V is returned alongside.
    """
    if not t_span >= 1 or int(m_per_day) < 2 or int(substeps) < 1:
        raise ParameterError("need t_span >= 1, m_per_day >= 2, substeps >= 1")
    m, k = int(m_per_day), int(substeps)
    n = int(round(t_span * m))
    dt = 1.0 / (m * k)
    v_fine = simulate_cir(cir, n * k, dt, rng.child(0), method=cir_method)
    dl = _driver_increments(driver, n * k, dt, rng.child(1))
    dx = v_fine[:-1] ** (1.0 / driver.beta) * dl
    if k > 1:
        dx = dx.reshape(n, k).sum(axis=1)
    meta = {
        "driver": type(driver).__name__,
        "driver_spec": {kk: vv for kk, vv in vars(driver).items()},
        "cir_spec": {kk: vv for kk, vv in vars(cir).items()},
        "seed": rng.seed,
        "stream_id": rng.stream_id,
        "t_span": n / m,
        "m_per_day": m,
        "substeps": k,
    }
    path = PathGrid.from_increments(dx, 1.0 / m, meta=meta)
    if return_scale:
        return path, v_fine[::k]
    return path


def gamma_laplace(u, cir: CIRSpec = CIRSpec()):
    """Laplace transform of the stationary Gamma law of the CIR scale.

    With the default parameters this is (1 + u 0.05^2/0.04)^{-0.04/0.05^2}.
    """
    u_arr = np.asarray(u, dtype=float)
    if np.any(u_arr < 0) or not np.all(np.isfinite(u_arr)):
        raise ParameterError("Laplace argument must be finite and non-negative")
    if cir.sigma_vol == 0:
        out = np.exp(-u_arr * cir.theta_mean)
    else:
        out = (1.0 + u_arr * cir.gamma_scale) ** (-cir.gamma_shape)
    return float(out) if np.ndim(out) == 0 else out
