"""Minimum-distance fit of a tempered stable time-change law to an RLT curve.

The estimator minimises the kernel-weighted squared distance

    int (L_hat(u) - L(u; theta))^2 kappa(u) du,   kappa(u) = exp(-2 u^2 / u_max^2),

with a trapezoid rule on a uniform grid over [0, span * u_max], and its
standard errors follow the sandwich B^{-1} Xi B^{-1} / T.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy import optimize, special

from .errors import EstimationError, ParameterError
from .levy_sim import PathGrid
from .rlt_core import HACResult, RLTCurve, block_stats, empirical_laplace, hac_covariance

__all__ = [
    "TemperedStableParams",
    "KernelSpec",
    "QuadratureSpec",
    "FitResult",
    "ts_laplace",
    "ts_laplace_du",
    "solve_u_max",
    "quadrature_nodes",
    "fit_theta",
    "fit_covariance",
    "fit_standard_errors",
    "pilot_u_max",
    "fit_path",
]

# alpha at or below this is evaluated with the Gamma (alpha = 0) formula
ALPHA_GAMMA_CUTOFF = 1e-8
# alpha_hat at or below this is treated as a boundary (Gamma-law) estimate
ALPHA_BOUNDARY = 1e-6


@dataclass(frozen=True)
class TemperedStableParams:
    alpha_ts: float
    c_ts: float
    lambda_ts: float

    def __post_init__(self):
        if not (0.0 <= self.alpha_ts < 1.0):
            raise ParameterError(f"alpha must lie in [0, 1), got {self.alpha_ts}")
        if not (self.c_ts > 0 and self.lambda_ts > 0):
            raise ParameterError("c and lambda must be positive")

    def as_array(self) -> np.ndarray:
        return np.array([self.alpha_ts, self.c_ts, self.lambda_ts])

    @classmethod
    def from_array(cls, a) -> "TemperedStableParams":
        return cls(float(a[0]), float(a[1]), float(a[2]))


@dataclass(frozen=True)
class KernelSpec:
    u_max: float

    def __post_init__(self):
        if not self.u_max > 0:
            raise ParameterError("u_max must be positive")

    def __call__(self, u):
        u = np.asarray(u, dtype=float)
        return np.exp(-2.0 * u**2 / self.u_max**2)


@dataclass(frozen=True)
class QuadratureSpec:
    n_nodes: int = 151
    span: float = 3.0


@dataclass
class FitResult:
    theta_hat: TemperedStableParams
    objective_value: float
    u_nodes: np.ndarray
    weights: np.ndarray
    l_values: np.ndarray
    kernel: KernelSpec
    converged: bool
    iterations: int
    n_restarts: int = 0
    se: np.ndarray | None = None
    meta: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        th = self.theta_hat
        out = {
            "alpha": th.alpha_ts,
            "c": th.c_ts,
            "lambda": th.lambda_ts,
            "objective_value": self.objective_value,
            "u_max": self.kernel.u_max,
            "n_nodes": int(self.u_nodes.size),
            "u_upper": float(self.u_nodes[-1]),
            "converged": self.converged,
            "iterations": self.iterations,
            "n_restarts": self.n_restarts,
        }
        if self.se is not None:
            se = [None if not np.isfinite(v) else float(v) for v in self.se]
            out["se"] = {"alpha": se[0], "c": se[1], "lambda": se[2]}
        out.update(self.meta)
        return out


def ts_laplace(u, theta: TemperedStableParams):
    """Laplace transform of the tempered stable law with parameters theta."""
    u = np.asarray(u, dtype=float)
    if np.any(u < 0):
        raise ParameterError("Laplace argument must be non-negative")
    a, c, lam = theta.alpha_ts, theta.c_ts, theta.lambda_ts
    if a <= ALPHA_GAMMA_CUTOFF:
        out = np.exp(-c * np.log1p(u / lam))
    else:
        # (lam + u)^a - lam^a, computed without cancellation
        diff = lam**a * np.expm1(a * np.log1p(u / lam))
        out = np.exp(-c * special.gamma(1.0 - a) / a * diff)
    return float(out) if out.ndim == 0 else out


def ts_laplace_du(u, theta: TemperedStableParams):
    """d/du of :func:`ts_laplace`."""
    u = np.asarray(u, dtype=float)
    a, c, lam = theta.alpha_ts, theta.c_ts, theta.lambda_ts
    g = 1.0 if a <= ALPHA_GAMMA_CUTOFF else special.gamma(1.0 - a)
    aa = 0.0 if a <= ALPHA_GAMMA_CUTOFF else a
    out = -ts_laplace(u, theta) * c * g * (lam + u) ** (aa - 1.0)
    return float(out) if np.ndim(out) == 0 else out


def _first_crossing(f, grid: np.ndarray, vals: np.ndarray) -> float:
    sign = np.sign(vals)
    if sign[0] == 0:
        return float(grid[0])
    hits = np.nonzero(sign != sign[0])[0]
    if hits.size == 0:
        raise EstimationError(
            "derivative target not bracketed on the u grid; widen the grid (larger u) "
            "or check that the curve is steep enough near u = 0"
        )
    k = hits[0]
    if sign[k] == 0:
        return float(grid[k])
    return float(optimize.bisect(f, grid[k - 1], grid[k], xtol=1e-13, maxiter=200))


def solve_u_max(source, target: float = -0.05, upper: float | None = None) -> float:
    """Solve dL/du (u_max) = target.

    ``source`` is an :class:`RLTCurve` (central finite differences on the
    empirical curve, linearly interpolated between nodes) or
    :class:`TemperedStableParams` (closed-form derivative).
    """
    if isinstance(source, RLTCurve):
        grid = np.asarray(source.u_grid, dtype=float)
        if grid.size < 3:
            raise EstimationError("need at least 3 grid points to differentiate the curve")
        deriv = np.gradient(np.asarray(source.values, dtype=float), grid)

        def f(u):
            return np.interp(u, grid, deriv) - target

        return _first_crossing(f, grid, deriv - target)

    if isinstance(source, TemperedStableParams):

        def f(u):
            return ts_laplace_du(u, source) - target

        hi = 1.0 if upper is None else float(upper)
        for _ in range(80):
            if f(hi) >= 0:
                break
            if upper is not None:
                raise EstimationError("derivative target not bracketed below the given upper bound")
            hi *= 2.0
        if f(0.0) >= 0:
            raise EstimationError("model curve is flatter than the derivative target at u = 0")
        return float(optimize.bisect(f, 0.0, hi, xtol=1e-13, maxiter=300))

    raise ParameterError(f"cannot solve u_max from {type(source).__name__}")


def quadrature_nodes(u_max: float, quad: QuadratureSpec = QuadratureSpec()) -> np.ndarray:
    return np.linspace(0.0, quad.span * u_max, quad.n_nodes)


def _trapezoid_weights(x: np.ndarray) -> np.ndarray:
    w = np.zeros_like(x)
    h = np.diff(x)
    w[:-1] += h / 2.0
    w[1:] += h / 2.0
    return w


def _to_phi(theta: TemperedStableParams) -> np.ndarray:
    a = min(max(theta.alpha_ts, 1e-12), 1.0 - 1e-12)
    return np.array([np.log(a / (1.0 - a)), np.log(theta.c_ts), np.log(theta.lambda_ts)])


def _from_phi(phi) -> TemperedStableParams:
    a = float(special.expit(phi[0]))
    return TemperedStableParams(min(a, 1.0 - 1e-15), float(np.exp(phi[1])), float(np.exp(phi[2])))


def _curve_on_nodes(l_curve: RLTCurve, kernel: KernelSpec, quad: QuadratureSpec):
    grid = np.asarray(l_curve.u_grid, dtype=float)
    vals = np.asarray(l_curve.values, dtype=float)
    if not np.all(np.isfinite(vals)):
        raise EstimationError("empirical Laplace curve has non-finite values")
    if grid[0] > 0:
        grid, vals = np.concatenate(([0.0], grid)), np.concatenate(([1.0], vals))
    if grid[-1] < 2.0 * kernel.u_max * (1 - 1e-12):
        raise ParameterError(
            f"curve covers [0, {grid[-1]:.4g}] but the fit needs at least [0, {2 * kernel.u_max:.4g}]"
        )
    nodes = np.linspace(0.0, min(quad.span * kernel.u_max, grid[-1]), quad.n_nodes)
    if grid.size == nodes.size and np.allclose(grid, nodes, rtol=0, atol=1e-12):
        return grid, vals
    return nodes, np.interp(nodes, grid, vals)


def fit_theta(
    l_curve: RLTCurve,
    kernel: KernelSpec,
    init: TemperedStableParams,
    quad: QuadratureSpec = QuadratureSpec(),
    max_iter: int = 2000,
    tol: float = 1e-10,
    max_restarts: int = 10,
    seed: int = 0,
) -> FitResult:
    """Nelder-Mead search in (logit alpha, log c, log lambda) coordinates.

    After each simplex run the search restarts from the incumbent with a
    fresh (randomly perturbed) simplex until the relative objective gain
    falls below ``tol``.
    """
    nodes, lv = _curve_on_nodes(l_curve, kernel, quad)
    w = _trapezoid_weights(nodes) * kernel(nodes)

    def objective(phi):
        try:
            th = _from_phi(phi)
        except ParameterError:
            return np.inf
        r = lv - ts_laplace(nodes, th)
        return float(np.sum(w * r * r))

    phi = _to_phi(init)
    f0 = objective(phi)
    if not np.isfinite(f0):
        raise EstimationError("objective is not finite at the initial parameters")

    gen = np.random.default_rng(seed)
    best_phi, best_f = phi, f0
    iterations, restarts, converged = 0, 0, False
    step = 0.25
    while True:
        simplex = np.vstack([best_phi, best_phi + np.diag(step * (1.0 + gen.random(3)))])
        res = optimize.minimize(
            objective,
            best_phi,
            method="Nelder-Mead",
            options={
                "initial_simplex": simplex,
                "maxiter": max_iter,
                "maxfev": 4 * max_iter,
                "xatol": 1e-12,
                "fatol": 1e-18,
            },
        )
        iterations += int(res.nit)
        gain = best_f - res.fun
        if res.fun < best_f:
            best_phi, best_f = res.x, float(res.fun)
        if res.success and gain <= tol * max(abs(best_f), 1e-300):
            converged = True
            break
        if restarts >= max_restarts or iterations >= max_iter * (max_restarts + 1):
            break
        restarts += 1
        step = max(step / 2.0, 1e-4)

    if best_f > 0 and best_f >= f0 and iterations > 0 and not converged:
        raise EstimationError("simplex search made no progress from the initial point; degenerate input")

    return FitResult(
        theta_hat=_from_phi(best_phi),
        objective_value=best_f,
        u_nodes=nodes,
        weights=w,
        l_values=lv,
        kernel=kernel,
        converged=converged,
        iterations=iterations,
        n_restarts=restarts,
    )


def _theta_gradient(theta: TemperedStableParams, u: np.ndarray, rel_step: float = 1e-5) -> np.ndarray:
    """dL(u; theta)/dtheta, shape (len(u), 3), via central differences in phi space."""
    phi = _to_phi(theta)
    a, c, lam = theta.alpha_ts, theta.c_ts, theta.lambda_ts
    dtheta_dphi = np.array([a * (1.0 - a), c, lam])
    grad = np.empty((u.size, 3))
    for j in range(3):
        h = rel_step * max(abs(phi[j]), 1.0)
        up, dn = phi.copy(), phi.copy()
        up[j] += h
        dn[j] -= h
        grad[:, j] = (ts_laplace(u, _from_phi(up)) - ts_laplace(u, _from_phi(dn))) / (2.0 * h)
    return grad / dtheta_dphi


def fit_covariance(fit: FitResult, hac: HACResult, t_span: float) -> np.ndarray:
    """Sandwich covariance of theta_hat on the natural parameter scale.

    When alpha_hat sits on the boundary (Gamma law) the alpha direction has
    no usable gradient; the sandwich is then formed for (c, lambda) with
    alpha held at zero and the alpha row and column are NaN.
    """
    if hac.sigma.shape[0] != fit.u_nodes.size or not np.allclose(hac.u_grid, fit.u_nodes, atol=1e-10):
        raise ParameterError("HAC matrix must be computed on the fit quadrature nodes")
    if not t_span > 0:
        raise ParameterError("t_span must be positive")
    boundary = fit.theta_hat.alpha_ts <= ALPHA_BOUNDARY
    keep = [1, 2] if boundary else [0, 1, 2]
    g = _theta_gradient(fit.theta_hat, fit.u_nodes)[:, keep]
    wg = fit.weights[:, None] * g
    bread = g.T @ wg
    cond = np.linalg.cond(bread)
    if not np.isfinite(cond) or cond > 1e14:
        raise EstimationError(f"bread matrix is singular (condition number {cond:.3g})")
    xi = wg.T @ hac.sigma @ wg
    binv = np.linalg.inv(bread)
    sub = binv @ xi @ binv / t_span
    cov = np.full((3, 3), np.nan)
    cov[np.ix_(keep, keep)] = (sub + sub.T) / 2.0
    fit.meta["alpha_at_boundary"] = bool(boundary)
    return cov


def fit_standard_errors(fit: FitResult, hac: HACResult, kernel: KernelSpec | None = None, t_span: float | None = None):
    """Per-parameter standard errors (alpha, c, lambda)."""
    if kernel is not None and not np.isclose(kernel.u_max, fit.kernel.u_max):
        raise ParameterError("kernel differs from the one used in the fit")
    t = hac.n_blocks if t_span is None else t_span
    with np.errstate(invalid="ignore"):
        return np.sqrt(np.clip(np.diag(fit_covariance(fit, hac, t)), 0.0, None))


def pilot_u_max(path: PathGrid, beta: float, hi: float = 8.0, n_grid: int = 201) -> float:
    """Feasible u_max from the empirical curve on [0, hi], doubling ``hi`` until bracketed."""
    for _ in range(6):
        pilot = empirical_laplace(path, beta, np.linspace(0.0, hi, n_grid))
        try:
            return solve_u_max(pilot)
        except EstimationError:
            hi *= 2.0
    raise EstimationError("could not bracket u_max on the pilot grid; give u_max explicitly")


def fit_path(
    path: PathGrid,
    beta: float,
    init: TemperedStableParams,
    u_max: float | None = None,
    quad: QuadratureSpec = QuadratureSpec(),
    hac_kernel: str = "bartlett",
    hac_lags: int | None = None,
) -> tuple[FitResult, HACResult, np.ndarray]:
    """Full pipeline on one path: kernel, curve on the nodes, fit, HAC, sandwich.

    Returns the fit (with ``se`` filled in), the HAC result on the nodes and
    the parameter covariance.
    """
    if u_max is None:
        u_max = pilot_u_max(path, beta)
    kernel = KernelSpec(u_max)
    curve = empirical_laplace(path, beta, quadrature_nodes(u_max, quad))
    fit = fit_theta(curve, kernel, init, quad)
    hac = hac_covariance(block_stats(path, beta, fit.u_nodes), hac_kernel, hac_lags)
    cov = fit_covariance(fit, hac, path.t_span)
    with np.errstate(invalid="ignore"):
        fit.se = np.sqrt(np.clip(np.diag(cov), 0.0, None))
    return fit, hac, cov
