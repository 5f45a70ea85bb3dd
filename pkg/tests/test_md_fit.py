import itertools
import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from realized_laplace import (
    EstimationError,
    KernelSpec,
    ParameterError,
    RLTCurve,
    TemperedStableParams,
    fit_standard_errors,
    fit_theta,
    gamma_laplace,
    solve_u_max,
    ts_laplace,
)
from realized_laplace.md_fit import _theta_gradient, fit_covariance, quadrature_nodes, ts_laplace_du
from realized_laplace.rlt_core import HACResult

THETA0 = TemperedStableParams(0.3, 1.2, 0.05)
# closed-form root of (1 + u/16)^{-17} = 0.05, confirmed by a dense-grid scan
GAMMA_UMAX = 16 * (0.05 ** (-1 / 17) - 1)


def model_curve(theta, u_max, n=151, span=3.0):
    u = np.linspace(0, span * u_max, n)
    return RLTCurve(u, ts_laplace(u, theta), 1.7, 1000.0, 1 / 78)


# ---------------------------------------------------------------- Laplace family


def test_params_bounds():
    for a, c, lam in [(-0.1, 1, 1), (1.0, 1, 1), (0.5, 0, 1), (0.5, 1, 0)]:
        with pytest.raises(ParameterError):
            TemperedStableParams(a, c, lam)
    th = TemperedStableParams.from_array([0.2, 1.0, 3.0])
    np.testing.assert_array_equal(th.as_array(), [0.2, 1.0, 3.0])


@given(st.floats(0, 0.99), st.floats(0.01, 10), st.floats(0.01, 10))
def test_ts_laplace_at_zero(a, c, lam):
    assert ts_laplace(0.0, TemperedStableParams(a, c, lam)) == 1.0


def test_gamma_branch_matches_design_law():
    th = TemperedStableParams(0.0, 16.0, 16.0)
    u = np.array([0.1, 0.5, 1.25, 2.5, 3.75])
    np.testing.assert_allclose(ts_laplace(u, th), gamma_laplace(u), rtol=1e-14)
    assert abs(ts_laplace(0.5, th) - 0.6112) < 5e-5


def test_ts_laplace_closed_form():
    a, c, lam, u = 0.3, 1.2, 0.05, 2.0
    ref = math.exp(c * math.gamma(-a) * ((lam + u) ** a - lam**a))
    assert ts_laplace(u, THETA0) == pytest.approx(ref, rel=1e-13)


@pytest.mark.parametrize(
    "a,c,lam", list(itertools.product([0, 0.25, 0.5, 0.75, 0.9], [0.5, 1, 2], [0.05, 0.5, 5]))
)
def test_ts_laplace_completely_monotone(a, c, lam):
    u = np.linspace(0, 10, 201)
    v = ts_laplace(u, TemperedStableParams(a, c, lam))
    assert np.all(v > 0)
    assert np.all(np.diff(v) < 0)
    assert np.all(np.diff(v, 2) > 0)


def test_ts_laplace_decreasing_in_c():
    u = np.array([0.1, 1.0, 5.0])
    for a in (0.0, 0.4):
        lo = ts_laplace(u, TemperedStableParams(a, 1.0, 0.3))
        hi = ts_laplace(u, TemperedStableParams(a, 2.0, 0.3))
        assert np.all(hi < lo)


def test_alpha_continuity_at_gamma_boundary():
    u = np.linspace(0, 10, 101)
    for c, lam in [(0.5, 0.05), (1.2, 0.5), (16, 16)]:
        near = ts_laplace(u, TemperedStableParams(1e-6, c, lam))
        gam = ts_laplace(u, TemperedStableParams(0.0, c, lam))
        assert np.max(np.abs(near - gam)) <= 1e-4
        # just above and at the routing cutoff
        above = ts_laplace(u, TemperedStableParams(2e-8, c, lam))
        at = ts_laplace(u, TemperedStableParams(1e-8, c, lam))
        assert np.max(np.abs(above - at)) <= 1e-6


@pytest.mark.parametrize("theta", [THETA0, TemperedStableParams(0.0, 16, 16), TemperedStableParams(0.8, 0.5, 2.0)])
def test_ts_laplace_derivative(theta):
    u = np.linspace(0.05, 6, 30)
    h = 1e-6
    fd = (ts_laplace(u + h, theta) - ts_laplace(u - h, theta)) / (2 * h)
    np.testing.assert_allclose(ts_laplace_du(u, theta), fd, rtol=1e-6, atol=1e-10)


def test_ts_laplace_rejects_negative_u():
    with pytest.raises(ParameterError):
        ts_laplace(-1.0, THETA0)


# ---------------------------------------------------------------- u_max


def test_u_max_gamma_law():
    assert GAMMA_UMAX == pytest.approx(3.0831985, abs=1e-6)
    assert solve_u_max(TemperedStableParams(0.0, 16, 16)) == pytest.approx(GAMMA_UMAX, abs=1e-9)


def test_u_max_from_empirical_curve_of_gamma_law():
    u = np.linspace(0, 12, 2401)
    curve = RLTCurve(u, gamma_laplace(u), 1.7, 300.0, 1 / 78)
    assert solve_u_max(curve) == pytest.approx(GAMMA_UMAX, abs=1e-4)


def test_u_max_decreases_in_c():
    for a in (0.0, 0.3, 0.7):
        base = solve_u_max(TemperedStableParams(a, 1.0, 0.5))
        dbl = solve_u_max(TemperedStableParams(a, 2.0, 0.5))
        assert dbl < base


def test_u_max_target_on_grid_point():
    # quadratic curve: central differences are exact at interior nodes
    u = np.linspace(0, 4, 41)
    curve = RLTCurve(u, 1 - u + 0.2375 * u**2, 1.7, 1.0, 1.0)
    assert solve_u_max(curve) == pytest.approx(2.0, abs=1e-8)


def test_u_max_not_bracketed():
    u = np.linspace(0, 1, 11)
    flat = RLTCurve(u, 1 - 0.01 * u, 1.7, 1.0, 1.0)
    with pytest.raises(EstimationError, match="grid"):
        solve_u_max(flat)
    with pytest.raises(ParameterError):
        solve_u_max(1.0)
    with pytest.raises(EstimationError):
        solve_u_max(TemperedStableParams(0.0, 0.01, 1.0))


def test_u_max_model_self_fit_value():
    assert solve_u_max(THETA0) == pytest.approx(1.120045533537052, rel=1e-9)


# ---------------------------------------------------------------- fit


def test_kernel_spec():
    k = KernelSpec(2.0)
    assert k(0.0) == 1.0
    assert np.all(np.diff(k(np.linspace(0, 10, 50))) <= 0)
    with pytest.raises(ParameterError):
        KernelSpec(0.0)
    np.testing.assert_allclose(quadrature_nodes(2.0), np.linspace(0, 6, 151))


@pytest.mark.parametrize(
    "init",
    [(0.2, 1.0, 0.1), (0.5, 2.0, 0.5), (0.05, 0.5, 0.01), (0.8, 3.0, 1.0)],
)
def test_noiseless_self_fit(init):
    k = KernelSpec(solve_u_max(THETA0))
    fit = fit_theta(model_curve(THETA0, k.u_max), k, TemperedStableParams(*init))
    rel = np.abs(fit.theta_hat.as_array() / THETA0.as_array() - 1)
    assert rel.max() <= 1e-3
    assert fit.converged
    assert fit.objective_value >= 0


def test_fit_interpolates_coarser_curve():
    k = KernelSpec(solve_u_max(THETA0))
    # the curve is steep at 0 (slope about -12.7), so the input grid is fine
    u = np.linspace(0.001, 3.5, 3000)
    curve = RLTCurve(u, ts_laplace(u, THETA0), 1.7, 1000.0, 1 / 78)
    fit = fit_theta(curve, k, TemperedStableParams(0.2, 1.0, 0.1))
    assert fit.u_nodes.size == 151
    assert fit.u_nodes[-1] == pytest.approx(3 * k.u_max)
    rel = np.abs(fit.theta_hat.as_array() / THETA0.as_array() - 1)
    assert rel.max() <= 1e-2


def test_fit_needs_curve_to_cover_twice_u_max():
    k = KernelSpec(2.0)
    u = np.linspace(0, 3.0, 31)
    with pytest.raises(ParameterError, match="fit needs"):
        fit_theta(RLTCurve(u, np.exp(-u), 1.7, 1.0, 1.0), k, THETA0)


def test_objective_identification():
    k = KernelSpec(solve_u_max(THETA0))
    curve = model_curve(THETA0, k.u_max)
    w = np.diff(curve.u_grid)[0] * np.ones(151)
    w[[0, -1]] /= 2
    w *= k(curve.u_grid)

    def obj(th):
        return float(np.sum(w * (curve.values - ts_laplace(curve.u_grid, th)) ** 2))

    assert obj(THETA0) == 0.0
    worst = min(
        obj(TemperedStableParams(a, c, lam))
        for a in (0.0, 0.05, 0.1, 0.5, 0.6, 0.75, 0.9)
        for c in np.geomspace(0.2, 10, 25)
        for lam in np.geomspace(0.005, 5, 25)
    )
    assert worst > 1e-8


def test_fit_local_optimality_on_noisy_curve():
    k = KernelSpec(solve_u_max(THETA0))
    curve = model_curve(THETA0, k.u_max)
    noise = np.random.default_rng(0).normal(0, 0.003, curve.values.size)
    noise[0] = 0.0
    noisy = RLTCurve(curve.u_grid, curve.values + noise, 1.7, 1000.0, 1 / 78)
    init = TemperedStableParams(0.5, 2.0, 0.2)
    fit = fit_theta(noisy, k, init)
    w = fit.weights

    def obj(th):
        return float(np.sum(w * (fit.l_values - ts_laplace(fit.u_nodes, th)) ** 2))

    assert fit.objective_value == pytest.approx(obj(fit.theta_hat), rel=1e-12)
    assert fit.objective_value <= obj(init)
    gen = np.random.default_rng(1)
    base = fit.theta_hat.as_array()
    for _ in range(50):
        cand = base * np.exp(gen.normal(0, 0.02, 3))
        if cand[0] < 1:
            assert fit.objective_value <= obj(TemperedStableParams.from_array(cand)) + 1e-15


def test_fit_result_serialises():
    k = KernelSpec(solve_u_max(THETA0))
    fit = fit_theta(model_curve(THETA0, k.u_max), k, TemperedStableParams(0.2, 1.0, 0.1))
    d = fit.to_dict()
    assert {"alpha", "c", "lambda", "objective_value", "converged", "iterations"} <= set(d)


# ---------------------------------------------------------------- standard errors


def _fit_and_hac(sigma_scale=1.0):
    k = KernelSpec(solve_u_max(THETA0))
    fit = fit_theta(model_curve(THETA0, k.u_max), k, TemperedStableParams(0.2, 1.0, 0.1))
    u = fit.u_nodes
    # smooth positive definite long-run covariance on the nodes
    sigma = sigma_scale * 0.05 * np.exp(-np.subtract.outer(u, u) ** 2) * np.outer(np.exp(-u / 4), np.exp(-u / 4))
    return fit, HACResult(sigma, "bartlett", 9, u, 300), k


def test_bread_psd():
    fit, _, _ = _fit_and_hac()
    g = _theta_gradient(fit.theta_hat, fit.u_nodes)
    bread = g.T @ (fit.weights[:, None] * g)
    np.testing.assert_allclose(bread, bread.T, rtol=1e-14)
    assert np.linalg.eigvalsh(bread).min() >= -1e-10 * np.trace(bread)


def test_gradient_matches_closed_form():
    u = np.linspace(0.1, 3, 10)
    g = _theta_gradient(THETA0, u)
    h = 1e-6
    for j in range(3):
        up, dn = THETA0.as_array(), THETA0.as_array()
        up[j] += h * up[j]
        dn[j] -= h * dn[j]
        fd = (ts_laplace(u, TemperedStableParams.from_array(up)) - ts_laplace(u, TemperedStableParams.from_array(dn))) / (
            2 * h * THETA0.as_array()[j]
        )
        np.testing.assert_allclose(g[:, j], fd, rtol=1e-5, atol=1e-9)


def test_standard_errors_zero_and_scaling():
    fit, hac, k = _fit_and_hac()
    zero = HACResult(np.zeros_like(hac.sigma), "bartlett", 9, hac.u_grid, 300)
    np.testing.assert_array_equal(fit_standard_errors(fit, zero, k), 0.0)
    se_t = fit_standard_errors(fit, hac, k, t_span=300)
    se_2t = fit_standard_errors(fit, hac, k, t_span=600)
    assert np.all(se_t > 0)
    np.testing.assert_allclose(se_2t**2, se_t**2 / 2, rtol=1e-12)
    cov = fit_covariance(fit, hac, 300)
    np.testing.assert_allclose(cov, cov.T)


def test_standard_errors_grid_mismatch():
    fit, hac, k = _fit_and_hac()
    bad = HACResult(hac.sigma[:10, :10], "bartlett", 9, hac.u_grid[:10], 300)
    with pytest.raises(ParameterError):
        fit_standard_errors(fit, bad)
    with pytest.raises(ParameterError):
        fit_standard_errors(fit, hac, KernelSpec(k.u_max * 2))


def test_singular_bread_raises():
    # lambda so large that the curve barely depends on it
    th = TemperedStableParams(0.0, 1.0, 1e12)
    k = KernelSpec(1.0)
    u = np.linspace(0, 3, 151)
    fit = fit_theta(RLTCurve(u, ts_laplace(u, th), 1.7, 1.0, 1.0), k, th, max_restarts=0, max_iter=5)
    hac = HACResult(np.eye(151), "bartlett", 0, fit.u_nodes, 10)
    with pytest.raises(EstimationError, match="condition number"):
        fit_standard_errors(fit, hac)
