"""Command-line interface: ``simulate``, ``rlt``, ``activity``, ``fit``, ``mc``."""

from __future__ import annotations

import argparse
import json
import logging
import sys
import warnings
from dataclasses import replace
from pathlib import Path

import numpy as np

from .activity import estimate_activity
from .errors import EstimationError, InputError, ParameterError
from .ingest import IngestSpec, curve_csv, ingest, to_jsonable, write_path_csv
from .levy_sim import CIRSpec, PathGrid, RngStream, StableSpec, TemperedStableSpec, simulate_model
from .mc import FULL_SCALE, MCConfig, run_mc, run_table, table_configs
from .md_fit import QuadratureSpec, TemperedStableParams, fit_path, pilot_u_max, ts_laplace
from .rlt_core import (
    activity_correction_se,
    block_stats,
    empirical_laplace,
    fixed_span_variance,
    g_hat,
    hac_covariance,
)

log = logging.getLogger("realized_laplace")

Z95 = 1.959963984540054


class UsageError(Exception):
    pass


def _emit(text: str, target: str | None) -> None:
    if target:
        Path(target).write_text(text)
    else:
        sys.stdout.write(text)


def _parse_u(spec: str) -> np.ndarray:
    try:
        if spec.startswith("grid:"):
            lo, hi, n = spec[5:].split(",")
            return np.linspace(float(lo), float(hi), int(n))
        return np.array([float(x) for x in spec.split(",") if x.strip()])
    except ValueError:
        raise UsageError(f"cannot parse u specification {spec!r}") from None


def _parse_beta(spec: str) -> tuple[str, float | None]:
    if spec.startswith("estimate"):
        _, _, days = spec.partition(":")
        try:
            return "estimate", float(days) if days else None
        except ValueError:
            raise UsageError(f"bad --beta {spec!r}") from None
    try:
        return "fixed", float(spec)
    except ValueError:
        raise UsageError(f"bad --beta {spec!r}; use a number or estimate[:days]") from None


def _add_ingest_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("input", help="CSV file of levels, (timestamp, level) pairs or returns")
    p.add_argument("--delta-n", type=float, help="grid mesh as a fraction of one day (default: sidecar)")
    p.add_argument("--per-day", type=int, help="observations per day; sets delta_n = 1/per_day")
    p.add_argument("--format", default="auto", choices=["auto", "levels", "timestamped"])
    p.add_argument("--returns", action="store_true", help="input column holds increments")
    p.add_argument("--log", action="store_true", help="take logs of levels before differencing")
    p.add_argument("--strict", action="store_true", help="fail on non-equidistant timestamps")


def _ingest_from_args(a) -> PathGrid:
    if a.delta_n is not None and a.per_day is not None:
        raise UsageError("give either --delta-n or --per-day, not both")
    dn = a.delta_n if a.per_day is None else 1.0 / a.per_day
    return ingest(IngestSpec(a.input, dn, a.format, a.returns, a.log, a.strict))


def _add_activity_args(p: argparse.ArgumentParser, bootstrap_default: int) -> None:
    p.add_argument("--p0", type=float, default=0.5, help="first-stage power")
    p.add_argument("--k-frac", type=float, default=0.4, help="second-stage power as a fraction of beta_0")
    p.add_argument("--bootstrap", type=int, default=bootstrap_default, help="day-block bootstrap resamples")
    p.add_argument("--seed", type=int, default=0)


def _resolve_beta(a, path):
    """Returns (beta, beta_se, activity estimate or None)."""
    mode, val = _parse_beta(a.beta)
    if mode == "fixed":
        return val, 0.0, None
    sub = path.head(val) if val is not None else path
    est = estimate_activity(sub, a.p0, a.k_frac, bootstrap=a.bootstrap, rng=RngStream(a.seed, 0))
    log.info("estimated beta %.4f on %.4g days (se %s)", est.beta_hat, sub.t_span, est.se)
    return est.beta_hat, est.se or 0.0, est


def cmd_simulate(a) -> None:
    if a.driver == "stable":
        driver = StableSpec(a.beta, a.c_level)
    else:
        driver = TemperedStableSpec(a.beta, 0.11 if a.c_level is None else a.c_level, a.lam, a.eps_factor)
    v0 = a.cir_v0 if a.cir_v0 == "stationary" else float(a.cir_v0)
    cir = CIRSpec(a.cir_kappa, a.cir_theta, a.cir_sigma, v0)
    path = simulate_model(driver, cir, a.days, a.per_day, RngStream(a.seed, a.stream), substeps=a.substeps)
    text = write_path_csv(path, a.out)
    if not a.out:
        sys.stdout.write(text)


def cmd_rlt(a) -> None:
    u = _parse_u(a.u)
    if u.size == 0:
        raise UsageError("--u is empty")
    if a.differenced and np.all(u == 0):
        raise UsageError("--differenced needs at least one u > 0")
    variance = a.variance
    if variance == "auto":
        variance = "none" if a.differenced else "hac"
    if a.differenced and variance != "none":
        raise UsageError("variance estimates are only available for the non-differenced statistic")
    path = _ingest_from_args(a)
    beta, beta_se, est = _resolve_beta(a, path)
    curve = empirical_laplace(path, beta, u, differenced=a.differenced)

    se = None
    if variance == "hac":
        hac = hac_covariance(block_stats(path, beta, u), a.hac_kernel, a.hac_lags)
        var = np.diag(hac.sigma) / path.t_span
        if est is not None:
            with warnings.catch_warnings():
                warnings.simplefilter("ignore", RuntimeWarning)
                var = var + activity_correction_se(curve, g_hat(path, beta, u), beta_se)
        se = np.sqrt(np.clip(var, 0.0, None))
    elif variance == "fixed-span":
        # infill variance of L_hat: delta_n * (per-unit-time plug-in) / T
        fs = np.array([fixed_span_variance(path, beta, float(x), scale="L").value for x in u])
        se = np.sqrt(np.clip(fs, 0.0, None) * path.delta_n / path.t_span)

    cols = {"u": u, "value": curve.values}
    if se is not None:
        cols["se"] = se
    _emit(curve_csv(cols), a.out_table)
    if a.out_bands:
        if se is None:
            raise UsageError("--out-bands needs a variance estimate")
        bands = {"u": u, "value": curve.values, "lower": curve.values - Z95 * se, "upper": curve.values + Z95 * se}
        Path(a.out_bands).write_text(curve_csv(bands))
    if a.out_json:
        doc = {
            "u": u, "value": curve.values, "se": se, "beta": beta, "beta_se": beta_se,
            "t_span": path.t_span, "delta_n": path.delta_n, "differenced": a.differenced,
            "variance": variance, "activity": est.to_dict() if est else None,
        }
        Path(a.out_json).write_text(json.dumps(to_jsonable(doc), indent=2, sort_keys=True) + "\n")


def cmd_activity(a) -> None:
    path = _ingest_from_args(a)
    sub = path.head(a.days) if a.days else path
    est = estimate_activity(sub, a.p0, a.k_frac, bootstrap=a.bootstrap, rng=RngStream(a.seed, 0))
    _emit(json.dumps(to_jsonable(est.to_dict()), indent=2, sort_keys=True) + "\n", a.out)


def cmd_fit(a) -> None:
    try:
        init = TemperedStableParams(*[float(x) for x in a.init.split(",")])
    except (TypeError, ValueError):
        raise UsageError("--init needs three numbers alpha,c,lambda") from None
    path = _ingest_from_args(a)
    beta, beta_se, est = _resolve_beta(a, path)

    if a.kernel_umax == "auto":
        hi = float(_parse_u(a.u_grid)[-1]) if a.u_grid else 8.0
        u_max = pilot_u_max(path, beta, hi)
    else:
        try:
            u_max = float(a.kernel_umax)
        except ValueError:
            raise UsageError("--kernel-umax must be 'auto' or a number") from None
    fit, hac, cov = fit_path(path, beta, init, u_max, QuadratureSpec(a.nodes, a.span), a.hac_kernel, a.hac_lags)
    fit.meta.update({"beta": beta, "beta_se": beta_se, "t_span": path.t_span, "delta_n": path.delta_n,
                     "hac_kernel": hac.kernel, "hac_lags": hac.lag_count, "covariance": cov})
    _emit(json.dumps(to_jsonable(fit.to_dict()), indent=2, sort_keys=True) + "\n", a.out)

    if a.out_curve:
        band = Z95 * np.sqrt(np.clip(np.diag(hac.sigma), 0.0, None) / path.t_span)
        cols = {
            "u": fit.u_nodes,
            "empirical": fit.l_values,
            "fitted": ts_laplace(fit.u_nodes, fit.theta_hat),
            "lower": fit.l_values - band,
            "upper": fit.l_values + band,
        }
        Path(a.out_curve).write_text(curve_csv(cols))


def cmd_mc(a) -> None:
    base = FULL_SCALE if a.full_scale else MCConfig()
    single = False
    if a.config:
        try:
            d = json.loads(Path(a.config).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise InputError(f"cannot read MC config {a.config}: {exc}") from exc
        if not isinstance(d, dict):
            raise InputError("MC config must be a flat JSON object")
        single = "driver" in d or "beta_mode" in d
        base = MCConfig.from_dict({**_cfg_fields(base), **d})
    over = {}
    if a.reps is not None:
        over["n_reps"] = a.reps
    if a.seed is not None:
        over["seed"] = a.seed
    if a.days is not None:
        over["t_span"] = a.days
    if a.hac:
        over["hac"] = True
    base = replace(base, **over)
    if a.full_scale:
        log.warning("full-scale run: %d replications of %d days; this takes a long time", base.n_reps, base.t_span)
    summary = run_mc(base, a.workers) if single else run_table(table_configs(base), a.workers)
    _emit(summary.to_csv(), a.out)
    if a.detail:
        Path(a.detail).write_text(summary.to_json(detail=True) + "\n")


def _cfg_fields(cfg: MCConfig) -> dict:
    return {k: getattr(cfg, k) for k in cfg.__dataclass_fields__}


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="realized-laplace",
        description="Realized Laplace transform of the stochastic scale of pure-jump processes.",
    )
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("simulate", help="simulate the CIR time-changed stable / tempered stable model")
    s.add_argument("--driver", choices=["stable", "tempered"], default="stable")
    s.add_argument("--beta", type=float, default=1.7, help="activity index in (1,2)")
    s.add_argument("--c-level", type=float, default=None,
                   help="Levy density level (default: A(beta) for stable, 0.11 for tempered)")
    s.add_argument("--lambda", dest="lam", type=float, default=0.25, help="tempering rate")
    s.add_argument("--eps-factor", type=float, default=0.1, help="small-jump threshold / dt^(1/beta)")
    s.add_argument("--cir-kappa", type=float, default=0.02)
    s.add_argument("--cir-theta", type=float, default=1.0)
    s.add_argument("--cir-sigma", type=float, default=0.05)
    s.add_argument("--cir-v0", default="stationary", help="initial scale or 'stationary'")
    s.add_argument("--days", type=float, default=300)
    s.add_argument("--per-day", type=int, default=78)
    s.add_argument("--substeps", type=int, default=1)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--stream", type=int, default=0)
    s.add_argument("--out", help="CSV output (a .json sidecar is written next to it)")
    s.set_defaults(func=cmd_simulate)

    r = sub.add_parser("rlt", help="empirical Laplace transform with standard errors")
    _add_ingest_args(r)
    r.add_argument("--beta", default="estimate", help="number, or estimate[:days] (default: estimate)")
    r.add_argument("--u", default="0.1,0.5,1.25,2.5,3.75", help="comma list or grid:lo,hi,n")
    r.add_argument("--differenced", action="store_true", help="use second differences of the path")
    r.add_argument("--variance", choices=["auto", "hac", "fixed-span", "none"], default="auto")
    r.add_argument("--hac-kernel", choices=["bartlett", "parzen"], default="bartlett")
    r.add_argument("--hac-lags", type=int, default=None, help="default ceil(1.3 T^(1/3))")
    _add_activity_args(r, bootstrap_default=500)
    r.add_argument("--out-table", help="CSV u,value[,se] (default: stdout)")
    r.add_argument("--out-bands", help="CSV u,value,lower,upper with 95%% bands")
    r.add_argument("--out-json", help="JSON with values and metadata")
    r.set_defaults(func=cmd_rlt)

    act = sub.add_parser("activity", help="two-scale power-variation activity estimate")
    _add_ingest_args(act)
    act.add_argument("--days", type=float, default=None, help="use only the first DAYS of data")
    _add_activity_args(act, bootstrap_default=0)
    act.add_argument("--out", help="JSON output (default: stdout)")
    act.set_defaults(func=cmd_activity)

    f = sub.add_parser("fit", help="minimum-distance tempered stable fit of the time-change law")
    _add_ingest_args(f)
    f.add_argument("--beta", default="estimate", help="number, or estimate[:days]")
    f.add_argument("--init", default="0.3,1.0,0.1", help="alpha,c,lambda starting values")
    f.add_argument("--u-grid", default=None, help="pilot grid for u_max, grid:lo,hi,n (upper end used)")
    f.add_argument("--kernel-umax", default="auto", help="'auto' or a positive number")
    f.add_argument("--nodes", type=int, default=151, help="quadrature nodes")
    f.add_argument("--span", type=float, default=3.0, help="quadrature upper limit in units of u_max")
    f.add_argument("--hac-kernel", choices=["bartlett", "parzen"], default="bartlett")
    f.add_argument("--hac-lags", type=int, default=None)
    _add_activity_args(f, bootstrap_default=500)
    f.add_argument("--out", help="JSON output (default: stdout)")
    f.add_argument("--out-curve", help="CSV u,empirical,fitted,lower,upper")
    f.set_defaults(func=cmd_fit)

    m = sub.add_parser("mc", help="Monte Carlo study in the layout of the simulation table")
    m.add_argument("--config", help="flat JSON object with MCConfig fields")
    m.add_argument("--reps", type=int, default=None)
    m.add_argument("--days", type=int, default=None)
    m.add_argument("--seed", type=int, default=None)
    m.add_argument("--workers", type=int, default=1)
    m.add_argument("--hac", action="store_true", help="also compute HAC standard errors and coverage")
    m.add_argument("--full-scale", action="store_true", help="1000 replications of 1200 days (slow)")
    m.add_argument("--out", help="CSV summary (default: stdout)")
    m.add_argument("--detail", help="JSON with per-replication results")
    m.set_defaults(func=cmd_mc)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    a = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if a.verbose else logging.WARNING, format="%(levelname)s: %(message)s")
    try:
        a.func(a)
    except UsageError as exc:
        parser.error(str(exc))
    except (InputError, ParameterError, EstimationError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
