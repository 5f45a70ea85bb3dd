"""Monte Carlo replication harness for the RLT estimators.

Each replication draws one path of the CIR time-changed model from the
substream ``RngStream(seed, rep)``. Configurations that share a simulation
design are evaluated on the same paths, so a five-column table run simulates
each driver only once.
"""

from __future__ import annotations

import csv
import io
import json
import logging
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, replace

import numpy as np

from .activity import estimate_activity
from .errors import EstimationError, InputError, ParameterError
from .levy_sim import CIRSpec, RngStream, StableSpec, TemperedStableSpec, gamma_laplace, simulate_model
from .rlt_core import activity_correction_se, block_stats, empirical_laplace, g_hat, hac_covariance

logger = logging.getLogger(__name__)

__all__ = [
    "MCConfig",
    "MCColumn",
    "MCSummary",
    "parse_beta_mode",
    "run_replication",
    "run_mc",
    "run_table",
    "table_configs",
]

TABLE_U = (0.10, 0.50, 1.25, 2.50, 3.75)


@dataclass(frozen=True)
class MCConfig:
    """One column of a Monte Carlo table.

    ``beta_mode`` is ``"known"``, ``"estimated"`` / ``"estimated:<days>"``
    or ``"fixed:<value>"``. ``c_level=None`` means A(beta) for the stable
    driver and 0.11 for the tempered stable one.
    """

    n_reps: int = 200
    t_span: int = 300
    m_per_day: int = 78
    driver: str = "stable"
    beta_mode: str = "known"
    u_list: tuple = TABLE_U
    seed: int = 0
    beta: float = 1.7
    c_level: float | None = None
    lambda_temper: float = 0.25
    eps_factor: float = 0.1
    kappa_mr: float = 0.02
    theta_mean: float = 1.0
    sigma_vol: float = 0.05
    v0: float | str = "stationary"
    substeps: int = 1
    hac: bool = False
    hac_kernel: str = "bartlett"
    hac_lags: int | None = None
    bootstrap: int = 500
    p0: float = 0.5
    k_frac: float = 0.4
    label: str | None = None

    def __post_init__(self):
        if self.n_reps < 1:
            raise ParameterError("n_reps must be at least 1")
        u = np.asarray(self.u_list, dtype=float)
        if u.size == 0 or np.any(u <= 0) or np.any(np.diff(u) <= 0):
            raise ParameterError("u_list must be non-empty, positive and ascending")
        if self.driver not in ("stable", "tempered"):
            raise ParameterError(f"unknown driver {self.driver!r}")
        parse_beta_mode(self.beta_mode)
        object.__setattr__(self, "u_list", tuple(float(x) for x in self.u_list))

    @property
    def column_label(self) -> str:
        if self.label:
            return self.label
        drv = "S" if self.driver == "stable" else "TS"
        return f"{drv} {self.beta_mode}"

    def driver_spec(self):
        if self.driver == "stable":
            return StableSpec(self.beta, self.c_level)
        c = 0.11 if self.c_level is None else self.c_level
        return TemperedStableSpec(self.beta, c, self.lambda_temper, self.eps_factor)

    def cir_spec(self) -> CIRSpec:
        return CIRSpec(self.kappa_mr, self.theta_mean, self.sigma_vol, self.v0)

    def sim_key(self) -> tuple:
        return (
            self.n_reps, self.t_span, self.m_per_day, self.driver, self.seed, self.beta,
            self.c_level, self.lambda_temper, self.eps_factor, self.kappa_mr,
            self.theta_mean, self.sigma_vol, self.v0, self.substeps,
        )

    @classmethod
    def from_dict(cls, d: dict) -> "MCConfig":
        known = {f for f in cls.__dataclass_fields__}
        extra = set(d) - known
        if extra:
            raise ParameterError(f"unknown MC config keys: {sorted(extra)}")
        d = dict(d)
        if "u_list" in d:
            d["u_list"] = tuple(d["u_list"])
        return cls(**d)


def parse_beta_mode(mode: str) -> tuple[str, float | None]:
    """``'known'`` -> ('known', None); ``'estimated:252'`` -> ('estimated', 252.0);
    ``'fixed:2'`` -> ('fixed', 2.0)."""
    name, _, arg = str(mode).partition(":")
    if name == "known" and not arg:
        return name, None
    if name == "estimated":
        return name, float(arg) if arg else 252.0
    if name == "fixed" and arg:
        return name, float(arg)
    raise ParameterError(f"invalid beta_mode {mode!r}")


def run_replication(configs: list[MCConfig], rep: int) -> list[dict]:
    """Evaluate every config (all sharing one simulation design) on replication ``rep``."""
    base = configs[0]
    rng = RngStream(base.seed, rep)
    path = simulate_model(base.driver_spec(), base.cir_spec(), base.t_span, base.m_per_day, rng, base.substeps)
    u = np.asarray(base.u_list)
    out = []
    for cfg in configs:
        rec = {"rep": rep}
        try:
            mode, arg = parse_beta_mode(cfg.beta_mode)
            beta_se = 0.0
            if mode == "known":
                beta = cfg.beta
            elif mode == "fixed":
                beta = arg
            else:
                est = estimate_activity(
                    path.head(arg), cfg.p0, cfg.k_frac,
                    bootstrap=cfg.bootstrap if cfg.hac else 0,
                    rng=rng.child(2),
                )
                beta = est.beta_hat
                beta_se = est.se or 0.0
                rec["beta_hat"] = beta
                rec["beta_se"] = est.se
                if not 1.0 < beta <= 2.0:
                    raise EstimationError(f"estimated beta {beta:.4f} outside (1, 2]")
            rec["beta"] = beta
            curve = empirical_laplace(path, beta, u)
            rec["values"] = curve.values.tolist()
            if cfg.hac:
                hac = hac_covariance(block_stats(path, beta, u), cfg.hac_kernel, cfg.hac_lags)
                var = np.diag(hac.sigma) / path.t_span
                rec["hac_var"] = var.tolist()
                rec["lag_count"] = hac.lag_count
                if mode == "estimated":
                    with warnings.catch_warnings():
                        warnings.simplefilter("ignore", RuntimeWarning)
                        infl = activity_correction_se(curve, g_hat(path, beta, u), beta_se)
                    var = var + infl
                    rec["inflation_var"] = infl.tolist()
                rec["se"] = np.sqrt(var).tolist()
        except (EstimationError, ParameterError, InputError) as exc:
            rec["error"] = f"{type(exc).__name__}: {exc}"
        out.append(rec)
    return out


def _run_chunk(args):
    configs, reps = args
    return [run_replication(configs, r) for r in reps]


@dataclass
class MCColumn:
    label: str
    config: MCConfig
    u_list: tuple
    true_values: np.ndarray
    mean: np.ndarray
    std: np.ndarray
    n_ok: int
    n_failed: int
    failures: list = field(default_factory=list)
    mean_se: np.ndarray | None = None
    coverage: np.ndarray | None = None
    beta_hat_mean: float | None = None
    replications: list = field(default_factory=list)


@dataclass
class MCSummary:
    columns: list

    def column(self, label: str) -> MCColumn:
        for c in self.columns:
            if c.label == label:
                return c
        raise KeyError(label)

    def to_csv(self) -> str:
        """Rows per u: true value, mean, std; one column per configuration."""
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["u", "stat"] + [c.label for c in self.columns])
        u_list = self.columns[0].u_list
        for k, u in enumerate(u_list):
            w.writerow([f"{u:.2f}", "true value"] + [f"{c.true_values[k]:.4f}" for c in self.columns])
            w.writerow([f"{u:.2f}", "mean"] + [f"{c.mean[k]:.4f}" for c in self.columns])
            w.writerow([f"{u:.2f}", "std"] + [f"{c.std[k]:.4f}" for c in self.columns])
        w.writerow(["", "replications ok"] + [str(c.n_ok) for c in self.columns])
        w.writerow(["", "replications failed"] + [str(c.n_failed) for c in self.columns])
        return buf.getvalue()

    def to_json(self, detail: bool = False) -> str:
        cols = []
        for c in self.columns:
            d = {
                "label": c.label,
                "config": asdict(c.config),
                "u": list(c.u_list),
                "true_value": c.true_values.tolist(),
                "mean": c.mean.tolist(),
                "std": c.std.tolist(),
                "n_ok": c.n_ok,
                "n_failed": c.n_failed,
                "failures": c.failures,
            }
            if c.mean_se is not None:
                d["mean_se"] = c.mean_se.tolist()
                d["coverage95"] = c.coverage.tolist()
            if c.beta_hat_mean is not None:
                d["beta_hat_mean"] = c.beta_hat_mean
            if detail:
                d["replications"] = c.replications
            cols.append(d)
        return json.dumps({"columns": cols}, indent=2, sort_keys=True)


def _summarise(cfg: MCConfig, recs: list[dict]) -> MCColumn:
    ok = [r for r in recs if "error" not in r]
    failed = [{"rep": r["rep"], "error": r["error"]} for r in recs if "error" in r]
    for f in failed:
        logger.warning("replication %d failed (%s): %s", f["rep"], cfg.column_label, f["error"])
    true = np.asarray(gamma_laplace(np.asarray(cfg.u_list), cfg.cir_spec()))
    nu = len(cfg.u_list)
    vals = np.array([r["values"] for r in ok]).reshape(len(ok), nu)
    mean = vals.mean(axis=0) if ok else np.full(nu, np.nan)
    std = vals.std(axis=0, ddof=1) if len(ok) > 1 else np.zeros(nu)
    col = MCColumn(cfg.column_label, cfg, cfg.u_list, true, mean, std, len(ok), len(failed), failed, replications=recs)
    if cfg.hac and ok:
        se = np.array([r["se"] for r in ok])
        col.mean_se = se.mean(axis=0)
        col.coverage = (np.abs(vals - true) <= 1.959963984540054 * se).mean(axis=0)
    bh = [r["beta_hat"] for r in ok if "beta_hat" in r]
    if bh:
        col.beta_hat_mean = float(np.mean(bh))
    return col


def run_table(configs: list[MCConfig], workers: int = 1) -> MCSummary:
    """Run several configurations, sharing paths between those with equal designs.

    Results do not depend on ``workers``: replications are seeded by index
    and reduced in index order.
    """
    groups: dict[tuple, list[int]] = {}
    for i, cfg in enumerate(configs):
        groups.setdefault(cfg.sim_key(), []).append(i)

    results: dict[int, list[dict]] = {}
    for idx in groups.values():
        group = [configs[i] for i in idx]
        reps = list(range(group[0].n_reps))
        if workers <= 1:
            per_rep = [run_replication(group, r) for r in reps]
        else:
            chunks = [reps[i::workers] for i in range(workers)]
            with ProcessPoolExecutor(max_workers=workers) as ex:
                parts = list(ex.map(_run_chunk, [(group, ch) for ch in chunks]))
            per_rep = [None] * len(reps)
            for ch, part in zip(chunks, parts):
                for r, res in zip(ch, part):
                    per_rep[r] = res
        for j, i in enumerate(idx):
            results[i] = [per_rep[r][j] for r in reps]
    return MCSummary([_summarise(cfg, results[i]) for i, cfg in enumerate(configs)])


def run_mc(config: MCConfig, workers: int = 1) -> MCSummary:
    return run_table([config], workers)


def table_configs(base: MCConfig = MCConfig()) -> list[MCConfig]:
    """The five columns of the simulation table, on ``base``'s design."""
    cols = [
        ("stable", "known", "S fixed at true value"),
        ("tempered", "known", "TS fixed at true value"),
        ("tempered", "fixed:2", "TS fixed at beta=2"),
        ("stable", "estimated:252", "S estimated"),
        ("tempered", "estimated:252", "TS estimated"),
    ]
    out = []
    for drv, mode, label in cols:
        days = min(252, base.t_span)
        mode = f"estimated:{days}" if mode.startswith("estimated") else mode
        out.append(replace(base, driver=drv, beta_mode=mode, label=label))
    return out


FULL_SCALE = MCConfig(n_reps=1000, t_span=1200, m_per_day=78)
