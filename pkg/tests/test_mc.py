import json
import math

import numpy as np
import pytest

from realized_laplace import (
    MCConfig,
    ParameterError,
    RngStream,
    empirical_laplace,
    estimate_activity,
    run_mc,
    run_table,
    simulate_model,
    table_configs,
)
from realized_laplace.mc import FULL_SCALE, TABLE_U, parse_beta_mode

SMALL = MCConfig(n_reps=4, t_span=20, seed=11)


def test_parse_beta_mode():
    assert parse_beta_mode("known") == ("known", None)
    assert parse_beta_mode("estimated") == ("estimated", 252.0)
    assert parse_beta_mode("estimated:30") == ("estimated", 30.0)
    assert parse_beta_mode("fixed:2") == ("fixed", 2.0)
    for bad in ("fixed", "known:3", "guess", "estimated:x"):
        with pytest.raises((ParameterError, ValueError)):
            parse_beta_mode(bad)


@pytest.mark.parametrize(
    "kw",
    [dict(n_reps=0), dict(u_list=()), dict(u_list=(0.5, 0.1)), dict(u_list=(0.0, 1.0)), dict(driver="gauss"), dict(beta_mode="x")],
)
def test_config_validation(kw):
    with pytest.raises(ParameterError):
        MCConfig(**kw)


def test_config_from_dict_and_labels():
    cfg = MCConfig.from_dict({"n_reps": 3, "u_list": [0.5, 1.0], "driver": "tempered", "beta_mode": "fixed:2"})
    assert cfg.u_list == (0.5, 1.0)
    assert cfg.column_label == "TS fixed:2"
    with pytest.raises(ParameterError):
        MCConfig.from_dict({"n_rep": 3})
    assert FULL_SCALE.n_reps == 1000 and FULL_SCALE.t_span == 1200 and FULL_SCALE.m_per_day == 78
    labels = [c.column_label for c in table_configs()]
    assert labels == [
        "S fixed at true value",
        "TS fixed at true value",
        "TS fixed at beta=2",
        "S estimated",
        "TS estimated",
    ]
    assert table_configs(MCConfig(t_span=100))[3].beta_mode == "estimated:100"


def test_single_replication_equals_direct_pipeline():
    cfg = MCConfig(n_reps=1, t_span=30, seed=5)
    col = run_mc(cfg).columns[0]
    path = simulate_model(cfg.driver_spec(), cfg.cir_spec(), 30, 78, RngStream(5, 0))
    direct = empirical_laplace(path, 1.7, TABLE_U).values
    np.testing.assert_array_equal(col.mean, direct)
    np.testing.assert_array_equal(col.std, 0.0)


def test_estimated_mode_uses_initial_window():
    cfg = MCConfig(n_reps=1, t_span=30, seed=5, beta_mode="estimated:10")
    col = run_mc(cfg).columns[0]
    path = simulate_model(cfg.driver_spec(), cfg.cir_spec(), 30, 78, RngStream(5, 0))
    beta = estimate_activity(path.head(10)).beta_hat
    assert col.beta_hat_mean == beta
    np.testing.assert_array_equal(col.mean, empirical_laplace(path, beta, TABLE_U).values)


def test_worker_count_invariance():
    cfgs = table_configs(MCConfig(n_reps=4, t_span=20, seed=3, hac=True, bootstrap=30))
    one = run_table(cfgs, workers=1)
    two = run_table(cfgs, workers=2)
    assert one.to_json(detail=True) == two.to_json(detail=True)
    assert one.to_csv() == two.to_csv()


def test_summary_layout_and_invariants():
    s = run_table(table_configs(SMALL))
    lines = s.to_csv().strip().splitlines()
    assert lines[0].split(",")[:3] == ["u", "stat", "S fixed at true value"]
    assert len(lines) == 1 + 3 * len(TABLE_U) + 2
    assert lines[1].startswith("0.10,true value,0.9051")
    for c in s.columns:
        assert np.all(c.std >= 0)
        assert np.all(np.abs(c.mean) <= 1)
        assert c.n_ok + c.n_failed == SMALL.n_reps
    doc = json.loads(s.to_json())
    assert len(doc["columns"]) == 5
    assert "replications" not in doc["columns"][0]


def test_hac_fields():
    col = run_mc(MCConfig(n_reps=3, t_span=20, hac=True, beta_mode="estimated:10", bootstrap=30)).columns[0]
    assert col.mean_se.shape == (5,)
    assert np.all((col.coverage >= 0) & (col.coverage <= 1))
    rec = col.replications[0]
    assert {"hac_var", "inflation_var", "se", "beta_se", "lag_count"} <= set(rec)
    np.testing.assert_allclose(np.square(rec["se"]), np.add(rec["hac_var"], rec["inflation_var"]))


def test_failed_replications_are_logged(caplog):
    cfg = MCConfig(n_reps=3, t_span=10, beta_mode="estimated:0.03")
    with caplog.at_level("WARNING"):
        col = run_mc(cfg).columns[0]
    assert col.n_failed == 3 and col.n_ok == 0
    assert all("InputError" in f["error"] for f in col.failures)
    assert "replication 0 failed" in caplog.text


def test_misspecified_beta_bias_direction():
    base = MCConfig(n_reps=10, t_span=50, driver="tempered", seed=2)
    known, two = run_table([base, MCConfig(**{**base.__dict__, "beta_mode": "fixed:2"})]).columns
    assert np.all(two.mean > known.mean)


def test_std_scales_with_span():
    short = run_mc(MCConfig(n_reps=100, t_span=150, seed=4)).columns[0]
    long = run_mc(MCConfig(n_reps=100, t_span=300, seed=4)).columns[0]
    ratio = short.std / long.std
    assert np.all(long.std < short.std)
    assert np.all(np.abs(ratio / math.sqrt(2) - 1) <= 0.3)
