import csv
import io
import json
import math

import numpy as np
import pytest

from bscluster.errors import BudgetError, ConfigError, MalformedResultsError
from bscluster.harness import (
    CSV_COLUMNS,
    ExperimentPlan,
    drop_seed,
    load_plan,
    plan_from_dict,
    read_rows,
    run_experiment,
    summarize,
    summarize_rows,
    wmmse_throughput,
)
from bscluster.longterm import CoalitionStructure, sum_throughput
from bscluster.netgen import Scenario, draw_channels, generate_network

SMALL = Scenario.paper(num_cells=5)


def rows_of(result):
    return list(csv.DictReader(io.StringIO(result.csv_text)))


def test_singletons_iia_is_closed_form_and_fading_independent():
    plan = ExperimentPlan(scenario=SMALL, num_drops=2, num_fading_per_drop=3, methods=("singletons",),
                          precoders=("iia",), master_seed=4)
    rows = rows_of(run_experiment(plan))
    assert len(rows) == 6
    for drop in range(2):
        net = generate_network(SMALL, drop_seed(4, drop))
        expected = sum_throughput(CoalitionStructure.singletons(5), SMALL, net)
        values = {float(r["sum_throughput"]) for r in rows if int(r["drop"]) == drop}
        assert values == {expected}


def test_deterministic_csv(tmp_path):
    plan = ExperimentPlan(scenario=SMALL, num_drops=2, num_fading_per_drop=1,
                          methods=("formation-aos", "singletons"), precoders=("iia", "robust-wmmse"),
                          master_seed=11, wmmse_max_iters=20)
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    run_experiment(plan, a)
    run_experiment(plan, b)
    assert a.read_bytes() == b.read_bytes()
    assert b"\r" not in a.read_bytes()
    meta = json.loads((tmp_path / "a.csv.meta.json").read_text())
    assert meta["plan"]["master_seed"] == 11 and meta["num_rows"] == 8
    assert "PCG64" in meta["rng_algorithm"]
    assert meta["plan"]["scenario"]["num_cells"] == 5 and meta["version"]


def test_parallel_workers_give_same_bytes():
    base = dict(scenario=SMALL, num_drops=3, num_fading_per_drop=1, methods=("formation-aos", "grand"),
                master_seed=2)
    serial = run_experiment(ExperimentPlan(**base)).csv_text
    parallel = run_experiment(ExperimentPlan(**base, workers=2)).csv_text
    assert serial == parallel


def test_row_count_and_order_with_sweep():
    plan = ExperimentPlan(scenario=SMALL, num_drops=2, num_fading_per_drop=2,
                          methods=("formation-aos", "formation-attach", "singletons"),
                          precoders=("iia",), sweep=("beta", (0.0, 0.5, 0.65)))
    result = run_experiment(plan)
    rows = rows_of(result)
    assert len(rows) == plan.num_rows == 3 * 2 * 2 * 3
    keys = [(plan.sweep_values.index(float(r["sweep"])), int(r["drop"]), int(r["fading"]),
             plan.methods.index(r["method"])) for r in rows]
    assert keys == sorted(keys)
    assert list(rows[0].keys()) == CSV_COLUMNS


def test_clustering_ignores_fading_seeds():
    plan = ExperimentPlan(scenario=SMALL, num_drops=3, num_fading_per_drop=3, methods=("formation-aos",))
    rows = rows_of(run_experiment(plan))
    for drop in range(3):
        sub = [r for r in rows if int(r["drop"]) == drop]
        assert len({(r["mean_coalition_size"], r["num_proposals"]) for r in sub}) == 1
    fewer = rows_of(run_experiment(ExperimentPlan(scenario=SMALL, num_drops=3, num_fading_per_drop=1,
                                                  methods=("formation-aos",))))
    for r in fewer:
        match = [x for x in rows if x["drop"] == r["drop"]][0]
        assert match["num_proposals"] == r["num_proposals"]


def test_cell_count_sweep_and_oracle_ratio():
    plan = ExperimentPlan(scenario=SMALL, num_drops=3, num_fading_per_drop=1,
                          methods=("formation-aos", "oracle"), sweep=("I", (4, 6)))
    result = run_experiment(plan)
    rows = rows_of(result)
    for value in ("4", "6"):
        form = [float(r["sum_throughput"]) for r in rows if r["sweep"] == value and r["method"] == "formation-aos"]
        orac = [float(r["sum_throughput"]) for r in rows if r["sweep"] == value and r["method"] == "oracle"]
        assert all(o >= f for f, o in zip(form, orac))
    assert "/oracle" in result.summary


def test_wmmse_throughput_gates_and_phases():
    sc = Scenario.paper(num_cells=4)
    net = generate_network(sc, 0)
    ch = draw_channels(net, sc, 1)
    S = CoalitionStructure([[0, 1], [2], [3]])
    value = wmmse_throughput(S, ch, sc, net, max_iters=30)
    assert value > 0
    # an all-infeasible network earns nothing
    assert wmmse_throughput(S, ch, sc, net.with_coherence(5), max_iters=30) == 0.0
    # without phase 2 only the (smaller) time-shared part remains
    phase1 = wmmse_throughput(S, ch, sc.replace(beta=0.0), net, max_iters=30)
    assert 0 < phase1


def test_plan_validation():
    with pytest.raises(ConfigError) as err:
        ExperimentPlan(methods=("kmeans",))
    assert err.value.key == "experiment.methods"
    with pytest.raises(ConfigError):
        ExperimentPlan(precoders=("maxsinr",))
    with pytest.raises(ConfigError):
        ExperimentPlan(num_drops=0)
    with pytest.raises(ConfigError) as err:
        ExperimentPlan(sweep=("speed", (1.0,)))
    assert err.value.key == "experiment.sweep.key"
    with pytest.raises(ConfigError):
        ExperimentPlan(sweep=("beta", (1.2,)))
    with pytest.raises(ConfigError):
        ExperimentPlan(sweep=("I", (4.5,)))
    with pytest.raises(BudgetError):
        ExperimentPlan(scenario=Scenario.paper(num_cells=14), methods=("oracle",))


def test_plan_from_dict():
    plan = plan_from_dict({
        "scenario": {"num_cells": 6, "ms_speed_kmh": 3.0},
        "experiment": {"num_drops": 3, "num_fading_per_drop": 2, "methods": ["formation-aos", "oracle"],
                       "precoders": ["iia", "naive-wmmse"], "master_seed": 5,
                       "sweep": {"key": "snr_db", "values": [10, 20]}},
        "wmmse": {"max_iters": 50, "rel_tol": 1e-4},
        "formation": {"budget": 30, "max_coalition_size": 4},
        "oracle": {"max_cells": 10},
    })
    assert plan.scenario.num_cells == 6 and plan.num_drops == 3
    assert plan.sweep == ("snr_db", (10, 20)) and plan.scenario_at(0).tx_snr_db == 10.0
    assert (plan.wmmse_max_iters, plan.wmmse_rel_tol, plan.budget, plan.max_coalition_size) == (50, 1e-4, 30, 4)


@pytest.mark.parametrize("data, key", [
    ({"experiment": {"num_drop": 3}}, "experiment.num_drop"),
    ({"experiment": {"num_drops": "3"}}, "experiment.num_drops"),
    ({"experiment": {"sweep": {"key": "beta", "value": [0.1]}}}, "experiment.sweep.value"),
    ({"experiment": {"sweep": {"key": "beta", "values": ["a"]}}}, "experiment.sweep.values"),
    ({"wmmse": {"tol": 1e-3}}, "wmmse.tol"),
    ({"scenario": {"bogus": 1}}, "scenario.bogus"),
    ({"plots": {}}, "plots"),
])
def test_config_errors_carry_key_path(data, key):
    with pytest.raises(ConfigError) as err:
        plan_from_dict(data)
    assert err.value.key == key
    assert str(err.value).startswith(key)


def test_load_plan_with_overrides(tmp_path):
    p = tmp_path / "c.toml"
    p.write_text('[scenario]\nnum_cells = 4\n[experiment]\nnum_drops = 2\nmethods = ["singletons"]\n')
    plan = load_plan(p, num_drops=None, master_seed=9)
    assert plan.num_drops == 2 and plan.master_seed == 9 and plan.methods == ("singletons",)


# --------------------------------------------------------------------------
# Summaries
# --------------------------------------------------------------------------
def write_csv(path, rows):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(CSV_COLUMNS)
        w.writerows(rows)


def test_summarize_empty(tmp_path):
    p = tmp_path / "e.csv"
    p.write_text("")
    assert summarize(p) == ""
    write_csv(p, [])
    assert summarize(p) == ""
    assert summarize_rows([]) == ""


def test_summarize_single_row(tmp_path):
    p = tmp_path / "one.csv"
    write_csv(p, [["", 0, 0, "singletons", "iia", 12.5, 1.0, 0]])
    report = summarize(p)
    assert "12.5000" in report and "singletons" in report


def test_summarize_synthetic_means(tmp_path):
    rng = np.random.default_rng(0)
    values = rng.uniform(0, 100, size=100)
    rows = [["", i // 2, i % 2, "formation-aos" if i < 50 else "oracle", "iia", repr(float(v)), 2.0, 3]
            for i, v in enumerate(values)]
    p = tmp_path / "s.csv"
    write_csv(p, rows)
    records = read_rows(p)
    assert len(records) == 100
    form = [r["sum_throughput"] for r in records if r["method"] == "formation-aos"]
    assert math.fsum(form) / 50 == pytest.approx(values[:50].sum() / 50, abs=1e-12)
    report = summarize(p)
    lines = {line.split()[1]: line.split() for line in report.splitlines()[1:]}
    assert float(lines["formation-aos"][4]) == pytest.approx(values[:50].mean(), abs=5e-5)
    assert float(lines["formation-aos"][5]) == pytest.approx(values[:50].std(ddof=1) / math.sqrt(50), abs=5e-5)
    assert float(lines["formation-aos"][8]) == pytest.approx(values[:50].mean() / values[50:].mean(), abs=5e-5)


@pytest.mark.parametrize("text", [
    "a,b\n1,2\n",
    ",".join(CSV_COLUMNS) + "\n,0,0,x,iia,notanumber,1.0,0\n",
    ",".join(CSV_COLUMNS) + "\n,0,0,x,iia\n",
])
def test_summarize_malformed(tmp_path, text):
    p = tmp_path / "bad.csv"
    p.write_text(text)
    with pytest.raises(MalformedResultsError):
        summarize(p)
    with pytest.raises(MalformedResultsError):
        summarize(tmp_path / "missing.csv")
