"""A small seeded experiment: throughput against MS speed.

The harness runs clustering once per drop and precoding once per fading
block, writes one CSV row per (drop, block, method, precoder), and
summarizes with means and standard errors. Re-running with the same seed
reproduces the CSV byte for byte.
"""

import tempfile
from pathlib import Path

from bscluster import ExperimentPlan, Scenario, run_experiment, summarize

plan = ExperimentPlan(
    scenario=Scenario.paper(num_cells=6),
    num_drops=4,
    num_fading_per_drop=2,
    methods=("formation-aos", "singletons", "oracle"),
    precoders=("iia", "robust-wmmse"),
    sweep=("ms_speed_kmh", (3.0, 30.0, 90.0)),
    master_seed=7,
)

with tempfile.TemporaryDirectory() as tmp:
    out = Path(tmp) / "speed.csv"
    result = run_experiment(plan, out)
    print(f"{plan.num_rows} rows written")
    print(summarize(out))
    again = run_experiment(plan).csv_text
    print("re-run identical:", again == out.read_text())
