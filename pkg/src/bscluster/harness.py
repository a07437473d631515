"""Monte Carlo experiments: drops x fading blocks x clustering methods x precoders.

Every drop gets its own seed derived from the master seed, so a drop's
result does not depend on which worker ran it or on the sweep value
(common random numbers across the sweep). Fading blocks use a separate
stream, which keeps the clustering decision, made from statistics only,
independent of the fading seeds.
"""

from __future__ import annotations

import csv
import dataclasses
import io
import json
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Mapping, Sequence

import numpy as np

from .coalition import ATTACH_ONLY, ATTACH_OR_SUPPLANT, run_formation
from .errors import BudgetError, ConfigError, MalformedResultsError
from .longterm import CoalitionStructure, ThroughputModel, csi_feasible, prelog_phase1
from .netgen import (
    RNG_ALGORITHM,
    ChannelRealization,
    Network,
    Scenario,
    _load_toml,
    draw_channels,
    generate_network,
    scenario_from_dict,
)
from .oracle import EnumerationBudget, optimal_structure
from .precoding.wmmse import WmmseProblem, _solve, coalition_mask

__all__ = [
    "METHODS",
    "PRECODERS",
    "SWEEP_KEYS",
    "CSV_COLUMNS",
    "ExperimentPlan",
    "ResultRow",
    "ExperimentResult",
    "cluster",
    "wmmse_throughput",
    "run_experiment",
    "load_plan",
    "plan_from_dict",
    "read_rows",
    "summarize",
    "summarize_rows",
    "drop_seed",
    "fading_seed",
]

METHODS = ("formation-aos", "formation-attach", "formation-aos-ignore-ia", "singletons", "grand", "oracle")
PRECODERS = ("iia", "robust-wmmse", "naive-wmmse")
SWEEP_KEYS = {"snr_db": "tx_snr_db", "ms_speed_kmh": "ms_speed_kmh", "beta": "beta", "I": "num_cells"}
CSV_COLUMNS = ["sweep", "drop", "fading", "method", "precoder", "sum_throughput", "mean_coalition_size",
               "num_proposals"]


@dataclass(frozen=True)
class ExperimentPlan:
    """Everything needed to reproduce one experiment.

    ``sweep`` is ``None`` or ``(key, values)`` with ``key`` in
    :data:`SWEEP_KEYS`. ``budget`` and ``max_coalition_size`` are passed to
    the formation methods; ``timing`` adds a wall-time column (which makes
    the CSV non-reproducible byte for byte).
    """

    scenario: Scenario = field(default_factory=Scenario.paper)
    num_drops: int = 25
    num_fading_per_drop: int = 5
    methods: tuple[str, ...] = ("formation-aos", "singletons", "grand")
    precoders: tuple[str, ...] = ("iia",)
    sweep: tuple[str, tuple[float, ...]] | None = None
    master_seed: int = 0
    wmmse_max_iters: int = 200
    wmmse_rel_tol: float = 1e-3
    budget: int | None = None
    max_coalition_size: int | None = None
    oracle_max_cells: int = 13
    workers: int = 1
    timing: bool = False
    log_dir: str | None = None

    def __post_init__(self):
        object.__setattr__(self, "methods", tuple(self.methods))
        object.__setattr__(self, "precoders", tuple(self.precoders))
        for name in ("num_drops", "num_fading_per_drop", "workers", "wmmse_max_iters"):
            value = getattr(self, name)
            if isinstance(value, bool) or not isinstance(value, int) or value < 1:
                raise ConfigError("must be a positive integer", key=f"experiment.{name}")
        if not self.methods:
            raise ConfigError("at least one method is required", key="experiment.methods")
        if not self.precoders:
            raise ConfigError("at least one precoder is required", key="experiment.precoders")
        for m in self.methods:
            if m not in METHODS:
                raise ConfigError(f"unknown method {m!r}", key="experiment.methods")
        for p in self.precoders:
            if p not in PRECODERS:
                raise ConfigError(f"unknown precoder {p!r}", key="experiment.precoders")
        if len(set(self.methods)) != len(self.methods) or len(set(self.precoders)) != len(self.precoders):
            raise ConfigError("duplicate entries", key="experiment")
        if not self.wmmse_rel_tol > 0:
            raise ConfigError("must be positive", key="wmmse.rel_tol")
        if self.sweep is not None:
            key, values = self.sweep
            if key not in SWEEP_KEYS:
                raise ConfigError(f"unknown sweep key {key!r} (expected one of {sorted(SWEEP_KEYS)})",
                                  key="experiment.sweep.key")
            if len(values) == 0:
                raise ConfigError("empty value list", key="experiment.sweep.values")
            object.__setattr__(self, "sweep", (key, tuple(values)))
        for s in range(len(self.sweep_values)):
            self.scenario_at(s)  # validates every swept scenario
        if "oracle" in self.methods:
            worst = max(self.scenario_at(s).num_cells for s in range(len(self.sweep_values)))
            if worst > self.oracle_max_cells:
                raise BudgetError(f"oracle requested for I={worst} above the enumeration budget "
                                  f"of {self.oracle_max_cells} cells")

    @property
    def sweep_values(self) -> tuple:
        return (None,) if self.sweep is None else self.sweep[1]

    def scenario_at(self, sweep_index: int) -> Scenario:
        if self.sweep is None:
            return self.scenario
        key, values = self.sweep
        value = values[sweep_index]
        name = SWEEP_KEYS[key]
        if name == "num_cells":
            if float(value) != int(value):
                raise ConfigError("cell counts must be integers", key="experiment.sweep.values")
            value = int(value)
        else:
            value = float(value)
        try:
            return self.scenario.replace(**{name: value})
        except ConfigError as err:
            raise ConfigError(f"sweep value {value!r}: {err}", key="experiment.sweep.values") from None

    @property
    def num_rows(self) -> int:
        return len(self.sweep_values) * self.num_drops * self.num_fading_per_drop * len(self.methods) * len(
            self.precoders)

    def to_dict(self) -> dict[str, Any]:
        out = dataclasses.asdict(self)
        out["scenario"] = dataclasses.asdict(self.scenario)
        out["methods"] = list(self.methods)
        out["precoders"] = list(self.precoders)
        if self.sweep is not None:
            out["sweep"] = {"key": self.sweep[0], "values": list(self.sweep[1])}
        return out


@dataclass(frozen=True)
class ResultRow:
    sweep: Any
    drop: int
    fading: int
    method: str
    precoder: str
    sum_throughput: float
    mean_coalition_size: float
    num_proposals: int
    wall_time: float = 0.0

    def cells(self, timing: bool = False) -> list[str]:
        sweep = "" if self.sweep is None else _fmt(self.sweep)
        out = [sweep, str(self.drop), str(self.fading), self.method, self.precoder,
               _fmt(self.sum_throughput), _fmt(self.mean_coalition_size), str(self.num_proposals)]
        if timing:
            out.append(_fmt(self.wall_time))
        return out


@dataclass
class ExperimentResult:
    plan: ExperimentPlan
    rows: list[ResultRow]
    csv_text: str
    summary: str


def _fmt(x) -> str:
    if isinstance(x, (int, np.integer)) and not isinstance(x, bool):
        return str(int(x))
    return repr(float(x))


def drop_seed(master_seed: int, drop: int) -> np.random.SeedSequence:
    return np.random.SeedSequence(master_seed, spawn_key=(drop, 0))


def fading_seed(master_seed: int, drop: int, fading: int) -> np.random.SeedSequence:
    return np.random.SeedSequence(master_seed, spawn_key=(drop, 1, fading))


# --------------------------------------------------------------------------
# Building blocks
# --------------------------------------------------------------------------
def cluster(method: str, scenario: Scenario, network: Network, *, budget: int | None = None,
            max_coalition_size: int | None = None, oracle_max_cells: int = 13):
    """Coalition structure chosen by ``method`` (statistics only).

    Returns ``(structure, trace_or_None)``.
    """
    I = network.num_cells
    if method == "singletons":
        return CoalitionStructure.singletons(I), None
    if method == "grand":
        return CoalitionStructure.grand(I), None
    if method == "oracle":
        S, _ = optimal_structure(scenario, network, budget=EnumerationBudget(oracle_max_cells, max_coalition_size))
        return S, None
    check_iia = method != "formation-aos-ignore-ia"
    mode = ATTACH_ONLY if method == "formation-attach" else ATTACH_OR_SUPPLANT
    model = ThroughputModel(scenario, network, check_iia=check_iia)
    return run_formation(model, budgets=budget, mode=mode, max_coalition_size=max_coalition_size)


def wmmse_throughput(structure: CoalitionStructure, channels: ChannelRealization, scenario: Scenario,
                     network: Network, *, robust: bool = True, max_iters: int = 200,
                     rel_tol: float = 1e-3) -> float:
    """Sum throughput with WMMSE filters in both transmission phases.

    Phase 1 runs WMMSE separately inside every coalition (the others are
    silent in that slot); phase 2 runs the coalition-aware WMMSE on the
    whole network and is scored on the true channels. Each MS earns
    ``alpha1 r1 + beta r2`` when its coalition can acquire CSI in time,
    nothing otherwise. No IIA feasibility gate applies.
    """
    H = channels.H
    K = H.shape[1]
    d = scenario.streams_per_ms
    total = 0.0
    for coalition in structure.coalitions:
        if not csi_feasible(coalition, scenario, network):
            continue
        alpha1 = prelog_phase1(coalition, scenario, network)
        if alpha1 > 0:
            idx = sorted(coalition)
            sub = WmmseProblem(H[np.ix_(idx, range(K), idx)], network.gains[np.ix_(idx, range(K), idx)],
                               network.powers[idx], np.ones((len(idx), len(idx)), dtype=bool), network.noise,
                               robust=False)
            total += alpha1 * float(_solve(sub, None, d, max_iters, rel_tol, False, None).true_rates.sum())
    if scenario.beta > 0:
        prob = WmmseProblem(H, network.gains, network.powers, coalition_mask(structure), network.noise, robust)
        rates = _solve(prob, None, d, max_iters, rel_tol, False, None).true_rates
        for coalition in structure.coalitions:
            if csi_feasible(coalition, scenario, network):
                total += scenario.beta * float(rates[sorted(coalition)].sum())
    return total


def _log_name(sweep_index: int, drop: int, method: str) -> str:
    return f"sweep{sweep_index:03d}_drop{drop:04d}_{method}.log"


def _run_unit(plan: ExperimentPlan, sweep_index: int, drop: int) -> list[tuple[tuple, ResultRow]]:
    scenario = plan.scenario_at(sweep_index)
    network = generate_network(scenario, drop_seed(plan.master_seed, drop))
    evaluator = ThroughputModel(scenario, network, check_iia=True)
    value = plan.sweep_values[sweep_index]
    blocks = [draw_channels(network, scenario, fading_seed(plan.master_seed, drop, f))
              for f in range(plan.num_fading_per_drop)]
    out = []
    for mi, method in enumerate(plan.methods):
        t0 = time.perf_counter()
        structure, trace = cluster(method, scenario, network, budget=plan.budget,
                                   max_coalition_size=plan.max_coalition_size,
                                   oracle_max_cells=plan.oracle_max_cells)
        t_cluster = time.perf_counter() - t0
        proposals = trace.num_proposals if trace is not None else 0
        if trace is not None and plan.log_dir is not None:
            Path(plan.log_dir).mkdir(parents=True, exist_ok=True)
            trace.write_log(Path(plan.log_dir) / _log_name(sweep_index, drop, method))
        longterm = evaluator.sum_throughput(structure)
        for f, channels in enumerate(blocks):
            for pi, precoder in enumerate(plan.precoders):
                t1 = time.perf_counter()
                if precoder == "iia":
                    value_f = longterm
                else:
                    value_f = wmmse_throughput(structure, channels, scenario, network,
                                               robust=precoder == "robust-wmmse",
                                               max_iters=plan.wmmse_max_iters, rel_tol=plan.wmmse_rel_tol)
                wall = t_cluster + time.perf_counter() - t1
                row = ResultRow(value, drop, f, method, precoder, value_f, structure.mean_size(), proposals, wall)
                out.append(((sweep_index, drop, f, mi, pi), row))
    return out


def _unit_star(args):
    return _run_unit(*args)


def _csv_text(rows: Sequence[ResultRow], timing: bool) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(CSV_COLUMNS + (["wall_time"] if timing else []))
    for row in rows:
        writer.writerow(row.cells(timing))
    return buf.getvalue()


def run_experiment(plan: ExperimentPlan, out: str | Path | None = None) -> ExperimentResult:
    """Run every (sweep value, drop) unit and assemble the result table.

    Rows are sorted by sweep index, drop, fading block, method and precoder
    (in plan order) whatever the completion order of the workers. With
    ``out`` the CSV is written there and the resolved plan and seeds go to
    ``<out>.meta.json``.
    """
    units = [(plan, s, drop) for s in range(len(plan.sweep_values)) for drop in range(plan.num_drops)]
    if plan.workers > 1:
        with ProcessPoolExecutor(max_workers=plan.workers) as pool:
            parts = list(pool.map(_unit_star, units))
    else:
        parts = [_unit_star(u) for u in units]
    keyed = sorted((item for part in parts for item in part), key=lambda kv: kv[0])
    rows = [row for _, row in keyed]
    text = _csv_text(rows, plan.timing)
    summary = summarize_rows([_row_record(r) for r in rows])
    if out is not None:
        out = Path(out)
        with open(out, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
        from . import __version__

        meta = {
            "version": __version__,
            "plan": plan.to_dict(),
            "rng_algorithm": RNG_ALGORITHM,
            "drop_seeds": "SeedSequence(master_seed, spawn_key=(drop, 0))",
            "fading_seeds": "SeedSequence(master_seed, spawn_key=(drop, 1, fading))",
            "num_rows": len(rows),
        }
        with open(str(out) + ".meta.json", "w", encoding="utf-8", newline="") as fh:
            json.dump(meta, fh, indent=2, sort_keys=True)
            fh.write("\n")
    return ExperimentResult(plan, rows, text, summary)


# --------------------------------------------------------------------------
# Configuration
# --------------------------------------------------------------------------
_EXPERIMENT_KEYS = {"num_drops", "num_fading_per_drop", "methods", "precoders", "master_seed", "workers",
                    "timing", "log_dir", "sweep"}
_TABLES = {
    "wmmse": {"max_iters": "wmmse_max_iters", "rel_tol": "wmmse_rel_tol"},
    "formation": {"budget": "budget", "max_coalition_size": "max_coalition_size"},
    "oracle": {"max_cells": "oracle_max_cells"},
}


def _expect(value, kind, key):
    if kind is int:
        ok = isinstance(value, int) and not isinstance(value, bool)
    elif kind is float:
        ok = isinstance(value, (int, float)) and not isinstance(value, bool)
    elif kind is bool:
        ok = isinstance(value, bool)
    elif kind is str:
        ok = isinstance(value, str)
    else:
        ok = isinstance(value, list) and all(isinstance(v, str) for v in value)
    if not ok:
        raise ConfigError(f"expected {getattr(kind, '__name__', 'a list of strings')}", key=key)
    return float(value) if kind is float else value


def plan_from_dict(data: Mapping[str, Any]) -> ExperimentPlan:
    """Experiment plan from a parsed config mapping; unknown keys are errors."""
    for section in data:
        if section not in ("scenario", "experiment", *_TABLES):
            raise ConfigError("unknown section", key=section)
    params: dict[str, Any] = {"scenario": scenario_from_dict(data.get("scenario", {}))}
    exp = data.get("experiment", {})
    if not isinstance(exp, Mapping):
        raise ConfigError("expected a table", key="experiment")
    for key, value in exp.items():
        path = f"experiment.{key}"
        if key not in _EXPERIMENT_KEYS:
            raise ConfigError("unknown key", key=path)
        if key in ("num_drops", "num_fading_per_drop", "master_seed", "workers"):
            params[key] = _expect(value, int, path)
        elif key in ("methods", "precoders"):
            params[key] = tuple(_expect(value, list, path))
        elif key == "timing":
            params[key] = _expect(value, bool, path)
        elif key == "log_dir":
            params[key] = _expect(value, str, path)
        else:
            if not isinstance(value, Mapping):
                raise ConfigError("expected a table with 'key' and 'values'", key=path)
            for sub in value:
                if sub not in ("key", "values"):
                    raise ConfigError("unknown key", key=f"{path}.{sub}")
            if "key" not in value or "values" not in value:
                raise ConfigError("needs both 'key' and 'values'", key=path)
            skey = _expect(value["key"], str, f"{path}.key")
            values = value["values"]
            if not isinstance(values, list) or not all(
                    isinstance(v, (int, float)) and not isinstance(v, bool) for v in values):
                raise ConfigError("expected a list of numbers", key=f"{path}.values")
            params["sweep"] = (skey, tuple(values))
    for table, mapping in _TABLES.items():
        section = data.get(table, {})
        for key, value in section.items():
            path = f"{table}.{key}"
            if key not in mapping:
                raise ConfigError("unknown key", key=path)
            params[mapping[key]] = _expect(value, float if key == "rel_tol" else int, path)
    return ExperimentPlan(**params)


def load_plan(path: str | Path, **overrides) -> ExperimentPlan:
    """Read a TOML config file and apply keyword overrides (``None`` ignored)."""
    plan = plan_from_dict(_load_toml(path))
    changes = {k: v for k, v in overrides.items() if v is not None}
    return dataclasses.replace(plan, **changes) if changes else plan


# --------------------------------------------------------------------------
# Summaries
# --------------------------------------------------------------------------
def _row_record(row: ResultRow) -> dict[str, Any]:
    return {"sweep": "" if row.sweep is None else _fmt(row.sweep), "drop": row.drop, "fading": row.fading,
            "method": row.method, "precoder": row.precoder, "sum_throughput": row.sum_throughput,
            "mean_coalition_size": row.mean_coalition_size, "num_proposals": row.num_proposals}


def read_rows(path: str | Path) -> list[dict[str, Any]]:
    """Parse a result CSV; raises :class:`MalformedResultsError` on bad content."""
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as err:
        raise MalformedResultsError(f"cannot read {path}: {err}") from err
    if not text.strip():
        return []
    reader = csv.DictReader(io.StringIO(text))
    header = reader.fieldnames or []
    missing = [c for c in CSV_COLUMNS if c not in header]
    if missing:
        raise MalformedResultsError(f"missing columns: {', '.join(missing)}")
    records = []
    for lineno, raw in enumerate(reader, start=2):
        if None in raw or any(raw[c] is None for c in CSV_COLUMNS):
            raise MalformedResultsError(f"line {lineno}: wrong number of fields")
        try:
            rec = {
                "sweep": raw["sweep"],
                "drop": int(raw["drop"]),
                "fading": int(raw["fading"]),
                "method": raw["method"],
                "precoder": raw["precoder"],
                "sum_throughput": float(raw["sum_throughput"]),
                "mean_coalition_size": float(raw["mean_coalition_size"]),
                "num_proposals": int(raw["num_proposals"]),
            }
        except ValueError as err:
            raise MalformedResultsError(f"line {lineno}: {err}") from None
        records.append(rec)
    return records


def _mean_se(values: Sequence[float]) -> tuple[float, float]:
    n = len(values)
    mean = math.fsum(values) / n
    if n < 2:
        return mean, 0.0
    var = math.fsum((v - mean) ** 2 for v in values) / (n - 1)
    return mean, math.sqrt(var / n)


def summarize_rows(records: Sequence[Mapping[str, Any]]) -> str:
    """Means and standard errors per (sweep, method, precoder), plus ratios to the oracle."""
    if not records:
        return ""
    groups: dict[tuple, list] = {}
    for rec in records:
        groups.setdefault((rec["sweep"], rec["method"], rec["precoder"]), []).append(rec)
    lines = [f"{'sweep':>10} {'method':<24} {'precoder':<13} {'n':>5} {'mean':>12} {'stderr':>10} "
             f"{'size':>6} {'props':>7} {'/oracle':>8}"]
    means = {key: _mean_se([r["sum_throughput"] for r in rows])[0] for key, rows in groups.items()}
    for key, rows in groups.items():
        sweep, method, precoder = key
        mean, se = _mean_se([r["sum_throughput"] for r in rows])
        size = math.fsum(r["mean_coalition_size"] for r in rows) / len(rows)
        props = math.fsum(r["num_proposals"] for r in rows) / len(rows)
        oracle = means.get((sweep, "oracle", precoder))
        ratio = f"{mean / oracle:8.4f}" if oracle else f"{'-':>8}"
        lines.append(f"{sweep or '-':>10} {method:<24} {precoder:<13} {len(rows):>5d} {mean:12.4f} "
                     f"{se:10.4f} {size:6.2f} {props:7.1f} {ratio}")
    return "\n".join(lines) + "\n"


def summarize(path: str | Path) -> str:
    """Text report of a result CSV written by :func:`run_experiment`."""
    return summarize_rows(read_rows(path))
