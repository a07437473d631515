"""Long-term (statistics-only) throughput of every MS for a coalition structure.

An MS in cell ``i`` sees two phases per coherence block:

* phase 1, coalitions time-share; CSI acquisition eats into the coalition's
  share of ``(1 - beta) L_c`` symbols; no intercoalition interference;
* phase 2, full reuse for ``beta L_c`` symbols; intercoalition interference
  is treated as noise.

Both spectral efficiencies have the Rayleigh closed form
``d log2(e) e^{1/rho} E1(1/rho)``. The result is gated by an IIA
feasibility test and a CSI-acquisition feasibility test and depends only
on the members of the cell's own coalition.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Iterator, Sequence

import numpy as np

from .netgen import Network, Scenario

__all__ = [
    "CoalitionStructure",
    "ThroughputBreakdown",
    "ThroughputModel",
    "exp_integral_e1",
    "exp_integral_e1_scaled",
    "ergodic_rate_nats",
    "csi_overhead_symbols",
    "csi_overhead_symbols_general",
    "iia_feasible",
    "csi_feasible",
    "prelog_phase1",
    "longterm_throughput",
    "sum_throughput",
]

LOG2E = 1.0 / math.log(2.0)
_EULER_GAMMA = 0.57721566490153286061
_EPS = 1e-16


# --------------------------------------------------------------------------
# Exponential integral
# --------------------------------------------------------------------------
def _e1_series(x: float) -> float:
    # E1(x) = -gamma - ln x - sum_{k>=1} (-x)^k / (k k!)
    total = 0.0
    term = 1.0
    k = 1
    while True:
        term *= -x / k
        contrib = term / k
        total += contrib
        if abs(contrib) < _EPS * max(abs(total), 1e-300) or k > 200:
            break
        k += 1
    return -_EULER_GAMMA - math.log(x) - total


def _e1_cf_scaled(x: float) -> float:
    # e^x E1(x) by the modified Lentz continued fraction, valid for x > 1
    tiny = 1e-300
    b = x + 1.0
    c = 1.0 / tiny
    d = 1.0 / b
    h = d
    for i in range(1, 1000):
        a = -float(i * i)
        b += 2.0
        d = 1.0 / (a * d + b)
        c = b + a / c
        delta = c * d
        h *= delta
        if abs(delta - 1.0) < _EPS:
            break
    return h


def exp_integral_e1(x: float) -> float:
    """Exponential integral ``E1(x) = int_x^inf exp(-t) / t dt`` for ``x > 0``.

    Power series for ``x <= 1`` and a continued fraction above.
    """
    x = float(x)
    if not x > 0:
        raise ValueError(f"E1 is only defined here for x > 0, got {x!r}")
    if x <= 1.0:
        return _e1_series(x)
    if x > 745.0:
        return 0.0
    return _e1_cf_scaled(x) * math.exp(-x)


def exp_integral_e1_scaled(x: float) -> float:
    """``exp(x) * E1(x)`` without overflow for large ``x``."""
    x = float(x)
    if not x > 0:
        raise ValueError(f"E1 is only defined here for x > 0, got {x!r}")
    if x <= 1.0:
        return math.exp(x) * _e1_series(x)
    return _e1_cf_scaled(x)


def ergodic_rate_nats(rho: float) -> float:
    """Mean of ``ln(1 + rho |h|^2)`` for ``h ~ CN(0, 1)``, i.e. ``e^{1/rho} E1(1/rho)``.

    Evaluated through the scaled exponential integral, so tiny ``rho``
    gives ``~rho`` instead of overflowing.
    """
    rho = float(rho)
    if rho < 0 or math.isnan(rho):
        raise ValueError(f"average SNR must be non-negative, got {rho!r}")
    if rho == 0.0:
        return 0.0
    if math.isinf(rho):
        return math.inf
    return exp_integral_e1_scaled(1.0 / rho)


# --------------------------------------------------------------------------
# Coalition structures
# --------------------------------------------------------------------------
class CoalitionStructure:
    """Partition of the cells ``0 .. I-1`` into disjoint non-empty coalitions.

    Coalitions are stored as frozensets, ordered by their smallest member;
    that position is the coalition id used for deterministic tie-breaking.
    Instances are immutable and hashable.
    """

    __slots__ = ("_coalitions", "_assignment", "_hash")

    def __init__(self, coalitions: Iterable[Iterable[int]], num_cells: int | None = None):
        blocks = [frozenset(int(c) for c in block) for block in coalitions]
        blocks = [b for b in blocks if b]
        cells = sorted(c for b in blocks for c in b)
        I = len(cells) if num_cells is None else int(num_cells)
        if cells != list(range(I)):
            raise ValueError(f"coalitions do not partition range({I}): {blocks}")
        blocks.sort(key=min)
        assignment = [0] * I
        for idx, b in enumerate(blocks):
            for c in b:
                assignment[c] = idx
        self._coalitions = tuple(blocks)
        self._assignment = tuple(assignment)
        self._hash = hash(self._coalitions)

    @classmethod
    def singletons(cls, num_cells: int) -> "CoalitionStructure":
        return cls([[i] for i in range(num_cells)], num_cells)

    @classmethod
    def grand(cls, num_cells: int) -> "CoalitionStructure":
        return cls([range(num_cells)], num_cells)

    @classmethod
    def from_assignment(cls, assignment: Sequence[int]) -> "CoalitionStructure":
        groups: dict[int, list[int]] = {}
        for cell, label in enumerate(assignment):
            groups.setdefault(int(label), []).append(cell)
        return cls(groups.values(), len(assignment))

    @property
    def coalitions(self) -> tuple[frozenset[int], ...]:
        return self._coalitions

    @property
    def assignment(self) -> tuple[int, ...]:
        return self._assignment

    @property
    def num_cells(self) -> int:
        return len(self._assignment)

    def coalition_of(self, i: int) -> frozenset[int]:
        return self._coalitions[self._assignment[i]]

    def index_of(self, coalition: frozenset[int]) -> int:
        return self._assignment[min(coalition)]

    def complement_of(self, i: int) -> frozenset[int]:
        return frozenset(range(self.num_cells)) - self.coalition_of(i)

    def sizes(self) -> list[int]:
        return [len(b) for b in self._coalitions]

    def rgs(self) -> tuple[int, ...]:
        """Restricted growth string (coalition ids in first-appearance order)."""
        return self._assignment

    def mean_size(self) -> float:
        return self.num_cells / len(self._coalitions)

    def __iter__(self) -> Iterator[frozenset[int]]:
        return iter(self._coalitions)

    def __len__(self) -> int:
        return len(self._coalitions)

    def __contains__(self, coalition) -> bool:
        return frozenset(coalition) in self._coalitions

    def __eq__(self, other) -> bool:
        if not isinstance(other, CoalitionStructure):
            return NotImplemented
        return self._coalitions == other._coalitions

    def __hash__(self) -> int:
        return self._hash

    def __str__(self) -> str:
        return "".join("{" + ",".join(map(str, sorted(b))) + "}" for b in self._coalitions)

    def __repr__(self) -> str:
        return f"CoalitionStructure({[sorted(b) for b in self._coalitions]})"


# --------------------------------------------------------------------------
# Overheads and feasibility
# --------------------------------------------------------------------------
def csi_overhead_symbols_general(
    coalition: Iterable[int],
    bs_antennas: Sequence[int],
    ms_antennas: Sequence[Sequence[int]],
    streams: Sequence[Sequence[int]],
) -> int:
    """Minimum CSI acquisition length with pilots and analog feedback.

    Per cell: ``M_i`` downlink pilots, plus per MS ``N`` uplink pilots,
    ``d`` effective-channel pilots and ``sum_{j in C} M_j`` analog feedback
    symbols. ``ms_antennas[i][k]`` and ``streams[i][k]`` are per-MS values.
    """
    members = sorted(set(coalition))
    feedback = sum(int(bs_antennas[j]) for j in members)
    total = 0
    for i in members:
        total += int(bs_antennas[i])
        for n_ik, d_ik in zip(ms_antennas[i], streams[i]):
            total += int(n_ik) + int(d_ik) + feedback
    return total


def csi_overhead_symbols(coalition: Iterable[int], scenario: Scenario) -> int:
    """Symmetric-network CSI overhead ``(M + K(N + d))|C| + K M |C|^2``."""
    size = len(set(coalition))
    M, K, N, d = scenario.bs_antennas, scenario.mss_per_cell, scenario.ms_antennas, scenario.streams_per_ms
    return (M + K * (N + d)) * size + K * M * size * size


def iia_feasible(coalition: Iterable[int], scenario: Scenario) -> bool:
    """Almost-sure IIA feasibility of a symmetric coalition: ``|C| K d <= M + N - d``."""
    size = len(set(coalition))
    M, K, N, d = scenario.bs_antennas, scenario.mss_per_cell, scenario.ms_antennas, scenario.streams_per_ms
    return size * K * d <= M + N - d


def _phase1_symbols(scenario: Scenario, network: Network) -> float:
    return (1.0 - scenario.beta) * network.coherence_symbols


def csi_feasible(coalition: Iterable[int], scenario: Scenario, network: Network) -> bool:
    """``|C| / I >= L_t(C) / L_c1`` (non-strict), ``L_c1 = (1 - beta) L_c``."""
    size = len(set(coalition))
    lt = csi_overhead_symbols(range(size), scenario)
    # cross-multiplied to keep the boundary exact
    return size * _phase1_symbols(scenario, network) >= lt * network.num_cells


def prelog_phase1(coalition: Iterable[int], scenario: Scenario, network: Network) -> float:
    """``(1 - beta) (|C| / I - L_t(C) / L_c1)``; may be negative for infeasible ``C``."""
    size = len(set(coalition))
    lt = csi_overhead_symbols(range(size), scenario)
    return (1.0 - scenario.beta) * (size / network.num_cells - lt / _phase1_symbols(scenario, network))


# --------------------------------------------------------------------------
# Throughputs
# --------------------------------------------------------------------------
@dataclass(frozen=True)
class ThroughputBreakdown:
    """Long-term throughput of one MS (rates in bits/s/Hz)."""

    alpha1: float
    alpha2: float
    rbar1: float
    rbar2: float
    rho1: float
    rho2: float
    feasible_iia: bool
    feasible_csi: bool
    total: float


class ThroughputModel:
    """Cached evaluator of the long-term model for one drop.

    Cell throughputs are memoized per ``(cell, members)``: they only depend
    on the cell's own coalition.

    Parameters
    ----------
    scenario, network
        The drop to evaluate.
    check_iia : bool
        Apply the IIA feasibility gate. Disabling it gives the heuristic
        "ignore IA feasibility" utility.
    """

    def __init__(self, scenario: Scenario, network: Network, *, check_iia: bool = True):
        self.scenario = scenario
        self.network = network
        self.check_iia = check_iia
        I, K = network.num_cells, network.mss_per_cell
        d = scenario.streams_per_ms
        g = network.gains
        P = network.powers
        cells = np.arange(I)
        self._signal = g[cells, :, cells] * (P / (K * d))[:, None]
        self._interf = g * P[None, None, :]  # received power from every BS
        self._noise = network.noise
        self._cell_cache: dict[tuple[int, frozenset[int]], float] = {}
        self._coal_cache: dict[frozenset[int], float] = {}
        self.evaluations = 0

    @property
    def num_cells(self) -> int:
        return self.network.num_cells

    def ms_breakdown(self, i: int, k: int, members: Iterable[int]) -> ThroughputBreakdown:
        members = frozenset(members)
        if i not in members:
            raise ValueError(f"cell {i} is not a member of {sorted(members)}")
        sc, net = self.scenario, self.network
        d = sc.streams_per_ms
        f_iia = iia_feasible(members, sc)
        f_csi = csi_feasible(members, sc, net)
        alpha1 = prelog_phase1(members, sc, net)
        alpha2 = sc.beta
        signal = self._signal[i, k]
        outside = [j for j in range(net.num_cells) if j not in members]
        interference = float(np.sum(self._interf[i, k, outside])) if outside else 0.0
        rho1 = float(signal / self._noise)
        rho2 = float(signal / (self._noise + interference))
        rbar1 = d * LOG2E * ergodic_rate_nats(rho1)
        rbar2 = d * LOG2E * ergodic_rate_nats(rho2)
        gate = f_csi and (f_iia or not self.check_iia)
        total = (alpha1 * rbar1 + alpha2 * rbar2) if gate else 0.0
        return ThroughputBreakdown(alpha1, alpha2, rbar1, rbar2, rho1, rho2, f_iia, f_csi, total)

    def cell_throughput(self, i: int, members: Iterable[int]) -> float:
        """Sum of the long-term throughputs of the MSs of cell ``i``."""
        members = frozenset(members)
        key = (i, members)
        value = self._cell_cache.get(key)
        if value is None:
            self.evaluations += 1
            value = 0.0
            for k in range(self.network.mss_per_cell):
                value += self.ms_breakdown(i, k, members).total
            self._cell_cache[key] = value
        return value

    def coalition_value(self, members: Iterable[int]) -> float:
        members = frozenset(members)
        value = self._coal_cache.get(members)
        if value is None:
            value = 0.0
            for i in sorted(members):
                value += self.cell_throughput(i, members)
            self._coal_cache[members] = value
        return value

    def sum_throughput(self, structure: CoalitionStructure) -> float:
        total = 0.0
        for coalition in structure.coalitions:
            total += self.coalition_value(coalition)
        return total

    def breakdown(self, structure: CoalitionStructure) -> list[list[ThroughputBreakdown]]:
        """Per-MS breakdowns, indexed ``[i][k]``."""
        return [
            [self.ms_breakdown(i, k, structure.coalition_of(i)) for k in range(self.network.mss_per_cell)]
            for i in range(self.num_cells)
        ]


def longterm_throughput(ms_index: tuple[int, int], coalition: Iterable[int], scenario: Scenario, network: Network,
                        *, check_iia: bool = True) -> ThroughputBreakdown:
    """Breakdown for MS ``(i, k)`` whose cell belongs to ``coalition``."""
    i, k = ms_index
    return ThroughputModel(scenario, network, check_iia=check_iia).ms_breakdown(i, k, coalition)


def sum_throughput(structure: CoalitionStructure, scenario: Scenario, network: Network,
                   *, check_iia: bool = True) -> float:
    """Long-term sum throughput over all served MSs (bits/s/Hz)."""
    return ThroughputModel(scenario, network, check_iia=check_iia).sum_throughput(structure)
