"""Globally optimal coalition structure by exhaustive set-partition search."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterator

from .errors import BudgetError
from .longterm import CoalitionStructure, ThroughputModel
from .netgen import Network, Scenario

__all__ = ["EnumerationBudget", "enumerate_partitions", "optimal_structure"]


@dataclass(frozen=True)
class EnumerationBudget:
    """``max_cells`` caps exhaustive search (Bell(13) is about 2.7e7)."""

    max_cells: int = 13
    max_coalition_size: int | None = None


def _restricted_growth_strings(n: int, cap: int) -> Iterator[list[int]]:
    # Lexicographic restricted growth strings a[0] = 0, a[t] <= 1 + max(a[:t]),
    # skipping any prefix that would put more than `cap` cells in one block.
    a = [0] * n
    counts = [0] * (n + 1)
    counts[0] = 1

    def rec(t: int, top: int):
        if t == n:
            yield a
            return
        for b in range(top + 2):
            if counts[b] >= cap:
                continue
            a[t] = b
            counts[b] += 1
            yield from rec(t + 1, max(top, b))
            counts[b] -= 1

    if n == 0:
        yield a
        return
    yield from rec(1, 0)


def enumerate_partitions(num_cells: int, max_coalition_size: int | None = None, *,
                         budget: EnumerationBudget = EnumerationBudget()) -> Iterator[CoalitionStructure]:
    """Every partition of ``range(num_cells)`` once, in restricted-growth-string order.

    With ``max_coalition_size`` partitions containing a larger block are
    pruned at the prefix where the block overflows.
    """
    if num_cells > budget.max_cells:
        raise BudgetError(f"{num_cells} cells exceed the enumeration budget of {budget.max_cells}")
    if num_cells < 1:
        raise ValueError("need at least one cell")
    cap = num_cells if max_coalition_size is None else max(1, int(max_coalition_size))
    for rgs in _restricted_growth_strings(num_cells, cap):
        yield CoalitionStructure.from_assignment(rgs)


def optimal_structure(scenario: Scenario, network: Network, *, check_iia: bool = True,
                      budget: EnumerationBudget = EnumerationBudget(),
                      model: ThroughputModel | None = None) -> tuple[CoalitionStructure, float]:
    """Structure maximizing the long-term sum throughput.

    Blocks larger than the IIA bound contribute zero and can always be split
    without hurting anyone else, so they are pruned when ``check_iia`` is
    set. Ties keep the first structure in enumeration order.
    """
    if model is None:
        model = ThroughputModel(scenario, network, check_iia=check_iia)
    I = network.num_cells
    cap = budget.max_coalition_size
    if model.check_iia:
        iia_cap = max(1, math.floor(scenario.iia_bound))
        cap = iia_cap if cap is None else min(cap, iia_cap)
    best, best_value = None, -math.inf
    for structure in enumerate_partitions(I, cap, budget=budget):
        value = model.sum_throughput(structure)
        if value > best_value:
            best, best_value = structure, value
    return best, best_value
