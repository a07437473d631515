import numpy as np
import pytest

from bscluster.coalition import run_formation
from bscluster.errors import BudgetError
from bscluster.longterm import CoalitionStructure, ThroughputModel
from bscluster.netgen import Scenario, generate_network
from bscluster.oracle import EnumerationBudget, enumerate_partitions, optimal_structure

from conftest import bell_numbers, count_partitions_capped, make_network


@pytest.mark.parametrize("I", range(1, 9))
def test_counts_match_bell(I):
    parts = list(enumerate_partitions(I))
    assert len(parts) == bell_numbers(I)[I]
    assert len(set(parts)) == len(parts)


def test_small_examples():
    assert len(list(enumerate_partitions(4))) == 15
    assert list(enumerate_partitions(3, 1)) == [CoalitionStructure.singletons(3)]


@pytest.mark.parametrize("I, cap", [(6, 2), (7, 3), (8, 4), (9, 4)])
def test_capped_counts(I, cap):
    parts = list(enumerate_partitions(I, cap))
    assert len(parts) == count_partitions_capped(I, cap)
    assert all(max(p.sizes()) <= cap for p in parts)


def test_restricted_growth_order():
    rgs = [p.rgs() for p in enumerate_partitions(5)]
    assert rgs == sorted(rgs)
    assert rgs[0] == (0, 0, 0, 0, 0) and rgs[-1] == (0, 1, 2, 3, 4)


def test_budget_guard():
    with pytest.raises(BudgetError):
        next(enumerate_partitions(14))
    with pytest.raises(BudgetError):
        next(enumerate_partitions(5, budget=EnumerationBudget(max_cells=4)))
    sc = Scenario.paper(num_cells=14)
    with pytest.raises(BudgetError):
        optimal_structure(sc, generate_network(sc, 0))


def _pair(cross, Lc):
    sc = Scenario(num_cells=2)
    g = np.full((2, 2, 2), cross)
    g[0, :, 0] = g[1, :, 1] = 1.0
    return sc, make_network(g, sc, Lc)


def test_two_cells_weak_coupling_prefers_singletons():
    # with I = 2 the pair wins on pre-log unless (1 - beta) L_c < 124
    sc, net = _pair(1e-9, 200)
    S, value = optimal_structure(sc, net)
    assert S == CoalitionStructure.singletons(2)
    model = ThroughputModel(sc, net)
    assert value == model.sum_throughput(S) > model.sum_throughput(CoalitionStructure.grand(2))


def test_two_cells_strong_coupling_prefers_pair():
    sc, net = _pair(0.5, 10**5)
    S, value = optimal_structure(sc, net)
    assert S == CoalitionStructure.grand(2)


@pytest.mark.parametrize("seed", range(5))
def test_pruning_does_not_change_optimum(seed):
    sc = Scenario.paper(num_cells=6, ms_speed_kmh=3.0)
    net = generate_network(sc, seed)
    model = ThroughputModel(sc, net)
    best = max(model.sum_throughput(p) for p in enumerate_partitions(6))
    S, value = optimal_structure(sc, net, model=model)
    assert value == best == model.sum_throughput(S)


@pytest.mark.parametrize("seed", range(10))
def test_dominance(seed):
    sc = Scenario.paper(num_cells=7, ms_speed_kmh=3.0)
    net = generate_network(sc, seed)
    model = ThroughputModel(sc, net)
    _, value = optimal_structure(sc, net, model=model)
    formed, _ = run_formation(model)
    for S in (CoalitionStructure.singletons(7), CoalitionStructure.grand(7), formed):
        assert value >= model.sum_throughput(S)


def test_ignoring_iia_enumerates_everything():
    sc = Scenario.paper(num_cells=6, ms_speed_kmh=0.5)
    net = generate_network(sc, 0)
    S, value = optimal_structure(sc, net, check_iia=False)
    loose = ThroughputModel(sc, net, check_iia=False)
    assert value == max(loose.sum_throughput(p) for p in enumerate_partitions(6))
