"""Hedonic coalition formation among the cells.

Each cell is a player whose utility is the long-term throughput of its own
MSs, zeroed when the coalition is in the player's history set (unless it is
a singleton) or when the player's search budget is exhausted. Players take
turns proposing individual deviations (attach, or attach-or-supplant) and the
members of the target coalition vote on them.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

from .errors import InvalidDeviationError
from .longterm import CoalitionStructure, ThroughputModel

__all__ = [
    "ATTACH",
    "SUPPLANT",
    "ATTACH_ONLY",
    "ATTACH_OR_SUPPLANT",
    "PlayerState",
    "Deviation",
    "FormationTrace",
    "utility",
    "apply_attach",
    "apply_supplant",
    "apply_deviation",
    "is_admissible",
    "run_formation",
    "find_admissible_deviation",
    "is_individually_stable",
    "history_bound",
]

ATTACH = "attach"
SUPPLANT = "supplant"
ATTACH_ONLY = "attach-only"
ATTACH_OR_SUPPLANT = "attach-or-supplant"
_MODES = (ATTACH_ONLY, ATTACH_OR_SUPPLANT)

EMPTY: frozenset[int] = frozenset()


@dataclass
class PlayerState:
    """History set, search budget and search counter of one player."""

    budget: int
    history: set[frozenset[int]] = field(default_factory=set)
    searches: int = 0

    def copy(self) -> "PlayerState":
        return PlayerState(self.budget, set(self.history), self.searches)


@dataclass(frozen=True)
class Deviation:
    player: int
    kind: str
    target: frozenset[int]
    outcast: int | None = None

    def __str__(self) -> str:
        target = "{" + ",".join(map(str, sorted(self.target))) + "}"
        if self.kind == SUPPLANT:
            return f"{self.player} supplants {self.outcast} in {target}"
        return f"{self.player} attaches to {target}"


@dataclass(frozen=True)
class AppliedDeviation:
    step: int
    deviation: Deviation
    structure: CoalitionStructure
    sum_throughput: float


@dataclass(frozen=True)
class Proposal:
    deviation: Deviation
    utility: float
    admitted: bool


@dataclass
class FormationTrace:
    """Record of one formation run."""

    deviations: list[AppliedDeviation] = field(default_factory=list)
    proposals: list[Proposal] = field(default_factory=list)
    states: list[PlayerState] = field(default_factory=list)

    @property
    def searches(self) -> list[int]:
        return [s.searches for s in self.states]

    @property
    def num_proposals(self) -> int:
        return len(self.proposals)

    def to_log(self) -> str:
        lines = ["# step player kind target outcast sum_throughput"]
        for entry in self.deviations:
            dev = entry.deviation
            target = "{" + ",".join(map(str, sorted(dev.target))) + "}"
            outcast = "-" if dev.outcast is None else str(dev.outcast)
            lines.append(f"{entry.step} {dev.player} {dev.kind} {target} {outcast} {entry.sum_throughput!r}")
        return "\n".join(lines) + "\n"

    def write_log(self, path: str | Path) -> None:
        Path(path).write_text(self.to_log(), encoding="utf-8")


# --------------------------------------------------------------------------
# Utilities and deviations
# --------------------------------------------------------------------------
def _coalition_utility(i: int, coalition: frozenset[int], state: PlayerState, model: ThroughputModel) -> float:
    if state.searches > state.budget:
        return 0.0
    if len(coalition) > 1 and coalition in state.history:
        return 0.0
    return model.cell_throughput(i, coalition)


def utility(i: int, structure: CoalitionStructure, state: PlayerState, model: ThroughputModel) -> float:
    """Utility of player ``i`` in ``structure`` given its own history and budget."""
    return _coalition_utility(i, structure.coalition_of(i), state, model)


def _check_target(structure: CoalitionStructure, i: int, target: frozenset[int]) -> None:
    if target == structure.coalition_of(i):
        raise InvalidDeviationError(f"player {i} cannot deviate to its own coalition")
    if target and target not in structure.coalitions:
        raise InvalidDeviationError(f"{sorted(target)} is not a coalition of {structure}")


def apply_attach(structure: CoalitionStructure, i: int, target: Iterable[int]) -> CoalitionStructure:
    """Player ``i`` leaves its coalition and joins ``target`` (empty: goes alone)."""
    target = frozenset(target)
    _check_target(structure, i, target)
    own = structure.coalition_of(i)
    blocks = [b for b in structure.coalitions if b != own and b != target]
    blocks += [own - {i}, target | {i}]
    return CoalitionStructure(blocks, structure.num_cells)


def apply_supplant(structure: CoalitionStructure, i: int, target: Iterable[int], outcast: int) -> CoalitionStructure:
    """Player ``i`` takes the place of ``outcast`` in ``target``; the outcast goes alone."""
    target = frozenset(target)
    if outcast not in target:
        raise InvalidDeviationError(f"outcast {outcast} is not a member of {sorted(target)}")
    _check_target(structure, i, target)
    own = structure.coalition_of(i)
    blocks = [b for b in structure.coalitions if b != own and b != target]
    blocks += [own - {i}, (target - {outcast}) | {i}, frozenset([outcast])]
    return CoalitionStructure(blocks, structure.num_cells)


def apply_deviation(structure: CoalitionStructure, deviation: Deviation) -> CoalitionStructure:
    if deviation.kind == ATTACH:
        return apply_attach(structure, deviation.player, deviation.target)
    if deviation.kind == SUPPLANT:
        return apply_supplant(structure, deviation.player, deviation.target, deviation.outcast)
    raise InvalidDeviationError(f"unknown deviation kind {deviation.kind!r}")


def _new_coalition(deviation: Deviation) -> frozenset[int]:
    if deviation.kind == ATTACH:
        return deviation.target | {deviation.player}
    return (deviation.target - {deviation.outcast}) | {deviation.player}


def _voters(deviation: Deviation) -> frozenset[int]:
    if deviation.kind == ATTACH:
        return deviation.target
    return deviation.target - {deviation.outcast}


def is_admissible(deviation: Deviation, structure: CoalitionStructure, states: Sequence[PlayerState],
                  model: ThroughputModel) -> bool:
    """The deviator strictly gains and every voting member of the target weakly gains.

    The outcast of a supplant deviation has no vote. Every player is judged
    with its own history set and search counter.
    """
    i = deviation.player
    new = apply_deviation(structure, deviation)
    if not utility(i, new, states[i], model) > utility(i, structure, states[i], model):
        return False
    for j in sorted(_voters(deviation)):
        if utility(j, new, states[j], model) < utility(j, structure, states[j], model):
            return False
    return True


def _enumerate_deviations(i: int, structure: CoalitionStructure, mode: str, max_coalition_size: int | None):
    others = [b for b in structure.coalitions if i not in b]
    # (coalition id, kind order, outcast order, deviation); the empty target sorts last
    for target in others + [EMPTY]:
        tid = structure.index_of(target) if target else len(structure)
        if max_coalition_size is not None and len(target) + 1 > max_coalition_size:
            continue
        yield tid, 0, -1, Deviation(i, ATTACH, target)
    if mode == ATTACH_OR_SUPPLANT:
        for target in others:
            if max_coalition_size is not None and len(target) > max_coalition_size:
                continue
            tid = structure.index_of(target)
            for q in sorted(target):
                yield tid, 1, q, Deviation(i, SUPPLANT, target, q)


def _candidates(i, structure, state, model, mode, max_coalition_size):
    base = utility(i, structure, state, model)
    found = []
    for tid, kind, q, dev in _enumerate_deviations(i, structure, mode, max_coalition_size):
        u = _coalition_utility(i, _new_coalition(dev), state, model)
        if u > base:
            found.append((-u, tid, kind, q, dev))
    found.sort(key=lambda c: c[:4])
    return [(-c[0], c[4]) for c in found]


def history_bound(num_cells: int, max_coalition_size: int) -> int:
    """Upper bound ``C I^(C-1)`` on a history set when coalitions never exceed ``C``."""
    return max_coalition_size * num_cells ** (max_coalition_size - 1)


# --------------------------------------------------------------------------
# Algorithm
# --------------------------------------------------------------------------
def run_formation(
    model: ThroughputModel,
    initial: CoalitionStructure | None = None,
    *,
    budgets: int | Sequence[int] | None = None,
    mode: str = ATTACH_OR_SUPPLANT,
    max_coalition_size: int | None = None,
) -> tuple[CoalitionStructure, FormationTrace]:
    """Run the coalition formation protocol until no player deviates.

    Players take turns in increasing index order. On its turn a player
    sorts every self-improving deviation by its own resulting utility
    (ties: lower coalition id, attach before supplant, lower outcast) and
    proposes them in turn, incrementing its search counter for each
    proposal. The first admissible proposal is applied, the old coalition
    goes into the deviator's history and the turn order restarts from the
    first player. The run ends after a full pass without deviations.
    A player stops proposing once its counter exceeds its budget, so a run
    issues at most ``sum_i (b_i + 1)`` proposals.

    Parameters
    ----------
    model : ThroughputModel
        Long-term throughput evaluator of the drop.
    initial : CoalitionStructure, optional
        Starting structure; singletons by default.
    budgets : int or sequence of int, optional
        Search budgets ``b_i``; ``10 * I`` for every player by default.
    mode : {"attach-or-supplant", "attach-only"}
    max_coalition_size : int, optional
        Deviations that would create a larger coalition are not considered.

    Returns
    -------
    structure : CoalitionStructure
        Final (individually stable) structure.
    trace : FormationTrace
    """
    if mode not in _MODES:
        raise ValueError(f"mode must be one of {_MODES}, got {mode!r}")
    I = model.num_cells
    structure = CoalitionStructure.singletons(I) if initial is None else initial
    if structure.num_cells != I:
        raise ValueError("initial structure does not match the network size")
    if budgets is None:
        budgets = [10 * I] * I
    elif isinstance(budgets, int):
        budgets = [budgets] * I
    states = [PlayerState(int(b)) for b in budgets]
    trace = FormationTrace(states=states)

    while True:
        moved = False
        for i in range(I):
            state = states[i]
            for u, dev in _candidates(i, structure, state, model, mode, max_coalition_size):
                if state.searches > state.budget:
                    break  # every further proposal is rejected and changes nothing
                state.searches += 1
                ok = is_admissible(dev, structure, states, model)
                trace.proposals.append(Proposal(dev, u, ok))
                if ok:
                    state.history.add(structure.coalition_of(i))
                    structure = apply_deviation(structure, dev)
                    trace.deviations.append(
                        AppliedDeviation(len(trace.deviations) + 1, dev, structure, model.sum_throughput(structure))
                    )
                    moved = True
                    break
            if moved:
                break
        if not moved:
            return structure, trace


def find_admissible_deviation(
    structure: CoalitionStructure,
    states: Sequence[PlayerState],
    model: ThroughputModel,
    *,
    mode: str = ATTACH_OR_SUPPLANT,
    max_coalition_size: int | None = None,
) -> Deviation | None:
    """Exhaustively search every player's attach (and supplant) deviations."""
    cap = structure.num_cells if max_coalition_size is None else max_coalition_size
    for i in range(structure.num_cells):
        own = structure.coalition_of(i)
        for target in list(structure.coalitions) + [EMPTY]:
            if target == own:
                continue
            moves = []
            if len(target) + 1 <= cap:
                moves.append(Deviation(i, ATTACH, target))
            if mode == ATTACH_OR_SUPPLANT and len(target) <= cap:
                moves += [Deviation(i, SUPPLANT, target, q) for q in target]
            for dev in moves:
                if is_admissible(dev, structure, states, model):
                    return dev
    return None


def is_individually_stable(
    structure: CoalitionStructure,
    states: Sequence[PlayerState],
    model: ThroughputModel,
    *,
    mode: str = ATTACH_OR_SUPPLANT,
    max_coalition_size: int | None = None,
) -> bool:
    """True iff no player has an admissible deviation (independent of ``run_formation``)."""
    return find_admissible_deviation(
        structure, states, model, mode=mode, max_coalition_size=max_coalition_size
    ) is None
