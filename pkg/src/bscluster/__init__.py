"""Coalition-based clustering of cellular base stations from long-term channel statistics.

Cells form coalitions that share instantaneous CSI and align interference
internally; the clustering itself only needs large-scale gains.
"""

from .coalition import (
    ATTACH_ONLY,
    ATTACH_OR_SUPPLANT,
    FormationTrace,
    PlayerState,
    is_individually_stable,
    run_formation,
)
from .errors import (
    BSClusterError,
    BudgetError,
    ConfigError,
    ConvergenceError,
    DegenerateChannelError,
    InvalidDeviationError,
    MalformedResultsError,
    NumericError,
)
from .harness import ExperimentPlan, load_plan, run_experiment, summarize
from .longterm import (
    CoalitionStructure,
    ThroughputModel,
    ergodic_rate_nats,
    exp_integral_e1,
    longterm_throughput,
    sum_throughput,
)
from .netgen import ChannelRealization, Network, Scenario, draw_channels, generate_network, load_scenario
from .oracle import EnumerationBudget, enumerate_partitions, optimal_structure
from .precoding import iia_orthogonalize, iia_relaxed_solve, naive_wmmse, robust_wmmse

__version__ = "0.1.0"

__all__ = [
    "Scenario", "Network", "ChannelRealization", "generate_network", "draw_channels", "load_scenario",
    "CoalitionStructure", "ThroughputModel", "exp_integral_e1", "ergodic_rate_nats", "longterm_throughput",
    "sum_throughput", "run_formation", "is_individually_stable", "PlayerState", "FormationTrace",
    "ATTACH_ONLY", "ATTACH_OR_SUPPLANT", "EnumerationBudget", "enumerate_partitions", "optimal_structure",
    "iia_relaxed_solve", "iia_orthogonalize", "robust_wmmse", "naive_wmmse", "ExperimentPlan", "run_experiment",
    "load_plan", "summarize", "BSClusterError", "ConfigError", "BudgetError", "InvalidDeviationError",
    "NumericError", "ConvergenceError", "DegenerateChannelError", "MalformedResultsError",
]
