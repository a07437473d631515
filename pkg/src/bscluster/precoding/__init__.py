"""Short-term filters: structured IIA solutions and (robust) WMMSE."""

from .iia import IiaSolution, RelaxedIia, iia_orthogonalize, iia_precoders, iia_relaxed_solve, null_space_basis
from .wmmse import (
    PrecodingSolution,
    WmmseProblem,
    coalition_mask,
    initial_precoders,
    instantaneous_rates,
    instantaneous_sum_rate,
    naive_wmmse,
    robust_wmmse,
    wmmse_objective,
)

__all__ = [
    "IiaSolution",
    "RelaxedIia",
    "iia_relaxed_solve",
    "iia_orthogonalize",
    "iia_precoders",
    "null_space_basis",
    "PrecodingSolution",
    "WmmseProblem",
    "robust_wmmse",
    "naive_wmmse",
    "wmmse_objective",
    "instantaneous_rates",
    "instantaneous_sum_rate",
    "initial_precoders",
    "coalition_mask",
]
