"""Weighted MMSE precoding with statistical intercoalition interference.

Within a coalition the BSs share instantaneous CSI; interference from
outside the coalition is only known through its large-scale gain, and it
enters the MSE as the expectation over the unknown Rayleigh channel,
``E[H V V^H H^H] = gamma ||V||_F^2 I``. The robust variant keeps these
terms, the naive variant drops them. Both alternate between MMSE receivers,
MSE weights and per-BS power-constrained precoders; every block update
minimizes the same objective ``sum_n (w_n e_n - log w_n - 1)``.

Layouts: ``H[i, k, j]`` is ``N x M``; ``U`` is ``(I, K, N, d)``;
``V`` is ``(I, K, M, d)``; ``W`` and MSEs are ``(I, K, d)``.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from ..errors import NumericError
from ..longterm import CoalitionStructure
from ..netgen import ChannelRealization, Network, Scenario

__all__ = [
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

_BISECTION_STEPS = 60


def coalition_mask(structure: CoalitionStructure) -> np.ndarray:
    """Boolean ``(I, I)`` matrix, true where two cells share a coalition."""
    a = np.asarray(structure.assignment)
    return a[:, None] == a[None, :]


@dataclass
class PrecodingSolution:
    """Filters and diagnostics returned by :func:`robust_wmmse`.

    ``rates`` are the surrogate per-stream rates ``-log2(e)`` from the
    (robust or naive) MSE model; ``true_rates`` are achieved on the actual
    channels, interference from every BS included, with the MMSE receivers
    retrained on the true covariance. Both are in bits per channel use.
    """

    U: np.ndarray
    V: np.ndarray
    W: np.ndarray
    mu: np.ndarray
    rates: np.ndarray
    true_rates: np.ndarray
    objective: list[float]
    block_objectives: list[float]
    iterations: int
    converged: bool
    history: list[dict] = field(default_factory=list, repr=False)
    iterates: list[np.ndarray] | None = field(default=None, repr=False)

    @property
    def sum_rate(self) -> float:
        return float(self.rates.sum())

    @property
    def true_sum_rate(self) -> float:
        return float(self.true_rates.sum())


class WmmseProblem:
    """Channels, statistics and constraints of one WMMSE instance.

    Parameters
    ----------
    H : ndarray, shape (I, K, I, N, M)
    gains : ndarray, shape (I, K, I)
    powers : ndarray, shape (I,)
    same : ndarray of bool, shape (I, I)
        Cells whose mutual links are known instantaneously.
    noise : float
    robust : bool
        Include the statistical intercoalition interference terms.
    """

    def __init__(self, H, gains, powers, same, noise: float = 1.0, robust: bool = True):
        self.H = np.asarray(H)
        self.gains = np.asarray(gains, dtype=float)
        self.powers = np.asarray(powers, dtype=float)
        self.same = np.asarray(same, dtype=bool)
        self.noise = float(noise)
        self.robust = bool(robust)
        I, K, _, N, M = self.H.shape
        self.shape = (I, K, N, M)
        cells = np.arange(I)
        self.Hd = self.H[cells, :, cells]  # (I, K, N, M) direct links
        self._known = self.same[:, None, :, None, None, None]
        self._outside = (~self.same).astype(float)

    # receive side ----------------------------------------------------------
    def covariance(self, V) -> np.ndarray:
        """Robust (or naive) received covariance ``Phi_bar`` per MS."""
        HV = np.einsum("ikjnm,jlmd->ikjlnd", self.H, V) * self._known
        Phi = np.einsum("ikjlnd,ikjlpd->iknp", HV, HV.conj())
        load = np.full(Phi.shape[:2], self.noise)
        if self.robust:
            vpow = np.sum(np.abs(V) ** 2, axis=(1, 2, 3))
            load = load + np.einsum("ikj,ij,j->ik", self.gains, self._outside, vpow)
        return Phi + load[..., None, None] * np.eye(self.shape[2])

    def true_covariance(self, V) -> np.ndarray:
        HV = np.einsum("ikjnm,jlmd->ikjlnd", self.H, V)
        return np.einsum("ikjlnd,ikjlpd->iknp", HV, HV.conj()) + self.noise * np.eye(self.shape[2])

    def direct(self, V) -> np.ndarray:
        return np.einsum("iknm,ikmd->iknd", self.Hd, V)

    def mse(self, U, V, Phi=None) -> np.ndarray:
        """Per-stream MSE ``1 - 2 Re(u^H H v) + u^H Phi_bar u``."""
        if Phi is None:
            Phi = self.covariance(V)
        uh = np.einsum("iknd,iknd->ikd", U.conj(), self.direct(V))
        uPu = np.einsum("iknd,iknp,ikpd->ikd", U.conj(), Phi, U)
        return 1.0 - 2.0 * uh.real + uPu.real

    def receivers(self, V):
        Phi = self.covariance(V)
        U = np.linalg.solve(Phi, self.direct(V))
        return U, self.mse(U, V, Phi)

    # transmit side ---------------------------------------------------------
    def precoders(self, U, W):
        """Power-constrained minimizer ``V_i = (Gamma_bar_i + mu_i I)^-1 H^H U W``."""
        I, K, N, M = self.shape
        UH = np.einsum("jlnd,jlinm->jlidm", U.conj(), self.H)
        known = self.same.T[:, None, :, None, None]
        Gam = np.einsum("jlidm,jld,jlidp->imp", (UH * known).conj(), W, UH)
        if self.robust:
            tr = np.einsum("jlnd,jld->jl", np.abs(U) ** 2, W)
            Gam = Gam + np.einsum("jli,ji,jl->i", self.gains, self._outside.T, tr)[:, None, None] * np.eye(M)
        X = np.einsum("iknm,iknd,ikd->ikmd", self.Hd.conj(), U, W)

        lam, Q = np.linalg.eigh(Gam)
        lam = np.maximum(lam, 0.0)
        Y = np.einsum("imp,ikmd->ikpd", Q.conj(), X)  # rotated, (I, K, M, d)
        y2 = np.sum(np.abs(Y) ** 2, axis=(1, 3))  # (I, M)
        mu = self._multipliers(lam, y2)
        with np.errstate(divide="ignore", invalid="ignore"):
            Z = Y / (lam + mu[:, None])[:, None, :, None]
        Z[~np.isfinite(Z)] = 0.0  # flat modes carrying no signal
        V = np.einsum("imp,ikpd->ikmd", Q, Z)
        return V, mu

    def _multipliers(self, lam, y2) -> np.ndarray:
        # Bisection on the power of (Gamma + mu I)^-1 X per BS; mu = 0 if the
        # unconstrained minimizer already meets the budget.
        P = self.powers
        tiny = 1e-12 * np.maximum(lam.max(axis=1, keepdims=True), 1e-300)
        flat = lam <= tiny
        negligible = y2 <= 1e-24 * np.maximum(y2.sum(axis=1, keepdims=True), 1e-300)
        with np.errstate(divide="ignore", invalid="ignore"):
            p0 = np.where(flat & negligible, 0.0, y2 / lam**2).sum(axis=1)
        unconstrained = ~(flat & ~negligible).any(axis=1) & (p0 <= P)

        def power(mu):
            return np.sum(y2 / (lam + mu[:, None]) ** 2, axis=1)

        lo = np.zeros_like(P)
        hi = np.sqrt(y2.sum(axis=1) / P)
        for _ in range(_BISECTION_STEPS):
            mid = 0.5 * (lo + hi)
            over = power(mid) > P
            lo = np.where(over, mid, lo)
            hi = np.where(over, hi, mid)
        mu = np.where(unconstrained, 0.0, hi)
        if not np.all(np.isfinite(mu)):
            raise NumericError("non-finite Lagrange multiplier")
        return mu

    def objective(self, U, W, V) -> float:
        e = self.mse(U, V)
        return float(np.sum(W * e - np.log(W) - 1.0))

    def messages(self, U, W, V) -> tuple[np.ndarray, np.ndarray]:
        """Scalars exchanged between coalitions: ``||V_j||_F^2`` and ``tr(U W U^H)``."""
        vpow = np.sum(np.abs(V) ** 2, axis=(1, 2, 3))
        tr = np.einsum("jlnd,jld->jl", np.abs(U) ** 2, W)
        return vpow, tr


def initial_precoders(H, powers, d: int) -> np.ndarray:
    """``d`` strongest right singular vectors of each direct channel at equal power."""
    I, K = H.shape[0], H.shape[1]
    cells = np.arange(I)
    Hd = H[cells, :, cells]
    Vh = np.linalg.svd(Hd)[2]  # (I, K, M, M)
    V = Vh[..., :d, :].conj().swapaxes(-1, -2)
    return V * np.sqrt(np.asarray(powers, dtype=float) / (K * d))[:, None, None, None]


def wmmse_objective(U, W, V, channels: ChannelRealization, network: Network,
                    structure: CoalitionStructure, *, robust: bool = True) -> float:
    """``sum (w e_bar - ln w - 1)`` for the given filters and weights."""
    prob = WmmseProblem(channels.H, network.gains, network.powers, coalition_mask(structure),
                        network.noise, robust)
    return prob.objective(U, np.asarray(W, dtype=float), V)


def _solve(prob: WmmseProblem, V0, d: int, max_iters: int, rel_tol: float, keep_iterates: bool,
           trace_path) -> PrecodingSolution:
    V = initial_precoders(prob.H, prob.powers, d) if V0 is None else np.array(V0, dtype=complex)
    I, K = V.shape[:2]
    W = np.ones((I, K, d))
    objective, blocks, history = [], [], []
    iterates = [V.copy()] if keep_iterates else None
    mu = np.zeros(I)
    converged = False
    it = 0
    for it in range(1, max_iters + 1):
        U, e = prob.receivers(V)
        blocks.append(prob.objective(U, W, V))
        if np.any(e <= 0) or not np.all(np.isfinite(e)):
            raise NumericError(f"invalid MSE at iteration {it}")
        W = 1.0 / e
        blocks.append(float(np.sum(W * e - np.log(W) - 1.0)))
        V, mu = prob.precoders(U, W)
        f = prob.objective(U, W, V)
        blocks.append(f)
        if not np.isfinite(f):
            raise NumericError(f"non-finite objective at iteration {it}")
        if keep_iterates:
            iterates.append(V.copy())
        vpow, tr = prob.messages(U, W, V)
        history.append({
            "iteration": it,
            "objective": f,
            "sum_rate": float(-np.log2(e).sum()),
            "bs_power": vpow.tolist(),
            "mu": mu.tolist(),
            "ms_trace": tr.ravel().tolist(),
        })
        objective.append(f)
        if len(objective) > 1 and abs(objective[-2] - f) <= rel_tol * abs(objective[-2]):
            converged = True
            break

    U, e = prob.receivers(V)
    rates = -np.log2(e)
    Phi = prob.true_covariance(V)
    Ut = np.linalg.solve(Phi, prob.direct(V))
    true_rates = _rates(prob, Ut, V)
    if trace_path is not None:
        _write_trace(trace_path, history)
    return PrecodingSolution(U=U, V=V, W=W, mu=mu, rates=rates, true_rates=true_rates,
                             objective=objective, block_objectives=blocks, iterations=it,
                             converged=converged, history=history, iterates=iterates)


def _write_trace(path, history) -> None:
    with open(Path(path), "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["iteration", "objective", "sum_rate", "bs_power", "mu"])
        for h in history:
            writer.writerow([h["iteration"], repr(h["objective"]), repr(h["sum_rate"]),
                             ";".join(map(repr, h["bs_power"])), ";".join(map(repr, h["mu"]))])


def robust_wmmse(structure: CoalitionStructure, channels: ChannelRealization, network: Network,
                 scenario: Scenario, V0=None, *, max_iters: int = 500, rel_tol: float = 1e-6,
                 robust: bool = True, keep_iterates: bool = False, trace_path=None) -> PrecodingSolution:
    """WMMSE precoding for a coalition structure.

    Links inside a coalition are used instantaneously; links across
    coalitions enter through their large-scale gains in ``network``.

    Parameters
    ----------
    structure : CoalitionStructure
    channels : ChannelRealization
    network : Network
        Supplies gains, per-BS powers and the noise variance.
    scenario : Scenario
        Supplies the number of streams.
    V0 : ndarray, optional
        Initial precoders, ``(I, K, M, d)``; dominant eigenmodes by default.
    max_iters, rel_tol
        Stop when the objective changes by less than ``rel_tol`` relative.
    robust : bool
        ``False`` drops the intercoalition statistics (naive WMMSE).
    keep_iterates : bool
        Keep every precoder iterate in ``solution.iterates``.
    trace_path : path, optional
        Write one CSV line per iteration.
    """
    prob = WmmseProblem(channels.H, network.gains, network.powers, coalition_mask(structure),
                        network.noise, robust)
    return _solve(prob, V0, scenario.streams_per_ms, max_iters, rel_tol, keep_iterates, trace_path)


def naive_wmmse(structure, channels, network, scenario, V0=None, **options) -> PrecodingSolution:
    """WMMSE that ignores interference from outside the coalition."""
    options["robust"] = False
    return robust_wmmse(structure, channels, network, scenario, V0, **options)


def _rates(prob: WmmseProblem, U, V, same=None) -> np.ndarray:
    HV = np.einsum("ikjnm,jlmd->ikjlnd", prob.H, V)
    if same is not None:
        HV = HV * same[:, None, :, None, None, None]
    G = np.einsum("iknd,ikjlne->ikdjle", U.conj(), HV)
    total = np.sum(np.abs(G) ** 2, axis=(3, 4, 5))
    useful = np.abs(np.einsum("iknd,iknd->ikd", U.conj(), prob.direct(V))) ** 2
    noise = prob.noise * np.sum(np.abs(U) ** 2, axis=2)
    with np.errstate(divide="ignore", invalid="ignore"):
        sinr = useful / (total - useful + noise)
    return np.log2(1.0 + np.where(useful > 0, sinr, 0.0))  # switched-off streams carry nothing


def instantaneous_rates(structure: CoalitionStructure | None, channels: ChannelRealization, U, V, *,
                        noise: float = 1.0, retrain: bool = True, interference: str = "all") -> np.ndarray:
    """Per-stream rates (bits) on the actual channels.

    Parameters
    ----------
    structure : CoalitionStructure or None
        Needed only with ``interference="coalition"``.
    U, V : ndarray
    retrain : bool
        Replace ``U`` by the MMSE receivers of the chosen interference set.
    interference : {"all", "coalition"}
        ``"coalition"`` keeps only intracoalition links, the setting of the
        first transmission phase where coalitions are time multiplexed.
    """
    if interference not in ("all", "coalition"):
        raise ValueError("interference must be 'all' or 'coalition'")
    H = channels.H
    I = H.shape[0]
    if interference == "coalition":
        if structure is None:
            raise ValueError("coalition interference needs a structure")
        same = coalition_mask(structure)
    else:
        same = np.ones((I, I), dtype=bool)
    prob = WmmseProblem(H, np.zeros(H.shape[:3]), np.ones(I), same, noise, robust=False)
    if retrain:
        U = np.linalg.solve(prob.covariance(V), prob.direct(V))
    return _rates(prob, U, V, same)


def instantaneous_sum_rate(structure, channels, solution: PrecodingSolution, **options) -> float:
    """Sum of :func:`instantaneous_rates` for a solution's filters."""
    return float(instantaneous_rates(structure, channels, solution.U, solution.V, **options).sum())
