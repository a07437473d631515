"""Intracoalition interference alignment with the structured properties
used by the long-term model (semi-unitary receive filters, orthogonal
equal-power precoders, intracell and interstream zero forcing).

Two stages:

1. :func:`iia_relaxed_solve` finds filters ``(Ut, Vt)`` that null every
   intracoalition *intercell* link, ``Ut_ik^H H_ikj Vt_j = 0`` for ``j != i``,
   by alternating leakage minimization.
2. :func:`iia_orthogonalize` turns them into a full solution: each precoder
   is an orthonormal basis of the null space of ``B_ik^H`` (other MSs of the
   cell plus the other cells' relaxed receivers), each receive vector a unit
   null vector of ``D_ik,n^H`` (the other streams plus the intercell
   effective channels).

Channels of one coalition are passed as ``H[i, k, j]`` with coalition-local
indices, shape ``(C, K, C, N, M)``.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..errors import ConvergenceError, DegenerateChannelError
from ..longterm import CoalitionStructure
from ..netgen import ChannelRealization, Network, Scenario, make_rng

__all__ = [
    "RelaxedIia",
    "IiaSolution",
    "iia_relaxed_solve",
    "iia_orthogonalize",
    "iia_precoders",
    "null_space_basis",
]


@dataclass
class RelaxedIia:
    U: np.ndarray  # (C, K, N, d), orthonormal columns
    V: np.ndarray  # (C, M, K d), per-cell stacked, orthonormal columns
    leakage: float
    iterations: int


@dataclass
class IiaSolution:
    """Full IIA solution of one coalition.

    ``U[i, k]`` is ``N x d`` and ``V[i, k]`` is ``M x d``. The stacked
    matrices of the construction are kept for inspection: ``A[i]``,
    ``B[i][k]``, ``C[i][k]`` and ``D[i][k][n]``.
    """

    U: np.ndarray
    V: np.ndarray
    leakage: float
    A: list = field(repr=False, default_factory=list)
    B: list = field(repr=False, default_factory=list)
    C: list = field(repr=False, default_factory=list)
    D: list = field(repr=False, default_factory=list)

    def effective_channels(self, H: np.ndarray) -> np.ndarray:
        """``G[i, k, j, l] = U_ik^H H_ikj V_jl``, shape ``(C, K, C, K, d, d)``."""
        return np.einsum("iknd,ikjnm,jlme->ikjlde", self.U.conj(), H, self.V)

    def residuals(self, H: np.ndarray) -> np.ndarray:
        """Magnitudes of every intracoalition interference coefficient."""
        G = self.effective_channels(H)
        C, K, d = G.shape[0], G.shape[1], G.shape[4]
        mask = np.ones(G.shape, dtype=bool)
        for i in range(C):
            for k in range(K):
                mask[i, k, i, k] = ~np.eye(d, dtype=bool)
        return np.abs(G[mask])


def null_space_basis(X: np.ndarray, need: int, rank_tol: float = 1e-8) -> np.ndarray:
    """``need`` orthonormal vectors orthogonal to the columns of ``X``.

    Taken from the left singular vectors with the smallest singular values;
    raises :class:`DegenerateChannelError` if fewer than ``need`` of them
    are numerically zero.
    """
    rows = X.shape[0]
    if X.shape[1] == 0:
        return np.eye(rows, need, dtype=complex)
    Uf, s, _ = np.linalg.svd(X, full_matrices=True)
    full = np.zeros(rows)
    full[: s.size] = s
    scale = full.max() if full.max() > 0 else 1.0
    if full[rows - need] > rank_tol * scale:
        raise DegenerateChannelError(
            f"null space narrower than {need}: singular value {full[rows - need]:.3e} (scale {scale:.3e})"
        )
    return Uf[:, rows - need:]


def iia_relaxed_solve(H: np.ndarray, scenario: Scenario, rng_seed=None, *, max_iters: int = 5000,
                      tol: float = 1e-24) -> RelaxedIia:
    """Alternating leakage minimization for the relaxed intercell IA conditions.

    With precoders fixed, each receiver takes the ``d`` least dominant
    eigenvectors of its intracoalition intercell interference covariance;
    with receivers fixed, each BS takes the ``K d`` least dominant
    eigenvectors of the reciprocal covariance. Leakage is reported relative
    to the total intercell channel energy, which makes ``tol`` scale free.

    Raises
    ------
    ConvergenceError
        If the leakage is still above ``tol`` after ``max_iters`` iterations.
    """
    C, K = H.shape[0], H.shape[1]
    N, M = H.shape[3], H.shape[4]
    d = scenario.streams_per_ms
    rng = make_rng(rng_seed)
    cmask = ~np.eye(C, dtype=bool)[:, None, :, None, None]
    energy = np.sum(np.abs(H * cmask) ** 2)

    z = rng.standard_normal((C, M, K * d)) + 1j * rng.standard_normal((C, M, K * d))
    V = np.linalg.qr(z)[0]
    leak = np.inf
    for it in range(1, max_iters + 1):
        HV = np.einsum("ikjnm,jmc->ikjnc", H, V) * cmask
        Q = np.einsum("ikjnc,ikjpc->iknp", HV, HV.conj())
        U = np.linalg.eigh(Q)[1][..., :d]
        UH = np.einsum("iknd,ikjnm->ikjdm", U.conj(), H) * cmask
        Qv = np.einsum("ikjdm,ikjdp->jmp", UH.conj(), UH)
        V = np.linalg.eigh(Qv)[1][..., : K * d]
        L = np.einsum("ikjdm,jmc->ikjdc", UH, V)
        leak = float(np.sum(np.abs(L) ** 2) / energy) if energy > 0 else 0.0
        if leak < tol:
            break
    else:
        raise ConvergenceError("relaxed IIA did not converge", leak, max_iters)

    for X in list(U.reshape(-1, N, d)) + list(V):
        if np.linalg.svd(X, compute_uv=False).min() < 1e-6:
            raise DegenerateChannelError("relaxed IIA filters lost rank")
    return RelaxedIia(U=U, V=V, leakage=leak, iterations=it)


def iia_orthogonalize(relaxed: RelaxedIia, H: np.ndarray, scenario: Scenario, powers=None, *,
                      rank_tol: float = 1e-8) -> IiaSolution:
    """Build precoders and receive filters satisfying the structural assumptions.

    Parameters
    ----------
    relaxed : RelaxedIia
        Output of :func:`iia_relaxed_solve` for the same channels.
    H : ndarray, shape (C, K, C, N, M)
    scenario : Scenario
    powers : array_like, optional
        Per-BS powers of the coalition; ``scenario.tx_power`` by default.

    Notes
    -----
    Each receive vector is also restricted to the span of the relaxed
    receiver of its MS. When the intercell effective channels fill the
    complement of that span (the generic case of a non-singleton coalition)
    this equals the plain null space of ``D``; it additionally keeps
    intracell zero forcing for singletons. With ``d > 1`` the columns of
    ``U`` are unit norm but not necessarily mutually orthogonal.
    """
    C, K = H.shape[0], H.shape[1]
    N, M = H.shape[3], H.shape[4]
    d = scenario.streams_per_ms
    P = np.full(C, scenario.tx_power) if powers is None else np.asarray(powers, dtype=float)
    Ut = relaxed.U

    A, B = [], []
    V = np.zeros((C, K, M, d), dtype=complex)
    for i in range(C):
        cols = [H[j, l, i].conj().T @ Ut[j, l] for j in range(C) if j != i for l in range(K)]
        A_i = np.hstack(cols) if cols else np.zeros((M, 0), dtype=complex)
        A.append(A_i)
        B_i = []
        for k in range(K):
            own = [H[i, l, i].conj().T @ Ut[i, l] for l in range(K) if l != k]
            B_ik = np.hstack(own + [A_i]) if own or A_i.size else np.zeros((M, 0), dtype=complex)
            B_i.append(B_ik)
            V[i, k] = null_space_basis(B_ik, d, rank_tol) * np.sqrt(P[i] / (K * d))
        B.append(B_i)

    Cm, D = [], []
    U = np.zeros((C, K, N, d), dtype=complex)
    for i in range(C):
        C_i, D_i = [], []
        for k in range(K):
            cols = [H[i, k, j] @ V[j, l] for j in range(C) if j != i for l in range(K)]
            C_ik = np.hstack(cols) if cols else np.zeros((N, 0), dtype=complex)
            C_i.append(C_ik)
            outside = null_space_basis(Ut[i, k], N - d) if N > d else np.zeros((N, 0), dtype=complex)
            D_ik = []
            for n in range(d):
                streams = [H[i, k, i] @ V[i, k][:, m] for m in range(d) if m != n]
                D_ikn = np.column_stack(streams + [C_ik]) if streams else C_ik
                D_ik.append(D_ikn)
                u = null_space_basis(np.hstack([D_ikn, outside]), 1, rank_tol)[:, 0]
                U[i, k][:, n] = u / np.linalg.norm(u)
            D_i.append(D_ik)
        Cm.append(C_i)
        D.append(D_i)

    # rank condition on the desired effective channels, relative to the rms direct-link amplitude
    cells = np.arange(C)
    rms = np.sqrt(np.mean(np.abs(H[cells, :, cells]) ** 2))
    for i in range(C):
        for k in range(K):
            smin = np.linalg.svd(U[i, k].conj().T @ H[i, k, i] @ V[i, k], compute_uv=False).min()
            if smin <= 1e-6 * rms * np.sqrt(P[i] / (K * d)):
                raise DegenerateChannelError(f"effective channel of MS ({i}, {k}) lost rank: {smin:.3e}")

    sol = IiaSolution(U=U, V=V, leakage=0.0, A=A, B=B, C=Cm, D=D)
    res = sol.residuals(H)
    sol.leakage = float(np.max(res) ** 2) if res.size else 0.0
    return sol


def iia_precoders(structure: CoalitionStructure, channels: ChannelRealization, scenario: Scenario,
                  network: Network, rng_seed=None, **solver_options) -> tuple[np.ndarray, np.ndarray]:
    """IIA filters for a whole network, solved independently per coalition.

    Returns ``U`` of shape ``(I, K, N, d)`` and ``V`` of shape ``(I, K, M, d)``.
    """
    H = channels.H
    I, K = H.shape[0], H.shape[1]
    N, M = H.shape[3], H.shape[4]
    d = scenario.streams_per_ms
    U = np.zeros((I, K, N, d), dtype=complex)
    V = np.zeros((I, K, M, d), dtype=complex)
    seeds = np.random.SeedSequence(rng_seed).spawn(len(structure))
    for coalition, seed in zip(structure.coalitions, seeds):
        idx = sorted(coalition)
        Hc = H[np.ix_(idx, range(K), idx)]
        relaxed = iia_relaxed_solve(Hc, scenario, seed, **solver_options)
        sol = iia_orthogonalize(relaxed, Hc, scenario, network.powers[idx])
        U[idx] = sol.U
        V[idx] = sol.V
    return U, V
