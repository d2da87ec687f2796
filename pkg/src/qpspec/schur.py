"""Schur-complement block inversion and the Q/G/F self-energy functions.

The recursive multiscale inverse eliminates the non-resonant block first and
folds resonant clusters in one Schur step each; every assembled inverse is
measured against the dense solve, so elimination order is a performance
choice, not a correctness one.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg as sla

from .dual_operator import RAW, restrict
from .errors import NonResonanceFloorError, SingularBlockError
from .lattice import SiteSet
from .model import Problem, gamma_for_k

PIVOT_RTOL = 1e-12


@dataclass(frozen=True)
class ResolventHandle:
    """An inverse together with the matrix it inverts and a condition estimate."""

    matrix: np.ndarray
    inverse: np.ndarray
    condition_estimate: float
    E: float = None
    sites: SiteSet = None

    def residual(self) -> float:
        n = self.matrix.shape[0]
        R = self.matrix @ self.inverse - np.eye(n)
        return float(np.max(np.abs(R)))


def _check_block(block: np.ndarray, block_id):
    svals = np.linalg.svd(block, compute_uv=False)
    norm = float(svals[0]) if svals.size else 0.0
    small = float(svals[-1]) if svals.size else 0.0
    if small < PIVOT_RTOL * max(norm, 1e-300):
        raise SingularBlockError(
            f"pivot block {block_id} singular: smallest singular value {small:.3g}",
            block_id=block_id)
    return norm / small


def schur_complement(M: np.ndarray, idx1) -> np.ndarray:
    """H~_2 = H_2 - Gamma_21 H_1^{-1} Gamma_12 for the block split given by idx1.

    idx1 indexes the eliminated block; the complement keeps its original
    order.  Hermitian input and real E give a Hermitian complement.
    """
    M = np.asarray(M)
    n = M.shape[0]
    idx1 = np.asarray(idx1, dtype=int)
    mask = np.zeros(n, dtype=bool)
    mask[idx1] = True
    idx2 = np.flatnonzero(~mask)
    H1 = M[np.ix_(idx1, idx1)]
    _check_block(H1, "H1")
    G12 = M[np.ix_(idx1, idx2)]
    G21 = M[np.ix_(idx2, idx1)]
    return M[np.ix_(idx2, idx2)] - G21 @ np.linalg.solve(H1, G12)


def block_inverse(M: np.ndarray, blocks) -> ResolventHandle:
    """Assemble M^{-1} by folding the given disjoint index blocks in order.

    Each fold applies the two-block Schur inversion formula; the running
    inverse G over the union of processed blocks is updated in place.
    """
    M = np.asarray(M, dtype=complex)
    n = M.shape[0]
    blocks = [np.asarray(b, dtype=int) for b in blocks]
    blocks = [b for b in blocks if b.size]
    seen = np.concatenate(blocks) if blocks else np.array([], dtype=int)
    if len(np.unique(seen)) != n or seen.size != n:
        raise ValueError("blocks must partition the index range exactly")

    order = blocks[0]
    H0 = M[np.ix_(order, order)]
    cond = _check_block(H0, 0)
    G = np.linalg.inv(H0)
    for bi, b in enumerate(blocks[1:], start=1):
        G12 = M[np.ix_(order, b)]
        G21 = M[np.ix_(b, order)]
        S = M[np.ix_(b, b)] - G21 @ G @ G12
        cond = max(cond, _check_block(S, bi))
        Sinv = np.linalg.inv(S)
        GB = G @ G12
        BG = G21 @ G
        top_left = G + GB @ Sinv @ BG
        top_right = -GB @ Sinv
        bottom_left = -Sinv @ BG
        order = np.concatenate([order, b])
        G = np.block([[top_left, top_right], [bottom_left, Sinv]])
    # undo the processing order
    perm = np.empty(n, dtype=int)
    perm[order] = np.arange(n)
    G = G[np.ix_(perm, perm)]
    return ResolventHandle(M, G, condition_estimate=float(cond))


def multiscale_inverse(problem: Problem, E: float, S: SiteSet, k: float,
                       clusters=(), normalization: str = RAW,
                       floor: float = None, gamma: float = None) -> ResolventHandle:
    """Invert (E - H_S) by non-resonant elimination plus cluster Schur steps.

    Every site outside all clusters must satisfy |E - v(n,k)| >= floor;
    violations report the site.  Clusters are folded in increasing size.
    """
    H = restrict(problem, S, k, normalization, gamma=gamma)
    A = E * np.eye(len(S)) - H.entries
    cluster_sets = [SiteSet.from_iterable(c) for c in clusters]
    in_cluster = set()
    for c in cluster_sets:
        in_cluster.update(c.sites)
    if floor is None:
        floor = PIVOT_RTOL
    diag = np.real(np.diag(A))
    free = []
    for i, s in enumerate(H.sites):
        if s in in_cluster:
            continue
        if abs(diag[i]) < floor:
            raise NonResonanceFloorError(
                f"site {s} violates non-resonance floor: |E - v| = {abs(diag[i]):.3g}",
                site=s)
        free.append(i)
    blocks = []
    if free:
        blocks.append(np.asarray(free, dtype=int))
    for c in sorted(cluster_sets, key=len):
        idx = [H.sites.index(s) for s in c if s in H.sites]
        if idx:
            blocks.append(np.asarray(sorted(idx), dtype=int))
    handle = block_inverse(A, blocks)
    return ResolventHandle(A, handle.inverse, handle.condition_estimate, E=E, sites=H.sites)


# ---------------------------------------------------------------------------
# Reduced solves: Q, G, F
# ---------------------------------------------------------------------------


class ReducedSolver:
    """LU-backed evaluations of the self-energy functions over S minus pivots.

    One factorization of (E - H_{S \\ pivots}) is shared by Q, G and F at a
    fixed (S, k, E); spectral solvers rebuild per E-iterate.
    """

    def __init__(self, problem: Problem, S: SiteSet, k: float, pivots,
                 normalization: str = RAW, gamma: float = None):
        self.problem = problem
        self.k = k
        self.normalization = normalization
        self.gamma = gamma_for_k(k) if gamma is None else gamma
        self.pivots = [tuple(p) for p in pivots]
        self.full = restrict(problem, S, k, normalization, gamma=self.gamma)
        keep = [i for i, s in enumerate(self.full.sites) if s not in set(self.pivots)]
        self.reduced_sites = [self.full.sites.sites[i] for i in keep]
        self._keep = np.asarray(keep, dtype=int)
        self._piv_idx = {p: self.full.sites.index(p) for p in self.pivots}
        self.H_rest = self.full.entries[np.ix_(self._keep, self._keep)]
        self._lu_cache = {}

    def coupling_column(self, m0) -> np.ndarray:
        """h(n, m0) for n in the reduced set."""
        j = self._piv_idx[tuple(m0)]
        return self.full.entries[self._keep, j]

    def _lu(self, E: float):
        key = float(E)
        if key not in self._lu_cache:
            if not self.reduced_sites:
                raise SingularBlockError("reduced set is empty")
            A = E * np.eye(len(self.reduced_sites)) - self.H_rest
            try:
                lu, piv = sla.lu_factor(A)
            except Exception as exc:  # pragma: no cover - scipy raises LinAlgError
                raise SingularBlockError(f"reduced matrix singular at E={E}") from exc
            if np.min(np.abs(np.diag(lu))) < PIVOT_RTOL * max(1.0, np.max(np.abs(np.diag(lu)))):
                raise SingularBlockError(f"reduced matrix singular at E={E}")
            if len(self._lu_cache) > 8:
                self._lu_cache.clear()
            self._lu_cache[key] = (lu, piv)
        return self._lu_cache[key]

    def solve(self, E: float, rhs: np.ndarray) -> np.ndarray:
        lu, piv = self._lu(E)
        return sla.lu_solve((lu, piv), rhs)

    def q(self, m0, E: float) -> complex:
        """Q(m0, S; E) = sum h(m0, m') K(m', n') h(n', m0); real for real E."""
        if not self.reduced_sites:
            return 0j
        col = self.coupling_column(m0)          # h(n, m0)
        row = np.conj(col)                      # h(m0, n)
        return complex(row @ self.solve(E, col))

    def g(self, mp, mm, E: float) -> complex:
        """G(mp, mm, S; E) = h(mp, mm) + sum h(mp, m') K(m', n') h(n', mm)."""
        jp, jm = self._piv_idx[tuple(mp)], self._piv_idx[tuple(mm)]
        direct = complex(self.full.entries[jp, jm])
        if not self.reduced_sites:
            return direct
        col = self.coupling_column(mm)          # h(n, mm)
        row = np.conj(self.coupling_column(mp))  # h(mp, n)
        return complex(direct + row @ self.solve(E, col))

    def f(self, m0, E: float) -> dict:
        """F(m0, n; E), the eigenvector tail: phi(n) = -F(n), phi(m0) = 1.

        The sign follows the Schur blocks of (E - H), whose couplings are
        -h; the assembled phi(n) = -F(n) = +K h(., m0) solves H phi = E phi.
        """
        col = self.coupling_column(m0)
        x = self.solve(E, col)
        return {s: -complex(x[i]) for i, s in enumerate(self.reduced_sites)}


def q_function(problem: Problem, m0, S: SiteSet, k: float, E: float,
               normalization: str = RAW) -> float:
    val = ReducedSolver(problem, S, k, [m0], normalization).q(m0, E)
    if abs(val.imag) > 1e-9 * max(1.0, abs(val)):
        raise ArithmeticError(f"self-energy not real at E={E}: imag={val.imag:.3g}")
    return float(val.real)


def g_function(problem: Problem, mp, mm, S: SiteSet, k: float, E: float,
               normalization: str = RAW) -> complex:
    return ReducedSolver(problem, S, k, [mp, mm], normalization).g(mp, mm, E)


def f_vector(problem: Problem, m0, S: SiteSet, k: float, E: float,
             normalization: str = RAW) -> dict:
    return ReducedSolver(problem, S, k, [m0], normalization).f(m0, E)


def resolvent_derivative(problem: Problem, E: float, S: SiteSet, k: float,
                         order: int = 1, normalization: str = RAW) -> np.ndarray:
    """Analytic k-derivative of (E - H_{S,k})^{-1} of order 1 or 2.

    Uses d(A^{-1}) = -A^{-1} (dA) A^{-1} with dA = -dH/dk; only the diagonal
    of H depends on k.
    """
    if order not in (1, 2):
        raise ValueError("order must be 1 or 2")
    g = gamma_for_k(k)
    H = restrict(problem, S, k, normalization, gamma=g)
    n = len(S)
    A = E * np.eye(n) - H.entries
    Ainv = np.linalg.inv(A)
    phase = H.sites.array().astype(float) @ np.asarray(problem.omega) + k
    scale = (2.0 * np.pi) ** 2 if normalization == RAW else 1.0 / (256.0 * g)
    dH = np.diag(2.0 * scale * phase)
    first = Ainv @ dH @ Ainv
    if order == 1:
        return first
    d2H = np.diag(np.full(n, 2.0 * scale))
    return 2.0 * (Ainv @ dH @ Ainv @ dH @ Ainv) + Ainv @ d2H @ Ainv
