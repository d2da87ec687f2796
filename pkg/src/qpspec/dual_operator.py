"""The dual lattice matrix H_k, its lambda-normalized variant, and its symmetries.

Raw entries:         h(m,n;k) = (2 pi)^2 (m.omega + k)^2 on the diagonal,
                     eps * c0(n-m) off the diagonal.
Normalized entries:  v(n;k) = (n.omega + k)^2 / lambda on the diagonal with
                     lambda = 256 gamma, and eps * c0(n-m) / (lambda (2 pi)^2)
                     off the diagonal, so H_raw = lambda (2 pi)^2 H_norm.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import SiteBudgetError
from .lattice import SiteSet, ball
from .model import Problem, gamma_for_k

TWO_PI_SQ = (2.0 * math.pi) ** 2

RAW = "raw"
NORMALIZED = "lambda"


@dataclass(frozen=True)
class DualMatrix:
    """Finite Hermitian restriction of H_k to a site set."""

    sites: SiteSet
    k: float
    entries: np.ndarray
    normalization: str
    gamma: float = 1.0

    def __post_init__(self):
        if not np.all(np.isfinite(self.entries)):
            raise ValueError("non-finite matrix entries")

    @property
    def lam(self) -> float:
        return 256.0 * self.gamma

    def scale(self) -> float:
        """Conversion factor to raw units (1 for raw matrices)."""
        return 1.0 if self.normalization == RAW else self.lam * TWO_PI_SQ


def _diag_scale(normalization: str, gamma: float) -> float:
    return TWO_PI_SQ if normalization == RAW else 1.0 / (256.0 * gamma)


def _offdiag_scale(normalization: str, gamma: float) -> float:
    return 1.0 if normalization == RAW else 1.0 / (256.0 * gamma * TWO_PI_SQ)


def diagonal_value(problem: Problem, n, k: float, normalization: str = RAW,
                   gamma: float = None) -> float:
    g = gamma_for_k(k) if gamma is None else gamma
    return _diag_scale(normalization, g) * (problem.frequency.dot(n) + k) ** 2


def entry(problem: Problem, m, n, k: float, normalization: str = RAW,
          gamma: float = None) -> complex:
    """Single matrix entry h(m, n; k)."""
    g = gamma_for_k(k) if gamma is None else gamma
    if tuple(m) == tuple(n):
        return complex(_diag_scale(normalization, g) * (problem.frequency.dot(m) + k) ** 2)
    d = tuple(b - a for a, b in zip(m, n))
    c0 = problem.potential.c0(d)
    if c0 == 0:
        return 0j
    return problem.potential.epsilon * _offdiag_scale(normalization, g) * c0


def restrict(problem: Problem, S: SiteSet, k: float, normalization: str = RAW,
             gamma: float = None, order=None) -> DualMatrix:
    """Hermitian restriction of H_k to S in canonical (or the given) order."""
    if len(S) == 0:
        raise ValueError("cannot restrict to an empty site set")
    if problem.site_budget is not None and len(S) > problem.site_budget:
        raise SiteBudgetError(f"{len(S)} sites exceed budget {problem.site_budget}")
    g = gamma_for_k(k) if gamma is None else gamma
    sites = S if order is None else SiteSet(tuple(map(tuple, order)))
    n = len(sites)
    A = sites.array().astype(float)
    phase = A @ np.asarray(problem.omega, dtype=float) + k
    H = np.zeros((n, n), dtype=complex)
    np.fill_diagonal(H, _diag_scale(normalization, g) * phase ** 2)
    off = problem.potential.epsilon * _offdiag_scale(normalization, g)
    index = {s: i for i, s in enumerate(sites)}
    for d, c0 in problem.potential.coefficients.items():
        if all(c == 0 for c in d):
            continue
        val = off * c0
        for s, i in index.items():
            t = tuple(a + b for a, b in zip(s, d))
            j = index.get(t)
            if j is not None:
                H[i, j] = val  # h(m, n) = c(n - m) with n = m + d
    return DualMatrix(sites, k, H, normalization, g)


def cocycle_check(problem: Problem, m_shift, S: SiteSet, k: float,
                  normalization: str = NORMALIZED) -> float:
    """Max deviation in H_{k + l.omega}(m, n) = H_k(m + l, n + l) over S x S."""
    l = tuple(m_shift)
    k_shift = k + problem.frequency.dot(l)
    g = gamma_for_k(k)
    left = restrict(problem, S, k_shift, normalization, gamma=g)
    right = restrict(problem, S.translate(l), k, normalization, gamma=g,
                     order=[tuple(a + b for a, b in zip(s, l)) for s in S])
    return float(np.max(np.abs(left.entries - right.entries)))


def reflection_conjugation_check(problem: Problem, S: SiteSet, k: float,
                                 normalization: str = NORMALIZED) -> float:
    """Max deviation in H_{S,k}(m,n) = conj H_{-S,-k}(-m,-n)."""
    g = gamma_for_k(k)
    left = restrict(problem, S, k, normalization, gamma=g)
    right = restrict(problem, S.reflect(), -k, normalization, gamma=g,
                     order=[tuple(-c for c in s) for s in S])
    return float(np.max(np.abs(left.entries - np.conj(right.entries))))


def dense_spectrum(M: DualMatrix, residual_tol: float = 1e-10):
    """Full Hermitian eigendecomposition, ascending eigenvalues.

    Residual ||M phi - E phi|| per pair is checked against
    residual_tol * ||M||; this is the oracle every spectral claim is
    compared against.
    """
    H = M.entries
    herm = float(np.max(np.abs(H - H.conj().T)))
    if herm > 0:
        raise ValueError(f"matrix not exactly Hermitian (max dev {herm:.3g})")
    evals, evecs = np.linalg.eigh(H)
    scale = max(1.0, float(np.linalg.norm(H, 2)))
    resid = np.linalg.norm(H @ evecs - evecs * evals[None, :], axis=0)
    if np.any(resid > residual_tol * scale):
        raise ArithmeticError(f"eigensolver residual {resid.max():.3g} over budget")
    return evals, evecs


def resonance_point_flags(problem: Problem, k: float, radius: int,
                          tol: float = 1e-12):
    """Lattice vectors m with |k - k_m| < tol, k_m = -m.omega/2, |m| <= radius.

    Exact gap-edge work at such k must route through the dedicated gap
    operation rather than generic band evaluation.
    """
    hits = []
    B = ball(radius, problem.nu, budget=None)
    for m in B:
        if all(c == 0 for c in m):
            continue
        km = -0.5 * problem.frequency.dot(m)
        if abs(k - km) < tol:
            hits.append(m)
    return hits
