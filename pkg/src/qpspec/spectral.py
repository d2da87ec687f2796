"""Eigenvalues, gap edges and band functions for the dual matrices.

The non-resonant branch solves the scalar fixed point E = v(m0) + Q(E); the
paired branch solves the 2x2 effective characteristic equation
chi(E) = (E - v+ - Q+)(E - v- - Q-) - |G|^2 = 0 by convex bisection.  The
gap edges at k_{n0} come from the limit characterization
E = v(0, k_{n0}) + Q(E) -+ |G(E)|, solved directly to avoid cancellation,
and every solve is reconciled against the dense eigensolver.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .cfracs import CFNode, cf_evaluate, quantitative_ift, zeta_roots  # noqa: F401
from .dual_operator import RAW, dense_spectrum, diagonal_value, restrict
from .errors import ConvergenceError, ReconciliationError, RegimeError
from .lattice import SiteSet, ball, l1_norm
from .model import Problem
from .resonance import k_point
from .schur import ReducedSolver

FIXED_POINT_TOL = 1e-13
MAX_FIXED_POINT_STEPS = 100
DEGENERACY_GAP = 1e-10


@dataclass(frozen=True)
class EigenRecord:
    E: float
    phi: dict
    host: SiteSet
    k: float
    regime: str
    residual: float
    oracle_gap: float = None


@dataclass(frozen=True)
class GapRecord:
    n0: tuple
    k_point: float
    E_minus: float
    E_plus: float
    width: float
    reconcile_dev: float = 0.0
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.E_plus < self.E_minus - 1e-15:
            raise ValueError("gap edges out of order")


def _phi_residual(H: np.ndarray, phi: np.ndarray, E: float) -> float:
    r = H @ phi - E * phi
    return float(np.max(np.abs(r)) / max(np.max(np.abs(phi)), 1e-300))


def eigen_simple(problem: Problem, m0, S: SiteSet, k: float,
                 normalization: str = RAW, tol: float = FIXED_POINT_TOL,
                 oracle_check: bool = True) -> EigenRecord:
    """Fixed-point solve of E = v(m0, k) + Q(m0, S; E), eigenvector from F.

    Starts at E = v(m0, k); contraction is guaranteed by |d_E Q| <= |eps|
    in the small-coupling regime.  Divergence falls back to the dense
    eigensolver with eigenvector-overlap selection; with the oracle check
    on, a converged value that disagrees with the overlap-selected dense
    eigenvalue flags a regime mismatch.
    """
    m0 = tuple(m0)
    solver = ReducedSolver(problem, S, k, [m0], normalization)
    v0 = diagonal_value(problem, m0, k, normalization, solver.gamma)
    scale = max(1.0, abs(v0))
    E = v0
    regime = "nonresonant"
    converged = False
    try:
        for _ in range(MAX_FIXED_POINT_STEPS):
            q = solver.q(m0, E).real
            E_next = v0 + q
            if abs(E_next - E) < tol * scale:
                E = E_next
                converged = True
                break
            E = E_next
    except Exception:
        converged = False
    if not converged:
        # dense fallback: take the eigenvalue whose eigenvector carries m0
        evals, evecs = dense_spectrum(solver.full)
        i0 = solver.full.sites.index(m0)
        j = int(np.argmax(np.abs(evecs[i0, :])))
        if abs(evecs[i0, j]) < 2.0 / 3.0:
            raise ConvergenceError(
                f"fixed point diverged at k={k}, m0={m0} and no dense eigenvector "
                "concentrates on m0 (regime mismatch)")
        E = float(evals[j])
        vec = evecs[:, j] / evecs[i0, j]
        phi = {s: complex(vec[i]) for i, s in enumerate(solver.full.sites)}
        residual = _phi_residual(solver.full.entries, vec, E)
        return EigenRecord(E, phi, solver.full.sites, k, "dense_fallback",
                           residual, 0.0)
    tail = solver.f(m0, E)
    phi = {s: 1.0 + 0j if s == m0 else -tail[s] for s in solver.full.sites}
    vec = np.array([phi[s] for s in solver.full.sites])
    residual = _phi_residual(solver.full.entries, vec, E)

    oracle_gap = None
    if oracle_check:
        evals, evecs = dense_spectrum(solver.full)
        i0 = solver.full.sites.index(m0)
        overlaps = np.abs(evecs[i0, :])
        j = int(np.argmax(overlaps))
        oracle_gap = abs(evals[j] - E)
        if oracle_gap > 1e-9 * scale:
            raise ReconciliationError(
                f"fixed point at k={k}, m0={m0} deviates from the dense oracle "
                f"by {oracle_gap:.3g} (regime mismatch)")
    return EigenRecord(float(E), phi, solver.full.sites, k, regime,
                       residual, oracle_gap)


# ---------------------------------------------------------------------------
# Paired resonance
# ---------------------------------------------------------------------------


def _chi_factory(problem: Problem, S: SiteSet, k: float, mp, mm,
                 normalization: str):
    solver = ReducedSolver(problem, S, k, [mp, mm], normalization)
    vp = diagonal_value(problem, mp, k, normalization, solver.gamma)
    vm = diagonal_value(problem, mm, k, normalization, solver.gamma)

    def parts(E: float):
        qp = solver.q(mp, E).real
        qm = solver.q(mm, E).real
        g = solver.g(mp, mm, E)
        return vp + qp, vm + qm, abs(g)

    def chi(E: float) -> float:
        a1, a2, b = parts(E)
        return (E - a1) * (E - a2) - b * b

    return solver, parts, chi, (vp, vm)


def _bisect_root(fun, a: float, b: float, fa: float, tol: float = 1e-15) -> float:
    for _ in range(200):
        mid = 0.5 * (a + b)
        fm = fun(mid)
        if fm == 0.0 or (b - a) < tol * max(1.0, abs(mid)):
            return mid
        if (fa < 0) == (fm < 0):
            a, fa = mid, fm
        else:
            b = mid
    return 0.5 * (a + b)


_GOLDEN_SECTION = 0.5 * (math.sqrt(5.0) - 1.0)


def _convex_roots(fun, lo: float, hi: float):
    """Roots of a convex function on [lo, hi]: 0, 1 (edge sign change) or 2.

    Golden-section locates the minimizer, so root pairs far closer than the
    window width are still resolved.
    """
    flo, fhi = fun(lo), fun(hi)
    if flo == 0.0:
        return [lo]
    if fhi == 0.0:
        return [hi]
    if (flo < 0) != (fhi < 0):
        return [_bisect_root(fun, lo, hi, flo)]
    if flo < 0 and fhi < 0:
        return []  # both ends below: no convex root inside
    a, b = lo, hi
    c = b - _GOLDEN_SECTION * (b - a)
    d = a + _GOLDEN_SECTION * (b - a)
    fc, fd = fun(c), fun(d)
    for _ in range(200):
        if (b - a) < 1e-15 * max(1.0, abs(a) + abs(b)):
            break
        if fc < fd:
            b, d, fd = d, c, fc
            c = b - _GOLDEN_SECTION * (b - a)
            fc = fun(c)
        else:
            a, c, fc = c, d, fd
            d = a + _GOLDEN_SECTION * (b - a)
            fd = fun(d)
        if min(fc, fd) < 0:
            break  # negative value found: the two sign changes are bracketed
    m = c if fc <= fd else d
    fm = fun(m)
    if fm > 0:
        return []
    if fm == 0.0:
        return [m]
    return [_bisect_root(fun, lo, m, flo),
            _bisect_root(fun, m, hi, fm)]


def _pair_windows(problem: Problem, S: SiteSet, k: float, mp, mm,
                  normalization: str, gamma: float):
    """E-search windows around each pivot's diagonal value.

    Each half-width stays below the nearest foreign diagonal value, which
    keeps the scan clear of the reduced resolvent's poles; overlapping
    windows merge (the resonant case).
    """
    vp = diagonal_value(problem, mp, k, normalization, gamma)
    vm = diagonal_value(problem, mm, k, normalization, gamma)
    windows = []
    for v in (vp, vm):
        rho = math.inf
        for s in S:
            if tuple(s) in (tuple(mp), tuple(mm)):
                continue
            rho = min(rho, abs(v - diagonal_value(problem, s, k, normalization, gamma)))
        half = 0.75 * min(rho, abs(vp - vm) + 1.0)
        windows.append((v - half, v + half))
    windows.sort()
    merged = [windows[0]]
    for a, b in windows[1:]:
        if a <= merged[-1][1]:
            merged[-1] = (merged[-1][0], max(merged[-1][1], b))
        else:
            merged.append((a, b))
    return merged


def eigen_pair(problem: Problem, S: SiteSet, k: float, mp, mm,
               normalization: str = RAW, oracle_check: bool = True):
    """Both roots of the paired characteristic equation with eigenvectors.

    Orders the pivots so the plus branch carries the larger diagonal-plus-
    self-energy (the ordered-pair convention); returns
    (E_plus, E_minus, phi_plus, phi_minus).
    """
    mp, mm = tuple(mp), tuple(mm)
    solver, parts, chi, (vp, vm) = _chi_factory(problem, S, k, mp, mm, normalization)
    center = 0.5 * (vp + vm)
    a1, a2, _ = parts(center)
    if a1 < a2:
        mp, mm = mm, mp
        solver, parts, chi, (vp, vm) = _chi_factory(problem, S, k, mp, mm, normalization)
    roots = []
    for lo, hi in _pair_windows(problem, S, k, mp, mm, normalization, solver.gamma):
        roots.extend(_convex_roots(chi, lo, hi))
    roots = sorted(roots)
    if len(roots) != 2:
        raise RegimeError(
            f"paired characteristic equation has {len(roots)} roots in the window "
            f"(regime misclassification at k={k})")
    E_minus, E_plus = roots

    def vector(E: float):
        a1, a2, _ = parts(E)
        g = solver.g(mp, mm, E)
        # null vector of [[E-a1, -g], [-conj(g), E-a2]] at a root of chi
        if abs(E - a2) >= abs(E - a1):
            amp_p, amp_m = E - a2, np.conj(g)
        else:
            amp_p, amp_m = g, E - a1
        norm = max(abs(amp_p), abs(amp_m), 1e-300)
        amp_p, amp_m = amp_p / norm, amp_m / norm
        phi = {mp: amp_p, mm: amp_m}
        if solver.reduced_sites:
            col_p = solver.coupling_column(mp)
            col_m = solver.coupling_column(mm)
            rest = solver.solve(E, col_p * amp_p + col_m * amp_m)
            phi.update({s: rest[i] for i, s in enumerate(solver.reduced_sites)})
        return {s: phi[s] for s in solver.full.sites}

    phi_plus, phi_minus = vector(E_plus), vector(E_minus)

    if oracle_check:
        evals, _ = dense_spectrum(solver.full)
        nearest = evals[np.argsort(np.abs(evals - center))[:2]]
        got = np.sort(np.asarray([E_minus, E_plus]))
        want = np.sort(nearest)
        dev = float(np.max(np.abs(got - want)))
        if dev > 1e-9 * max(1.0, float(np.max(np.abs(want)))):
            raise ReconciliationError(
                f"pair roots deviate from the dense oracle by {dev:.3g}")
    return E_plus, E_minus, phi_plus, phi_minus


def gap_at(problem: Problem, n0, S: SiteSet, normalization: str = RAW,
           reconcile_tol: float = 1e-9) -> GapRecord:
    """Gap edges at k = k_{n0} via E = v + Q -+ |G|, reconciled with the oracle.

    Route (i) solves the two scalar equations by fixed point; route (ii)
    takes the two dense eigenvalues nearest v(0, k_{n0}).  Disagreement
    beyond tolerance flags a regime misclassification.
    """
    n0 = tuple(n0)
    zero = tuple([0] * problem.nu)
    if zero not in S or n0 not in S:
        raise ValueError("paired set must contain 0 and n0")
    k = k_point(problem.frequency, n0)
    solver = ReducedSolver(problem, S, k, [zero, n0], normalization)
    v0 = diagonal_value(problem, zero, k, normalization, solver.gamma)
    scale = max(1.0, abs(v0))

    def edge(sign: float) -> float:
        E = v0
        for _ in range(MAX_FIXED_POINT_STEPS):
            q = solver.q(zero, E).real
            g = abs(solver.g(zero, n0, E))
            E_next = v0 + q + sign * g
            if abs(E_next - E) < FIXED_POINT_TOL * scale:
                return E_next
            E = E_next
        raise ConvergenceError(f"gap-edge fixed point stalled at n0={n0}")

    E_plus = edge(+1.0)
    E_minus = edge(-1.0)
    if E_plus < E_minus:
        E_plus, E_minus = E_minus, E_plus

    evals, _ = dense_spectrum(solver.full)
    nearest = np.sort(evals[np.argsort(np.abs(evals - v0))[:2]])
    dev = float(max(abs(nearest[0] - E_minus), abs(nearest[1] - E_plus)))
    if dev > reconcile_tol * scale:
        raise ReconciliationError(
            f"gap edges disagree with the dense oracle by {dev:.3g} at n0={n0}")
    pot = problem.potential
    bound = 2.0 * pot.epsilon * math.exp(-0.5 * pot.kappa0 * l1_norm(n0))
    if normalization != RAW:
        bound /= 256.0 * solver.gamma * (2.0 * math.pi) ** 2
    return GapRecord(n0, k, float(E_minus), float(E_plus),
                     float(E_plus - E_minus), dev,
                     {"v0": v0, "normalization": normalization,
                      "theoremB_bound": bound})


def paired_box(problem: Problem, n0, radius: float) -> SiteSet:
    """Dense fallback paired set B(radius) u (n0 + B(radius)); T-invariant."""
    base = ball(radius, problem.nu, budget=problem.site_budget)
    return base.union(base.translate(tuple(n0)))


# ---------------------------------------------------------------------------
# Band functions
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class BandPoint:
    k: float
    E: float
    regime: str
    error: str = ""


def band(problem: Problem, k_grid, S_builder, resonance_radius: int = 3,
         resonance_tol: float = 1e-9, normalization: str = RAW,
         jobs: int = 1):
    """E(k) along a grid; resonant points take the matching pair branch.

    S_builder maps k to the host set.  Points within resonance_tol of some
    k_m are classified "resonance_point"; points inside a pair window take
    the branch that continues E through the resonance (plus branch above
    k_m, minus branch below).  Failures are collected per point, and the
    grid is evaluated in parallel when jobs > 1 (output order preserved).
    """
    zero = tuple([0] * problem.nu)
    res_points = []
    B = ball(resonance_radius, problem.nu, budget=None)
    for m in B:
        if any(m):
            res_points.append((tuple(m), k_point(problem.frequency, m)))

    def solve(k: float) -> BandPoint:
        S = S_builder(k)
        hit = None
        for m, km in res_points:
            if abs(k - km) < resonance_tol:
                hit = (m, km, "resonance_point")
                break
            # pair handling window: strongest coupling heuristic
            if abs(k - km) < 64.0 * problem.potential.epsilon:
                hit = (m, km, "paired")
                break
        try:
            if hit is None:
                rec = eigen_simple(problem, zero, S, k, normalization,
                                   oracle_check=False)
                return BandPoint(k, rec.E, "nonresonant")
            if hit[2] == "resonance_point":
                record = gap_at(problem, hit[0], S if zero in S and hit[0] in S
                                else paired_box(problem, hit[0], 6), normalization)
                return BandPoint(k, record.E_plus if k >= hit[1] else record.E_minus,
                                 "resonance_point")
            m, km, _ = hit
            host = S if (zero in S and m in S) else paired_box(problem, m, 6)
            E_plus, E_minus, _, _ = eigen_pair(problem, host, k, zero, m,
                                               normalization, oracle_check=False)
            return BandPoint(k, E_plus if k > km else E_minus, "paired")
        except Exception as exc:  # collected, not fatal
            return BandPoint(k, float("nan"), "error", str(exc))

    ks = [float(k) for k in k_grid]
    if jobs and jobs > 1:
        from concurrent.futures import ThreadPoolExecutor
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            return list(pool.map(solve, ks))
    return [solve(k) for k in ks]


def feynman_derivative(problem: Problem, S: SiteSet, k: float,
                       normalization: str = RAW):
    """Per-eigenvalue dE/dk = sum_n |psi(n)|^2 dH(n,n)/dk, with validity mask.

    Eigenvalues closer than the degeneracy threshold to a neighbor are
    masked out (the formula needs simple eigenvalues).
    """
    H = restrict(problem, S, k, normalization)
    evals, evecs = dense_spectrum(H)
    phase = H.sites.array().astype(float) @ np.asarray(problem.omega) + k
    scale = (2.0 * math.pi) ** 2 if normalization == RAW else 1.0 / (256.0 * H.gamma)
    dH = 2.0 * scale * phase
    derivs = (np.abs(evecs) ** 2 * dH[:, None]).sum(axis=0)
    gaps = np.full(len(evals), np.inf)
    if len(evals) > 1:
        d = np.diff(evals)
        gaps[:-1] = np.minimum(gaps[:-1], d)
        gaps[1:] = np.minimum(gaps[1:], d)
    mask = gaps > DEGENERACY_GAP
    return derivs, mask, evals


def decay_envelope(problem: Problem, phi: dict, principal_sites,
                   kappa0: float = None, slack: float = 4.0):
    """Check |phi(n)| <= slack sqrt(eps) sum_{m in principal} e^{-(7/8) kappa0 |n-m|}.

    Returns (holds, worst_ratio).  Principal sites themselves are exempt
    (their amplitude is O(1) by design).
    """
    kappa0 = problem.potential.kappa0 if kappa0 is None else kappa0
    eps = problem.potential.epsilon
    principal = {tuple(m) for m in principal_sites}
    worst = 0.0
    for n, val in phi.items():
        if tuple(n) in principal:
            continue
        bound = slack * math.sqrt(eps) * sum(
            math.exp(-0.875 * kappa0 * l1_norm(tuple(a - b for a, b in zip(n, m))))
            for m in principal)
        if bound == 0:
            continue
        worst = max(worst, abs(val) / bound)
    return worst <= 1.0, worst
