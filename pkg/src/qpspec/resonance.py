"""Resonance geometry on the k-axis.

Resonance points k_m = -m.omega/2 carry two families of intervals: the wide
exclusion zones of half-width sigma(m) (with their cumulative widenings
k_{m,s}) that gate the multiscale set constructions, and the narrow reset
intervals of half-width (delta^(s))^(3/4) whose membership defines the reset
set R(k) and the principal sets.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import CombinatorialBudgetError, LadderRangeError
from .model import Frequency, Problem, ScaleLadder, sigma

GEOMETRY_POINT_CAP = 4_000_000
BOUNDARY_TOL = 1e-14


@dataclass(frozen=True)
class ResonanceInterval:
    m: tuple
    s: int
    k_minus: float
    k_plus: float

    @property
    def center(self) -> float:
        return 0.5 * (self.k_minus + self.k_plus)

    def contains(self, k: float) -> bool:
        return self.k_minus < k < self.k_plus

    def boundary_hit(self, k: float) -> bool:
        return min(abs(k - self.k_minus), abs(k - self.k_plus)) <= BOUNDARY_TOL


@dataclass(frozen=True)
class ResonanceProfile:
    k: float
    reset: tuple              # the n^(l)(k), ordered by |n|
    scales: tuple             # bracketing scale per reset entry
    principal_sets: tuple     # m^(l)(k) as tuples of sites, l = 0..l(k)
    regime: tuple             # ("nonresonant", s) | ("simple_pair", n0) | ("graded", l)
    boundary_hits: tuple = ()
    window_note: str = ""


def k_point(freq, m) -> float:
    """k_m = -(m.omega)/2; antisymmetric in m exactly."""
    omega = freq.omega if isinstance(freq, (Frequency,)) else tuple(freq)
    dot = float(np.dot(np.asarray(omega, dtype=float), np.asarray(m, dtype=float)))
    return -0.5 * dot


def interval(freq, m, s: int, ladder: ScaleLadder) -> ResonanceInterval:
    """The widened exclusion interval (k^-_{m,s}, k^+_{m,s}).

    Half-width sigma(m) at s = 0, then widened by
    64 * sum of (delta^(r))^(1/2) over rungs r <= s-1 with
    (delta^(r))^(1/2) <= sigma(m).
    """
    km = k_point(freq, m)
    half = sigma(m, ladder)
    widen = 0.0
    for r in range(0, min(s, ladder.u_max + 1)):
        root = math.exp(0.5 * ladder.log_delta_at(r))
        if root <= half:
            widen += root
    widen *= 64.0
    return ResonanceInterval(tuple(m), s, km - half - widen, km + half + widen)


def j_interval(freq: Frequency, n) -> tuple:
    """The coarse interval (k_n - delta(n), k_n + delta(n)), delta(n) = a0 (1+|n|)^(-b0-3)."""
    km = k_point(freq, n)
    half = freq.a0 * (1.0 + sum(abs(c) for c in n)) ** (-freq.b0 - 3.0)
    return (km - half, km + half)


def _enumerate_lattice(nu: int, radius: int):
    if radius < 0:
        return np.zeros((0, nu), dtype=np.int64)
    count = (2 * radius + 1) ** nu
    if count > GEOMETRY_POINT_CAP:
        raise CombinatorialBudgetError(
            f"geometry enumeration of {count} lattice points exceeds the cap")
    grids = np.meshgrid(*([np.arange(-radius, radius + 1)] * nu), indexing="ij")
    pts = np.stack([g.ravel() for g in grids], axis=1)
    norms = np.abs(pts).sum(axis=1)
    return pts[(norms > 0) & (norms <= radius)]


def components(problem: Problem, s: int, window, ladder: ScaleLadder = None,
               m_list=None):
    """Connected components of the window minus all level-(s+1) widened intervals.

    Excluded intervals run over 0 < |m'| <= 12 R^(s) (or the explicit
    m_list); desk ladders only, since the enumeration radius must
    materialize.
    """
    ladder = ladder if ladder is not None else problem.ladder
    lo, hi = float(window[0]), float(window[1])
    if m_list is None:
        radius = int(math.floor(12.0 * ladder.R(s)))
        pts = _enumerate_lattice(problem.nu, radius)
    else:
        pts = np.asarray([tuple(m) for m in m_list], dtype=np.int64)
    excluded = []
    for m in pts:
        iv = interval(problem.frequency, tuple(int(c) for c in m), s + 1, ladder)
        if iv.k_plus > lo and iv.k_minus < hi:
            excluded.append((max(iv.k_minus, lo), min(iv.k_plus, hi)))
    excluded.sort()
    merged = []
    for a, b in excluded:
        if merged and a <= merged[-1][1]:
            merged[-1] = (merged[-1][0], max(merged[-1][1], b))
        else:
            merged.append((a, b))
    comps = []
    cursor = lo
    for a, b in merged:
        if a > cursor:
            comps.append((cursor, a))
        cursor = max(cursor, b)
    if cursor < hi:
        comps.append((cursor, hi))
    return comps


def reset(problem: Problem, k: float, search_radius: int,
          ladder: ScaleLadder = None) -> ResonanceProfile:
    """Reset set R(k), principal sets m^(l)(k), and the regime classification.

    R(k) = {n != 0 : |k - k_n| < (delta^(s(n)))^(3/4)} over |n| <= radius,
    ordered by |n| (magnitudes are distinct under the Diophantine
    condition; ties raise).  Boundary hits within 1e-14 are reported
    separately instead of silently binned.
    """
    ladder = ladder if ladder is not None else problem.ladder
    freq = problem.frequency
    if freq.window_n and search_radius > freq.window_n:
        raise LadderRangeError(
            f"search radius {search_radius} beyond the Diophantine certificate window "
            f"{freq.window_n}")
    pts = _enumerate_lattice(problem.nu, search_radius)
    omega = np.asarray(freq.omega, dtype=float)
    kn = -0.5 * (pts @ omega)
    norms = np.abs(pts).sum(axis=1)
    hits = []
    boundary = []
    for i in range(pts.shape[0]):
        n = tuple(int(c) for c in pts[i])
        s = ladder.scale_of(n)
        half = math.exp(0.75 * ladder.log_delta_at(s))
        gap = abs(k - kn[i])
        tol = min(BOUNDARY_TOL, 0.25 * half)  # boundary band scales with narrow widths
        if gap < half - tol:
            hits.append((int(norms[i]), n, s))
        elif gap <= half + tol:
            boundary.append(n)
    hits.sort(key=lambda t: (t[0], t[1]))
    for (r1, n1, _), (r2, n2, _) in zip(hits, hits[1:]):
        if r1 == r2:
            raise ArithmeticError(f"reset entries with equal norm: {n1}, {n2}")
    reset_pts = tuple(n for _, n, _ in hits)
    scales = tuple(s for _, _, s in hits)

    principal = []
    if reset_pts:
        zero = tuple([0] * problem.nu)
        current = {zero, reset_pts[0]}
        principal.append(tuple(sorted(current)))
        for n_l in reset_pts[1:]:
            mirrored = {tuple(a - b for a, b in zip(n_l, m)) for m in current}
            current = current | mirrored
            principal.append(tuple(sorted(current)))

    if not reset_pts:
        regime = ("nonresonant", ladder.u_max)
    elif len(reset_pts) == 1:
        regime = ("simple_pair", reset_pts[0])
    else:
        regime = ("graded", len(reset_pts) - 1)
    note = "" if freq.window_n else "finite-window only: no Diophantine certificate recorded"
    return ResonanceProfile(k, reset_pts, scales, tuple(principal), regime,
                            tuple(boundary), note)
