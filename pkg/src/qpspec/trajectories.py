"""Trajectory combinatorics: weights, admissibility classes, certified sums.

A trajectory is a tuple of lattice sites with consecutive points distinct.
Weights follow

    w_D(gamma) = [prod w(n_j, n_{j+1})] * exp(sum_j D(n_j))
    W_D(gamma) = exp(-kappa0 ||gamma|| + sum_j D(n_j))

with ||gamma|| the total l1 path length.  Enumeration is exact over a finite
host set and every partial sum carries a certified tail, so the inequality
tests are sound rather than optimistic.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field

from .errors import CombinatorialBudgetError, EpsilonTooLargeError
from .lattice import SiteSet

ADMISSIBILITY_EXPONENT = 0.2          # the 1/5 in the pairwise norm bound
HIGH_D_FACTOR = 4.0                   # threshold D >= 4 T / kappa0


def _dist(a, b) -> int:
    return sum(abs(x - y) for x, y in zip(a, b))


def path_norm(points) -> int:
    return sum(_dist(a, b) for a, b in zip(points, points[1:]))


@dataclass(frozen=True)
class Trajectory:
    points: tuple

    def __post_init__(self):
        pts = tuple(map(tuple, self.points))
        object.__setattr__(self, "points", pts)
        if len(pts) < 1:
            raise ValueError("trajectory needs at least one point")
        if any(a == b for a, b in zip(pts, pts[1:])):
            raise ValueError("consecutive trajectory points must differ")

    def __len__(self):
        return len(self.points)

    @property
    def norm(self) -> int:
        return path_norm(self.points)


def concat(g1: Trajectory, g2: Trajectory) -> Trajectory:
    """Concatenation, dropping the duplicated junction when endpoints meet."""
    if g1.points[-1] == g2.points[0]:
        return Trajectory(g1.points + g2.points[1:])
    return Trajectory(g1.points + g2.points)


@dataclass(frozen=True)
class WeightProfile:
    """D-profile on a host set inside an ambient set, with (T, kappa0).

    Membership in the admissible profile class requires
    D(m) <= T mu(m)^(1/5) whenever D(m) >= 4 T / kappa0, where
    mu(m) = dist(m, ambient \\ host).
    """

    D: dict
    T: float
    kappa0: float
    host: SiteSet
    ambient: SiteSet
    _complement: tuple = field(default=None, repr=False, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "D", {tuple(k): float(v) for k, v in self.D.items()})
        comp = tuple(s for s in self.ambient if s not in self.host)
        object.__setattr__(self, "_complement", comp)

    @property
    def high_threshold(self) -> float:
        return HIGH_D_FACTOR * self.T / self.kappa0

    def mu(self, m) -> float:
        if not self._complement:
            return float("inf")
        m = tuple(m)
        return float(min(_dist(m, c) for c in self._complement))

    def dbar(self) -> float:
        return max(self.D.values()) if self.D else 1.0


def validate_profile(prof: WeightProfile):
    """Violations of the profile class; empty list means the profile is valid."""
    report = []
    if prof.kappa0 <= 0 or prof.kappa0 >= 1:
        report.append("kappa0 must lie in (0, 1)")
    for m in prof.host:
        d = prof.D.get(m)
        if d is None:
            report.append(f"missing D value at {m}")
            continue
        if d < 1.0:
            report.append(f"D({m}) = {d} below 1")
        if d >= prof.high_threshold and d > prof.T * prof.mu(m) ** ADMISSIBILITY_EXPONENT:
            report.append(f"D({m}) = {d} violates the mu^(1/5) cap")
    return report


def weights(g: Trajectory, prof: WeightProfile, w):
    """Return (w_D(g), W_D(g), ||g||, Dbar(g)); validates the pair weight w.

    Requires w(m, m) = 1 and w(m, n) <= exp(-kappa0 |m - n|) along the path.
    """
    pts = g.points
    norm = path_norm(pts)
    dsum = 0.0
    dbar = 0.0
    for p in pts:
        d = prof.D[tuple(p)]
        dsum += d
        dbar = max(dbar, d)
    prod = 1.0
    for a, b in zip(pts, pts[1:]):
        val = w(a, b)
        cap = math.exp(-prof.kappa0 * _dist(a, b))
        if val > cap * (1 + 1e-12):
            raise ValueError(f"pair weight w({a},{b}) = {val:.3g} above exp(-kappa0 d) = {cap:.3g}")
        prod *= val
    if len(pts) == 1 and abs(w(pts[0], pts[0]) - 1.0) > 1e-12:
        raise ValueError("pair weight must satisfy w(m, m) = 1")
    w_val = prod * math.exp(dsum)
    W_val = math.exp(-prof.kappa0 * norm + dsum)
    return w_val, W_val, norm, dbar


def _pair_ok(prof: WeightProfile, pts, i, j) -> bool:
    """The pairwise 1/5-power condition between positions i < j."""
    dm = min(prof.D[pts[i]], prof.D[pts[j]])
    return dm <= prof.T * path_norm(pts[i:j + 1]) ** ADMISSIBILITY_EXPONENT


def is_admissible(g: Trajectory, prof: WeightProfile, variant: str = "plain"):
    """Admissibility per the pairwise norm-growth condition.

    plain: every pair i < j with both D-values above 4T/kappa0 must satisfy
    min D <= T ||segment||^(1/5).  The R-variant exempts adjacent pairs but
    imposes the four flanking conditions around any exempt pair that
    actually violates the single-step bound.  Returns (bool, reason).
    """
    pts = g.points
    k = len(pts)
    hi = prof.high_threshold
    high = [prof.D[p] >= hi for p in pts]
    for i in range(k):
        if not high[i]:
            continue
        for j in range(i + 1, k):
            if not high[j]:
                continue
            if variant == "R" and j == i + 1:
                continue
            if not _pair_ok(prof, pts, i, j):
                return False, f"pair ({i},{j}) violates the norm bound"
    if variant == "R":
        for i in range(k - 1):
            if not (high[i] and high[i + 1]):
                continue
            dm = min(prof.D[pts[i]], prof.D[pts[i + 1]])
            if dm <= prof.T * _dist(pts[i], pts[i + 1]) ** ADMISSIBILITY_EXPONENT:
                continue
            # exempt adjacent pair in force: flanking conditions
            for jp in range(i):
                if not (_pair_ok(prof, pts, jp, i) and _pair_ok(prof, pts, jp, i + 1)):
                    return False, f"flanking condition fails at ({jp},{i})"
            for jq in range(i + 2, k):
                if not (_pair_ok(prof, pts, i, jq) and _pair_ok(prof, pts, i + 1, jq)):
                    return False, f"flanking condition fails at ({i},{jq})"
    elif variant != "plain":
        raise ValueError(f"unknown admissibility variant {variant!r}")
    return True, ""


def exempt_positions(g: Trajectory, prof: WeightProfile):
    """Positions i where the adjacent pair exceeds the single-step bound.

    Defined for trajectories in the R class; this is the exceptional set
    entering the four-case weight estimate.
    """
    pts = g.points
    hi = prof.high_threshold
    out = []
    for i in range(len(pts) - 1):
        dm = min(prof.D[pts[i]], prof.D[pts[i + 1]])
        if dm >= hi and dm >= prof.T * _dist(pts[i], pts[i + 1]) ** ADMISSIBILITY_EXPONENT:
            out.append(i)
    return out


# ---------------------------------------------------------------------------
# Exact enumeration with certified tails
# ---------------------------------------------------------------------------

ENUMERATION_CAP = 2_000_000


@dataclass(frozen=True)
class SumResult:
    partial: float
    tail: float
    by_length: tuple

    @property
    def total(self) -> float:
        return self.partial + self.tail


def sum_enumerate(m, n, prof: WeightProfile, eps0: float, variant: str = "R",
                  len_cap: int = 5, w=None) -> SumResult:
    """sum_k eps0^(k-1) sum over admissible gamma of w_D(gamma), plus tail.

    Enumerates every trajectory of length <= len_cap inside the host with
    endpoints (m, n); the tail bound sums eps0^(k-1) e^(k Dbar) (8/kappa0)^((k-1) nu)
    over k > len_cap and errors if that series diverges.
    """
    m, n = tuple(m), tuple(n)
    host = list(map(tuple, prof.host))
    if m not in prof.host or n not in prof.host:
        raise ValueError("trajectory endpoints must lie in the host set")
    if w is None:
        w = lambda a, b: math.exp(-prof.kappa0 * _dist(a, b))
    if len(host) ** max(0, len_cap - 2) > ENUMERATION_CAP:
        raise CombinatorialBudgetError(
            f"host of {len(host)} sites with len_cap {len_cap} exceeds the enumeration cap")

    by_length = []
    partial = 0.0
    for k in range(1, len_cap + 1):
        total_k = 0.0
        if k == 1:
            if m == n:
                g = Trajectory((m,))
                ok, _ = is_admissible(g, prof, variant)
                if ok:
                    total_k = weights(g, prof, w)[0]
        else:
            for interior in itertools.product(host, repeat=k - 2):
                pts = (m,) + interior + (n,)
                if any(a == b for a, b in zip(pts, pts[1:])):
                    continue
                g = Trajectory(pts)
                ok, _ = is_admissible(g, prof, variant)
                if ok:
                    total_k += weights(g, prof, w)[0]
        by_length.append(total_k)
        partial += (eps0 ** (k - 1)) * total_k

    if len(host) == 1:
        # no host trajectory of length >= 2 exists
        return SumResult(partial, 0.0, tuple(by_length))
    nu = prof.host.nu
    dbar = prof.dbar()
    ratio = eps0 * math.exp(dbar) * (8.0 / prof.kappa0) ** nu
    if ratio >= 1.0:
        raise EpsilonTooLargeError(
            f"tail series diverges: eps0 e^Dbar (8/kappa0)^nu = {ratio:.3g} >= 1")
    # sum_{k > K} eps0^(k-1) e^(k Dbar) q^(k-1) = e^Dbar ratio^K / (1 - ratio)
    tail = math.exp(dbar) * ratio ** len_cap / (1.0 - ratio)
    return SumResult(partial, tail, tuple(by_length))


@dataclass(frozen=True)
class BoundResult:
    value: float
    threshold_ok: bool
    log_eps_threshold: float


def log_smallness_threshold(prof: WeightProfile, include_exp_term: bool = False) -> float:
    """log of the smallness ceiling min(2^(-24 nu - 4) kappa0^(4 nu), 2^(-10 (nu+1)) T^(-8 nu)).

    The exponential third term exp(-(8 T / kappa0)^5) is below every
    positive float; it is only included on request (faithful-regime
    checks).
    """
    nu = prof.host.nu
    terms = [
        (-24 * nu - 4) * math.log(2.0) + 4 * nu * math.log(prof.kappa0),
        -10 * (nu + 1) * math.log(2.0) - 8 * nu * math.log(prof.T),
    ]
    if include_exp_term:
        terms.append(-((8.0 * prof.T / prof.kappa0) ** 5))
    return min(terms)


def closed_bound(m, n, prof: WeightProfile, eps0: float, strict: bool = False) -> BoundResult:
    """Closed-form ceiling for the weighted trajectory sum between m and n.

    Off-diagonal: min(3 sqrt(eps0) exp(-(7/8) kappa0 |m-n| + 2 T (min mu)^(1/5)),
                      2 sqrt(eps0) exp(-(1/4) kappa0 |m-n| + 2 Dbar)).
    Diagonal:     min(exp(D(m)) + 3 sqrt(eps0) exp(2 T mu(m)^(1/5)),
                      2 exp(2 Dbar)).

    threshold_ok records whether eps0 sits below the power-law part of the
    smallness ceiling; strict mode raises instead of flagging.
    """
    bad = validate_profile(prof)
    if bad:
        raise ValueError(f"invalid weight profile: {bad[0]}")
    m, n = tuple(m), tuple(n)
    log_thr = log_smallness_threshold(prof)
    ok = math.log(eps0) <= log_thr
    if strict and not ok:
        raise EpsilonTooLargeError(
            f"log eps0 = {math.log(eps0):.4g} above the smallness ceiling {log_thr:.4g}")
    root = math.sqrt(eps0)
    k0 = prof.kappa0
    T = prof.T
    dbar = prof.dbar()
    if m == n:
        v1 = math.exp(prof.D[m]) + 3.0 * root * math.exp(2.0 * T * prof.mu(m) ** ADMISSIBILITY_EXPONENT)
        v2 = 2.0 * math.exp(2.0 * dbar)
    else:
        dist = _dist(m, n)
        mu_min = min(prof.mu(m), prof.mu(n))
        v1 = 3.0 * root * math.exp(-0.875 * k0 * dist + 2.0 * T * mu_min ** ADMISSIBILITY_EXPONENT)
        v2 = 2.0 * root * math.exp(-0.25 * k0 * dist + 2.0 * dbar)
    return BoundResult(min(v1, v2), ok, log_thr)


def elementary_path_sum(m, n, k: int, host: SiteSet, alpha: float) -> float:
    """sum over gamma in Gamma(m, n; k, host) of exp(-alpha ||gamma||).

    Oracle for the (8 / alpha)^((k-1) nu) elementary bound; exact over the
    finite host, hence a lower bound for the lattice-wide sum.
    """
    m, n = tuple(m), tuple(n)
    sites = list(map(tuple, host))
    if k == 1:
        return 1.0 if m == n else 0.0
    total = 0.0
    for interior in itertools.product(sites, repeat=k - 2):
        pts = (m,) + interior + (n,)
        if any(a == b for a, b in zip(pts, pts[1:])):
            continue
        total += math.exp(-alpha * path_norm(pts))
    return total
