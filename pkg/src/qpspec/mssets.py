"""Multiscale set construction: site classes, plain/symmetrized/paired sets,
correct-word combinatorics and proper subtraction systems.

The plain set at scale s is B(3 R^(s)) with every straddling lower-scale set
removed; the symmetrized and paired variants instead remove whole
reflection-equivalence classes through an iterated subtraction that
stabilizes in fewer than 2^s steps by the correct-word bound.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import CombinatorialBudgetError, GeometryError, RegimeError
from .lattice import SiteSet, ball, diameter, l1_norm, set_distance, straddles
from .model import Problem, ScaleLadder, sigma
from .resonance import interval, k_point

# ---------------------------------------------------------------------------
# Correct words
# ---------------------------------------------------------------------------


def is_correct_word(letters) -> bool:
    """A word is correct when no sub-word returns to a letter over a strictly
    lower interior: there is no pair j < k with a_j = a_k and
    max interior < a_j.  One-letter words are correct; the empty interior
    maximum counts as -infinity, so immediate repeats are incorrect.
    """
    a = list(letters)
    n = len(a)
    for j in range(n):
        for k in range(j + 1, n):
            if a[j] == a[k] and all(a[i] < a[j] for i in range(j + 1, k)):
                return False
    return True


def minimal_incorrect_subword(letters):
    """Shortest incorrect sub-word (j, k) indices, or None for correct words."""
    a = list(letters)
    n = len(a)
    best = None
    for j in range(n):
        for k in range(j + 1, n):
            if a[j] == a[k] and all(a[i] < a[j] for i in range(j + 1, k)):
                if best is None or (k - j) < (best[1] - best[0]):
                    best = (j, k)
    return best


def max_correct_length(s: int, budget: int = 500_000) -> int:
    """Longest correct word over {1..s}, by depth-first search over correct
    prefixes (prefixes of correct words are correct, so pruning is exact).
    """
    if s > 4:
        raise CombinatorialBudgetError("exhaustive word search supported for s <= 4 only")
    best = 0
    visited = 0
    stack = [()]
    while stack:
        prefix = stack.pop()
        best = max(best, len(prefix))
        for letter in range(1, s + 1):
            word = prefix + (letter,)
            visited += 1
            if visited > budget:
                raise CombinatorialBudgetError("word enumeration budget exceeded")
            if _extension_correct(word):
                stack.append(word)
    return best


def _extension_correct(word) -> bool:
    # only sub-words ending at the new letter need checking
    a = word
    k = len(a) - 1
    for j in range(k):
        if a[j] == a[k] and all(a[i] < a[j] for i in range(j + 1, k)):
            return False
    return True


# ---------------------------------------------------------------------------
# Proper subtraction systems
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class SubtractionSystem:
    """A family of sets with levels; properness bounds the subtraction depth.

    `lobes` optionally stores, per set, a decomposition witnessing condition
    (ii); sets without a witness must have whole diameter below the bound.
    """

    sets: tuple
    levels: tuple
    lobes: tuple = None

    def __post_init__(self):
        if len(self.sets) != len(self.levels):
            raise ValueError("one level per set required")
        if self.lobes is not None and len(self.lobes) != len(self.sets):
            raise ValueError("one lobe decomposition per set when given")

    @property
    def max_level(self) -> int:
        return max(self.levels) if self.levels else 0

    def separation(self, a: int) -> float:
        """R_a: minimum distance between distinct level-a sets (inf if < 2 sets)."""
        idx = [i for i, t in enumerate(self.levels) if t == a]
        best = math.inf
        for i in range(len(idx)):
            for j in range(i + 1, len(idx)):
                best = min(best, set_distance(self.sets[idx[i]], self.sets[idx[j]]))
        return best


def validate_system(sys: SubtractionSystem):
    """Violations of the properness conditions; empty report means proper."""
    report = []
    for a in sorted(set(sys.levels)):
        if sys.separation(a) <= 0:
            report.append(f"level {a} sets are not positively separated")
    for i, (S, t) in enumerate(zip(sys.sets, sys.levels)):
        a = t + 1
        bound = (2.0 ** (-a)) * sys.separation(a)
        pieces = None
        if sys.lobes is not None and sys.lobes[i] is not None:
            pieces = [SiteSet.from_iterable(p) for p in sys.lobes[i]]
            union = SiteSet.from_iterable(x for p in pieces for x in p)
            if set(union.sites) != set(S.sites):
                report.append(f"set {i}: lobes do not cover the set")
                continue
        if pieces is None:
            if len(S) and diameter(S) >= bound:
                report.append(f"set {i}: diameter {diameter(S)} not below 2^-a R_a = {bound}")
            continue
        for p in pieces:
            if diameter(p) >= bound:
                report.append(f"set {i}: lobe diameter {diameter(p)} not below {bound}")
        for j, other in enumerate(sys.sets):
            if j == i or S.isdisjoint(other):
                continue
            for pi, p in enumerate(pieces):
                if p.isdisjoint(other):
                    report.append(f"set {i}: lobe {pi} misses intersecting set {j}")
    return report


def subtraction_fixpoint(start: SiteSet, sys: SubtractionSystem,
                         require_proper: bool = True):
    """Iterate L_l = L_{l-1} minus the union of system sets not inside L_{l-1}.

    Returns (final set, number of strict steps); the step count is checked
    against the 2^(max level) bound, and on exit every system set is inside
    or disjoint from the result.
    """
    if require_proper:
        bad = validate_system(sys)
        if bad:
            raise GeometryError(f"subtraction system not proper: {bad[0]}")
    current = start
    steps = 0
    cap = 2 ** sys.max_level
    while True:
        removers = [S for S in sys.sets if not S.issubset(current)]
        if not removers:
            break
        drop = set()
        for S in removers:
            drop.update(S.sites)
        nxt = current.difference(drop)
        if len(nxt) == len(current):
            break
        current = nxt
        steps += 1
        if steps > cap:
            raise GeometryError(f"subtraction failed to stabilize within 2^s = {cap} steps")
    for S in sys.sets:
        if not (S.issubset(current) or S.isdisjoint(current)):
            raise GeometryError("inside-or-disjoint dichotomy violated at the fixpoint")
    return current, steps


# ---------------------------------------------------------------------------
# Site classification and the Lambda sets
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class SiteClassification:
    """The sets M^(s')_{k, s-1} with their Lambda sets, for s' = 1..s-1."""

    k: float
    s: int
    members: dict            # s' -> tuple of lattice vectors
    lambda_sets: dict        # (s', m) -> SiteSet
    admissible: bool         # k outside every widened exclusion interval
    thresholds: dict = field(default_factory=dict)

    def all_lambda_sets(self):
        return list(self.lambda_sets.items())


class GeometryBuilder:
    """Caches the recursive Lambda-set construction for one problem."""

    def __init__(self, problem: Problem, ladder: ScaleLadder = None,
                 site_budget: int = None):
        self.problem = problem
        self.ladder = ladder if ladder is not None else problem.ladder
        if self.ladder is None:
            raise ValueError("geometry requires a scale ladder")
        if self.ladder.regime == "faithful":
            raise RegimeError("faithful ladders refuse set materialization; use a desk ladder")
        self.budget = site_budget if site_budget is not None else problem.site_budget
        self._plain_cache = {}

    # -- diagonal differences ------------------------------------------------

    def _v_diff(self, pts: np.ndarray, k: float) -> np.ndarray:
        """|v(m, k) - v(0, k)| in normalized units, lambda = 256."""
        omega = np.asarray(self.problem.omega, dtype=float)
        mw = pts @ omega
        return np.abs(mw * (mw + 2.0 * k)) / 256.0

    def _candidates(self, window_radius: int, include_zero: bool = False) -> np.ndarray:
        nu = self.problem.nu
        count = (2 * window_radius + 1) ** nu
        if count > 4_000_000:
            raise CombinatorialBudgetError(f"classification window of {count} points too large")
        grids = np.meshgrid(*([np.arange(-window_radius, window_radius + 1)] * nu), indexing="ij")
        pts = np.stack([g.ravel() for g in grids], axis=1)
        norms = np.abs(pts).sum(axis=1)
        return pts if include_zero else pts[norms > 0]

    def threshold(self, s_prime: int, s: int) -> float:
        """Class threshold at level s' inside the level-(s-1) classification."""
        base = (math.exp(self.ladder.log_delta_at(0)) / 16.0 if s_prime == 1
                else 0.75 * math.exp(self.ladder.log_delta_at(s_prime - 1)))
        shave = sum(math.exp(self.ladder.log_delta_at(s2 - 1))
                    for s2 in range(s_prime + 1, s))
        return base - shave

    def admissible_k(self, k: float, s: int, window_radius: int) -> bool:
        """k outside every (k^-_{m,s-1}, k^+_{m,s-1}) for 0 < |m| <= radius."""
        try:
            pts = self._candidates(window_radius)
        except CombinatorialBudgetError:
            return False
        for m in pts:
            mt = tuple(int(c) for c in m)
            try:
                iv = interval(self.problem.frequency, mt, max(s - 1, 0), self.ladder)
            except Exception:
                continue
            if iv.contains(k):
                return False
        return True

    def site_classes(self, k: float, s: int, window_radius: int = None,
                     pair=None) -> SiteClassification:
        """The classification M^(s')_{k, s-1}, s' = 1..s-1, with Lambda sets.

        Separation |m1 - m2| > 12 R^(s') is enforced within each class;
        a declared principal pair is exempt.  The sigma-interval
        admissibility of k is reported, not enforced (it fails for every k
        at desk scale).
        """
        if s < 2:
            raise ValueError("site classes exist for s >= 2")
        if window_radius is None:
            # must reach every potential straddler of B(3 R^(s))
            window_radius = int(math.floor(
                3.0 * self.ladder.R(s) + 3.0 * self.ladder.R(s - 1))) + 1
        pts = self._candidates(window_radius, include_zero=True)
        diffs = self._v_diff(pts.astype(float), k)
        members = {}
        lambda_sets = {}
        thresholds = {}
        taken = set()
        pair_pts = {tuple(p) for p in pair} if pair else set()
        for s_prime in range(s - 1, 0, -1):
            thr = self.threshold(s_prime, s)
            thresholds[s_prime] = thr
            mem = []
            if thr > 0:
                for i in np.flatnonzero(diffs <= thr):
                    m = tuple(int(c) for c in pts[i])
                    if m in taken:
                        continue
                    mem.append(m)
            mem.sort(key=lambda m: (l1_norm(m), m))
            # separation within the class (principal pair exempt)
            limit = 12.0 * self.ladder.R(s_prime)
            for i in range(len(mem)):
                for j in range(i + 1, len(mem)):
                    if mem[i] in pair_pts and mem[j] in pair_pts:
                        continue
                    gap = sum(abs(a - b) for a, b in zip(mem[i], mem[j]))
                    if gap <= limit:
                        raise GeometryError(
                            f"class separation violated at level {s_prime}: "
                            f"{mem[i]} and {mem[j]} are {gap} <= 12 R^({s_prime}) apart")
            members[s_prime] = tuple(mem)
            for m in mem:
                lam = self.lambda_plain(k + self.problem.frequency.dot(m), s_prime)
                lam_m = lam.translate(m)
                lambda_sets[(s_prime, m)] = lam_m
                taken.update(lam_m.sites)
        admissible = self.admissible_k(k, s, min(window_radius, 64))
        return SiteClassification(k, s, members, lambda_sets, admissible, thresholds)

    # -- the Lambda sets -----------------------------------------------------

    def lambda_plain(self, k: float, s: int) -> SiteSet:
        """Lambda^(s)_k(0): B(3 R^(s)) minus every straddling lower-scale set."""
        key = (float(k), int(s))
        hit = self._plain_cache.get(key)
        if hit is not None:
            return hit
        nu = self.problem.nu
        if s == 1:
            out = ball(2.0 * self.ladder.R(1), nu, budget=self.budget)
        else:
            big = ball(3.0 * self.ladder.R(s), nu, budget=self.budget)
            classes = self.site_classes(k, s)
            drop = set()
            for (s_prime, m), lam in classes.lambda_sets.items():
                if straddles(lam, big):
                    drop.update(lam.sites)
            out = big.difference(drop) if drop else big
            self._require_sandwich(out, s, k)
            self._require_dichotomy(out, classes)
        self._plain_cache[key] = out
        return out

    def lambda_sym(self, k: float, s: int) -> SiteSet:
        """Reflection-symmetrized Lambda set at small |k|.

        Starts from B(3 R^(s)) and removes whole reflection classes
        Lambda(m) union -Lambda(-m) while they straddle; stabilizes in
        fewer than 2^s steps.
        """
        if s < 2:
            raise ValueError("symmetrized sets start at s = 2")
        if abs(k) >= math.exp(self.ladder.log_delta_at(s - 2)):
            raise RegimeError(
                f"|k| = {abs(k):.3g} outside the small-k regime delta^(s-2)")
        classes = self.site_classes(k, s)
        groups = _reflection_groups(classes, reflect=lambda m: tuple(-c for c in m))
        start = ball(3.0 * self.ladder.R(s), self.problem.nu, budget=self.budget)
        out, steps = _iterated_straddle_removal(start, groups, 2 ** s)
        if out.reflect().sites != out.sites:
            raise GeometryError("symmetrized set is not reflection invariant")
        self._require_sandwich(out, s, k)
        self._require_dichotomy(out, classes)
        plain = self.lambda_plain(k, s)
        if not out.issubset(plain):
            raise GeometryError("symmetrized set escapes the plain set")
        return out

    def lambda_pair(self, k: float, s: int, n0) -> SiteSet:
        """T-invariant paired set around the resonance pair {0, n0}, T(n) = n0 - n."""
        n0 = tuple(n0)
        kn0 = k_point(self.problem.frequency, n0)
        if abs(k - kn0) > 2.0 * sigma(n0, self.ladder):
            raise RegimeError(
                f"k = {k:.6g} outside the pair window around k_n0 = {kn0:.6g}")
        nu = self.problem.nu
        base = ball(3.0 * self.ladder.R(s), nu, budget=self.budget)
        start = base.union(base.reflect_through(n0))
        if s == 1:
            return start
        classes = self.site_classes(k, s, pair=(tuple([0] * nu), n0))
        groups = _reflection_groups(
            classes, reflect=lambda m: tuple(a - b for a, b in zip(n0, m)))
        out, steps = _iterated_straddle_removal(start, groups, 2 ** s)
        if out.reflect_through(n0).sites != out.sites:
            raise GeometryError("paired set is not T-invariant")
        inner = ball(2.0 * self.ladder.R(s), nu, budget=self.budget)
        if not inner.issubset(out) or not inner.translate(n0).issubset(out):
            raise GeometryError("paired set lost its inner balls")
        if not out.issubset(start):
            raise GeometryError("paired set escapes its outer envelope")
        self._require_dichotomy(out, classes)
        return out

    # -- validations ----------------------------------------------------------

    def _require_sandwich(self, out: SiteSet, s: int, k: float):
        inner = ball(2.0 * self.ladder.R(s), self.problem.nu, budget=self.budget)
        if not inner.issubset(out):
            raise GeometryError(f"B(2 R^({s})) not contained in the level-{s} set at k={k}")

    def _require_dichotomy(self, out: SiteSet, classes: SiteClassification):
        for (s_prime, m), lam in classes.lambda_sets.items():
            if not (lam.issubset(out) or lam.isdisjoint(out)):
                raise GeometryError(
                    f"set Lambda^({s_prime})({m}) straddles the constructed set")


def _reflection_groups(classes: SiteClassification, reflect):
    """Union-find grouping of Lambda(m) = Lambda^(s')(m) u reflect(Lambda^(s')(m)).

    Members m and reflect(m) of the same level share a group; each group
    carries its level and the union of its (reflected) sets.
    """
    parent = {}

    def find(x):
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    def union(a, b):
        ra, rb = find(a), find(b)
        if ra != rb:
            parent[ra] = rb

    keys = list(classes.lambda_sets.keys())
    for key in keys:
        parent[key] = key
    for (s_prime, m) in keys:
        mirror = (s_prime, reflect(m))
        if mirror in classes.lambda_sets:
            union((s_prime, m), mirror)
    groups = {}
    for key in keys:
        groups.setdefault(find(key), []).append(key)
    out = []
    for members in groups.values():
        level = members[0][0]
        sites = set()
        for (s_prime, m) in members:
            lam = classes.lambda_sets[(s_prime, m)]
            sites.update(lam.sites)
            sites.update(reflect(x) for x in lam)
        out.append((level, SiteSet.from_iterable(sites)))
    return out


def _iterated_straddle_removal(start: SiteSet, groups, cap: int):
    """B(l) = B(l-1) minus the union of straddling group sets; returns (set, steps)."""
    current = start
    steps = 0
    while True:
        drop = set()
        for level, gset in groups:
            if straddles(gset, current):
                drop.update(gset.sites)
        if not drop:
            return current, steps
        nxt = current.difference(drop)
        if len(nxt) == len(current):
            return current, steps
        current = nxt
        steps += 1
        if steps >= cap:
            raise GeometryError(f"straddle removal failed to stabilize within {cap} steps")


# -- module-level convenience wrappers ---------------------------------------


def site_classes(problem: Problem, k: float, s: int, window_radius: int = None,
                 ladder: ScaleLadder = None) -> SiteClassification:
    return GeometryBuilder(problem, ladder).site_classes(k, s, window_radius)


def lambda_plain(problem: Problem, k: float, s: int,
                 ladder: ScaleLadder = None) -> SiteSet:
    return GeometryBuilder(problem, ladder).lambda_plain(k, s)


def lambda_sym(problem: Problem, k: float, s: int,
               ladder: ScaleLadder = None) -> SiteSet:
    return GeometryBuilder(problem, ladder).lambda_sym(k, s)


def lambda_pair(problem: Problem, k: float, s: int, n0,
                ladder: ScaleLadder = None) -> SiteSet:
    return GeometryBuilder(problem, ladder).lambda_pair(k, s, n0)
