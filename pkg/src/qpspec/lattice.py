"""Integer lattice primitives: l1 norm, balls, reflections and set relations.

Sites are plain tuples of ints.  A SiteSet keeps its sites in a canonical
order (l1 norm, then lexicographic) so that every matrix restriction built
on top of it is reproducible bit for bit.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from math import comb, floor

import numpy as np

from .errors import SiteBudgetError

Site = tuple

DEFAULT_SITE_BUDGET = 20_000


def l1_norm(n) -> int:
    """Sum of absolute coordinates."""
    return sum(abs(c) for c in n)


def l1_ball_size(radius: int, nu: int) -> int:
    """Number of integer points with l1 norm <= radius (radius >= 0)."""
    if radius < 0:
        return 0
    return sum((2 ** j) * comb(nu, j) * comb(radius, j) for j in range(0, min(nu, radius) + 1))


def canonical_order(sites) -> tuple:
    """Deterministic ordering: by l1 norm, then lexicographic."""
    return tuple(sorted(set(map(tuple, sites)), key=lambda s: (l1_norm(s), s)))


@dataclass(frozen=True)
class SiteSet:
    """Finite subset of Z^nu with canonical ordering.

    Immutable after construction; all derived data is precomputed so
    concurrent reads are safe.
    """

    sites: tuple
    _index: dict = field(repr=False, compare=False, default=None)

    @staticmethod
    def from_iterable(sites) -> "SiteSet":
        ordered = canonical_order(sites)
        return SiteSet(ordered, {s: i for i, s in enumerate(ordered)})

    def __post_init__(self):
        if self._index is None:
            object.__setattr__(self, "_index", {s: i for i, s in enumerate(self.sites)})

    def __len__(self):
        return len(self.sites)

    def __iter__(self):
        return iter(self.sites)

    def __contains__(self, site):
        return tuple(site) in self._index

    def index(self, site) -> int:
        return self._index[tuple(site)]

    @property
    def nu(self) -> int:
        return len(self.sites[0]) if self.sites else 0

    def array(self) -> np.ndarray:
        return np.asarray(self.sites, dtype=np.int64).reshape(len(self.sites), -1)

    def translate(self, m) -> "SiteSet":
        m = tuple(m)
        return SiteSet.from_iterable(tuple(a + b for a, b in zip(s, m)) for s in self.sites)

    def reflect(self) -> "SiteSet":
        return SiteSet.from_iterable(tuple(-c for c in s) for s in self.sites)

    def reflect_through(self, m) -> "SiteSet":
        m = tuple(m)
        return SiteSet.from_iterable(tuple(a - b for a, b in zip(m, s)) for s in self.sites)

    def union(self, other) -> "SiteSet":
        return SiteSet.from_iterable(itertools.chain(self.sites, other))

    def difference(self, other) -> "SiteSet":
        drop = set(map(tuple, other))
        return SiteSet.from_iterable(s for s in self.sites if s not in drop)

    def intersection(self, other) -> "SiteSet":
        keep = set(map(tuple, other))
        return SiteSet.from_iterable(s for s in self.sites if s in keep)

    def issubset(self, other) -> bool:
        if isinstance(other, SiteSet):
            return all(s in other._index for s in self.sites)
        keep = set(map(tuple, other))
        return all(s in keep for s in self.sites)

    def isdisjoint(self, other) -> bool:
        if isinstance(other, SiteSet):
            small, big = (self, other) if len(self) <= len(other) else (other, self)
            return all(s not in big._index for s in small.sites)
        keep = set(map(tuple, other))
        return all(s not in keep for s in self.sites)


def ball(R: float, nu: int, budget: int = DEFAULT_SITE_BUDGET) -> SiteSet:
    """All n in Z^nu with l1_norm(n) <= R.  Symmetric under n -> -n.

    Refuses to materialize more than `budget` sites; the budget guards
    desk-scale memory against faithful-constant radii.
    """
    if R < 0:
        raise ValueError("ball radius must be nonnegative")
    r = floor(R)
    size = l1_ball_size(r, nu)
    if budget is not None and size > budget:
        raise SiteBudgetError(f"ball(R={R}, nu={nu}) holds {size} sites, over budget {budget}")
    sites = []

    def extend(prefix, remaining, dims_left):
        if dims_left == 1:
            for c in range(-remaining, remaining + 1):
                sites.append(prefix + (c,))
            return
        for c in range(-remaining, remaining + 1):
            extend(prefix + (c,), remaining - abs(c), dims_left - 1)

    extend((), r, nu)
    return SiteSet.from_iterable(sites)


def transform(S: SiteSet, kind: str, m=None) -> SiteSet:
    """Apply one of the standard lattice maps to a site set.

    kind is one of "translate", "reflect", "reflect_through"; the first and
    last take the lattice vector m.
    """
    if kind == "translate":
        return S.translate(m)
    if kind == "reflect":
        return S.reflect()
    if kind == "reflect_through":
        return S.reflect_through(m)
    raise ValueError(f"unknown transform kind {kind!r}")


def straddles(S1, S2) -> bool:
    """True iff S1 meets S2 and also meets the complement of S2."""
    S1 = S1 if isinstance(S1, SiteSet) else SiteSet.from_iterable(S1)
    S2set = set(map(tuple, S2))
    hit = miss = False
    for s in S1:
        if s in S2set:
            hit = True
        else:
            miss = True
        if hit and miss:
            return True
    return False


def set_distance(S1, S2) -> int:
    """Minimum pairwise l1 distance between two non-empty site sets."""
    A = S1.array() if isinstance(S1, SiteSet) else np.asarray(list(S1), dtype=np.int64)
    B = S2.array() if isinstance(S2, SiteSet) else np.asarray(list(S2), dtype=np.int64)
    if A.size == 0 or B.size == 0:
        raise ValueError("set_distance requires non-empty sets")
    best = None
    # chunk the pairwise table so large sets stay within memory
    step = max(1, int(4_000_000 // max(1, B.shape[0])))
    for i in range(0, A.shape[0], step):
        d = np.abs(A[i:i + step, None, :] - B[None, :, :]).sum(axis=2).min()
        best = d if best is None else min(best, d)
    return int(best)


def diameter(S) -> int:
    """Maximum pairwise l1 distance.

    Uses |x - y|_1 = max over sign vectors s of s.(x - y), so the cost is
    2^nu passes instead of a quadratic pairwise table.
    """
    A = S.array() if isinstance(S, SiteSet) else np.asarray(list(S), dtype=np.int64)
    if A.size == 0:
        raise ValueError("diameter of empty set")
    nu = A.shape[1]
    best = 0
    for signs in itertools.product((1, -1), repeat=nu):
        proj = A @ np.asarray(signs, dtype=np.int64)
        best = max(best, int(proj.max() - proj.min()))
    return best
