"""Problem data: frequency vector, potential coefficients, scale ladder.

The ladder and the smallness thresholds live in natural-log space.  The
faithful regime keeps them there (the underlying constants are not
representable as binary floats); the desk regime materializes them from
caller-chosen small seeds while preserving the recursion shape.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import FaithfulMaterializationError, LadderRangeError, SiteBudgetError
from .lattice import DEFAULT_SITE_BUDGET, l1_ball_size, l1_norm


@dataclass(frozen=True)
class Frequency:
    """Frequency vector with a finite-window Diophantine certificate.

    The certificate asserts |n.omega| >= a0 |n|^(-b0) for 0 < |n| <= window_n,
    where n.omega is the plain inner product (a linear form, not a distance
    to the nearest integer).
    """

    omega: tuple
    a0: float
    b0: float
    window_n: int = 0

    def __post_init__(self):
        if max(abs(w) for w in self.omega) > 1 + 1e-15:
            raise ValueError("normalization requires |omega_j| <= 1")
        if not (0 < self.a0 < 1):
            raise ValueError("a0 must lie in (0, 1)")
        nu = len(self.omega)
        # Section 1 asks only b0 > nu - 1; the construction uses b0 > nu.
        if not (self.b0 > nu):
            raise ValueError(f"b0 must exceed the lattice dimension nu={nu}")

    @property
    def nu(self) -> int:
        return len(self.omega)

    def dot(self, n) -> float:
        return float(np.dot(np.asarray(self.omega), np.asarray(n, dtype=float)))


def diophantine_margin(freq: Frequency, N: int):
    """Worst Diophantine constant |n.omega| * |n|^b0 over 0 < |n| <= N.

    Returns (margin, witness); the finite-window certificate is valid iff
    margin >= a0.  Exhaustive over the l1 ball, vectorized.
    """
    if N < 1:
        raise ValueError("window must contain at least the unit vectors")
    nu = freq.nu
    grids = np.meshgrid(*([np.arange(-N, N + 1)] * nu), indexing="ij")
    pts = np.stack([g.ravel() for g in grids], axis=1)
    norms = np.abs(pts).sum(axis=1)
    keep = (norms > 0) & (norms <= N)
    pts, norms = pts[keep], norms[keep]
    vals = np.abs(pts @ np.asarray(freq.omega)) * norms.astype(float) ** freq.b0
    i = int(np.argmin(vals))
    return float(vals[i]), tuple(int(c) for c in pts[i])


@dataclass(frozen=True)
class Potential:
    """Fourier data split as c(n) = epsilon * c0(n), |c0(n)| <= exp(-kappa0 |n|).

    `coefficients` stores the table c0 (no entry at n = 0); epsilon is kept
    separately so an epsilon sweep reuses one table.
    """

    coefficients: dict
    epsilon: float
    kappa0: float

    def __post_init__(self):
        object.__setattr__(
            self, "coefficients", {tuple(k): complex(v) for k, v in self.coefficients.items()}
        )

    @staticmethod
    def from_harmonics(entries, epsilon: float, kappa0: float) -> "Potential":
        """Build a Hermitian table from {n: value} by completing conjugates.

        If both n and -n are supplied they must already be conjugate.
        """
        table = {}
        for n, v in dict(entries).items():
            n = tuple(n)
            v = complex(v)
            neg = tuple(-c for c in n)
            if n in table and table[n] != v:
                raise ValueError(f"conflicting values at {n}")
            table[n] = v
            table.setdefault(neg, v.conjugate())
        return Potential(table, epsilon, kappa0)

    def c0(self, n) -> complex:
        return self.coefficients.get(tuple(n), 0j)

    def c(self, n) -> complex:
        """Physical Fourier coefficient epsilon * c0(n)."""
        return self.epsilon * self.c0(n)

    def support(self):
        return tuple(self.coefficients.keys())


def validate_potential(p: Potential):
    """Collect every violated constraint; an empty report means valid.

    Checks Hermitian pairing c0(-n) = conj c0(n) exactly and the decay
    budget |c0(n)| <= exp(-kappa0 |n|).  Never raises.
    """
    report = []
    if not (p.epsilon > 0):
        report.append("epsilon must be positive")
    if not (0 < p.kappa0 <= 0.5):
        report.append(f"kappa0={p.kappa0} outside (0, 1/2]")
    for n, v in p.coefficients.items():
        if all(c == 0 for c in n):
            report.append("coefficient stored at n = 0")
            continue
        neg = tuple(-c for c in n)
        partner = p.coefficients.get(neg)
        if partner is None:
            report.append(f"missing Hermitian partner for {n}")
        elif partner != v.conjugate():
            report.append(f"Hermitian mismatch at {n}: c0(-n) != conj c0(n)")
        bound = math.exp(-p.kappa0 * l1_norm(n))
        if abs(v) > bound * (1 + 1e-12):
            report.append(f"decay violation at {n}: |c0|={abs(v):.6g} > exp(-kappa0|n|)={bound:.6g}")
    return report


# ---------------------------------------------------------------------------
# Scale ladder
# ---------------------------------------------------------------------------

# Faithful seeds per the construction: log R1 >= max(log(100/a0), 2^34/beta1 * log(1/kappa0)).
_FAITHFUL_R1_FACTOR = 2.0 ** 34


@dataclass(frozen=True)
class ScaleLadder:
    """The (R^(u), delta0^(u)) recursion held in natural-log space.

    log_delta[0] is the seed rung delta0^(0); log_R[u-1] and log_delta[u]
    (u = 1..u_max) satisfy

        log R^(u)     = -beta1 * log delta0^(u-1)
        log delta^(u) = -(log R^(u))^2

    exactly in the stored representation.  In the faithful regime R-values
    never leave log space.
    """

    beta1: float
    log_R: tuple          # length u_max, rungs 1..u_max
    log_delta: tuple      # length u_max + 1, rungs 0..u_max
    regime: str           # "desk" | "faithful"
    exact_recursion: bool = True

    @property
    def u_max(self) -> int:
        return len(self.log_R)

    def log_R_at(self, u: int) -> float:
        if u == 0:
            return float("-inf")  # R^(0) := 0
        if not (1 <= u <= self.u_max):
            raise LadderRangeError(f"rung {u} outside ladder range 1..{self.u_max}")
        return self.log_R[u - 1]

    def log_delta_at(self, u: int) -> float:
        if not (0 <= u <= self.u_max):
            raise LadderRangeError(f"rung {u} outside ladder range 0..{self.u_max}")
        return self.log_delta[u]

    def R(self, u: int) -> float:
        """Materialized R^(u); refused in the faithful regime."""
        if self.regime == "faithful":
            raise FaithfulMaterializationError("faithful ladder stays in log space")
        if u == 0:
            return 0.0
        return math.exp(self.log_R_at(u))

    def delta(self, u: int) -> float:
        if self.regime == "faithful":
            raise FaithfulMaterializationError("faithful ladder stays in log space")
        return math.exp(self.log_delta_at(u))

    def scale_of(self, m) -> int:
        """The rung s with 12 R^(s-1) < |m| <= 12 R^(s); s=0 reserved for m=0."""
        r = l1_norm(m)
        if r == 0:
            return 0
        logr = math.log(r / 12.0) if r > 0 else float("-inf")
        for u in range(1, self.u_max + 1):
            if logr <= self.log_R[u - 1]:
                return u
        raise LadderRangeError(f"|m|={r} beyond rung u_max={self.u_max}")

    @staticmethod
    def from_sequences(beta1, log_R, log_delta, regime="desk") -> "ScaleLadder":
        """Synthetic ladder from explicit sequences (geometry experiments).

        Only monotonicity is validated; the exact recursion flag is cleared.
        """
        log_R = tuple(float(x) for x in log_R)
        log_delta = tuple(float(x) for x in log_delta)
        if len(log_delta) != len(log_R) + 1:
            raise ValueError("need log_delta rungs 0..u_max and log_R rungs 1..u_max")
        if any(b <= a for a, b in zip(log_R, log_R[1:])):
            raise ValueError("R must increase strictly")
        if any(b >= a for a, b in zip(log_delta, log_delta[1:])):
            raise ValueError("delta must decrease strictly")
        return ScaleLadder(beta1, log_R, log_delta, regime, exact_recursion=False)


def build_ladder(delta0: float, beta1: float, u_max: int, regime: str = "desk",
                 a0: float = None, kappa0: float = None,
                 site_budget: int = DEFAULT_SITE_BUDGET, nu: int = 2) -> ScaleLadder:
    """Build the scale ladder from a seed delta0.

    Desk regime: log R^(1) = -beta1 log delta0 with the caller keeping
    R^(1) materializable.  Faithful regime: the seed log R^(1) honors the
    construction floor max(log(100/a0), 2^34 beta1^-1 log kappa0^-1) and
    the ladder never leaves log space.
    """
    if not (0 < delta0 < 1):
        raise ValueError("delta0 must lie in (0, 1)")
    if beta1 <= 0 or u_max < 1:
        raise ValueError("need beta1 > 0 and u_max >= 1")
    log_d0 = math.log(delta0)
    if regime == "faithful":
        floor = -4.0 * beta1 * log_d0
        if a0 is not None:
            floor = max(floor, math.log(100.0 / a0))
        if kappa0 is not None:
            floor = max(floor, _FAITHFUL_R1_FACTOR / beta1 * math.log(1.0 / kappa0))
        log_R1 = floor
        log_delta = [(-1.0 / beta1) * log_R1]  # delta0^(0) = R1^(-1/beta1)
    elif regime == "desk":
        log_R1 = -beta1 * log_d0
        log_delta = [log_d0]
        if beta1 * log_R1 <= 1.0:
            raise ValueError(
                "desk ladder not monotone: need beta1 * log R^(1) > 1 "
                f"(got beta1={beta1}, log R1={log_R1:.4g})")
    else:
        raise ValueError(f"unknown regime {regime!r}")

    log_R = [log_R1]
    for _ in range(1, u_max):
        log_delta.append(-(log_R[-1] ** 2))
        log_R.append(-beta1 * log_delta[-1])
    log_delta.append(-(log_R[-1] ** 2))

    if regime == "desk":
        log_budget_R = math.log(_radius_for_budget(site_budget, nu))
        if log_R[0] > log_budget_R:
            raise SiteBudgetError(
                f"desk R^(1)=exp({log_R[0]:.3g}) exceeds the materializable radius "
                f"for budget {site_budget}")
    return ScaleLadder(beta1, tuple(log_R), tuple(log_delta), regime)


def _radius_for_budget(budget: int, nu: int) -> int:
    r = 1
    while l1_ball_size(r + 1, nu) <= budget:
        r += 1
    return r


def sigma(m, ladder: ScaleLadder) -> float:
    """Resonance half-width 32 (delta0^(s-1))^(1/6) at the bracketing scale of m.

    sigma(0) = 32 (delta0^(0))^(1/6).  Errors if |m| lies beyond the ladder.
    """
    s = ladder.scale_of(m)
    rung = 0 if s == 0 else s - 1
    return 32.0 * math.exp(ladder.log_delta_at(rung) / 6.0)


# ---------------------------------------------------------------------------
# Smallness thresholds
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class EpsilonThresholds:
    """The epsilon_0 = (bar eps_0)^3 threshold and the eps_s staircase, in logs.

    bar eps_0 = min(2^(-24 nu - 4) kappa0^(4 nu), delta0^(2^9),
                    2^(-10 (nu+1)) (4 kappa0 log delta0^-1)^(-8 nu)).
    eps_s = eps_0 - sum_{s' <= s} delta0^(s').
    """

    log_eps0: float
    log_eps_s: tuple

    @staticmethod
    def from_ladder(ladder: ScaleLadder, kappa0: float, nu: int) -> "EpsilonThresholds":
        log_d0 = ladder.log_delta_at(0)
        t = 4.0 * kappa0 * (-log_d0)
        log_bar = min(
            (-24 * nu - 4) * math.log(2.0) + 4 * nu * math.log(kappa0),
            (2 ** 9) * log_d0,
            -10 * (nu + 1) * math.log(2.0) - 8 * nu * math.log(t),
        )
        log_eps0 = 3.0 * log_bar
        stairs = []
        drop = 0.0
        for s in range(1, ladder.u_max + 1):
            # ratio delta^(s)/eps0 computed in log space; zero on underflow
            drop += math.exp(min(ladder.log_delta_at(s) - log_eps0, 0.0))
            stairs.append(log_eps0 + math.log1p(-min(drop, 0.999999)) if drop < 1 else float("-inf"))
        return EpsilonThresholds(log_eps0, tuple(stairs))


# ---------------------------------------------------------------------------
# Problem: bundled configuration
# ---------------------------------------------------------------------------


def gamma_for_k(k: float) -> float:
    """Bracketing gamma: 1 for |k| < 3/4, else smallest gamma with gamma-1 <= |k| <= gamma."""
    ak = abs(k)
    if ak < 0.75:
        return 1.0
    return max(1.0, float(math.ceil(ak)))


@dataclass(frozen=True)
class Problem:
    """Everything the operator and geometry modules need, in one place."""

    frequency: Frequency
    potential: Potential
    ladder: ScaleLadder = None
    site_budget: int = DEFAULT_SITE_BUDGET

    @property
    def nu(self) -> int:
        return self.frequency.nu

    @property
    def omega(self) -> tuple:
        return self.frequency.omega

    def validate(self):
        report = validate_potential(self.potential)
        if self.frequency.window_n:
            margin, witness = diophantine_margin(self.frequency, self.frequency.window_n)
            if margin < self.frequency.a0:
                report.append(
                    f"Diophantine certificate fails at n={witness}: margin {margin:.3g} < a0")
        return report
