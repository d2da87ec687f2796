"""Invariant checks shared by the CLI selftest and the acceptance suite."""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .dual_operator import (NORMALIZED, RAW, cocycle_check, dense_spectrum,
                            reflection_conjugation_check, restrict)
from .lattice import ball
from .mssets import is_correct_word, max_correct_length
from .model import Problem, build_ladder
from .schur import block_inverse, multiscale_inverse
from .spectral import eigen_simple, feynman_derivative, gap_at, paired_box
from .trajectories import WeightProfile, closed_bound, sum_enumerate


@dataclass(frozen=True)
class CheckResult:
    name: str
    passed: bool
    detail: str


def _hermitian(problem: Problem) -> CheckResult:
    S = ball(2, problem.nu, budget=None)
    H = restrict(problem, S, 0.13, NORMALIZED).entries
    dev = float(np.max(np.abs(H - H.conj().T)))
    return CheckResult("hermitian-restriction", dev == 0.0, f"max dev {dev:.3g}")


def _cocycle(problem: Problem) -> CheckResult:
    S = ball(2, problem.nu, budget=None)
    shift = (1,) + (0,) * (problem.nu - 1)
    dev = cocycle_check(problem, shift, S, 0.21, NORMALIZED)
    return CheckResult("cocycle-identity", dev <= 1e-12, f"max dev {dev:.3g}")


def _reflection(problem: Problem) -> CheckResult:
    S = ball(2, problem.nu, budget=None)
    dev = reflection_conjugation_check(problem, S, 0.17, NORMALIZED)
    return CheckResult("reflection-conjugation", dev <= 1e-12, f"max dev {dev:.3g}")


def _schur_oracle(problem: Problem, seed: int) -> CheckResult:
    rng = np.random.default_rng(seed)
    S = ball(2, problem.nu, budget=None)
    n = len(S)
    worst = 0.0
    for _ in range(5):
        A = rng.normal(size=(n, n)) + 1j * rng.normal(size=(n, n))
        H = 0.5 * (A + A.conj().T) + 3.0 * n * np.eye(n)
        cut = sorted(rng.choice(n, size=2, replace=False))
        blocks = [np.arange(0, cut[0] + 1), np.arange(cut[0] + 1, cut[1] + 1),
                  np.arange(cut[1] + 1, n)]
        blocks = [b for b in blocks if b.size]
        handle = block_inverse(H, blocks)
        dense = np.linalg.inv(H)
        worst = max(worst, float(np.max(np.abs(handle.inverse - dense))
                                 / np.max(np.abs(dense))))
    return CheckResult("schur-vs-dense", worst <= 1e-10, f"worst rel dev {worst:.3g}")


def _multiscale_oracle(problem: Problem) -> CheckResult:
    S = ball(2, problem.nu, budget=None)
    H = restrict(problem, S, 0.11, RAW)
    evals, _ = dense_spectrum(H)
    E = float(evals[-1] + 1.0 + np.max(np.abs(H.entries)))
    zero = tuple([0] * problem.nu)
    handle = multiscale_inverse(problem, E, S, 0.11, clusters=[[zero]], floor=1e-8)
    dense = np.linalg.inv(E * np.eye(len(S)) - H.entries)
    dev = float(np.max(np.abs(handle.inverse - dense)) / np.max(np.abs(dense)))
    return CheckResult("multiscale-vs-dense", dev <= 1e-10, f"rel dev {dev:.3g}")


def _words(problem: Problem) -> CheckResult:
    ok = True
    detail = []
    for s in (1, 2, 3):
        got = max_correct_length(s)
        ok &= got == 2 ** s - 1
        detail.append(f"s={s}:{got}")
    ok &= is_correct_word((1, 2, 1)) and not is_correct_word((1, 1))
    return CheckResult("correct-words", ok, " ".join(detail))


def _ladder(problem: Problem) -> CheckResult:
    lad = problem.ladder or build_ladder(math.exp(-3.2 / 0.35), 0.35, 3)
    ok = True
    for u in range(1, lad.u_max + 1):
        ok &= abs(lad.log_R_at(u) + lad.beta1 * lad.log_delta_at(u - 1)) <= 1e-12 * max(
            1.0, abs(lad.log_R_at(u))) or not lad.exact_recursion
        ok &= lad.log_delta_at(u) == -(lad.log_R_at(u) ** 2) or not lad.exact_recursion
    return CheckResult("ladder-recursion", ok, f"u_max={lad.u_max}")


def _symmetry(problem: Problem) -> CheckResult:
    S = ball(4, problem.nu, budget=None)
    zero = tuple([0] * problem.nu)
    worst = 0.0
    for k in (0.11, 0.23, 0.37):
        e_plus = eigen_simple(problem, zero, S, k, NORMALIZED, oracle_check=False)
        e_minus = eigen_simple(problem, zero, S.reflect(), -k, NORMALIZED,
                               oracle_check=False)
        worst = max(worst, abs(e_plus.E - e_minus.E))
    return CheckResult("band-symmetry", worst <= 1e-11, f"max |E(k)-E(-k)| {worst:.3g}")


def _gap_first_order(problem: Problem) -> CheckResult:
    pot = problem.potential
    support = [m for m in pot.support() if abs(pot.c0(m)) > 0]
    if not support:
        return CheckResult("gap-first-order", True, "zero potential, skipped")
    n0 = min(support, key=lambda m: sum(map(abs, m)))
    rec = gap_at(problem, n0, paired_box(problem, n0, 5))
    expect = 2.0 * abs(pot.c(n0))
    dev = abs(rec.width - expect)
    tol = 50.0 * pot.epsilon ** 2 * max(1.0, abs(pot.c0(n0))) + 1e-12
    return CheckResult("gap-first-order", dev <= tol,
                       f"width {rec.width:.6g} vs 2|c| {expect:.6g}")


def _trajectory(problem: Problem, seed: int) -> CheckResult:
    rng = np.random.default_rng(seed + 1)
    host = ball(2, problem.nu, budget=None)
    ambient = ball(5, problem.nu, budget=None)
    prof = WeightProfile({s: 1.0 + 2.0 * rng.random() for s in host}, T=8.0,
                         kappa0=0.5, host=host, ambient=ambient)
    eps0 = 1e-25
    zero = tuple([0] * problem.nu)
    one = (1,) + (0,) * (problem.nu - 1)
    ok = True
    for target in (zero, one):
        res = sum_enumerate(zero, target, prof, eps0, len_cap=4)
        bnd = closed_bound(zero, target, prof, eps0)
        ok &= res.total <= bnd.value and bnd.threshold_ok
    return CheckResult("trajectory-bounds", ok, "enumeration under the closed bound")


def _feynman(problem: Problem) -> CheckResult:
    S = ball(3, problem.nu, budget=None)
    k = 0.19
    derivs, mask, evals = feynman_derivative(problem, S, k, NORMALIZED)
    h = 1e-5
    up, _ = dense_spectrum(restrict(problem, S, k + h, NORMALIZED))
    dn, _ = dense_spectrum(restrict(problem, S, k - h, NORMALIZED))
    fd = (up - dn) / (2.0 * h)
    sel = mask & (np.abs(derivs) > 1e-8)
    rel = float(np.max(np.abs(derivs[sel] - fd[sel]) / np.abs(derivs[sel])))
    return CheckResult("feynman-vs-fd", rel <= 1e-6, f"max rel dev {rel:.3g}")


def run_selftest(problem: Problem, seed: int = 0, jobs: int = 1):
    """Run the invariant suite; returns a list of CheckResult."""
    tasks = [
        lambda: _hermitian(problem),
        lambda: _cocycle(problem),
        lambda: _reflection(problem),
        lambda: _schur_oracle(problem, seed),
        lambda: _multiscale_oracle(problem),
        lambda: _words(problem),
        lambda: _ladder(problem),
        lambda: _symmetry(problem),
        lambda: _gap_first_order(problem),
        lambda: _trajectory(problem, seed),
        lambda: _feynman(problem),
    ]
    if jobs and jobs > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            futures = [pool.submit(_safe, t) for t in tasks]
            return [f.result() for f in futures]
    return [_safe(t) for t in tasks]


def _safe(task) -> CheckResult:
    try:
        return task()
    except Exception as exc:
        return CheckResult(getattr(task, "__name__", "check"), False, f"raised {exc!r}")
