import math

import numpy as np
import pytest

from qpspec.errors import RegimeError
from qpspec.inverse import (DecayBound, DecayLadder, coefficient_bound,
                            gap_table, improve_decay, improved_rate_factor,
                            recovered_bound, verify_forward, verify_inverse)
from qpspec.lattice import ball
from qpspec.model import Potential, Problem

GOLDEN = (math.sqrt(5.0) - 1.0) / 2.0


def chain_problem(golden_freq, eps=1e-4):
    return Problem(golden_freq, Potential.from_harmonics({(0, 2): 1.0}, eps, 0.5))


@pytest.fixture(scope="module")
def compliant_problem(golden_freq):
    """True decay rate 1.2 > 4 kappa0 with support away from the origin."""
    entries = {p: math.exp(-1.2 * 4) for p in [(0, 4), (4, 0), (2, 2), (1, 3)]}
    return Problem(golden_freq, Potential.from_harmonics(entries, 1e-4, 0.1))


def test_gap_table_zero_potential(zero_problem):
    ms = [(0, 1), (1, 0), (1, -1)]
    records, failures = gap_table(zero_problem, ms, 4)
    assert not failures
    assert all(rec.width == 0.0 for rec in records.values())


def test_gap_table_single_harmonic(harmonic_problem):
    eps = harmonic_problem.potential.epsilon
    ms = [(0, 1), (0, -1), (1, 0), (1, 1)]
    records, failures = gap_table(harmonic_problem, ms, 6)
    assert not failures
    assert records[(0, 1)].width == pytest.approx(2 * eps, abs=5 * eps ** 2)
    assert records[(0, -1)].width == pytest.approx(records[(0, 1)].width, abs=1e-12)
    assert records[(1, 0)].width <= 10 * eps ** 2
    assert records[(1, 1)].width <= 10 * eps ** 2


def test_verify_forward_rows(generic_problem):
    ms = [m for m in ball(2, 2) if any(m)]
    records, failures = gap_table(generic_problem, ms, 5)
    assert not failures
    rows = verify_forward(records, generic_problem.potential)
    assert rows and all(r.passed for r in rows)


def test_verify_forward_reports_violations(golden_freq):
    # adversarial: epsilon far outside the smallness regime
    pot = Potential.from_harmonics({(0, 1): 0.6}, 0.5, 0.5)
    prob = Problem(golden_freq, pot)
    records, failures = gap_table(prob, [(0, 1)], 4)
    rows = verify_forward(records, pot)
    # table still reports; rows may fail but nothing raises
    assert isinstance(rows, list)


def test_coefficient_bound_monotone():
    assert coefficient_bound((0, 1), 2.0, 0.5, 1.5) == pytest.approx(3.5)
    assert coefficient_bound((0, 1), 3.0, 0.5, 1.5) > coefficient_bound(
        (0, 1), 2.0, 0.5, 1.5)
    assert coefficient_bound((0, 1), 2.0, 0.9, 1.5) > coefficient_bound(
        (0, 1), 2.0, 0.5, 1.5)


def test_recovered_bound_holds_and_reports_both(golden_freq):
    prob = chain_problem(golden_freq)
    rb = recovered_bound(prob, (0, 2), 6)
    assert rb.holds
    assert rb.bound_coarse >= rb.actual
    assert rb.prefactor_coarse > rb.prefactor_desk


def test_quadratic_term_slope(golden_freq):
    vals = []
    eps_list = (1e-3, 1e-4, 1e-5)
    for eps in eps_list:
        rb = recovered_bound(chain_problem(golden_freq, eps), (0, 4), 6)
        vals.append(rb.quadratic_term)
    slope = np.polyfit(np.log(eps_list), np.log(vals), 1)[0]
    assert abs(slope - 2.0) <= 0.1


def test_decay_ladder_recursions():
    lad = DecayLadder.build(2.0 ** 30, 10)
    for a, b in zip(lad.R, lad.R[1:]):
        assert b == pytest.approx(1.25 * a)
    for t, r in enumerate(lad.rho):
        assert r == pytest.approx(2.0 ** (-10) * (t + 2) ** (-2))
    assert lad.sigma(5) == pytest.approx(sum(lad.rho[:5]))
    # sigma stays below the convergent ceiling
    assert lad.sigma(1000) < (math.pi ** 2 / 6) * 2.0 ** (-10)


def test_improved_rate_factor_floor():
    lad = DecayLadder.build(2.0 ** 30, 30)
    for t in range(1, 10):
        assert improved_rate_factor(lad, t) > (15.0 / 16.0) ** 2


def test_improve_zero_potential(golden_freq):
    pot = Potential({}, 1e-4, 0.3)
    step = improve_decay(DecayBound(1e-4, 0.3), pot)
    assert step.verified
    assert step.after.eps_hat == 5e-5
    assert step.after.kappa_hat == pytest.approx(0.35)


def test_improve_requires_valid_start(golden_freq):
    pot = Potential.from_harmonics({(0, 1): 0.6}, 1e-2, 0.5)
    with pytest.raises(RegimeError):
        improve_decay(DecayBound(1e-9, 5.0), pot)


def test_improvement_chain_five_rounds(compliant_problem):
    pot = compliant_problem.potential
    bound = DecayBound(pot.epsilon, pot.kappa0)
    for _ in range(5):
        step = improve_decay(bound, pot)
        assert step.verified
        assert step.after.kappa_hat > bound.kappa_hat
        bound = step.after
    assert bound.kappa_hat == pytest.approx((7.0 / 6.0) ** 5 * 0.1)


def test_verify_inverse_zero_potential(zero_problem):
    report = verify_inverse(zero_problem, 4, iterations=3, window_norm=2)
    assert report.hypothesis_ok
    assert report.final_ok
    assert "desk" in report.note


def test_verify_inverse_compliant(compliant_problem):
    report = verify_inverse(compliant_problem, 6, iterations=5, window_norm=4)
    assert report.hypothesis_ok
    assert all(r.holds for r in report.pointwise)
    assert all(s.verified for s in report.improvement)
    assert report.final_ok


def test_verify_inverse_hypothesis_failure(golden_freq):
    # gaps ~ 2 eps e^{-0.5|m|} cannot sit under sqrt(eps) e^{-2|m|} at |m|=1
    pot = Potential.from_harmonics({(0, 1): 0.6}, 1e-2, 0.5)
    prob = Problem(golden_freq, pot)
    report = verify_inverse(prob, 4, iterations=2, window_norm=1,
                            gap_hypothesis_eps=1e-6)
    assert not report.hypothesis_ok
    assert report.pointwise == ()
