import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from qpspec.errors import EpsilonTooLargeError
from qpspec.lattice import SiteSet, ball
from qpspec.trajectories import (Trajectory, WeightProfile, closed_bound,
                                 concat, elementary_path_sum,
                                 exempt_positions, is_admissible,
                                 log_smallness_threshold,
                                 sum_enumerate, validate_profile, weights)


def flat_profile(host_r=2, ambient_r=5, d=1.0, T=8.0, kappa0=0.5):
    host = ball(host_r, 2, budget=None)
    return WeightProfile({s: d for s in host}, T=T, kappa0=kappa0,
                         host=host, ambient=ball(ambient_r, 2, budget=None))


def exp_weight(kappa0):
    return lambda a, b: math.exp(-kappa0 * sum(abs(x - y) for x, y in zip(a, b)))


def test_concat_merges_junction():
    g = concat(Trajectory(((0, 0), (1, 0))), Trajectory(((1, 0), (2, 0))))
    assert g.points == ((0, 0), (1, 0), (2, 0))


def test_concat_no_merge():
    g = concat(Trajectory(((0, 0), (1, 0))), Trajectory(((2, 0), (3, 0))))
    assert g.points == ((0, 0), (1, 0), (2, 0), (3, 0))


def test_norm_additive_under_merge():
    g1 = Trajectory(((0, 0), (1, 0), (1, 1)))
    g2 = Trajectory(((1, 1), (0, 1)))
    assert concat(g1, g2).norm == g1.norm + g2.norm


def test_weights_single_point():
    prof = flat_profile(d=1.7)
    w, W, norm, dbar = weights(Trajectory(((0, 0),)), prof, exp_weight(0.5))
    assert w == W == pytest.approx(math.exp(1.7))
    assert norm == 0 and dbar == 1.7


def test_weights_two_point_example():
    prof = flat_profile(d=1.0)
    w, W, norm, dbar = weights(Trajectory(((0, 0), (1, 0))), prof, exp_weight(0.5))
    assert w == pytest.approx(math.exp(-0.5) * math.exp(2.0))
    assert W == pytest.approx(w)  # saturated pair weight
    assert norm == 1


def test_weight_bound_validated():
    prof = flat_profile()
    bad = lambda a, b: 1.0  # exceeds exp(-kappa0 |a-b|) off the diagonal
    with pytest.raises(ValueError):
        weights(Trajectory(((0, 0), (1, 0))), prof, bad)


@given(st.lists(st.tuples(st.integers(-2, 2), st.integers(-2, 2)),
                min_size=1, max_size=5))
@settings(max_examples=60, deadline=None, derandomize=True)
def test_w_below_W(points):
    pts = [points[0]]
    for p in points[1:]:
        if p != pts[-1]:
            pts.append(p)
    prof = flat_profile(host_r=4, ambient_r=7, d=1.3)
    w, W, _, _ = weights(Trajectory(tuple(pts)), prof, exp_weight(0.5))
    assert w <= W * (1 + 1e-12)


def test_multiplicativity_under_merge():
    # the junction site's exp(D) appears once in the merged weight, so the
    # product of the factors overcounts it by exactly that factor
    prof = flat_profile(d=1.1)
    wfun = exp_weight(0.5)
    g1 = Trajectory(((0, 0), (1, 0)))
    g2 = Trajectory(((1, 0), (1, 1), (0, 1)))
    w12 = weights(concat(g1, g2), prof, wfun)[0]
    prod = weights(g1, prof, wfun)[0] * weights(g2, prof, wfun)[0]
    assert w12 == pytest.approx(prod / math.exp(prof.D[(1, 0)]))


def test_multiplicativity_bridged_concatenation():
    # non-merging concatenation is exactly multiplicative through the
    # bridging pair weight: w(g1 u g2) = w(g1) w(last, first) w(g2)
    prof = flat_profile(d=1.1)
    wfun = exp_weight(0.5)
    g1 = Trajectory(((0, 0), (1, 0)))
    g2 = Trajectory(((1, 1), (0, 1)))
    w12 = weights(concat(g1, g2), prof, wfun)[0]
    prod = (weights(g1, prof, wfun)[0] * wfun((1, 0), (1, 1))
            * weights(g2, prof, wfun)[0])
    assert w12 == pytest.approx(prod)


def test_admissible_single_point():
    prof = flat_profile()
    for variant in ("plain", "R"):
        ok, _ = is_admissible(Trajectory(((0, 0),)), prof, variant)
        assert ok


def test_admissible_vacuous_low_D():
    prof = flat_profile(d=2.0)  # all D below 4 T / kappa0 = 64
    g = Trajectory(((0, 0), (2, 0), (-2, 0)))
    assert is_admissible(g, prof, "plain")[0]
    assert is_admissible(g, prof, "R")[0]


def high_pair_profile():
    """Two high-D points whose pair violates the 1/5 bound.

    ambient = host makes mu infinite, so any D profile is admissible and
    the construction isolates the trajectory-side condition.
    """
    host = ball(4, 2, budget=None)
    D = {s: 1.0 for s in host}
    D[(-4, 0)] = D[(4, 0)] = 41.0  # above 4 T / kappa0 = 40, above T ||.||^(1/5)
    return WeightProfile(D, T=8.0, kappa0=0.8, host=host, ambient=host)


def test_high_pair_plain_rejects_R_exempts_adjacent():
    prof = high_pair_profile()
    assert validate_profile(prof) == []
    adjacent = Trajectory(((-4, 0), (4, 0)))
    # ||gamma|| = 8, T ||.||^(1/5) = 8 * 8^0.2 = 12.1 < 41
    assert not is_admissible(adjacent, prof, "plain")[0]
    assert is_admissible(adjacent, prof, "R")[0]
    assert exempt_positions(adjacent, prof) == [0]
    separated = Trajectory(((-4, 0), (0, 1), (4, 0)))
    assert not is_admissible(separated, prof, "plain")[0]
    assert not is_admissible(separated, prof, "R")[0]


def test_sum_singleton_host():
    host = SiteSet.from_iterable([(0, 0)])
    prof = WeightProfile({(0, 0): 1.5}, T=8.0, kappa0=0.5, host=host,
                         ambient=ball(3, 2, budget=None))
    res = sum_enumerate((0, 0), (0, 0), prof, 1e-4)
    assert res.partial == pytest.approx(math.exp(1.5))
    assert res.tail == 0.0


def test_sum_zero_offdiagonal_weight():
    host = SiteSet.from_iterable([(0, 0), (3, 0)])
    prof = WeightProfile({(0, 0): 1.0, (3, 0): 1.0}, T=8.0, kappa0=0.5,
                         host=host, ambient=ball(6, 2, budget=None))
    w0 = lambda a, b: 1.0 if a == b else 0.0
    diag = sum_enumerate((0, 0), (0, 0), prof, 1e-4, w=w0)
    off = sum_enumerate((0, 0), (3, 0), prof, 1e-4, w=w0)
    assert diag.partial == pytest.approx(math.e)
    assert off.partial == 0.0


def test_tail_divergence_guard():
    prof = flat_profile(d=8.0)
    with pytest.raises(EpsilonTooLargeError):
        sum_enumerate((0, 0), (1, 0), prof, 0.5)


def test_closed_bound_diagonal_formula():
    prof = flat_profile(d=1.5)
    eps0 = 1e-25
    out = closed_bound((0, 0), (0, 0), prof, eps0)
    mu = prof.mu((0, 0)) ** 0.2
    v1 = math.exp(1.5) + 3 * math.sqrt(eps0) * math.exp(2 * 8.0 * mu)
    assert out.value == pytest.approx(min(v1, 2 * math.exp(3.0)))
    assert out.threshold_ok


def test_closed_bound_decay_rate():
    # D large enough that the (7/8) kappa0 branch is the active minimum;
    # endpoints share min(mu) = 1 so the ratio isolates the decay rate
    prof = flat_profile(host_r=4, ambient_r=5, d=8.5)
    eps0 = 1e-25
    near = closed_bound((4, 0), (3, 0), prof, eps0).value
    far = closed_bound((4, 0), (-2, 0), prof, eps0).value
    assert far / near == pytest.approx(math.exp(-0.875 * 0.5 * 5), rel=1e-6)


def test_closed_bound_strict_raises():
    prof = flat_profile()
    with pytest.raises(EpsilonTooLargeError):
        closed_bound((0, 0), (1, 0), prof, 1e-4, strict=True)
    out = closed_bound((0, 0), (1, 0), prof, 1e-4)
    assert not out.threshold_ok


def test_smallness_threshold_log_space():
    prof = flat_profile()
    thr = log_smallness_threshold(prof)
    assert math.log(1e-25) <= thr < math.log(1e-20)
    faithful = log_smallness_threshold(prof, include_exp_term=True)
    assert faithful == -((8 * 8.0 / 0.5) ** 5)


def test_enumeration_below_closed_bound_random():
    rng = np.random.default_rng(5)
    host = ball(2, 2, budget=None)
    ambient = ball(5, 2, budget=None)
    for _ in range(10):
        prof = WeightProfile({s: 1.0 + 2.0 * rng.random() for s in host},
                             T=8.0, kappa0=0.3 + 0.2 * rng.random(),
                             host=host, ambient=ambient)
        assert validate_profile(prof) == []
        eps0 = 1e-25
        for target in ((0, 0), (1, 0), (1, -1)):
            res = sum_enumerate((0, 0), target, prof, eps0, len_cap=4)
            bnd = closed_bound((0, 0), target, prof, eps0)
            assert res.total <= bnd.value


def test_elementary_sum_bound():
    host = ball(3, 2, budget=None)
    for k in (2, 3):
        for alpha in (1.0, 2.0):
            s = elementary_path_sum((0, 0), (1, 0), k, host, alpha)
            assert s < (8.0 / alpha) ** ((k - 1) * 2)


def test_admissible_R_weight_cap_in_logs():
    # log W <= -kappa0 ||gamma|| + k M^5 whenever t_D <= 5, checked in logs
    prof = flat_profile(d=2.0)
    wfun = exp_weight(0.5)
    g = Trajectory(((0, 0), (1, 0), (1, 1)))
    _, W, norm, dbar = weights(g, prof, wfun)
    M = 4 * prof.T / prof.kappa0
    assert dbar <= M ** 5
    assert math.log(W) <= -prof.kappa0 * norm + len(g) * M ** 5
