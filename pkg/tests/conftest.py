import math

import numpy as np
import pytest

from qpspec.lattice import ball, l1_norm
from qpspec.model import Frequency, Potential, Problem, ScaleLadder, build_ladder

GOLDEN = (math.sqrt(5.0) - 1.0) / 2.0


@pytest.fixture(scope="session")
def golden_freq():
    return Frequency((1.0, GOLDEN), 0.1, 3.0, window_n=50)


@pytest.fixture(scope="session")
def zero_problem(golden_freq):
    return Problem(golden_freq, Potential({}, 1e-4, 0.5))


@pytest.fixture(scope="session")
def harmonic_problem(golden_freq):
    """Single harmonic c0(+-(0,1)) = 1, eps = 1e-4, kappa0 = 1/2."""
    return Problem(golden_freq, Potential.from_harmonics({(0, 1): 1.0}, 1e-4, 0.5))


@pytest.fixture(scope="session")
def generic_problem(golden_freq):
    pot = Potential.from_harmonics(
        {(0, 1): 0.55, (1, 0): 0.3 + 0.2j, (1, 1): 0.2 - 0.1j}, 1e-4, 0.5)
    return Problem(golden_freq, pot)


@pytest.fixture(scope="session")
def desk_ladder():
    """Recursion-exact desk ladder: log R = (3.2, 3.584), representable deltas."""
    return build_ladder(math.exp(-3.2 / 0.35), 0.35, 2)


@pytest.fixture(scope="session")
def geometry_ladder():
    """Synthetic narrow-delta ladder for non-degenerate desk geometry.

    R growth fast enough that straddlers of B(3 R^(2)) clear the 12 R^(1)
    class separation: R1 = 5, R2 = 31.
    """
    return ScaleLadder.from_sequences(
        0.35, (math.log(5.0), math.log(31.0)), (-32.0, -36.0, -40.0))


@pytest.fixture(scope="session")
def geometry_problem(golden_freq, geometry_ladder):
    freq = Frequency((1.0, GOLDEN), 0.1, 3.0, window_n=300)
    pot = Potential.from_harmonics({(0, 1): 0.6}, 1e-4, 0.5)
    return Problem(freq, pot, geometry_ladder, site_budget=20_000)


def random_potential(rng, epsilon=1e-4, kappa0=0.5, radius=3, density=0.6):
    """Hermitian-valid potential with |c0(n)| <= exp(-kappa0 |n|)."""
    entries = {}
    for n in ball(radius, 2, budget=None):
        if not any(n) or n in entries or tuple(-c for c in n) in entries:
            continue
        if rng.random() > density:
            continue
        cap = math.exp(-kappa0 * l1_norm(n))
        mag = cap * rng.random()
        phase = np.exp(2j * np.pi * rng.random())
        entries[n] = mag * phase
    return Potential.from_harmonics(entries, epsilon, kappa0)
