import math

import numpy as np
import pytest

from persistlab import LatticeSpec, build_hamiltonian, propagator


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture
def ring4():
    """4-site periodic ring, unit hopping, propagated for t = 1."""
    spec = LatticeSpec(4, "periodic", 1.0, 0.0, 1.0)
    return propagator(build_hamiltonian(spec), 1.0)


@pytest.fixture
def balanced():
    """2-site open lattice at t = pi/4: all entries have modulus 1/sqrt(2)."""
    spec = LatticeSpec(2, "open", 1.0, 0.0, 0.1)
    return propagator(build_hamiltonian(spec), math.pi / 4)


def random_complex(rng, *shape):
    return rng.normal(size=shape) + 1j * rng.normal(size=shape)
