import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from persistlab.lattice import LatticeSpec, build_hamiltonian, gaussian_packet, propagator
from persistlab.oracles import taylor_expm
from persistlab.persistence import (
    PermutationAmplitudes,
    PersistenceState,
    all_permutation_amps,
    evolve_persistence,
    evolve_product,
    exchange_operator,
    path_amplitudes,
    persistence_amp,
    sum_rule_demo,
    symmetric_two_particle_hamiltonian,
)


def test_identity_amplitudes():
    I = np.eye(10)
    assert persistence_amp(I, (3, 7), (3, 7)) == 1
    assert persistence_amp(I, (3, 7), (7, 3)) == 0


def test_ring_product_amplitude(ring4):
    # elementwise product from the Taylor oracle: U[1,0] * U[3,2] = -sin(2)^2 / 4
    assert persistence_amp(ring4, (0, 2), (1, 3)) == pytest.approx(-0.20670545260795153, abs=1e-12)


def test_mismatched_counts():
    with pytest.raises(ValueError):
        persistence_amp(np.eye(4), (0, 1), (0,))
    with pytest.raises(ValueError):
        all_permutation_amps(np.eye(4), (0, 1), (0, 1, 2))


def test_permutation_guard():
    with pytest.raises(ValueError, match="limit"):
        all_permutation_amps(np.eye(12), range(9), range(9))


def test_identity_permutation_amps():
    amps = all_permutation_amps(np.eye(10), (7, 3), (3, 7))
    assert amps.amps == {(0, 1): 1, (1, 0): 0}
    amps3 = all_permutation_amps(np.eye(5), (1, 2, 3), (1, 2, 3))
    assert amps3.direct == 1
    assert sum(abs(a) for s, a in amps3.amps.items() if s != (0, 1, 2)) == 0


def test_balanced_unitary_amps(balanced):
    amps = all_permutation_amps(balanced, (0, 1), (0, 1))
    for a in amps.amps.values():
        assert abs(a) == pytest.approx(0.5, abs=1e-12)


def test_incomplete_permutation_map():
    with pytest.raises(ValueError, match="incomplete"):
        PermutationAmplitudes(2, {(0, 1): 1.0})


@settings(max_examples=25, deadline=None)
@given(st.integers(3, 6), st.integers(1, 3), st.integers(0, 2**32 - 1))
def test_amplitude_composes_over_labelled_intermediates(sites, n, seed):
    rng = np.random.default_rng(seed)
    spec = LatticeSpec(sites, "open", 1.0, rng.normal(size=sites))
    H = build_hamiltonian(spec)
    U, V = propagator(H, 0.4), propagator(H, 0.9)
    src = tuple(rng.integers(0, sites, n))
    dst = tuple(rng.integers(0, sites, n))
    summed = sum(persistence_amp(V, mid, dst) * persistence_amp(U, src, mid)
                 for mid in itertools.product(range(sites), repeat=n))
    assert abs(summed - persistence_amp(propagator(H, 1.3), src, dst)) < 1e-10


def test_two_particle_spectrum_is_pairwise_sums():
    spec = LatticeSpec(4, "open", 1.0, [0.1, -0.3, 0.5, 0.0])
    e1 = np.linalg.eigvalsh(build_hamiltonian(spec))
    e2 = np.linalg.eigvalsh(symmetric_two_particle_hamiltonian(spec))
    np.testing.assert_allclose(e2, np.sort(np.add.outer(e1, e1).ravel()), atol=1e-12)


def test_two_site_kronecker_sum():
    H2 = symmetric_two_particle_hamiltonian(LatticeSpec(2, "open", 1.0, 0.0))
    expected = np.array([[0, -1, -1, 0], [-1, 0, 0, -1], [-1, 0, 0, -1], [0, -1, -1, 0]])
    np.testing.assert_array_equal(H2, expected)
    np.testing.assert_array_equal(H2.sum(axis=1), [-2, -2, -2, -2])


@pytest.mark.parametrize("interaction", [0.0, 2.5, -1.0])
def test_hamiltonian_commutes_with_exchange(interaction):
    spec = LatticeSpec(5, "periodic", 0.8, [0.0, 1.0, -1.0, 0.5, 0.2])
    H2 = symmetric_two_particle_hamiltonian(spec, interaction)
    P = exchange_operator(5)
    assert np.max(np.abs(H2 @ P - P @ H2)) < 1e-12


def test_exchange_operator_swaps_labels(rng):
    psi = rng.normal(size=(4, 4))
    np.testing.assert_array_equal(exchange_operator(4) @ psi.ravel(), psi.T.ravel())


def test_contact_interaction_on_diagonal_only():
    spec = LatticeSpec(3, "open", 0.0, 0.0)
    H2 = symmetric_two_particle_hamiltonian(spec, 4.0)
    assert np.diag(H2).reshape(3, 3).tolist() == np.diag([4.0, 4.0, 4.0]).tolist()


@pytest.fixture
def two_packets():
    spec = LatticeSpec(12, "periodic", 1.0, 0.0)
    a = gaussian_packet(spec, 3, 0.4, 1.0)
    b = gaussian_packet(spec, 8, -0.2, 1.5)
    return spec, a, b


def test_evolution_at_zero_time(two_packets):
    spec, a, b = two_packets
    state = PersistenceState.product(a, b)
    out = evolve_persistence(state, symmetric_two_particle_hamiltonian(spec, 1.0), 0.0)
    np.testing.assert_array_equal(out.psi, state.psi)


def test_product_state_stays_product(two_packets):
    spec, a, b = two_packets
    H = build_hamiltonian(spec)
    out = evolve_persistence(PersistenceState.product(a, b), symmetric_two_particle_hamiltonian(spec), 1.7)
    U = taylor_expm(-1j * 1.7 * H)
    expected = np.multiply.outer(U @ a, U @ b)
    assert np.max(np.abs(out.psi - expected)) < 1e-10
    np.testing.assert_allclose(evolve_product(PersistenceState.product(a, b), propagator(H, 1.7)).psi,
                               expected, atol=1e-10)


def test_symmetric_state_stays_symmetric(two_packets):
    spec, a, b = two_packets
    psi = np.multiply.outer(a, b) + np.multiply.outer(b, a)
    out = evolve_persistence(PersistenceState(psi / np.linalg.norm(psi)),
                             symmetric_two_particle_hamiltonian(spec, 3.0), 2.2)
    assert np.max(np.abs(out.psi - out.psi.T)) < 1e-10
    assert abs(np.linalg.norm(out.psi) - 1) < 1e-10


def test_evolve_dimension_mismatch(two_packets):
    spec, a, b = two_packets
    with pytest.raises(ValueError):
        evolve_persistence(PersistenceState.product(a, b), np.eye(10), 1.0)


def test_unnormalized_state_rejected():
    with pytest.raises(ValueError):
        PersistenceState(np.ones((3, 3)))


def test_sum_rule_values():
    assert sum_rule_demo(0.5, 0.5) == 1.0
    assert sum_rule_demo(0.3 - 0.2j, 0) == 0.3 - 0.2j


def test_two_site_paths_resolve_identity(balanced):
    a, b = path_amplitudes(balanced, balanced, 0, 1, [0, 1])
    assert abs(sum_rule_demo(a, b) - (balanced.matrix @ balanced.matrix)[1, 0]) < 1e-15
    assert abs(sum_rule_demo(a, b) - 1j) < 1e-12
