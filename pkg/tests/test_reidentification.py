import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from persistlab.consistency import random_unitary
from persistlab.lattice import LatticeSpec, build_hamiltonian, gaussian_packet, propagator
from persistlab.persistence import PermutationAmplitudes, all_permutation_amps
from persistlab.reidentification import (
    EventHistory,
    UnreachableTransitionError,
    assign_tracks,
    best_permutation,
    history_propagators,
    is_isolated,
    packet_history,
    sampled_history,
    swap_probability,
)


def test_swap_probability_zero_indirect():
    assert swap_probability(PermutationAmplitudes.from_pair(0.7j, 0.0)) == 0


def test_swap_probability_equal_magnitudes():
    assert swap_probability(PermutationAmplitudes.from_pair(0.3, -0.3j)) == pytest.approx(0.5)


def test_swap_probability_separated_packets():
    spec = LatticeSpec(48, "open")
    H = build_hamiltonian(spec)
    a = gaussian_packet(spec, 16, 0.0, 1.0)
    b = gaussian_packet(spec, 32, 0.0, 1.0)
    hist = packet_history([a, b], H, [0.0, 1.0])
    assert hist.events == ((16, 32), (16, 32))
    assert swap_probability(all_permutation_amps(propagator(H, 1.0), (16, 32), (16, 32))) < 1e-6


def test_isolation_flag():
    assert is_isolated(PermutationAmplitudes.from_pair(1.0, 1e-5))
    assert not is_isolated(PermutationAmplitudes.from_pair(1.0, 0.5))
    # zero separation: both paths are the same path
    U = propagator(build_hamiltonian(LatticeSpec(8)), 0.5)
    assert not is_isolated(all_permutation_amps(U, (3, 3), (3, 3)))


def test_tiny_amplitudes_keep_their_ratio():
    amps = PermutationAmplitudes.from_pair(3e-200, 4e-200)
    assert swap_probability(amps) == pytest.approx(16 / 25)


def test_unreachable_transition():
    with pytest.raises(UnreachableTransitionError):
        swap_probability(PermutationAmplitudes.from_pair(0.0, 0.0))
    with pytest.raises(UnreachableTransitionError):
        best_permutation(all_permutation_amps(np.eye(5), (0, 1, 2), (1, 2, 4)))


def test_swap_needs_two_events():
    with pytest.raises(ValueError):
        swap_probability(all_permutation_amps(np.eye(4), (0, 1, 2), (0, 1, 2)))


@settings(max_examples=40, deadline=None)
@given(st.complex_numbers(max_magnitude=10, allow_nan=False, allow_infinity=False),
       st.complex_numbers(max_magnitude=10, allow_nan=False, allow_infinity=False),
       st.complex_numbers(min_magnitude=1e-3, max_magnitude=1e3, allow_nan=False, allow_infinity=False))
def test_swap_probability_scale_invariant(direct, indirect, c):
    if abs(direct) < 1e-6 and abs(indirect) < 1e-6:
        return
    base = swap_probability(PermutationAmplitudes.from_pair(direct, indirect))
    scaled = swap_probability(PermutationAmplitudes.from_pair(c * direct, c * indirect))
    assert abs(base - scaled) < 1e-12
    assert 0 <= base <= 1


def _separated():
    spec = LatticeSpec(48, "open", 1.0, 0.0, 0.1)
    H = build_hamiltonian(spec)
    return H, gaussian_packet(spec, 16, 0.3, 1.0), gaussian_packet(spec, 32, -0.3, 1.0)


def test_separated_packets_keep_identity_tracks():
    H, a, b = _separated()
    times = np.linspace(0.0, 1.0, 10)
    tracks = assign_tracks(packet_history([a, b], H, times), history_propagators(H, times))
    assert tracks.permutations == [(0, 1)] * 9
    assert tracks.confidence > 0.999
    assert all(tracks.isolated)


def test_crossing_packets_lose_confidence():
    spec = LatticeSpec(32, "open")
    H = build_hamiltonian(spec)
    a = gaussian_packet(spec, 10, 1.2, 1.5)
    b = gaussian_packet(spec, 20, -1.2, 1.5)
    times = np.linspace(0.0, 6.0, 13)
    hist = packet_history([a, b], H, times)
    tracks = assign_tracks(hist, history_propagators(H, times))
    assert min(tracks.step_probabilities) <= 0.5 + 1e-12
    coincident = [k for k, ev in enumerate(hist.events[1:]) if ev[0] == ev[1]]
    assert coincident
    assert not any(tracks.isolated[k] for k in coincident)
    assert tracks.confidence <= 0.5 + 1e-12


def test_single_observation_history():
    hist = EventHistory((0.0,), ((2, 5),))
    tracks = assign_tracks(hist, [])
    assert tracks.permutations == []
    assert tracks.confidence == 1


def test_history_validation():
    with pytest.raises(ValueError):
        EventHistory((1.0, 0.5), ((0, 1), (0, 1)))
    with pytest.raises(ValueError):
        EventHistory((0.0, 1.0), ((0, 1), (0, 1, 2)))
    with pytest.raises(ValueError):
        assign_tracks(EventHistory((0.0, 1.0), ((0, 1), (0, 1))), [])


@settings(max_examples=20, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_label_order_does_not_matter(seed):
    rng = np.random.default_rng(seed)
    U = random_unitary(6, rng)
    src = rng.choice(6, size=3, replace=False)
    dst = rng.choice(6, size=3, replace=False)
    h1 = EventHistory((0.0, 1.0), (tuple(src), tuple(dst)))
    h2 = EventHistory((0.0, 1.0), (tuple(rng.permutation(src)), tuple(rng.permutation(dst))))
    t1, t2 = assign_tracks(h1, [U]), assign_tracks(h2, [U])
    assert t1.permutations == t2.permutations
    assert t1.confidence == t2.confidence


def test_rows_output():
    H, a, b = _separated()
    times = [0.0, 0.5, 1.0]
    hist = packet_history([a, b], H, times)
    rows = list(assign_tracks(hist, history_propagators(H, times)).rows(hist))
    assert [r["t_to"] for r in rows] == [0.5, 1.0]
    assert rows[0]["permutation"] == "01"


def test_sampled_history_is_seeded():
    H, a, b = _separated()
    times = [0.0, 0.5, 1.0]
    h1 = sampled_history([a, b], H, times, np.random.default_rng(3))
    h2 = sampled_history([a, b], H, times, np.random.default_rng(3))
    assert h1 == h2


def test_frequent_observation_limit():
    # seed-averaged confidence climbs towards 1 as observations get denser
    spec = LatticeSpec(48, "open", 1.0, 0.0, 0.1)
    H = build_hamiltonian(spec)
    counts = [2, 3, 5, 9, 17, 33]
    conf = np.zeros((20, len(counts)))
    for seed in range(20):
        rng = np.random.default_rng(seed)
        sep, x, p = rng.uniform(3, 5), rng.uniform(18, 24), rng.uniform(-0.4, 0.4)
        a = gaussian_packet(spec, x, p, 1.0)
        b = gaussian_packet(spec, x + sep, p, 1.0)
        for j, K in enumerate(counts):
            times = np.linspace(0.0, 3.0, K)
            conf[seed, j] = assign_tracks(packet_history([a, b], H, times),
                                          history_propagators(H, times)).confidence
    mean = conf.mean(axis=0)
    assert np.all(np.diff(mean) >= -1e-12)
    assert mean[-1] > 0.999
    assert mean[0] < 0.9
