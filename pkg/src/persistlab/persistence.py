"""Labelled-particle (persistence) model.

Particles carry labels: a configuration is an ordered tuple whose k-th
entry is the site of particle k. Transition amplitudes for non-interacting
particles factor into single-particle propagator entries.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np

from .lattice import build_hamiltonian, expm_hermitian, check_hermitian

MAX_PERMUTATION_PARTICLES = 8


def _matrix(U):
    return np.asarray(getattr(U, "matrix", U), dtype=complex)


def _check_sites(events, sites, what):
    for x in events:
        if int(x) != x or not 0 <= x < sites:
            raise ValueError(f"{what} site {x!r} outside lattice of {sites} sites")


@dataclass(frozen=True)
class PermutationAmplitudes:
    """Amplitudes indexed by label permutations.

    ``amps[sigma]`` is the amplitude that particle k, starting at the k-th
    (left-most first) initial event, ends at final event ``sigma[k]``. The
    identity permutation is the direct transition.
    """

    n: int
    amps: dict

    def __post_init__(self):
        expected = set(itertools.permutations(range(self.n)))
        if set(self.amps) != expected:
            raise ValueError(f"permutation map for n={self.n} is incomplete "
                             f"({len(self.amps)} of {len(expected)} entries)")
        for sigma, a in self.amps.items():
            if not np.isfinite(a):
                raise ValueError(f"non-finite amplitude for permutation {sigma}")

    @property
    def direct(self):
        return self.amps[tuple(range(self.n))]

    @property
    def indirect(self):
        """Swap amplitude for two particles."""
        if self.n != 2:
            raise ValueError("indirect amplitude is defined for two particles only")
        return self.amps[(1, 0)]

    @classmethod
    def from_pair(cls, direct, indirect):
        return cls(2, {(0, 1): complex(direct), (1, 0): complex(indirect)})


@dataclass(frozen=True)
class PersistenceState:
    """Wavefunction over labelled configurations, shape ``(sites,) * n``."""

    psi: np.ndarray

    def __post_init__(self):
        psi = np.asarray(self.psi, dtype=complex)
        if psi.ndim < 1 or len(set(psi.shape)) != 1:
            raise ValueError(f"state must have shape (sites,)*n, got {psi.shape}")
        norm = np.linalg.norm(psi)
        if abs(norm - 1.0) > 1e-12:
            raise ValueError(f"persistence state is not normalized (norm {norm!r})")
        psi.setflags(write=False)
        object.__setattr__(self, "psi", psi)

    @property
    def n(self):
        return self.psi.ndim

    @property
    def sites(self):
        return self.psi.shape[0]

    @classmethod
    def product(cls, *factors):
        psi = np.ones((), dtype=complex)
        for phi in factors:
            psi = np.multiply.outer(psi, np.asarray(phi, dtype=complex))
        return cls(psi / np.linalg.norm(psi))

    @classmethod
    def localized(cls, sites, positions):
        """Labelled delta state: particle k sits at ``positions[k]``."""
        _check_sites(positions, sites, "labelled")
        psi = np.zeros((sites,) * len(positions), dtype=complex)
        psi[tuple(positions)] = 1.0
        return cls(psi)


def persistence_amp(U, from_config, to_config):
    """Amplitude that each labelled particle k goes ``from[k] -> to[k]``."""
    U = _matrix(U)
    if len(from_config) != len(to_config):
        raise ValueError(f"particle counts differ: {len(from_config)} vs {len(to_config)}")
    _check_sites(from_config, U.shape[0], "initial")
    _check_sites(to_config, U.shape[0], "final")
    amp = 1 + 0j
    for a, b in zip(from_config, to_config):
        amp *= U[b, a]
    return complex(amp)


def all_permutation_amps(U, from_events, to_events):
    """Persistence-model amplitudes for every way of pairing up events.

    Both event lists are put in ascending order first, so the left-most
    initial event belongs to particle 1 and the identity permutation pairs
    events in order.
    """
    n = len(from_events)
    if n != len(to_events):
        raise ValueError(f"event counts differ: {n} vs {len(to_events)}")
    if n > MAX_PERMUTATION_PARTICLES:
        raise ValueError(f"{n} events exceed the permutation limit {MAX_PERMUTATION_PARTICLES}")
    src = sorted(from_events)
    dst = sorted(to_events)
    U = _matrix(U)
    _check_sites(src, U.shape[0], "initial")
    _check_sites(dst, U.shape[0], "final")
    amps = {}
    for sigma in itertools.permutations(range(n)):
        amp = 1 + 0j
        for k in range(n):
            amp *= U[dst[sigma[k]], src[k]]
        amps[sigma] = complex(amp)
    return PermutationAmplitudes(n, amps)


def kron_sum(h, n):
    """``sum_k I x .. x h (slot k) x .. x I`` for n labelled copies."""
    h = np.asarray(h, dtype=complex)
    L = h.shape[0]
    total = np.zeros((L ** n, L ** n), dtype=complex)
    for k in range(n):
        term = np.eye(1, dtype=complex)
        for j in range(n):
            term = np.kron(term, h if j == k else np.eye(L))
        total += term
    return total


def exchange_operator(sites, n=2, perm=(1, 0)):
    """Matrix permuting particle labels on the labelled configuration space."""
    dim = sites ** n
    idx = np.arange(dim).reshape((sites,) * n)
    target = np.transpose(idx, perm).ravel()
    P = np.zeros((dim, dim))
    P[target, np.arange(dim)] = 1.0
    return P


def symmetric_two_particle_hamiltonian(spec, interaction=0.0):
    """Two-particle Hamiltonian with a contact interaction on doubly occupied sites."""
    h = build_hamiltonian(spec)
    H2 = kron_sum(h, 2)
    L = spec.sites
    diag = np.arange(L) * (L + 1)
    H2[diag, diag] += interaction
    return H2


def evolve_persistence(state, H, t):
    """Evolve a labelled state under a Hamiltonian on the full configuration space."""
    H = check_hermitian(H)
    psi = state.psi
    if H.shape[0] != psi.size:
        raise ValueError(f"Hamiltonian dimension {H.shape[0]} does not match state size {psi.size}")
    out = expm_hermitian(H, t) @ psi.ravel()
    return PersistenceState(out.reshape(psi.shape))


def evolve_product(state, U):
    """Apply the same single-particle propagator to every label."""
    psi = state.psi
    U = _matrix(U)
    for axis in range(psi.ndim):
        psi = np.moveaxis(np.tensordot(U, psi, axes=([1], [axis])), 0, axis)
    return PersistenceState(psi)


def sum_rule_demo(a, b):
    return complex(a) + complex(b)


def path_amplitudes(U, V, start, end, via):
    """Two-step single-particle path amplitudes ``V[end, k] U[k, start]`` for k in ``via``."""
    U = _matrix(U)
    V = _matrix(V)
    return [complex(V[end, k] * U[k, start]) for k in via]
