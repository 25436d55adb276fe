"""Event-multiset (nonpersistence) model and the symmetrization rules.

States live on sorted event tuples. Multisets with repeated sites carry the
weight ``1/prod(mult!)`` in every norm and probability, which makes raw
permanents usable as amplitudes without rescaling.
"""
from __future__ import annotations

import enum
import itertools
import math
from dataclasses import dataclass

import numpy as np

from .lattice import determinant, permanent, expm_hermitian, check_hermitian
from .persistence import MAX_PERMUTATION_PARTICLES, PermutationAmplitudes, _check_sites, _matrix


class Statistics(enum.Enum):
    BOSON = "boson"
    FERMION = "fermion"

    @property
    def sign(self):
        return 1 if self is Statistics.BOSON else -1

    @classmethod
    def parse(cls, value):
        if isinstance(value, cls):
            return value
        try:
            return cls(str(value).lower())
        except ValueError:
            raise ValueError(f"unknown statistics {value!r}; expected 'boson' or 'fermion'") from None


class ExclusionError(ValueError):
    """Two fermionic events at the same site."""


class NullProjectionError(ValueError):
    """Symmetrization annihilated the state."""


def permutation_sign(perm):
    """Parity of ``perm`` by counting inversions."""
    inversions = sum(1 for i, j in itertools.combinations(range(len(perm)), 2) if perm[i] > perm[j])
    return -1 if inversions % 2 else 1


def multiplicity_weight(events):
    w = 1.0
    for _, group in itertools.groupby(sorted(events)):
        w /= math.factorial(sum(1 for _ in group))
    return w


def check_events(events, stats, sites=None):
    """Sort ``events`` and enforce exclusion for fermions."""
    events = tuple(sorted(int(x) for x in events))
    if sites is not None:
        _check_sites(events, sites, "event")
    if Statistics.parse(stats) is Statistics.FERMION and len(set(events)) != len(events):
        raise ExclusionError(f"fermionic events must be distinct, got {events}")
    return events


def event_multisets(sites, n, stats):
    """All sorted event tuples allowed for ``stats``."""
    if Statistics.parse(stats) is Statistics.FERMION:
        return list(itertools.combinations(range(sites), n))
    return list(itertools.combinations_with_replacement(range(sites), n))


def symmetrize_amp(amps, stats):
    """Combine permutation amplitudes: plain sum for bosons, signed sum for fermions."""
    if not isinstance(amps, PermutationAmplitudes):
        amps = PermutationAmplitudes(len(next(iter(amps))), dict(amps))
    stats = Statistics.parse(stats)
    total = 0j
    for sigma, a in amps.amps.items():
        total += a if stats is Statistics.BOSON else permutation_sign(sigma) * a
    return complex(total)


def transition_matrix(U, from_events, to_events):
    """``M[j, k] = U[to_j, from_k]`` with both event lists sorted."""
    U = _matrix(U)
    src = sorted(from_events)
    dst = sorted(to_events)
    if len(src) != len(dst):
        raise ValueError(f"event counts differ: {len(src)} vs {len(dst)}")
    _check_sites(src, U.shape[0], "initial")
    _check_sites(dst, U.shape[0], "final")
    return U[np.ix_(dst, src)]


def symmetrized_amplitude(U, from_events, to_events, stats):
    """Nonpersistence transition amplitude as a permanent or determinant."""
    M = transition_matrix(U, from_events, to_events)
    if Statistics.parse(stats) is Statistics.BOSON:
        return permanent(M)
    return determinant(M)


def transition_probability(U, from_events, to_events, stats):
    stats = Statistics.parse(stats)
    src = check_events(from_events, stats)
    dst = check_events(to_events, stats)
    amp = symmetrized_amplitude(U, src, dst, stats)
    return abs(amp) ** 2 * multiplicity_weight(src) * multiplicity_weight(dst)


def final_distribution(U, from_events, stats):
    """Probability of every final multiset, keyed by sorted tuple."""
    stats = Statistics.parse(stats)
    U = _matrix(U)
    src = check_events(from_events, stats, U.shape[0])
    return {dst: transition_probability(U, src, dst, stats)
            for dst in event_multisets(U.shape[0], len(src), stats)}


@dataclass(frozen=True)
class NonpersistenceState:
    """Amplitudes over sorted event tuples.

    ``factor`` is the norm of the raw projection this state was scaled from
    (1 when built directly).
    """

    psid: dict
    statistics: Statistics
    sites: int
    n: int
    factor: float = 1.0

    def __post_init__(self):
        stats = Statistics.parse(self.statistics)
        object.__setattr__(self, "statistics", stats)
        clean = {}
        for key, amp in self.psid.items():
            events = check_events(key, stats, self.sites)
            if len(events) != self.n:
                raise ValueError(f"multiset {key} has {len(events)} events, expected {self.n}")
            if not np.isfinite(amp):
                raise ValueError(f"non-finite amplitude on {key}")
            clean[events] = clean.get(events, 0j) + complex(amp)
        object.__setattr__(self, "psid", clean)
        norm = self.norm()
        if abs(norm - 1.0) > 1e-10:
            raise ValueError(f"nonpersistence state is not normalized (norm {norm!r})")

    def norm(self):
        return math.sqrt(sum(multiplicity_weight(k) * abs(a) ** 2 for k, a in self.psid.items()))

    def probabilities(self):
        return {k: multiplicity_weight(k) * abs(a) ** 2 for k, a in self.psid.items()}

    def amplitude(self, events):
        return self.psid.get(tuple(sorted(events)), 0j)


@dataclass(frozen=True)
class ExtendedState:
    """(Anti)symmetric continuation of a reduced state to labelled configurations."""

    psi: np.ndarray
    statistics: Statistics

    def __post_init__(self):
        psi = np.asarray(self.psi, dtype=complex)
        psi.setflags(write=False)
        object.__setattr__(self, "psi", psi)
        object.__setattr__(self, "statistics", Statistics.parse(self.statistics))

    @property
    def n(self):
        return self.psi.ndim

    @property
    def sites(self):
        return self.psi.shape[0]

    def sector_defect(self):
        """Largest deviation from (anti)symmetry under any label transposition."""
        sign = self.statistics.sign
        worst = 0.0
        for i, j in itertools.combinations(range(self.n), 2):
            axes = list(range(self.n))
            axes[i], axes[j] = axes[j], axes[i]
            worst = max(worst, float(np.max(np.abs(np.transpose(self.psi, axes) - sign * self.psi))))
        return worst


def _signed_sum_over_labels(psi, stats):
    out = np.zeros_like(psi)
    for perm in itertools.permutations(range(psi.ndim)):
        s = permutation_sign(perm) if stats is Statistics.FERMION else 1
        out = out + s * np.transpose(psi, perm)
    return out


def symmetrize_state(state, stats):
    """Map a labelled state to a normalized state on sorted event tuples.

    The raw value on each sorted tuple is the (signed) sum of the labelled
    wavefunction over all orderings of its arguments; the result is scaled
    to unit norm and the scale is kept in ``factor``.

    Raises
    ------
    NullProjectionError
        If the projection onto the requested sector vanishes.
    """
    stats = Statistics.parse(stats)
    psi = np.asarray(getattr(state, "psi", state), dtype=complex)
    n = psi.ndim
    if n > MAX_PERMUTATION_PARTICLES:
        raise ValueError(f"{n} particles exceed the permutation limit {MAX_PERMUTATION_PARTICLES}")
    raw = _signed_sum_over_labels(psi, stats)
    keys = event_multisets(psi.shape[0], n, stats)
    values = {k: complex(raw[k]) for k in keys}
    norm = math.sqrt(sum(multiplicity_weight(k) * abs(v) ** 2 for k, v in values.items()))
    if norm < 1e-12:
        raise NullProjectionError(f"state has no {stats.value} component")
    return NonpersistenceState({k: v / norm for k, v in values.items()}, stats,
                               psi.shape[0], n, factor=norm)


def extend_state(state):
    """Continue a reduced state to every labelled configuration.

    Unsorted arguments take the value at their sorted order, times the
    parity of the sort for fermions, and the whole is scaled by
    ``1/sqrt(n!)``.
    """
    stats = state.statistics
    n = state.n
    psi = np.zeros((state.sites,) * n, dtype=complex)
    scale = 1.0 / math.sqrt(math.factorial(n))
    for key, amp in state.psid.items():
        for perm in itertools.permutations(range(n)):
            config = tuple(key[p] for p in perm)
            s = permutation_sign(perm) if stats is Statistics.FERMION else 1
            psi[config] = s * amp * scale
    return ExtendedState(psi, stats)


def restrict_state(ext):
    """Inverse of :func:`extend_state`: read off sorted tuples and renormalize."""
    stats = ext.statistics
    keys = event_multisets(ext.sites, ext.n, stats)
    values = {k: complex(ext.psi[k]) for k in keys}
    norm = math.sqrt(sum(multiplicity_weight(k) * abs(v) ** 2 for k, v in values.items()))
    if norm < 1e-12:
        raise NullProjectionError("extended state vanishes on sorted configurations")
    return NonpersistenceState({k: v / norm for k, v in values.items()}, stats,
                               ext.sites, ext.n, factor=norm)


def evolve_extended(state, H, t):
    """Evolve an extended state as a labelled wavefunction under ``H``."""
    H = check_hermitian(H)
    psi = state.psi
    if H.shape[0] != psi.size:
        raise ValueError(f"Hamiltonian dimension {H.shape[0]} does not match state size {psi.size}")
    out = (expm_hermitian(H, t) @ psi.ravel()).reshape(psi.shape)
    return ExtendedState(out, state.statistics)


def leftmost_distribution(state):
    """Distribution of the position of the left-most event."""
    P = np.zeros(state.sites)
    for key, p in state.probabilities().items():
        P[key[0]] += p
    return P


def distance_distribution(state):
    """Distribution of the separation between the outermost events."""
    P = np.zeros(state.sites)
    for key, p in state.probabilities().items():
        P[key[-1] - key[0]] += p
    return P


def dirac_symmetrize(phi_a, phi_b, stats):
    """Normalized ``phi_a x phi_b +/- phi_b x phi_a`` on the labelled space."""
    stats = Statistics.parse(stats)
    a = np.asarray(phi_a, dtype=complex)
    b = np.asarray(phi_b, dtype=complex)
    if a.shape != b.shape or a.ndim != 1:
        raise ValueError(f"single-particle states must be vectors of equal length, got {a.shape}, {b.shape}")
    psi = np.multiply.outer(a, b) + stats.sign * np.multiply.outer(b, a)
    norm = np.linalg.norm(psi)
    if norm < 1e-12:
        raise NullProjectionError(f"{stats.value} combination of these states vanishes")
    return ExtendedState(psi / norm, stats)


def reduced_density(state, which):
    """One-label reduced density matrix of a two-particle labelled state.

    ``which`` is the label kept (1 or 2); the other is traced out.
    """
    psi = np.asarray(getattr(state, "psi", state), dtype=complex)
    if psi.ndim != 2:
        raise ValueError(f"reduced density needs a two-particle state, got {psi.ndim} particles")
    if which == 1:
        rho = psi @ psi.conj().T
    elif which == 2:
        rho = psi.T @ psi.conj()
    else:
        raise ValueError(f"label must be 1 or 2, got {which!r}")
    return rho
