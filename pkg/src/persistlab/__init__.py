"""Persistence and nonpersistence models of identical particles on a 1-D lattice."""

from .lattice import (
    LatticeSpec,
    Propagator,
    build_hamiltonian,
    determinant,
    gaussian_packet,
    permanent,
    propagator,
)
from .nonpersistence import (
    ExtendedState,
    NonpersistenceState,
    Statistics,
    dirac_symmetrize,
    distance_distribution,
    extend_state,
    leftmost_distribution,
    reduced_density,
    symmetrize_amp,
    symmetrize_state,
    transition_probability,
)
from .persistence import (
    PermutationAmplitudes,
    PersistenceState,
    all_permutation_amps,
    evolve_persistence,
    persistence_amp,
    sum_rule_demo,
    symmetric_two_particle_hamiltonian,
)
from .reidentification import assign_tracks, is_isolated, swap_probability

__version__ = "0.1.0"
