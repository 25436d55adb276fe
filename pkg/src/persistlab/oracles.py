"""Slow, independent reference computations.

Nothing in here calls the fast kernels it is used to check: permanents and
determinants come from explicit permutation expansions, exponentials from a
Taylor series, and symmetrized sums from enumeration over labelled
configurations.
"""
from __future__ import annotations

import itertools
import math

import numpy as np


def permutation_sign(perm):
    """Sign of a permutation given as a tuple of images, by cycle counting."""
    seen = [False] * len(perm)
    sign = 1
    for start in range(len(perm)):
        if seen[start]:
            continue
        length = 0
        j = start
        while not seen[j]:
            seen[j] = True
            j = perm[j]
            length += 1
        if length % 2 == 0:
            sign = -sign
    return sign


def expansion_permanent(M):
    M = np.asarray(M, dtype=complex)
    n = M.shape[0]
    total = 0j
    for perm in itertools.permutations(range(n)):
        term = 1 + 0j
        for i in range(n):
            term *= M[i, perm[i]]
        total += term
    return total


def expansion_determinant(M):
    M = np.asarray(M, dtype=complex)
    n = M.shape[0]
    total = 0j
    for perm in itertools.permutations(range(n)):
        term = complex(permutation_sign(perm))
        for i in range(n):
            term *= M[i, perm[i]]
        total += term
    return total


def taylor_expm(A, max_terms=500):
    """``exp(A)`` by summing the power series until terms stop contributing."""
    A = np.asarray(A, dtype=complex)
    # scale down so the series converges fast, then square back up
    norm = np.max(np.sum(np.abs(A), axis=1)) if A.size else 0.0
    squarings = max(0, int(np.ceil(np.log2(norm))) + 1) if norm > 0.5 else 0
    B = A / 2 ** squarings
    result = np.eye(A.shape[0], dtype=complex)
    term = np.eye(A.shape[0], dtype=complex)
    for k in range(1, max_terms):
        term = term @ B / k
        result = result + term
        if np.max(np.abs(term)) < 1e-18:
            break
    for _ in range(squarings):
        result = result @ result
    return result


def signed_path_sum(U, from_events, to_events, sign):
    """Sum over label permutations of products of single-particle amplitudes.

    ``sign`` is +1 (all terms added) or -1 (terms weighted by parity).
    """
    U = np.asarray(U, dtype=complex)
    n = len(from_events)
    total = 0j
    for perm in itertools.permutations(range(n)):
        term = complex(permutation_sign(perm)) if sign < 0 else 1 + 0j
        for k in range(n):
            term *= U[to_events[perm[k]], from_events[k]]
        total += term
    return total


def multiplicity_weight(events):
    w = 1.0
    for _, group in itertools.groupby(sorted(events)):
        w /= math.factorial(len(list(group)))
    return w


def labelled_composition_sum(U, V, from_events, to_events, sign):
    """Two-leg symmetrized amplitude summed over every labelled intermediate.

    Each multiset of intermediate events is visited ``n!/prod(mult!)`` times,
    so the sum is divided by ``n!``.
    """
    U = np.asarray(U, dtype=complex)
    V = np.asarray(V, dtype=complex)
    n = len(from_events)
    total = 0j
    for mid in itertools.product(range(U.shape[0]), repeat=n):
        total += signed_path_sum(V, mid, to_events, sign) * signed_path_sum(U, from_events, mid, sign)
    return total / math.factorial(n)


def brute_force_probabilities(U, from_events, sign):
    """Final-multiset probabilities from the labelled product state.

    Builds the full labelled amplitude tensor for independent particles,
    (anti)symmetrizes it, and reads off weights on sorted configurations.
    """
    U = np.asarray(U, dtype=complex)
    L = U.shape[0]
    n = len(from_events)
    psi = np.ones((1,) * 0, dtype=complex)
    for k in range(n):
        psi = np.multiply.outer(psi, U[:, from_events[k]])
    sym = np.zeros_like(psi)
    for perm in itertools.permutations(range(n)):
        s = permutation_sign(perm) if sign < 0 else 1
        sym = sym + s * np.transpose(psi, perm)
    probs = {}
    norm_from = multiplicity_weight(from_events)
    for config in itertools.combinations_with_replacement(range(L), n):
        amp = sym[config]
        probs[config] = float(abs(amp) ** 2) * multiplicity_weight(config) * norm_from
    return probs
