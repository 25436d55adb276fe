"""Probabilistic reidentification of identical particles across observations."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .lattice import propagator
from .persistence import MAX_PERMUTATION_PARTICLES, PermutationAmplitudes, all_permutation_amps

DEFAULT_EPSILON = 1e-6
_UNREACHABLE = 1e-300


class UnreachableTransitionError(ValueError):
    """Every path between two observations has zero amplitude."""


def _path_weights(amps):
    mags = {sigma: abs(a) for sigma, a in amps.amps.items()}
    scale = max(mags.values())
    if scale < _UNREACHABLE:
        raise UnreachableTransitionError("all persistence paths have zero amplitude")
    # relative weights; rescaling keeps tiny amplitudes from underflowing
    return {sigma: (m / scale) ** 2 for sigma, m in mags.items()}


def swap_probability(amps):
    """Persistence-model probability that two particles swapped tracks.

    This is ``|indirect|^2 / (|direct|^2 + |indirect|^2)``.
    """
    if amps.n != 2:
        raise ValueError(f"swap probability is defined for two events, got {amps.n}")
    direct = abs(amps.direct)
    indirect = abs(amps.indirect)
    if direct < _UNREACHABLE and indirect < _UNREACHABLE:
        raise UnreachableTransitionError("both paths have zero amplitude")
    # rescale before squaring so tiny amplitudes keep their ratio
    scale = max(direct, indirect)
    d, i = direct / scale, indirect / scale
    return i * i / (d * d + i * i)


def best_permutation(amps):
    """Most probable pairing and the share of path probability it carries."""
    if amps.n == 2:
        p_swap = swap_probability(amps)
        return ((1, 0), p_swap) if p_swap > 0.5 else ((0, 1), 1.0 - p_swap)
    weights = _path_weights(amps)
    total = sum(weights.values())
    sigma = max(sorted(weights), key=lambda s: weights[s])
    return sigma, weights[sigma] / total


def is_isolated(amps, epsilon=DEFAULT_EPSILON):
    """True when one pairing carries all but an ``epsilon`` share of path probability.

    For two events the test is ``min/max < epsilon`` on the two path probabilities.
    """
    if amps.n == 2:
        p = swap_probability(amps)
        lo, hi = min(p, 1 - p), max(p, 1 - p)
        return lo / hi < epsilon
    _, share = best_permutation(amps)
    return share > 1 - epsilon


@dataclass(frozen=True)
class EventHistory:
    times: tuple
    events: tuple

    def __post_init__(self):
        times = tuple(float(t) for t in self.times)
        events = tuple(tuple(sorted(int(x) for x in ev)) for ev in self.events)
        if len(times) != len(events):
            raise ValueError(f"{len(times)} times but {len(events)} event sets")
        if not events:
            raise ValueError("history is empty")
        if any(b <= a for a, b in zip(times, times[1:])):
            raise ValueError("observation times must be strictly increasing")
        if len({len(ev) for ev in events}) != 1:
            raise ValueError("every observation must contain the same number of events")
        if len(events[0]) > MAX_PERMUTATION_PARTICLES:
            raise ValueError(f"{len(events[0])} events exceed the permutation limit")
        object.__setattr__(self, "times", times)
        object.__setattr__(self, "events", events)


@dataclass
class TrackAssignment:
    permutations: list = field(default_factory=list)
    step_probabilities: list = field(default_factory=list)
    swap_probabilities: list = field(default_factory=list)
    isolated: list = field(default_factory=list)

    @property
    def confidence(self):
        return float(np.prod(self.step_probabilities)) if self.step_probabilities else 1.0

    def rows(self, history):
        for k, sigma in enumerate(self.permutations):
            yield {
                "t_from": history.times[k],
                "t_to": history.times[k + 1],
                "permutation": "".join(str(s) for s in sigma),
                "step_probability": self.step_probabilities[k],
                "swap_probability": self.swap_probabilities[k],
                "isolated": int(self.isolated[k]),
            }


def history_propagators(H, times):
    """Propagators for each interval between consecutive observation times."""
    return [propagator(H, b - a, a) for a, b in zip(times, times[1:])]


def assign_tracks(history, propagators, epsilon=DEFAULT_EPSILON):
    """Pick the most probable pairing for each interval of an event history.

    Steps are chosen independently; the overall confidence is the product of
    the per-step shares of path probability carried by the chosen pairing.
    """
    if len(propagators) != len(history.times) - 1:
        raise ValueError(f"need {len(history.times) - 1} propagators, got {len(propagators)}")
    out = TrackAssignment()
    for k, U in enumerate(propagators):
        amps = all_permutation_amps(U, history.events[k], history.events[k + 1])
        sigma, share = best_permutation(amps)
        out.permutations.append(sigma)
        out.step_probabilities.append(share)
        out.swap_probabilities.append(swap_probability(amps) if amps.n == 2 else 1.0 - share)
        out.isolated.append(is_isolated(amps, epsilon))
    return out


def packet_history(packets, H, times):
    """Events at each time: the peak site of each independently evolved packet."""
    events = []
    for t in times:
        U = propagator(H, t).matrix
        events.append(tuple(sorted(int(np.argmax(np.abs(U @ phi) ** 2)) for phi in packets)))
    return EventHistory(tuple(times), tuple(events))


def sampled_history(packets, H, times, rng):
    """Events drawn from each independently evolved packet's density."""
    events = []
    for t in times:
        U = propagator(H, t).matrix
        ev = []
        for phi in packets:
            p = np.abs(U @ phi) ** 2
            ev.append(int(rng.choice(len(p), p=p / p.sum())))
        events.append(tuple(sorted(ev)))
    return EventHistory(tuple(times), tuple(events))

