"""Consistency checks on candidate rules for combining permutation amplitudes.

A candidate maps the direct and indirect persistence amplitudes of two
events to one nonpersistence amplitude. Two requirements pin it down:

* isolation: when one path is impossible, the combined probability is the
  surviving path's probability;
* composition: over three times, combining the amplitude of the composed
  propagator must agree with summing combined per-leg amplitudes over all
  intermediate event multisets.

Only the plain sum (bosons) and the signed sum (fermions) satisfy both.
"""
from __future__ import annotations

import cmath
import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .lattice import Propagator, expm_hermitian
from .nonpersistence import (
    Statistics,
    check_events,
    event_multisets,
    final_distribution,
    multiplicity_weight,
    symmetrize_amp,
)
from .persistence import PermutationAmplitudes, _matrix, all_permutation_amps

ISOLATION_TOL = 1e-12
COMPOSITION_TOL = 1e-10
COUNTEREXAMPLE_MIN = 1e-3


@dataclass(frozen=True)
class Candidate:
    """A rule ``H(direct, indirect) -> amplitude``.

    ``general`` optionally extends the rule to any number of events; without
    it the candidate only applies to pairs.
    """

    name: str
    func: Callable[[complex, complex], complex]
    general: Optional[Callable[[PermutationAmplitudes], complex]] = None

    def __call__(self, direct, indirect):
        return complex(self.func(complex(direct), complex(indirect)))

    def apply(self, amps):
        if amps.n == 2:
            return self(amps.direct, amps.indirect)
        if self.general is None:
            raise ValueError(f"candidate {self.name!r} is only defined for two events")
        return complex(self.general(amps))


def probe_candidate(candidate, seed=0, points=32, step=1e-7):
    """Finite-difference probes for continuity and complex differentiability.

    Returns a dict with the worst observed jump ratio and the worst
    Cauchy-Riemann mismatch over random sample points.
    """
    rng = np.random.default_rng(seed)
    worst_jump = 0.0
    worst_cr = 0.0
    for _ in range(points):
        a, b = rng.normal(size=2) + 1j * rng.normal(size=2)
        base = candidate(a, b)
        for slot in (0, 1):
            da = step if slot == 0 else 0.0
            db = step if slot == 1 else 0.0
            along_re = candidate(a + da, b + db) - base
            along_im = candidate(a + 1j * da, b + 1j * db) - base
            worst_jump = max(worst_jump, abs(along_re) / step, abs(along_im) / step)
            # holomorphic iff d/dx == d/d(iy)
            worst_cr = max(worst_cr, abs(along_re / step - along_im / (1j * step)))
    return {
        "jump_ratio": worst_jump,
        "continuous": bool(worst_jump < 1e3),
        "cauchy_riemann": worst_cr,
        "holomorphic": bool(worst_cr < 1e-4),
    }


def phase_candidate(theta):
    w = cmath.exp(1j * theta)
    return Candidate(f"phase({theta:g})", lambda a, b: a + w * b)


def default_registry(theta=math.pi / 2):
    """The fixed set of candidate rules, each checked for continuity."""
    registry = [
        Candidate("plus", lambda a, b: a + b,
                  lambda amps: symmetrize_amp(amps, Statistics.BOSON)),
        Candidate("minus", lambda a, b: a - b,
                  lambda amps: symmetrize_amp(amps, Statistics.FERMION)),
        phase_candidate(theta),
        Candidate("abs-sum", lambda a, b: abs(a) + abs(b)),
        Candidate("first-only", lambda a, b: a),
    ]
    for cand in registry:
        if not probe_candidate(cand)["continuous"]:
            raise ValueError(f"candidate {cand.name!r} failed the continuity probe")
    return registry


@dataclass
class ConsistencyReport:
    condition: str
    candidate: str
    max_violation: float
    samples: int
    tolerance: float
    statistics: Optional[str] = None
    counterexample: dict = field(default_factory=dict)

    def __post_init__(self):
        self.max_violation = float(self.max_violation)
        if not self.max_violation >= 0:
            raise ValueError(f"violation must be >= 0, got {self.max_violation!r}")

    @property
    def passed(self):
        return self.max_violation < self.tolerance

    def as_row(self):
        return {
            "condition": self.condition,
            "candidate": self.candidate,
            "statistics": self.statistics or "",
            "samples": self.samples,
            "max_violation": self.max_violation,
            "tolerance": self.tolerance,
            "pass": int(self.passed),
        }


def check_isolation(candidate, samples=1000, tol=ISOLATION_TOL, seed=0):
    """Check ``|H(a, 0)|^2 == |a|^2`` and ``|H(0, a)|^2 == |a|^2`` on random ``a``."""
    if samples < 1:
        raise ValueError("samples must be >= 1")
    rng = np.random.default_rng(seed)
    amps = rng.normal(size=samples) + 1j * rng.normal(size=samples)
    worst = 0.0
    example = {}
    for a in amps:
        for label, value in (("direct-only", candidate(a, 0)), ("indirect-only", candidate(0, a))):
            v = abs(abs(value) ** 2 - abs(a) ** 2)
            if v > worst or not example:
                worst = max(worst, v)
                example = {"amplitude": complex(a), "case": label, "violation": v}
    return ConsistencyReport("isolation", candidate.name, worst, samples, tol, counterexample=example)


def composition_routes(candidate, U, V, from_events, to_events, stats):
    """The two ways of getting the three-time amplitude.

    Returns ``(direct, summed)``: the candidate applied to the composed
    propagator, and the weighted sum over intermediate multisets of
    products of per-leg candidate amplitudes.
    """
    stats = Statistics.parse(stats)
    U = _matrix(U)
    V = _matrix(V)
    if U.shape != V.shape:
        raise ValueError(f"propagator shapes differ: {U.shape} vs {V.shape}")
    src = check_events(from_events, stats, U.shape[0])
    dst = check_events(to_events, stats, U.shape[0])
    if len(src) != len(dst):
        raise ValueError(f"event counts differ: {len(src)} vs {len(dst)}")
    direct = candidate.apply(all_permutation_amps(V @ U, src, dst))
    summed = 0j
    for mid in event_multisets(U.shape[0], len(src), stats):
        first = candidate.apply(all_permutation_amps(U, src, mid))
        second = candidate.apply(all_permutation_amps(V, mid, dst))
        summed += multiplicity_weight(mid) * first * second
    return direct, summed


def check_composition(candidate, U, V, from_events, to_events, stats, tol=COMPOSITION_TOL):
    stats = Statistics.parse(stats)
    direct, summed = composition_routes(candidate, U, V, from_events, to_events, stats)
    return ConsistencyReport(
        "composition", candidate.name, abs(direct - summed), 1, tol, stats.value,
        counterexample={"direct": direct, "summed": summed,
                        "from": tuple(sorted(from_events)), "to": tuple(sorted(to_events))})


def check_normalization(U, from_events, stats, tol=COMPOSITION_TOL, candidate="symmetrized"):
    stats = Statistics.parse(stats)
    total = sum(final_distribution(U, from_events, stats).values())
    return ConsistencyReport("normalization", candidate, abs(total - 1.0), 1, tol, stats.value,
                             counterexample={"total": total})


def random_hermitian(sites, rng):
    G = rng.normal(size=(sites, sites)) + 1j * rng.normal(size=(sites, sites))
    return (G + G.conj().T) / 2


def random_unitary(sites, rng, t=1.0):
    """Unitary from exponentiating a random Hermitian matrix."""
    return Propagator(expm_hermitian(random_hermitian(sites, rng), t), (0.0, t))


@dataclass(frozen=True)
class CompositionScenario:
    U: Propagator
    V: Propagator
    from_events: tuple
    to_events: tuple

    @property
    def sites(self):
        return self.U.sites


def random_scenarios(count, seed=0, sites=(4, 8), n=2):
    """Random propagator pairs with distinct, sorted initial and final events."""
    rng = np.random.default_rng(seed)
    out = []
    for _ in range(count):
        L = int(rng.integers(sites[0], sites[1] + 1))
        U = random_unitary(L, rng)
        V = random_unitary(L, rng)
        src = tuple(sorted(rng.choice(L, size=n, replace=False).tolist()))
        dst = tuple(sorted(rng.choice(L, size=n, replace=False).tolist()))
        out.append(CompositionScenario(U, V, src, dst))
    return out


@dataclass
class ScanResult:
    candidate: str
    isolation: ConsistencyReport
    composition: dict
    holomorphic: bool

    @property
    def composition_passed(self):
        return any(r.passed for r in self.composition.values())

    @property
    def survives(self):
        return self.isolation.passed and self.composition_passed

    @property
    def counterexample_violation(self):
        """Size of the clearest failure, 0 for survivors."""
        worst = 0.0
        if not self.isolation.passed:
            worst = self.isolation.max_violation
        if not self.composition_passed:
            worst = max(worst, min(r.max_violation for r in self.composition.values()))
        return worst


def scan_candidates(registry, scenarios, isolation_tol=ISOLATION_TOL,
                    composition_tol=COMPOSITION_TOL, isolation_samples=1000, seed=0):
    """Run isolation and composition checks for every candidate.

    A candidate survives if it passes isolation and passes composition on
    every scenario under at least one choice of intermediate-state
    statistics.
    """
    if not registry:
        raise ValueError("candidate registry is empty")
    results = []
    for cand in registry:
        iso = check_isolation(cand, isolation_samples, isolation_tol, seed)
        comp = {}
        for stats in Statistics:
            worst = None
            for i, sc in enumerate(scenarios):
                rep = check_composition(cand, sc.U, sc.V, sc.from_events, sc.to_events,
                                        stats, composition_tol)
                if worst is None or rep.max_violation > worst.max_violation:
                    worst = rep
                    worst.counterexample["scenario"] = i
            worst.samples = len(scenarios)
            comp[stats.value] = worst
        results.append(ScanResult(cand.name, iso, comp, probe_candidate(cand)["holomorphic"]))
    return results


def survivors(results):
    return [r.candidate for r in results if r.survives]
