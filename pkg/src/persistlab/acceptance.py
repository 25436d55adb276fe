"""Built-in acceptance suite.

Each criterion is a function taking a tolerance map and returning a
:class:`CriterionResult`. ``run_suite`` runs a selection and is what the
``verify`` subcommand and ``tests/test_acceptance.py`` call.
"""
from __future__ import annotations

import math
import time
from dataclasses import dataclass, field

import numpy as np

from . import consistency as cl
from .lattice import (
    LatticeSpec,
    build_hamiltonian,
    determinant,
    gaussian_packet,
    permanent,
    propagator,
)
from .nonpersistence import (
    Statistics,
    dirac_symmetrize,
    event_multisets,
    evolve_extended,
    extend_state,
    final_distribution,
    leftmost_distribution,
    symmetrize_amp,
    symmetrize_state,
    symmetrized_amplitude,
    transition_probability,
)
from .oracles import brute_force_probabilities, expansion_determinant, expansion_permanent
from .persistence import (
    PersistenceState,
    all_permutation_amps,
    evolve_persistence,
    evolve_product,
    kron_sum,
    path_amplitudes,
    sum_rule_demo,
    symmetric_two_particle_hamiltonian,
)
from .reidentification import assign_tracks, history_propagators, packet_history, swap_probability
from .nonpersistence import reduced_density

TOLERANCES = {
    "exclusion": 1e-12,
    "bunching": 1e-10,
    "isolation": 1e-12,
    "composition": 1e-10,
    "falsification": 1e-3,
    "unitarity": 1e-10,
    "route": 1e-10,
    "swap": 1e-6,
    "leftmost": 1e-6,
    "confidence": 0.999,
    "dirac": 1e-10,
    "sector": 1e-10,
    "sum_rule": 1e-12,
    "kernel": 1e-12,
}

SEED = 20240611


@dataclass
class CriterionResult:
    key: str
    title: str
    passed: bool
    measured: float
    tolerance: float
    runtime: float = 0.0
    budget: float = math.inf
    details: dict = field(default_factory=dict)

    @property
    def ok(self):
        return self.passed and self.runtime < self.budget

    def line(self):
        status = "PASS" if self.ok else "FAIL"
        extra = "".join(f" {k}={_fmt(v)}" for k, v in self.details.items())
        return (f"[{status}] {self.key:<17} {self.title}: measured={_fmt(self.measured)} "
                f"tol={_fmt(self.tolerance)} runtime={self.runtime:.2f}s/<{self.budget:g}s{extra}")


def _fmt(v):
    if isinstance(v, float):
        return f"{v:.3g}"
    return str(v)


def _rng(offset):
    return np.random.default_rng(SEED + offset)


def _random_events(rng, sites, n, distinct):
    if distinct:
        return tuple(sorted(rng.choice(sites, size=n, replace=False).tolist()))
    return tuple(sorted(rng.integers(0, sites, size=n).tolist()))


def _random_lattice(rng, lo, hi):
    L = int(rng.integers(lo, hi + 1))
    return LatticeSpec(L, str(rng.choice(["periodic", "open"])), float(rng.uniform(0.5, 1.5)),
                       tuple(rng.normal(size=L).tolist()), 0.1)


def balanced_two_site():
    """Open 2-site lattice propagated to t = pi/4: every entry has modulus 1/sqrt(2)."""
    spec = LatticeSpec(2, "open", 1.0, 0.0, math.pi / 4)
    return propagator(build_hamiltonian(spec), math.pi / 4)


# ---------------------------------------------------------------------------


def exclusion(tol):
    rng = _rng(1)
    worst = 0.0
    for _ in range(200):
        L = int(rng.integers(4, 17))
        U = cl.random_unitary(L, rng)
        src = _random_events(rng, L, 2, distinct=True)
        for m in range(L):
            amps = all_permutation_amps(U, src, (m, m))
            worst = max(worst, abs(symmetrize_amp(amps, Statistics.FERMION)),
                        abs(determinant(U.matrix[np.ix_([m, m], list(src))])))
    return worst < tol["exclusion"], worst, {"draws": 200}


def bunching(tol):
    U = balanced_two_site()
    expected = {(0, 0): 0.5, (1, 1): 0.5, (0, 1): 0.0}
    oracle = brute_force_probabilities(U.matrix, (0, 1), +1)
    worst = 0.0
    for dst, p in expected.items():
        got = transition_probability(U, (0, 1), dst, Statistics.BOSON)
        worst = max(worst, abs(got - p), abs(oracle[dst] - p))
    return worst < tol["bunching"], worst, {
        "P00": transition_probability(U, (0, 1), (0, 0), "boson"),
        "P01": transition_probability(U, (0, 1), (0, 1), "boson"),
    }


def isolation(tol):
    worst = 0.0
    for cand in cl.default_registry()[:2]:
        rep = cl.check_isolation(cand, 1000, tol["isolation"], seed=SEED)
        worst = max(worst, rep.max_violation)
    return worst < tol["isolation"], worst, {"samples": 1000}


def composition(tol):
    rng = _rng(4)
    registry = {c.name: c for c in cl.default_registry()}
    worst = 0.0
    checks = 0
    for _ in range(100):
        L = int(rng.integers(4, 9))
        U = cl.random_unitary(L, rng)
        V = cl.random_unitary(L, rng)
        for n in (2, 3):
            for stats, name in ((Statistics.BOSON, "plus"), (Statistics.FERMION, "minus")):
                distinct = stats is Statistics.FERMION
                src = _random_events(rng, L, n, distinct)
                dst = _random_events(rng, L, n, distinct)
                rep = cl.check_composition(registry[name], U, V, src, dst, stats, tol["composition"])
                worst = max(worst, rep.max_violation)
                checks += 1
    return worst < tol["composition"], worst, {"checks": checks}


def falsification(tol):
    scenarios = cl.random_scenarios(50, seed=SEED)
    results = cl.scan_candidates(cl.default_registry(), scenarios,
                                 isolation_tol=tol["isolation"], composition_tol=tol["composition"])
    surv = sorted(cl.survivors(results))
    weakest = min((r.counterexample_violation for r in results if not r.survives), default=math.inf)
    ok = surv == ["minus", "plus"] and weakest > tol["falsification"]
    return ok, weakest, {"survivors": "+".join(surv) or "none"}


def unitarity(tol):
    rng = _rng(6)
    worst = 0.0
    for stats in Statistics:
        for _ in range(100):
            L = int(rng.integers(4, 9))
            n = int(rng.integers(2, 4))
            U = cl.random_unitary(L, rng)
            src = _random_events(rng, L, n, stats is Statistics.FERMION)
            worst = max(worst, abs(sum(final_distribution(U, src, stats).values()) - 1.0))
    return worst < tol["unitarity"], worst, {"scenarios": 200}


def route_equivalence(tol):
    rng = _rng(7)
    worst = 0.0
    for k in range(50):
        n = 2 if k % 5 else 3
        spec = _random_lattice(rng, 4, 8 if n == 2 else 5)
        stats = Statistics.BOSON if k % 2 else Statistics.FERMION
        src = _random_events(rng, spec.sites, n, stats is Statistics.FERMION)
        t = float(rng.uniform(0.2, 2.0))
        h = build_hamiltonian(spec)
        Hn = symmetric_two_particle_hamiltonian(spec, 0.0) if n == 2 else kron_sum(h, n)
        lifted = PersistenceState.localized(spec.sites, src)
        state = symmetrize_state(evolve_persistence(lifted, Hn, t), stats)
        U = propagator(h, t)
        for dst, amp in state.psid.items():
            raw = amp * state.factor
            worst = max(worst, abs(raw - symmetrized_amplitude(U, src, dst, stats)),
                        abs(raw - symmetrize_amp(all_permutation_amps(U, src, dst), stats)))
    return worst < tol["route"], worst, {"scenarios": 50}


def _separated_packets():
    spec = LatticeSpec(48, "open", 1.0, 0.0, 0.1)
    H = build_hamiltonian(spec)
    a = gaussian_packet(spec, 16, 0.3, 1.0)
    b = gaussian_packet(spec, 32, -0.3, 1.0)
    return spec, H, a, b, 1.0


def reidentification(tol):
    spec, H, a, b, T = _separated_packets()
    U = propagator(H, T)
    history = packet_history([a, b], H, [0.0, T])
    swap = swap_probability(all_permutation_amps(U, history.events[0], history.events[1]))
    density_a = np.abs(U.matrix @ a) ** 2
    evolved = evolve_product(PersistenceState.product(a, b), U)
    left_err = max(float(np.max(np.abs(leftmost_distribution(symmetrize_state(evolved, s)) - density_a)))
                   for s in Statistics)
    times = np.linspace(0.0, T, 10)
    tracks = assign_tracks(packet_history([a, b], H, times), history_propagators(H, times))
    identity = all(p == (0, 1) for p in tracks.permutations)
    ok = swap < tol["swap"] and left_err < tol["leftmost"] and identity and tracks.confidence > tol["confidence"]
    return ok, swap, {"leftmost_err": left_err, "confidence": tracks.confidence,
                      "identity_tracks": identity}


def dirac_contrast(tol):
    spec, H, a, b, T = _separated_packets()
    U = propagator(H, T).matrix
    pa, pb = U @ a, U @ b
    mixture = (np.outer(pa, pa.conj()) + np.outer(pb, pb.conj())) / 2
    worst = 0.0
    left_err = 0.0
    for stats in Statistics:
        dirac = dirac_symmetrize(pa, pb, stats)
        for label in (1, 2):
            worst = max(worst, float(np.max(np.abs(reduced_density(dirac, label) - mixture))))
        left = leftmost_distribution(symmetrize_state(PersistenceState.product(pa, pb), stats))
        left_err = max(left_err, float(np.max(np.abs(left - np.abs(pa) ** 2))))
    dirac = dirac_symmetrize(pa, pb, Statistics.BOSON)
    half = spec.sites // 2
    label1_left = float(np.real(np.trace(reduced_density(dirac, 1)[:half, :half])))
    left_mass = float(np.sum(leftmost_distribution(
        symmetrize_state(PersistenceState.product(pa, pb), Statistics.BOSON))[:half]))
    ok = worst < tol["dirac"] and left_err < tol["leftmost"]
    return ok, worst, {"dirac_label1_left_mass": label1_left, "leftmost_left_mass": left_mass,
                       "leftmost_err": left_err}


def sector_preservation(tol):
    rng = _rng(10)
    worst = 0.0
    for k in range(50):
        spec = _random_lattice(rng, 3, 8)
        stats = Statistics.BOSON if k % 2 else Statistics.FERMION
        raw = rng.normal(size=(spec.sites,) * 2) + 1j * rng.normal(size=(spec.sites,) * 2)
        ext = extend_state(symmetrize_state(raw / np.linalg.norm(raw), stats))
        H2 = symmetric_two_particle_hamiltonian(spec, float(rng.normal()))
        evolved = evolve_extended(ext, H2, float(rng.uniform(0.1, 5.0)))
        worst = max(worst, evolved.sector_defect())
    return worst < tol["sector"], worst, {"evolutions": 50}


def sum_rule(tol):
    spec = LatticeSpec(16, "periodic", 1.0, tuple(np.linspace(-0.5, 0.5, 16)), 0.3)
    H = build_hamiltonian(spec)
    t1, t2 = 0.7, 0.45
    U = propagator(H, t1)
    V = propagator(H, t2, t1)
    W = propagator(H, t1 + t2).matrix
    worst = 0.0
    for start in range(spec.sites):
        for end in range(spec.sites):
            paths = path_amplitudes(U, V, start, end, range(spec.sites))
            worst = max(worst, abs(sum(paths) - W[end, start]))
    a, b = path_amplitudes(U, V, 0, 0, [1, spec.sites - 1])
    return worst < tol["sum_rule"], worst, {"two_slit_sum": abs(sum_rule_demo(a, b))}


def kernel_oracles(tol):
    rng = _rng(12)
    worst = 0.0
    for _ in range(100):
        for n in range(1, 7):
            M = (rng.normal(size=(n, n)) + 1j * rng.normal(size=(n, n))) / math.sqrt(2 * n)
            worst = max(worst, abs(permanent(M) - expansion_permanent(M)),
                        abs(determinant(M) - expansion_determinant(M)))
    return worst < tol["kernel"], worst, {"matrices": 600}


CRITERIA = {
    "exclusion": ("Pauli exclusion of coincident fermion events", exclusion, 5),
    "bunching": ("bosonic bunching on a balanced 2-site unitary", bunching, 1),
    "isolation": ("isolation condition for plus/minus", isolation, 1),
    "composition": ("three-time composition, n=2,3, both statistics", composition, 30),
    "falsification": ("candidate scan survivors are exactly plus/minus", falsification, 30),
    "unitarity": ("final-multiset probabilities sum to one", unitarity, 10),
    "route": ("state route equals amplitude route", route_equivalence, 30),
    "reidentification": ("recovered reidentifiability of separated packets", reidentification, 10),
    "dirac": ("Dirac reduced densities vs nonpersistence leftmost", dirac_contrast, 5),
    "sector": ("statistics sector preserved by symmetric evolution", sector_preservation, 10),
    "sum_rule": ("path sum equals composed propagator", sum_rule, 1),
    "kernel": ("permanent/determinant vs permutation expansion", kernel_oracles, 10),
}


def resolve_tolerances(overrides=None):
    tol = dict(TOLERANCES)
    for key, value in (overrides or {}).items():
        if key not in tol:
            raise KeyError(f"unknown tolerance {key!r}; known: {', '.join(sorted(tol))}")
        tol[key] = float(value)
    return tol


def run_criterion(key, overrides=None):
    tol = resolve_tolerances(overrides)
    title, func, budget = CRITERIA[key]
    start = time.perf_counter()
    passed, measured, details = func(tol)
    runtime = time.perf_counter() - start
    tol_key = {"reidentification": "swap", "route": "route"}.get(key, key)
    return CriterionResult(key, title, bool(passed), float(measured), tol[tol_key],
                           runtime, budget, details)


def run_suite(selection=None, overrides=None):
    keys = list(CRITERIA) if selection is None else list(selection)
    unknown = [k for k in keys if k not in CRITERIA]
    if unknown:
        raise KeyError(f"unknown criteria: {', '.join(unknown)}")
    if not keys:
        raise ValueError("empty criterion selection")
    return [run_criterion(k, overrides) for k in keys]
