"""Declarative scenario files and the analyses they drive.

A scenario is a YAML mapping; the README documents the schema. Each
requested analysis produces one :class:`ResultTable`, written as delimited
text with ``#``-prefixed metadata lines.
"""
from __future__ import annotations

import csv
import hashlib
import io
import json
import math
import os
import tempfile
from dataclasses import dataclass, field

import numpy as np
import yaml

from . import __version__
from . import consistency as cl
from .lattice import LatticeSpec, build_hamiltonian, gaussian_packet, propagator
from .nonpersistence import (
    Statistics,
    dirac_symmetrize,
    distance_distribution,
    event_multisets,
    leftmost_distribution,
    reduced_density,
    symmetrize_state,
)
from .persistence import (
    PersistenceState,
    all_permutation_amps,
    evolve_persistence,
    evolve_product,
    path_amplitudes,
    sum_rule_demo,
    symmetric_two_particle_hamiltonian,
)
from .reidentification import (
    DEFAULT_EPSILON,
    EventHistory,
    assign_tracks,
    history_propagators,
    is_isolated,
    swap_probability,
)

ANALYSES = (
    "transition_map", "composition_check", "isolation_check", "candidate_scan", "swap",
    "tracks", "leftmost", "distance", "dirac_contrast", "sum_rule_demo",
)

DEFAULT_TOLERANCES = {
    "probability_sum": 1e-10,
    "composition": 1e-10,
    "isolation": 1e-12,
    "sum_rule": 1e-12,
    "falsification": 1e-3,
}

MAX_COMPOSITION_TARGETS = 64


class ScenarioError(ValueError):
    """Scenario file could not be parsed or failed validation."""


@dataclass(frozen=True)
class Packet:
    x0: float
    p0: float = 0.0
    sigma: float = 1.0


@dataclass
class Scenario:
    lattice: LatticeSpec
    statistics: Statistics
    schedule: tuple
    analyses: tuple
    packets: tuple = ()
    amplitudes: tuple = ()
    interaction: float = 0.0
    seed: int = 0
    epsilon: float = DEFAULT_EPSILON
    scan_scenarios: int = 50
    isolation_samples: int = 1000
    sum_rule_via: tuple = ()
    tolerances: dict = field(default_factory=lambda: dict(DEFAULT_TOLERANCES))

    @property
    def particles(self):
        if self.packets:
            return len(self.packets)
        return len(self.amplitudes[0][0])

    def resolved(self):
        """Plain-data echo of the scenario with every default filled in."""
        spec = self.lattice
        out = {
            "lattice": {"sites": spec.sites, "boundary": spec.boundary, "hopping": spec.hopping,
                        "potential": list(spec.potential), "dt": spec.dt},
            "statistics": self.statistics.value,
            "interaction": self.interaction,
            "schedule": list(self.schedule),
            "analyses": list(self.analyses),
            "seed": self.seed,
            "epsilon": self.epsilon,
            "scan_scenarios": self.scan_scenarios,
            "isolation_samples": self.isolation_samples,
            "sum_rule_via": list(self.sum_rule_via),
            "tolerances": dict(sorted(self.tolerances.items())),
        }
        if self.packets:
            out["initial"] = {"packets": [vars(p).copy() for p in self.packets]}
        else:
            out["initial"] = {"amplitudes": [{"positions": list(pos), "amplitude": [a.real, a.imag]}
                                             for pos, a in self.amplitudes]}
        return out

    def digest(self):
        blob = json.dumps(self.resolved(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode()).hexdigest()

    # -- physics ----------------------------------------------------------

    def hamiltonian(self):
        return build_hamiltonian(self.lattice)

    def initial_state(self):
        L = self.lattice.sites
        if self.packets:
            return PersistenceState.product(*[gaussian_packet(self.lattice, p.x0, p.p0, p.sigma)
                                              for p in self.packets])
        psi = np.zeros((L,) * self.particles, dtype=complex)
        for pos, amp in self.amplitudes:
            psi[pos] += amp
        norm = np.linalg.norm(psi)
        if norm == 0:
            raise ScenarioError("initial.amplitudes: state has zero norm")
        return PersistenceState(psi / norm)

    def initial_events(self):
        if self.packets:
            return tuple(sorted(int(round(p.x0)) for p in self.packets))
        pos, _ = max(self.amplitudes, key=lambda item: abs(item[1]))
        return tuple(sorted(pos))

    def state_at(self, t):
        psi0 = self.initial_state()
        if self.interaction == 0.0:
            return evolve_product(psi0, propagator(self.hamiltonian(), t))
        return evolve_persistence(psi0, symmetric_two_particle_hamiltonian(self.lattice, self.interaction), t)


def _require(cond, field_name, message):
    if not cond:
        raise ScenarioError(f"{field_name}: {message}")


def _number(value, field_name):
    try:
        out = float(value)
    except (TypeError, ValueError):
        raise ScenarioError(f"{field_name}: expected a number, got {value!r}") from None
    _require(math.isfinite(out), field_name, f"must be finite, got {value!r}")
    return out


def _parse_amplitude(value, field_name):
    if isinstance(value, (list, tuple)):
        _require(len(value) == 2, field_name, "complex amplitude must be [re, im]")
        return complex(_number(value[0], field_name), _number(value[1], field_name))
    return complex(_number(value, field_name))


KNOWN_KEYS = {"lattice", "statistics", "initial", "schedule", "analyses", "seed", "tolerances",
              "interaction", "epsilon", "scan_scenarios", "isolation_samples", "sum_rule"}


def parse_scenario(data):
    """Validate a parsed mapping and build a :class:`Scenario`."""
    _require(isinstance(data, dict), "<root>", "scenario must be a mapping")
    unknown = sorted(set(data) - KNOWN_KEYS)
    _require(not unknown, unknown[0] if unknown else "", "unknown key")

    lat = data.get("lattice")
    _require(isinstance(lat, dict), "lattice", "required mapping is missing")
    try:
        spec = LatticeSpec(
            int(lat.get("sites", 0)),
            lat.get("boundary", "periodic"),
            _number(lat.get("hopping", 1.0), "lattice.hopping"),
            lat.get("potential", 0.0),
            _number(lat.get("dt", 0.1), "lattice.dt"),
        )
    except (TypeError, ValueError) as exc:
        if isinstance(exc, ScenarioError):
            raise
        raise ScenarioError(f"lattice: {exc}") from None

    try:
        stats = Statistics.parse(data.get("statistics", "boson"))
    except ValueError as exc:
        raise ScenarioError(f"statistics: {exc}") from None

    schedule = data.get("schedule")
    _require(isinstance(schedule, list) and schedule, "schedule", "required non-empty list of times")
    schedule = tuple(_number(t, "schedule") for t in schedule)
    _require(schedule[0] >= 0, "schedule", "times must be >= 0")
    _require(all(b > a for a, b in zip(schedule, schedule[1:])), "schedule", "schedule not increasing")

    analyses = data.get("analyses", [])
    _require(isinstance(analyses, list) and analyses, "analyses", "required non-empty list")
    for name in analyses:
        _require(name in ANALYSES, "analyses", f"unrecognized analysis {name!r}")

    initial = data.get("initial")
    _require(isinstance(initial, dict), "initial", "required mapping is missing")
    _require(("packets" in initial) != ("amplitudes" in initial), "initial",
             "give exactly one of 'packets' or 'amplitudes'")
    packets = ()
    amplitudes = ()
    if "packets" in initial:
        raw = initial["packets"]
        _require(isinstance(raw, list) and raw, "initial.packets", "non-empty list required")
        packets = tuple(Packet(_number(p.get("x0"), "initial.packets.x0"),
                               _number(p.get("p0", 0.0), "initial.packets.p0"),
                               _number(p.get("sigma", 1.0), "initial.packets.sigma"))
                        for p in raw)
        for p in packets:
            _require(p.sigma > 0, "initial.packets.sigma", "must be > 0")
            _require(0 <= p.x0 <= spec.sites - 1, "initial.packets.x0", f"{p.x0} is off the lattice")
        centres = [int(round(p.x0)) for p in packets]
        if stats is Statistics.FERMION:
            _require(len(set(centres)) == len(centres), "initial.packets",
                     "fermion packets share a centre site (exclusion)")
    else:
        raw = initial["amplitudes"]
        _require(isinstance(raw, list) and raw, "initial.amplitudes", "non-empty list required")
        entries = []
        for item in raw:
            pos = item.get("positions")
            _require(isinstance(pos, list) and pos, "initial.amplitudes.positions", "list of sites required")
            pos = tuple(int(x) for x in pos)
            for x in pos:
                _require(0 <= x < spec.sites, "initial.amplitudes.positions", f"site {x} is off the lattice")
            if stats is Statistics.FERMION:
                _require(len(set(pos)) == len(pos), "initial.amplitudes.positions",
                         f"coincident fermion events {list(pos)} violate exclusion")
            entries.append((pos, _parse_amplitude(item.get("amplitude", 1.0), "initial.amplitudes.amplitude")))
        _require(len({len(p) for p, _ in entries}) == 1, "initial.amplitudes",
                 "all configurations need the same particle count")
        amplitudes = tuple(entries)
    n = len(packets) if packets else len(amplitudes[0][0])
    _require(n <= 8, "initial", f"{n} particles exceed the limit of 8")

    interaction = _number(data.get("interaction", 0.0), "interaction")
    _require(interaction == 0.0 or n == 2, "interaction", "contact interaction needs exactly 2 particles")

    tolerances = dict(DEFAULT_TOLERANCES)
    for key, value in (data.get("tolerances") or {}).items():
        _require(key in DEFAULT_TOLERANCES, f"tolerances.{key}", "unknown tolerance")
        tolerances[key] = _number(value, f"tolerances.{key}")

    sum_rule = data.get("sum_rule") or {}
    via = tuple(int(k) for k in sum_rule.get("via", ()))
    for k in via:
        _require(0 <= k < spec.sites, "sum_rule.via", f"site {k} is off the lattice")

    for name in ("swap", "dirac_contrast"):
        _require(name not in analyses or n == 2, "analyses", f"{name} needs exactly 2 particles")
    if "dirac_contrast" in analyses:
        _require(bool(packets), "analyses", "dirac_contrast needs initial packets")

    return Scenario(
        lattice=spec,
        statistics=stats,
        schedule=schedule,
        analyses=tuple(analyses),
        packets=packets,
        amplitudes=amplitudes,
        interaction=interaction,
        seed=int(data.get("seed", 0)),
        epsilon=_number(data.get("epsilon", DEFAULT_EPSILON), "epsilon"),
        scan_scenarios=int(data.get("scan_scenarios", 50)),
        isolation_samples=int(data.get("isolation_samples", 1000)),
        sum_rule_via=via,
        tolerances=tolerances,
    )


def load_scenario(path):
    """Read and validate a scenario file.

    Raises
    ------
    ScenarioError
        On YAML syntax errors (with line and column) or invalid fields.
    """
    try:
        with open(path) as fh:
            data = yaml.safe_load(fh)
    except OSError as exc:
        raise ScenarioError(f"{path}: {exc.strerror}") from None
    except yaml.YAMLError as exc:
        mark = getattr(exc, "problem_mark", None)
        where = f"line {mark.line + 1}, column {mark.column + 1}" if mark else "unknown position"
        problem = getattr(exc, "problem", None) or str(exc)
        raise ScenarioError(f"{path}: parse error at {where}: {problem}") from None
    return parse_scenario(data)


# -- result tables ------------------------------------------------------------


@dataclass
class ResultTable:
    name: str
    columns: list
    rows: list = field(default_factory=list)
    metadata: dict = field(default_factory=dict)

    def add(self, *values):
        if len(values) != len(self.columns):
            raise ValueError(f"row has {len(values)} values for {len(self.columns)} columns")
        self.rows.append(tuple(values))

    def column(self, name):
        i = self.columns.index(name)
        return [row[i] for row in self.rows]

    def render(self):
        buf = io.StringIO()
        for key, value in self.metadata.items():
            buf.write(f"# {key}: {_cell(value)}\n")
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(self.columns)
        for row in self.rows:
            writer.writerow([_cell(v) for v in row])
        return buf.getvalue()

    def write(self, directory):
        """Write ``<name>.csv`` atomically into ``directory``."""
        os.makedirs(directory, exist_ok=True)
        target = os.path.join(directory, f"{self.name}.csv")
        fd, tmp = tempfile.mkstemp(dir=directory, prefix=f".{self.name}.", suffix=".tmp")
        with os.fdopen(fd, "w") as fh:
            fh.write(self.render())
        os.replace(tmp, target)
        return target


def _cell(value):
    if isinstance(value, (bool, np.bool_)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        return repr(float(value))
    if isinstance(value, (list, tuple)):
        return " ".join(_cell(v) for v in value)
    return str(value)


def read_table(path):
    """Parse a table written by :meth:`ResultTable.write`."""
    metadata = {}
    lines = []
    with open(path) as fh:
        for line in fh:
            if line.startswith("#"):
                key, _, value = line[1:].strip().partition(": ")
                metadata[key] = value
            else:
                lines.append(line)
    reader = csv.reader(lines)
    columns = next(reader)
    rows = [tuple(_parse_cell(v) for v in row) for row in reader]
    return ResultTable(os.path.splitext(os.path.basename(path))[0], columns, rows, metadata)


def _parse_cell(text):
    try:
        return int(text)
    except ValueError:
        pass
    try:
        return float(text)
    except ValueError:
        return text


# -- analyses -----------------------------------------------------------------


def _event_columns(n):
    return [f"e{k}" for k in range(n)]


def _states(scenario):
    return [(t, symmetrize_state(scenario.state_at(t), scenario.statistics)) for t in scenario.schedule]


def _transition_map(sc, states):
    n = sc.particles
    table = ResultTable("transition_map", ["time", *_event_columns(n), "amp_re", "amp_im", "probability"])
    worst = 0.0
    for t, state in states:
        probs = state.probabilities()
        worst = max(worst, abs(sum(probs.values()) - 1.0))
        for key in sorted(state.psid):
            a = state.psid[key]
            table.add(t, *key, a.real, a.imag, probs[key])
    tol = sc.tolerances["probability_sum"]
    table.metadata.update({"probability_sum_defect": worst, "tolerance": tol, "pass": worst < tol})
    return table


def _composition_check(sc, _states):
    n = sc.particles
    registry = {c.name: c for c in cl.default_registry()}
    cand = registry["plus" if sc.statistics is Statistics.BOSON else "minus"]
    H = sc.hamiltonian()
    U = propagator(H, sc.lattice.dt)
    V = propagator(H, sc.lattice.dt, sc.lattice.dt)
    src = sc.initial_events()
    targets = event_multisets(sc.lattice.sites, n, sc.statistics)
    if len(targets) > MAX_COMPOSITION_TARGETS:
        rng = np.random.default_rng(sc.seed)
        pick = sorted(rng.choice(len(targets), size=MAX_COMPOSITION_TARGETS, replace=False).tolist())
        targets = [targets[i] for i in pick]
    tol = sc.tolerances["composition"]
    table = ResultTable("composition_check", [*_event_columns(n), "direct_re", "direct_im",
                                              "summed_re", "summed_im", "violation", "tolerance", "pass"])
    worst = 0.0
    for dst in targets:
        direct, summed = cl.composition_routes(cand, U, V, src, dst, sc.statistics)
        v = abs(direct - summed)
        worst = max(worst, v)
        table.add(*dst, direct.real, direct.imag, summed.real, summed.imag, v, tol, v < tol)
    table.metadata.update({"candidate": cand.name, "from": list(src), "max_violation": worst,
                           "tolerance": tol, "pass": worst < tol})
    return table


def _isolation_check(sc, _states):
    tol = sc.tolerances["isolation"]
    table = ResultTable("isolation_check", ["candidate", "samples", "max_violation", "tolerance", "pass"])
    for cand in cl.default_registry():
        rep = cl.check_isolation(cand, sc.isolation_samples, tol, sc.seed)
        table.add(cand.name, rep.samples, rep.max_violation, tol, rep.passed)
    return table


def _candidate_scan(sc, _states):
    scenarios = cl.random_scenarios(sc.scan_scenarios, seed=sc.seed)
    results = cl.scan_candidates(cl.default_registry(), scenarios,
                                 isolation_tol=sc.tolerances["isolation"],
                                 composition_tol=sc.tolerances["composition"],
                                 isolation_samples=sc.isolation_samples, seed=sc.seed)
    return scan_table(results, sc.tolerances, sc.scan_scenarios)


def scan_table(results, tolerances, count):
    table = ResultTable("candidate_scan", [
        "candidate", "isolation_violation", "composition_boson", "composition_fermion",
        "holomorphic", "survives", "counterexample_violation"])
    for r in results:
        table.add(r.candidate, r.isolation.max_violation, r.composition["boson"].max_violation,
                  r.composition["fermion"].max_violation, r.holomorphic, r.survives,
                  r.counterexample_violation)
    table.metadata.update({
        "scenarios": count,
        "survivors": " ".join(cl.survivors(results)),
        "isolation_tolerance": tolerances["isolation"],
        "composition_tolerance": tolerances["composition"],
        "falsification_threshold": tolerances["falsification"],
    })
    return table


def _most_probable(state):
    probs = state.probabilities()
    return max(sorted(probs), key=lambda k: probs[k])


def _history(sc, states):
    times = [0.0] + [t for t, _ in states if t > 0]
    events = [sc.initial_events()] + [_most_probable(s) for t, s in states if t > 0]
    return EventHistory(tuple(times), tuple(events))


def _swap(sc, states):
    history = _history(sc, states)
    H = sc.hamiltonian()
    src = history.events[0]
    table = ResultTable("swap", ["time", *_event_columns(2), "direct_re", "direct_im",
                                 "indirect_re", "indirect_im", "swap_probability", "isolated"])
    for t, dst in zip(history.times[1:], history.events[1:]):
        amps = all_permutation_amps(propagator(H, t), src, dst)
        table.add(t, *dst, amps.direct.real, amps.direct.imag, amps.indirect.real,
                  amps.indirect.imag, swap_probability(amps), is_isolated(amps, sc.epsilon))
    table.metadata.update({"from": list(src), "epsilon": sc.epsilon})
    return table


def _tracks(sc, states):
    history = _history(sc, states)
    result = assign_tracks(history, history_propagators(sc.hamiltonian(), history.times), sc.epsilon)
    table = ResultTable("tracks", ["t_from", "t_to", "permutation", "step_probability",
                                   "swap_probability", "isolated"])
    for row in result.rows(history):
        table.add(*row.values())
    table.metadata.update({"confidence": result.confidence, "epsilon": sc.epsilon,
                           "events": " | ".join(",".join(map(str, ev)) for ev in history.events)})
    return table


def _distribution(name, func):
    def analysis(sc, states):
        table = ResultTable(name, ["time", "x" if name == "leftmost" else "d", "probability"])
        worst = 0.0
        for t, state in states:
            P = func(state)
            worst = max(worst, abs(P.sum() - 1.0))
            for x, p in enumerate(P):
                table.add(t, x, p)
        tol = sc.tolerances["probability_sum"]
        table.metadata.update({"probability_sum_defect": worst, "tolerance": tol, "pass": worst < tol})
        return table
    return analysis


def _dirac_contrast(sc, states):
    H = sc.hamiltonian()
    phis = [gaussian_packet(sc.lattice, p.x0, p.p0, p.sigma) for p in sc.packets]
    order = np.argsort([p.x0 for p in sc.packets])
    table = ResultTable("dirac_contrast", ["time", "x", "leftmost", "phi_a_density",
                                           "dirac_label1", "dirac_label2", "mixture"])
    worst = 0.0
    for t, state in states:
        U = propagator(H, t).matrix
        pa, pb = (U @ phis[order[0]]), (U @ phis[order[1]])
        dirac = dirac_symmetrize(pa, pb, sc.statistics)
        rho1 = reduced_density(dirac, 1)
        rho2 = reduced_density(dirac, 2)
        mixture = (np.outer(pa, pa.conj()) + np.outer(pb, pb.conj())) / 2
        worst = max(worst, float(np.max(np.abs(rho1 - mixture))), float(np.max(np.abs(rho2 - mixture))))
        left = leftmost_distribution(state)
        for x in range(sc.lattice.sites):
            table.add(t, x, left[x], abs(pa[x]) ** 2, rho1[x, x].real, rho2[x, x].real, mixture[x, x].real)
    table.metadata.update({"max_reduced_minus_mixture": worst})
    return table


def _sum_rule_demo(sc, _states):
    H = sc.hamiltonian()
    L = sc.lattice.sites
    dt = sc.lattice.dt
    U = propagator(H, dt)
    V = propagator(H, dt, dt)
    W = propagator(H, 2 * dt).matrix
    start = sc.initial_events()[0]
    via = sc.sum_rule_via or ((start - 1) % L, (start + 1) % L)
    _require(len(via) == 2, "sum_rule.via", "exactly two intermediate sites required")
    tol = sc.tolerances["sum_rule"]
    table = ResultTable("sum_rule_demo", ["end", "a_re", "a_im", "b_re", "b_im", "a_plus_b_re",
                                          "a_plus_b_im", "path_sum_re", "path_sum_im", "direct_re",
                                          "direct_im", "abs_difference", "tolerance", "pass"])
    worst = 0.0
    for end in range(L):
        a, b = path_amplitudes(U, V, start, end, via)
        c = sum_rule_demo(a, b)
        full = sum(path_amplitudes(U, V, start, end, range(L)))
        diff = abs(full - W[end, start])
        worst = max(worst, diff)
        table.add(end, a.real, a.imag, b.real, b.imag, c.real, c.imag, full.real, full.imag,
                  W[end, start].real, W[end, start].imag, diff, tol, diff < tol)
    table.metadata.update({"start": start, "via": list(via), "max_difference": worst,
                           "tolerance": tol, "pass": worst < tol})
    return table


RUNNERS = {
    "transition_map": _transition_map,
    "composition_check": _composition_check,
    "isolation_check": _isolation_check,
    "candidate_scan": _candidate_scan,
    "swap": _swap,
    "tracks": _tracks,
    "leftmost": _distribution("leftmost", leftmost_distribution),
    "distance": _distribution("distance", distance_distribution),
    "dirac_contrast": _dirac_contrast,
    "sum_rule_demo": _sum_rule_demo,
}

NEEDS_STATES = {"transition_map", "swap", "tracks", "leftmost", "distance", "dirac_contrast"}


def run(scenario, out_dir=None):
    """Run every requested analysis; write tables to ``out_dir`` if given."""
    states = _states(scenario) if NEEDS_STATES & set(scenario.analyses) else []
    tables = []
    for name in scenario.analyses:
        try:
            table = RUNNERS[name](scenario, states)
        except ScenarioError:
            raise
        except ValueError as exc:
            raise ValueError(f"analysis {name}: {exc}") from exc
        table.metadata = {
            "analysis": name,
            "persistlab": __version__,
            "scenario_sha256": scenario.digest(),
            "seed": scenario.seed,
            **{f"tolerance.{k}": v for k, v in sorted(scenario.tolerances.items())},
            **table.metadata,
        }
        tables.append(table)
        if out_dir is not None:
            table.write(out_dir)
    if out_dir is not None:
        path = os.path.join(out_dir, "scenario.resolved.yaml")
        with open(path, "w") as fh:
            yaml.safe_dump(scenario.resolved(), fh, sort_keys=True)
    return tables
