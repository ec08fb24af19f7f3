"""Scenario runner, parameter sweeps and result emission.

A scenario document is a circuit/simulation config (see :mod:`cosim.config`)
extended with run directives: which initial states and backends to evolve,
which trajectory pairs to compare, optional gate-fidelity pairs, optional
circuit variants (patched copies run side by side), and optional envelope
comparisons of probe voltages. Two pieces of sugar are resolved before
parsing:

* a transmon may give ``qbar01_<unit>`` instead of ``ej_<unit>``; the
  Josephson energy is then found by root-finding so the (shift-corrected)
  first transition lands on the target;
* a Gaussian drive pulse may give ``area_rad`` instead of ``vmag_<unit>``;
  the voltage magnitude is set so the two-level pulse area comes out right.

Outputs per run: one trajectory CSV, a JSON sidecar with the config hash,
and optional SVG plots. Sweeps write one directory per point plus an
aggregate CSV.
"""

from __future__ import annotations

import copy
import hashlib
import json
import math
import time
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Optional, Union

import numpy as np

from . import config as config_mod
from . import plotting
from .analysis import compare, normalized_envelope_difference, rabi_frequency
from .constants import E, HBAR
from .coupling import build_tables, tune_josephson_energy
from .dynamics import Trajectory, basis_state, evolve, fidelity
from .errors import ConfigError, CosimError
from .model import BACKENDS, CircuitSpec, SimConfig
from .spectrum import diagonalize

_EJ_GUESS_HZ = 12e9   # root-find seed when a transmon is given by frequency


# ---------------------------------------------------------------------------
# scenario documents

@dataclass(frozen=True)
class Endpoint:
    """Names one trajectory of a scenario run."""
    backend: str
    initial: str
    variant: str = ""

    @property
    def key(self) -> tuple:
        return (self.backend, self.initial, self.variant)

    @property
    def label(self) -> str:
        tag = "%s_%s" % (self.backend, self.initial)
        return tag if not self.variant else tag + "_" + self.variant


def _parse_endpoint(obj: dict) -> Endpoint:
    return Endpoint(backend=str(obj["backend"]), initial=str(obj["initial"]),
                    variant=str(obj.get("variant", "")))


@dataclass(frozen=True)
class ComparisonSpec:
    """One pairwise trajectory comparison, with optional assertions."""
    a: Endpoint
    b: Endpoint
    max_pop_diff: Optional[float] = None        # assert pointwise closeness
    rabi_within_bins: Optional[float] = None    # assert FFT peak agreement
    rabi_beyond_bins: Optional[float] = None    # assert FFT peak separation


@dataclass(frozen=True)
class EnvelopeSpec:
    """Probe-voltage envelope comparison between two runs."""
    a: Endpoint
    b: Endpoint
    carrier_freq: float                  # Hz
    min_diff: Optional[float] = None     # assert relative L2 difference >
    max_diff: Optional[float] = None     # assert relative L2 difference <=


@dataclass(frozen=True)
class FidelitySpec:
    """Gate fidelity between an ideal and an actual backend."""
    ideal_backend: str
    actual_backend: str
    initial_states: tuple[str, str]
    variant: str = ""


@dataclass(frozen=True)
class Scenario:
    name: str
    circuit: CircuitSpec
    sim: SimConfig
    initial_states: tuple[str, ...]
    backends: tuple[str, ...]
    comparisons: tuple[ComparisonSpec, ...] = ()
    envelopes: tuple[EnvelopeSpec, ...] = ()
    fidelities: tuple[FidelitySpec, ...] = ()
    variants: tuple[tuple[str, "Scenario"], ...] = ()
    description: str = ""
    document: dict = field(default_factory=dict)   # resolved config document


@dataclass(frozen=True)
class SweepSpec:
    """A parameter path into the raw document plus the values to apply."""
    parameter: str          # dotted path, "*" matches every list element
    values: tuple[float, ...]
    base: dict              # raw scenario document


# -- resolution -------------------------------------------------------------

def _set_path(doc, path: str, value) -> None:
    parts = path.split(".")

    def apply(node, idx: int) -> None:
        part = parts[idx]
        last = idx == len(parts) - 1
        if isinstance(node, list):
            targets = range(len(node)) if part == "*" else [int(part)]
            for t in targets:
                if last:
                    node[t] = value
                else:
                    apply(node[t], idx + 1)
        elif isinstance(node, dict):
            if part not in node and not last:
                raise ConfigError("parameter path %r does not resolve" % path)
            if last:
                node[part] = value
            else:
                apply(node[part], idx + 1)
        else:
            raise ConfigError("parameter path %r does not resolve" % path)

    apply(doc, 0)


def _pop_quantity(obj: dict, base: str, units: dict) -> Optional[float]:
    value = config_mod._quantity(obj, base, units, base, required=False)
    if value is not None:
        for key in [k for k in obj if k.startswith(base + "_")]:
            del obj[key]
    return value


def _tap_for(lines, transmon_id: int):
    for line in lines:
        for tap in line.taps:
            if tap.transmon_id == transmon_id:
                return line, tap
    return None, None


def _resolve_transmons(doc: dict, sim: SimConfig) -> None:
    lines = [config_mod._parse_line(l, "lines[%d]" % i)
             for i, l in enumerate(doc.get("lines", []))]
    for idx, entry in enumerate(doc.get("transmons", [])):
        target = _pop_quantity(entry, "qbar01", config_mod.FREQ)
        if target is None:
            continue
        guess = config_mod._quantity(entry, "ej", config_mod.FREQ,
                                     "transmons[%d]" % idx, required=False)
        for key in [k for k in entry if k.startswith("ej_")]:
            del entry[key]
        base = config_mod._parse_transmon(
            dict(entry, ej_hz=guess if guess else _EJ_GUESS_HZ),
            "transmons[%d]" % idx)
        line, tap = _tap_for(lines, idx)
        if not sim.include_lamb_shift:
            line, tap = None, None
        tuned = tune_josephson_energy(2.0 * math.pi * target, base,
                                      line=line, tap=tap,
                                      lamb_modes=sim.lamb_modes)
        entry["ej_hz"] = tuned.josephson_energy


def _resolve_pulse_areas(doc: dict) -> None:
    transmons = [config_mod._parse_transmon(t, "transmons[%d]" % i)
                 for i, t in enumerate(doc.get("transmons", []))]
    for di, entry in enumerate(doc.get("drives", [])):
        pulse = entry.get("pulse", {})
        area = pulse.pop("area_rad", None)
        if area is None:
            continue
        where = "drives[%d]" % di
        tr = transmons[int(entry["transmon"])]
        beta = entry.get("beta")
        if beta is None:
            cap = config_mod._quantity(entry, "coupling_capacitance",
                                       config_mod.CAP, where)
            beta = cap / tr.total_capacitance
        n01 = abs(diagonalize(tr).charge_elements[0, 1].real)
        # theta = (2 e beta n01 / hbar) V_mag sqrt(2 pi) sigma for a Gaussian:
        # the area fixes whichever of V_mag and sigma was left out
        rate = 2.0 * E * beta * n01 * math.sqrt(2.0 * math.pi) / HBAR
        vmag = config_mod._quantity(pulse, "vmag", config_mod.VOLT, where,
                                    required=False)
        if vmag is not None:
            if any(k.startswith("sigma") for k in pulse):
                raise ConfigError(
                    "%s: area_rad with both vmag and sigma is ambiguous; "
                    "give exactly one of them" % where)
            pulse["sigma_s"] = float(area) / (rate * vmag)
        else:
            sigma = config_mod._quantity(pulse, "sigma", config_mod.TIME,
                                         where)
            pulse["vmag_v"] = float(area) / (rate * sigma)


def _parse_comparison(obj: dict, where: str) -> ComparisonSpec:
    return ComparisonSpec(
        a=_parse_endpoint(config_mod._field(obj, "a", where)),
        b=_parse_endpoint(config_mod._field(obj, "b", where)),
        max_pop_diff=obj.get("assert_max_pop_diff"),
        rabi_within_bins=obj.get("assert_rabi_within_bins"),
        rabi_beyond_bins=obj.get("assert_rabi_beyond_bins"),
    )


def _parse_envelope(obj: dict, where: str) -> EnvelopeSpec:
    return EnvelopeSpec(
        a=_parse_endpoint(config_mod._field(obj, "a", where)),
        b=_parse_endpoint(config_mod._field(obj, "b", where)),
        carrier_freq=config_mod._quantity(obj, "carrier", config_mod.FREQ, where),
        min_diff=obj.get("assert_min_diff"),
        max_diff=obj.get("assert_max_diff"),
    )


def load_scenario(doc: dict) -> Scenario:
    """Resolve sugar and parse a scenario document."""
    raw = copy.deepcopy(doc)
    variants_raw = raw.pop("variants", [])

    doc = copy.deepcopy(raw)
    name = str(config_mod._field(doc, "name", "scenario"))
    sim = config_mod._parse_simulation(
        config_mod._field(doc, "simulation", "scenario"), "simulation")
    _resolve_transmons(doc, sim)
    _resolve_pulse_areas(doc)
    circuit, sim = config_mod.parse_document(doc)

    initials = tuple(str(s) for s in doc.get(
        "initial_states", ["0" * len(circuit.transmons)]))
    backends = tuple(str(b) for b in doc.get("backends", [sim.backend]))
    for b in backends:
        if b not in BACKENDS:
            raise ConfigError("scenario %s: unknown backend %r" % (name, b))
    for label in initials:
        basis_state(circuit, label)   # validates against the level counts

    comparisons = tuple(
        _parse_comparison(c, "comparisons[%d]" % i)
        for i, c in enumerate(doc.get("comparisons", [])))
    envelopes = tuple(
        _parse_envelope(e, "envelopes[%d]" % i)
        for i, e in enumerate(doc.get("envelopes", [])))
    fidelities = tuple(
        FidelitySpec(ideal_backend=str(f["ideal_backend"]),
                     actual_backend=str(f["actual_backend"]),
                     initial_states=tuple(str(s) for s in f["initial_states"]),
                     variant=str(f.get("variant", "")))
        for f in doc.get("fidelities", []))

    variants = []
    for entry in variants_raw:
        label = str(config_mod._field(entry, "label", "variants"))
        sub = copy.deepcopy(raw)
        for path, value in config_mod._field(entry, "patch", "variants").items():
            _set_path(sub, path, value)
        sub["name"] = "%s_%s" % (name, label)
        variants.append((label, load_scenario(sub)))

    return Scenario(
        name=name, circuit=circuit, sim=sim,
        initial_states=initials, backends=backends,
        comparisons=comparisons, envelopes=envelopes, fidelities=fidelities,
        variants=tuple(variants),
        description=str(doc.get("description", "")),
        document=config_mod.to_document(circuit, sim),
    )


def load_scenario_file(path: Union[str, Path]) -> Scenario:
    text = Path(path).read_text()
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError("invalid scenario JSON: %s" % exc) from exc
    return load_scenario(doc)


def load_sweep(doc: dict) -> SweepSpec:
    sweep = config_mod._field(doc, "sweep", "scenario")
    base = copy.deepcopy(doc)
    del base["sweep"]
    values = tuple(float(v) for v in sweep["values"])
    if not values:
        raise ConfigError("sweep needs at least one value")
    spec = SweepSpec(parameter=str(sweep["parameter"]), values=values, base=base)
    # fail fast if the path cannot be resolved
    probe = copy.deepcopy(base)
    _set_path(probe, spec.parameter, values[0])
    return spec


# ---------------------------------------------------------------------------
# output emission

def config_hash(document: dict) -> str:
    blob = json.dumps(document, sort_keys=True).encode()
    return hashlib.sha256(blob).hexdigest()[:16]


def _pop_labels(circuit: CircuitSpec) -> list[str]:
    dims = [tr.level_count for tr in circuit.transmons]
    labels = [""]
    for d in dims:
        labels = [pre + str(lvl) for pre in labels for lvl in range(d)]
    return labels


def write_trajectory_csv(path: Path, circuit: CircuitSpec,
                         traj: Trajectory) -> None:
    cols = ["t_ns"]
    cols += ["pop_%s" % lab for lab in _pop_labels(circuit)]
    cols += ["n%d" % (l + 1) for l in range(traj.charge.shape[0])]
    for p in range(traj.probe_voltages.shape[0]):
        cols.append("v_probe_uv" if p == 0 else "v_probe%d_uv" % (p + 1))
    rows = [traj.times * 1e9, *traj.populations.T,
            *traj.charge, *(traj.probe_voltages * 1e6)]
    with open(path, "w") as fh:
        fh.write(",".join(cols) + "\n")
        for i in range(len(traj.times)):
            fh.write(",".join("%.12g" % r[i] for r in rows) + "\n")


def _sidecar(scenario: Scenario, traj: Trajectory, wall: float) -> dict:
    tables = None
    j_mhz = None
    qbar_ghz = []
    try:
        tables = build_tables(scenario.circuit, scenario.sim)
    except CosimError:
        pass
    if tables is not None:
        if tables.exchange is not None:
            j_mhz = (tables.exchange.values / (2e6 * math.pi)).tolist()
        for l in range(len(scenario.circuit.transmons)):
            qbar_ghz.append(tables.qbar_transition(l, 0) / (2e9 * math.pi))
    return {
        "config_hash": config_hash(scenario.document),
        "backend": traj.backend,
        "j_over_2pi_mhz": j_mhz,
        "qbar01_ghz": qbar_ghz,
        "wall_time_s": wall,
        "dt_s": traj.metadata.get("dt"),
        "nsteps": traj.metadata.get("nsteps"),
    }


# ---------------------------------------------------------------------------
# scenario execution

@dataclass
class ScenarioResult:
    scenario: Scenario
    out_dir: Optional[Path]
    trajectories: dict                 # (backend, initial, variant) -> Trajectory
    metrics: list                      # one dict per comparison / envelope
    fidelity_values: list              # one dict per fidelity spec
    failures: list                     # [{"run": ..., "error": ...}]

    @property
    def passed(self) -> bool:
        if self.failures:
            return False
        return all(m.get("passed", True) for m in self.metrics)

    def trajectory(self, backend: str, initial: str,
                   variant: str = "") -> Trajectory:
        return self.trajectories[(backend, initial, variant)]


def _check_comparison(spec: ComparisonSpec, metrics: dict) -> dict:
    checks = {}
    if spec.max_pop_diff is not None:
        checks["max_pop_diff"] = bool(metrics["max_pop_diff"]
                                      <= spec.max_pop_diff)
    gap = abs(metrics["rabi_freq_a"] - metrics["rabi_freq_b"])
    bins = gap / metrics["rabi_bin_width"]
    metrics["rabi_gap_bins"] = bins
    if spec.rabi_within_bins is not None:
        checks["rabi_within_bins"] = bool(bins <= spec.rabi_within_bins)
    if spec.rabi_beyond_bins is not None:
        checks["rabi_beyond_bins"] = bool(bins > spec.rabi_beyond_bins)
    metrics["checks"] = checks
    metrics["passed"] = all(checks.values())
    return metrics


def _backend_circuit(circuit: CircuitSpec, backend: str) -> CircuitSpec:
    """Drop crosstalk channels that are restricted to other backends."""
    kept = tuple(ct for ct in circuit.crosstalk_drives
                 if not ct.only_backends or backend in ct.only_backends)
    if kept == circuit.crosstalk_drives:
        return circuit
    return replace(circuit, crosstalk_drives=kept)


def run_scenario(scenario: Scenario,
                 out_dir: Union[str, Path, None] = None,
                 plots: bool = False) -> ScenarioResult:
    """Evolve every (backend, initial state, variant) and emit results.

    Solver errors in one run are recorded and do not abort the others; a
    failure manifest accompanies whatever results were produced.
    """
    out = None
    if out_dir is not None:
        out = Path(out_dir) / scenario.name
        out.mkdir(parents=True, exist_ok=True)

    trajectories: dict = {}
    failures: list = []

    for label, sub in (("", scenario), *scenario.variants):
        tables = None
        if sub.circuit.transmons:
            try:
                tables = build_tables(sub.circuit, sub.sim)
            except CosimError as exc:
                failures.append({"run": "coupling-tables/" + (label or "base"),
                                 "error": str(exc)})
        for backend in scenario.backends:
            circuit = _backend_circuit(sub.circuit, backend)
            sim = replace(sub.sim, backend=backend)
            for initial in scenario.initial_states:
                started = time.perf_counter()
                try:
                    traj = evolve(circuit, sim, initial,
                                  tables=None if backend == "born" else tables)
                except CosimError as exc:
                    failures.append({
                        "run": Endpoint(backend, initial, label).label,
                        "error": str(exc)})
                    continue
                wall = time.perf_counter() - started
                trajectories[(backend, initial, label)] = traj
                if out is not None:
                    stem = Endpoint(backend, initial, label).label
                    write_trajectory_csv(out / (stem + ".csv"), circuit, traj)
                    (out / (stem + ".json")).write_text(
                        json.dumps(_sidecar(sub, traj, wall), indent=2))

    metrics = []
    for spec in scenario.comparisons:
        if spec.a.key not in trajectories or spec.b.key not in trajectories:
            failures.append({"run": "compare %s vs %s"
                             % (spec.a.label, spec.b.label),
                             "error": "missing trajectory"})
            continue
        entry = compare(trajectories[spec.a.key], trajectories[spec.b.key])
        entry["a"] = spec.a.label
        entry["b"] = spec.b.label
        metrics.append(_check_comparison(spec, entry))

    for spec in scenario.envelopes:
        if spec.a.key not in trajectories or spec.b.key not in trajectories:
            failures.append({"run": "envelope %s vs %s"
                             % (spec.a.label, spec.b.label),
                             "error": "missing trajectory"})
            continue
        ta, tb = trajectories[spec.a.key], trajectories[spec.b.key]
        if ta.probe_voltages.shape[0] == 0 or tb.probe_voltages.shape[0] == 0:
            failures.append({"run": "envelope %s vs %s"
                             % (spec.a.label, spec.b.label),
                             "error": "no probe voltages recorded"})
            continue
        diff = normalized_envelope_difference(
            ta.times, ta.probe_voltages[0], tb.times, tb.probe_voltages[0],
            spec.carrier_freq)
        entry = {"kind": "envelope", "a": spec.a.label, "b": spec.b.label,
                 "rel_L2_envelope_diff": diff, "checks": {}}
        if spec.min_diff is not None:
            entry["checks"]["min_diff"] = bool(diff > spec.min_diff)
        if spec.max_diff is not None:
            entry["checks"]["max_diff"] = bool(diff <= spec.max_diff)
        entry["passed"] = all(entry["checks"].values())
        metrics.append(entry)

    fid_values = []
    for spec in scenario.fidelities:
        try:
            ideal = [trajectories[(spec.ideal_backend, s, spec.variant)]
                     for s in spec.initial_states]
            actual = [trajectories[(spec.actual_backend, s, spec.variant)]
                      for s in spec.initial_states]
        except KeyError:
            failures.append({"run": "fidelity %s vs %s"
                             % (spec.ideal_backend, spec.actual_backend),
                             "error": "missing trajectory"})
            continue
        value = fidelity(ideal, actual)
        fid_values.append({"ideal": spec.ideal_backend,
                           "actual": spec.actual_backend,
                           "variant": spec.variant,
                           "fidelity": value, "infidelity": 1.0 - value})

    if out is not None:
        (out / "metrics.json").write_text(json.dumps(
            {"comparisons": metrics, "fidelities": fid_values}, indent=2))
        if failures:
            (out / "failures.json").write_text(json.dumps(failures, indent=2))
        if plots and trajectories:
            _emit_plots(out, scenario, trajectories)

    return ScenarioResult(scenario=scenario, out_dir=out,
                          trajectories=trajectories, metrics=metrics,
                          fidelity_values=fid_values, failures=failures)


def _emit_plots(out: Path, scenario: Scenario, trajectories: dict) -> None:
    labels = _pop_labels(scenario.circuit)
    variant_labels = [""] + [label for label, _ in scenario.variants]
    for initial in scenario.initial_states:
        series = []
        for backend in scenario.backends:
            for vlabel in variant_labels:
                traj = trajectories.get((backend, initial, vlabel))
                if traj is None:
                    continue
                col = int(np.argmax(traj.populations.var(axis=0)))
                name = backend if not vlabel else "%s/%s" % (backend, vlabel)
                series.append(("%s pop_%s" % (name, labels[col]),
                               traj.times * 1e9, traj.populations[:, col]))
        if series:
            plotting.write_plot(
                out / ("populations_%s.svg" % initial), series,
                title="%s, initial |%s>" % (scenario.name, initial),
                xlabel="t (ns)", ylabel="population")


# ---------------------------------------------------------------------------
# sweeps

def run_sweep(sweep: SweepSpec,
              out_dir: Union[str, Path, None] = None,
              plots: bool = False) -> dict:
    """Run the base scenario once per sweep value and aggregate the results.

    The aggregate has exactly one row per value, in the given order: swept
    value, J/2pi (MHz), per-backend Rabi frequency of the first initial
    state, the max population deviation between the back-action-on and -off
    runs when both are present, and any configured fidelities. Failed points
    are recorded and skipped.
    """
    rows = []
    failures = []
    results = []
    for value in sweep.values:
        doc = copy.deepcopy(sweep.base)
        _set_path(doc, sweep.parameter, value)
        doc["name"] = "%s_%s" % (doc.get("name", "sweep"), _value_tag(value))
        try:
            scenario = load_scenario(doc)
            result = run_scenario(scenario, out_dir, plots=plots)
        except CosimError as exc:
            failures.append({"value": value, "error": str(exc)})
            rows.append({"value": value, "error": str(exc)})
            continue
        results.append(result)
        if result.failures:
            failures.append({"value": value, "error": result.failures})

        row = {"value": value}
        tables = None
        try:
            tables = build_tables(scenario.circuit, scenario.sim)
        except CosimError:
            pass
        if tables is not None and tables.exchange is not None:
            row["j_over_2pi_mhz"] = tables.exchange.values[0, 0] / (2e6 * math.pi)
        first = scenario.initial_states[0]
        for backend in scenario.backends:
            traj = result.trajectories.get((backend, first, ""))
            if traj is None:
                continue
            col = int(np.argmax(traj.populations.var(axis=0)))
            est = rabi_frequency(traj.times, traj.populations[:, col])
            row["rabi_%s_mhz" % backend] = est.frequency / 1e6
        ba = result.trajectories.get(("ms", first, ""))
        noba = result.trajectories.get(("ms_noba", first, ""))
        if ba is not None and noba is not None:
            row["max_ba_deviation"] = float(
                np.max(np.abs(ba.populations - noba.populations)))
        for fid in result.fidelity_values:
            row["infidelity_%s_vs_%s" % (fid["ideal"], fid["actual"])] = \
                fid["infidelity"]
        rows.append(row)

    report = {"parameter": sweep.parameter, "rows": rows, "failures": failures}
    if out_dir is not None:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        _write_aggregate_csv(out / "sweep.csv", rows)
        (out / "sweep.json").write_text(json.dumps(report, indent=2))
    report["results"] = results
    return report


def _value_tag(value: float) -> str:
    return ("%g" % value).replace(".", "p").replace("-", "m")


def _write_aggregate_csv(path: Path, rows: list) -> None:
    cols: list[str] = []
    for row in rows:
        for key in row:
            if key not in cols:
                cols.append(key)
    with open(path, "w") as fh:
        fh.write(",".join(cols) + "\n")
        for row in rows:
            fh.write(",".join(_cell(row.get(c)) for c in cols) + "\n")


def _cell(value) -> str:
    if value is None:
        return ""
    if isinstance(value, float):
        return "%.12g" % value
    return str(value).replace(",", ";")
