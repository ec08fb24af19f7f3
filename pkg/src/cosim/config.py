"""JSON configuration ingestion and serialization.

Every numeric field in a document carries its unit as a key suffix
(``length_mm``, ``ej_ghz``, ``vmag_uv``); values are converted to SI at parse
time. Serialization always emits SI suffixes so a round trip is exact.
"""

from __future__ import annotations

import json
from typing import Any, Optional

from . import model
from .errors import ConfigError

# suffix -> SI factor, grouped by dimension
FREQ = {"hz": 1.0, "khz": 1e3, "mhz": 1e6, "ghz": 1e9}
TIME = {"s": 1.0, "ms": 1e-3, "us": 1e-6, "ns": 1e-9, "ps": 1e-12}
CAP = {"f": 1.0, "pf": 1e-12, "ff": 1e-15}
LEN = {"m": 1.0, "mm": 1e-3, "um": 1e-6}
VOLT = {"v": 1.0, "mv": 1e-3, "uv": 1e-6}
RES = {"ohm": 1.0, "kohm": 1e3}
IND_PER_M = {"h_per_m": 1.0, "uh_per_m": 1e-6, "nh_per_m": 1e-9}
CAP_PER_M = {"f_per_m": 1.0, "pf_per_m": 1e-12, "ff_per_m": 1e-15}
ANGLE = {"rad": 1.0}


def _quantity(obj: dict, base: str, units: dict, where: str,
              default: Optional[float] = None, required: bool = True):
    hits = []
    for key, value in obj.items():
        if key.startswith(base + "_") and key[len(base) + 1:] in units:
            hits.append((key, value))
    if not hits:
        if required:
            raise ConfigError("%s: missing field %s_<%s>" % (where, base, "|".join(units)))
        return default
    if len(hits) > 1:
        raise ConfigError("%s: duplicate unit variants for %s" % (where, base))
    key, value = hits[0]
    if not isinstance(value, (int, float)) or isinstance(value, bool):
        raise ConfigError("%s: field %s must be a number" % (where, key))
    return float(value) * units[key[len(base) + 1:]]


def _field(obj: dict, name: str, where: str, default=None, required: bool = True):
    if name not in obj:
        if required:
            raise ConfigError("%s: missing field %s" % (where, name))
        return default
    return obj[name]


def _parse_pulse(obj: dict, where: str) -> model.PulseSpec:
    kind = _field(obj, "type", where)
    vmag = _quantity(obj, "vmag", VOLT, where)
    carrier = _quantity(obj, "carrier", FREQ, where)
    if kind == "flat_top":
        return model.FlatTopGaussian(
            vmag=vmag,
            carrier_freq=carrier,
            phase=_quantity(obj, "phase", ANGLE, where, default=0.0, required=False),
            duration=_quantity(obj, "duration", TIME, where),
            rise_fall=_quantity(obj, "rise_fall", TIME, where),
            sigma=_quantity(obj, "sigma", TIME, where),
            offset=_quantity(obj, "offset", TIME, where, default=0.0, required=False),
        )
    if kind == "gaussian":
        return model.ModulatedGaussian(
            vmag=vmag,
            carrier_freq=carrier,
            offset=_quantity(obj, "offset", TIME, where, default=0.0, required=False),
            sigma=_quantity(obj, "sigma", TIME, where),
        )
    raise ConfigError("%s: unknown pulse type %r" % (where, kind))


def _parse_termination(obj, where: str) -> model.Termination:
    if obj is None:
        return model.Open()
    kind = _field(obj, "type", where)
    if kind == "open":
        return model.Open()
    if kind == "short":
        return model.Short()
    if kind == "resistor":
        return model.Resistor(resistance=_quantity(obj, "resistance", RES, where))
    if kind == "source":
        return model.TheveninSource(
            pulse=_parse_pulse(_field(obj, "pulse", where), where + ".pulse"),
            series_resistance=_quantity(obj, "series_resistance", RES, where),
        )
    raise ConfigError("%s: unknown termination type %r" % (where, kind))


def _parse_transmon(obj: dict, where: str) -> model.TransmonSpec:
    return model.TransmonSpec(
        josephson_energy=_quantity(obj, "ej", FREQ, where),
        total_capacitance=_quantity(obj, "total_capacitance", CAP, where),
        level_count=int(_field(obj, "levels", where, default=3, required=False)),
        charge_cutoff=int(_field(obj, "charge_cutoff", where, default=15, required=False)),
    )


def _parse_tap(obj: dict, where: str) -> model.Tap:
    return model.Tap(
        position=_quantity(obj, "position", LEN, where),
        transmon_id=int(_field(obj, "transmon", where)),
        coupling_capacitance=_quantity(obj, "coupling_capacitance", CAP, where),
        backaction_enabled=bool(_field(obj, "backaction", where, default=True, required=False)),
        drive_to_qubit_enabled=bool(
            _field(obj, "drive_to_qubit", where, default=True, required=False)),
    )


def _parse_line(obj: dict, where: str) -> model.LineSpec:
    probes = []
    for unit, factor in LEN.items():
        key = "probes_" + unit
        if key in obj:
            probes.extend(float(p) * factor for p in obj[key])
    return model.LineSpec(
        length=_quantity(obj, "length", LEN, where),
        inductance_per_m=_quantity(obj, "inductance", IND_PER_M, where),
        capacitance_per_m=_quantity(obj, "capacitance", CAP_PER_M, where),
        left_end=_parse_termination(_field(obj, "left_end", where, required=False),
                                    where + ".left_end"),
        right_end=_parse_termination(_field(obj, "right_end", where, required=False),
                                     where + ".right_end"),
        taps=tuple(_parse_tap(t, "%s.taps[%d]" % (where, i))
                   for i, t in enumerate(obj.get("taps", []))),
        probes=tuple(probes),
    )


def _parse_drive(obj: dict, where: str) -> model.DirectDrive:
    return model.DirectDrive(
        transmon_id=int(_field(obj, "transmon", where)),
        pulse=_parse_pulse(_field(obj, "pulse", where), where + ".pulse"),
        coupling_capacitance=_quantity(obj, "coupling_capacitance", CAP, where,
                                       required=False),
        beta=_field(obj, "beta", where, required=False),
    )


def _parse_crosstalk(obj: dict, where: str) -> model.CrosstalkDrive:
    return model.CrosstalkDrive(
        transmon_id=int(_field(obj, "transmon", where)),
        spec=model.CrosstalkDriveSpec(
            amplitude_scale=float(_field(obj, "amplitude_scale", where)),
            phase=_quantity(obj, "phase", ANGLE, where, default=0.0, required=False),
        ),
        source_drive=int(_field(obj, "source_drive", where)),
        only_backends=tuple(str(b) for b in obj.get("backends", [])),
    )


def _parse_simulation(obj: dict, where: str) -> model.SimConfig:
    return model.SimConfig(
        t_end=_quantity(obj, "t_end", TIME, where),
        dt=_quantity(obj, "dt", TIME, where, required=False),
        cfl_safety=float(_field(obj, "cfl_safety", where, default=0.5, required=False)),
        mesh_elements=int(_field(obj, "mesh_elements", where, default=400, required=False)),
        backend=_field(obj, "backend", where, default="ms", required=False),
        fock_truncation=int(_field(obj, "fock_truncation", where, default=12, required=False)),
        sample_stride=int(_field(obj, "sample_stride", where, default=1, required=False)),
        integrator=_field(obj, "integrator", where, default="expm", required=False),
        include_lamb_shift=bool(
            _field(obj, "include_lamb_shift", where, default=True, required=False)),
        lamb_modes=int(_field(obj, "lamb_modes", where, default=5, required=False)),
        j_mode_pairs=int(_field(obj, "j_mode_pairs", where, default=200, required=False)),
        consistent_mass=bool(
            _field(obj, "consistent_mass", where, default=False, required=False)),
    )


def parse_document(doc: dict) -> tuple[model.CircuitSpec, model.SimConfig]:
    if not isinstance(doc, dict):
        raise ConfigError("top level must be an object")
    circuit = model.CircuitSpec(
        transmons=tuple(_parse_transmon(t, "transmons[%d]" % i)
                        for i, t in enumerate(doc.get("transmons", []))),
        lines=tuple(_parse_line(l, "lines[%d]" % i)
                    for i, l in enumerate(doc.get("lines", []))),
        direct_drives=tuple(_parse_drive(d, "drives[%d]" % i)
                            for i, d in enumerate(doc.get("drives", []))),
        crosstalk_drives=tuple(_parse_crosstalk(c, "crosstalk_drives[%d]" % i)
                               for i, c in enumerate(doc.get("crosstalk_drives", []))),
    )
    sim = _parse_simulation(_field(doc, "simulation", "document"), "simulation")
    return circuit, sim


def load_config(text: str) -> tuple[model.CircuitSpec, model.SimConfig]:
    """Parse a JSON config document into fully resolved SI specs."""
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError("invalid JSON: %s" % exc) from exc
    return parse_document(doc)


# ---------------------------------------------------------------------------
# serialization (SI suffixes, exact round trip)

def _pulse_doc(p: model.PulseSpec) -> dict:
    if isinstance(p, model.FlatTopGaussian):
        return {"type": "flat_top", "vmag_v": p.vmag, "carrier_hz": p.carrier_freq,
                "phase_rad": p.phase, "duration_s": p.duration,
                "rise_fall_s": p.rise_fall, "sigma_s": p.sigma, "offset_s": p.offset}
    return {"type": "gaussian", "vmag_v": p.vmag, "carrier_hz": p.carrier_freq,
            "offset_s": p.offset, "sigma_s": p.sigma}


def _termination_doc(t: model.Termination) -> dict:
    if isinstance(t, model.Open):
        return {"type": "open"}
    if isinstance(t, model.Short):
        return {"type": "short"}
    if isinstance(t, model.Resistor):
        return {"type": "resistor", "resistance_ohm": t.resistance}
    return {"type": "source", "series_resistance_ohm": t.series_resistance,
            "pulse": _pulse_doc(t.pulse)}


def to_document(circuit: model.CircuitSpec, sim: model.SimConfig) -> dict:
    doc: dict[str, Any] = {
        "transmons": [
            {"ej_hz": t.josephson_energy, "total_capacitance_f": t.total_capacitance,
             "levels": t.level_count, "charge_cutoff": t.charge_cutoff}
            for t in circuit.transmons
        ],
        "lines": [
            {"length_m": l.length, "inductance_h_per_m": l.inductance_per_m,
             "capacitance_f_per_m": l.capacitance_per_m,
             "left_end": _termination_doc(l.left_end),
             "right_end": _termination_doc(l.right_end),
             "taps": [
                 {"position_m": tp.position, "transmon": tp.transmon_id,
                  "coupling_capacitance_f": tp.coupling_capacitance,
                  "backaction": tp.backaction_enabled,
                  "drive_to_qubit": tp.drive_to_qubit_enabled}
                 for tp in l.taps
             ],
             "probes_m": list(l.probes)}
            for l in circuit.lines
        ],
        "drives": [],
        "crosstalk_drives": [
            {"transmon": c.transmon_id, "source_drive": c.source_drive,
             "amplitude_scale": c.spec.amplitude_scale, "phase_rad": c.spec.phase,
             "backends": list(c.only_backends)}
            for c in circuit.crosstalk_drives
        ],
        "simulation": {
            "t_end_s": sim.t_end,
            "cfl_safety": sim.cfl_safety, "mesh_elements": sim.mesh_elements,
            "backend": sim.backend, "fock_truncation": sim.fock_truncation,
            "sample_stride": sim.sample_stride, "integrator": sim.integrator,
            "include_lamb_shift": sim.include_lamb_shift,
            "lamb_modes": sim.lamb_modes, "j_mode_pairs": sim.j_mode_pairs,
            "consistent_mass": sim.consistent_mass,
        },
    }
    if sim.dt is not None:
        doc["simulation"]["dt_s"] = sim.dt
    for d in circuit.direct_drives:
        entry: dict[str, Any] = {"transmon": d.transmon_id, "pulse": _pulse_doc(d.pulse)}
        if d.coupling_capacitance is not None:
            entry["coupling_capacitance_f"] = d.coupling_capacitance
        if d.beta is not None:
            entry["beta"] = d.beta
        doc["drives"].append(entry)
    return doc


def serialize(circuit: model.CircuitSpec, sim: model.SimConfig) -> str:
    return json.dumps(to_document(circuit, sim), indent=2)
