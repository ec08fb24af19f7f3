"""Command-line interface.

Subcommands:

* ``run``       — execute a scenario (shipped name or JSON path)
* ``sweep``     — execute a swept scenario and aggregate the results
* ``spectrum``  — print transmon level structure for a config
* ``jcalc``     — print exchange rates (both routes), shifts and q-bar
* ``impedance`` — emit the coupling network's two-port impedance as CSV

Exit status is 0 only when every run and every scenario assertion passed.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
from pathlib import Path

import numpy as np

from . import config as config_mod
from .coupling import build_tables, coupling_network, j_impedance
from .errors import CosimError
from .experiments import (load_scenario, load_sweep, run_scenario, run_sweep)
from .network import network_impedance
from .spectrum import diagonalize

SCENARIO_DIR = Path(__file__).parent / "scenarios"


def _scenario_doc(name: str) -> dict:
    path = Path(name)
    if not path.exists():
        path = SCENARIO_DIR / (name + ".json")
    if not path.exists():
        shipped = sorted(p.stem for p in SCENARIO_DIR.glob("*.json"))
        raise CosimError("unknown scenario %r (shipped: %s)"
                         % (name, ", ".join(shipped)))
    return json.loads(path.read_text())


def _apply_overrides(doc: dict, args) -> dict:
    sim = doc.setdefault("simulation", {})
    if args.dt_ps is not None:
        for key in [k for k in sim if k.startswith("dt_")]:
            del sim[key]
        sim["dt_ps"] = args.dt_ps
    if args.mesh is not None:
        sim["mesh_elements"] = args.mesh
    if args.integrator is not None:
        sim["integrator"] = args.integrator
    if args.levels is not None:
        for entry in doc.get("transmons", []):
            entry["levels"] = args.levels
    if args.backend is not None:
        doc["backends"] = [args.backend]
        sim["backend"] = args.backend
    return doc


def _load_config(path: str):
    return config_mod.load_config(Path(path).read_text())


# ---------------------------------------------------------------------------
# subcommands

def _cmd_run(args) -> int:
    doc = _apply_overrides(_scenario_doc(args.scenario), args)
    scenario = load_scenario(doc)
    result = run_scenario(scenario, args.out, plots=args.plots)
    for failure in result.failures:
        print("FAIL %(run)s: %(error)s" % failure, file=sys.stderr)
    for entry in result.metrics:
        status = "ok" if entry["passed"] else "FAIL"
        if entry.get("kind") == "envelope":
            print("%s envelope %s vs %s: rel_L2=%.4g"
                  % (status, entry["a"], entry["b"],
                     entry["rel_L2_envelope_diff"]))
        else:
            print("%s %s vs %s: max_pop_diff=%.4g rabi=%.4g/%.4g MHz (%.2f bins)"
                  % (status, entry["a"], entry["b"], entry["max_pop_diff"],
                     entry["rabi_freq_a"] / 1e6, entry["rabi_freq_b"] / 1e6,
                     entry["rabi_gap_bins"]))
    for entry in result.fidelity_values:
        print("fidelity %s vs %s: F=%.6f" % (entry["ideal"], entry["actual"],
                                             entry["fidelity"]))
    if result.out_dir is not None:
        print("results in %s" % result.out_dir)
    return 0 if result.passed else 1


def _cmd_sweep(args) -> int:
    doc = _apply_overrides(_scenario_doc(args.scenario), args)
    sweep = load_sweep(doc)
    report = run_sweep(sweep, args.out, plots=args.plots)
    ok = not report["failures"]
    for row in report["rows"]:
        print(", ".join("%s=%s" % (k, _fmt(v)) for k, v in row.items()))
    for result in report["results"]:
        if not result.passed:
            ok = False
    for failure in report["failures"]:
        print("FAIL value=%s: %s" % (failure["value"], failure["error"]),
              file=sys.stderr)
    return 0 if ok else 1


def _fmt(value) -> str:
    if isinstance(value, float):
        return "%.6g" % value
    return str(value)


def _cmd_spectrum(args) -> int:
    circuit, _ = _load_config(args.config)
    rows = []
    for idx, tr in enumerate(circuit.transmons):
        sp = diagonalize(tr)
        trans = [sp.transition(j) / (2e9 * math.pi)
                 for j in range(tr.level_count - 1)]
        anh = (trans[1] - trans[0]) * 1e3 if len(trans) > 1 else None
        n_ladder = [abs(sp.charge_elements[j, j + 1].real)
                    for j in range(tr.level_count - 1)]
        rows.append({"transmon": idx, "q_ghz": trans,
                     "anharmonicity_mhz": anh, "n_ladder": n_ladder})
    if args.json:
        print(json.dumps(rows, indent=2))
        return 0
    for row in rows:
        print("transmon %d" % row["transmon"])
        for j, q in enumerate(row["q_ghz"]):
            print("  q_%d%d/2pi = %.6f GHz   |n_%d%d| = %.4f"
                  % (j, j + 1, q, j, j + 1, row["n_ladder"][j]))
        if row["anharmonicity_mhz"] is not None:
            print("  anharmonicity = %.2f MHz" % row["anharmonicity_mhz"])
    return 0


def _cmd_jcalc(args) -> int:
    circuit, sim = _load_config(args.config)
    tables = build_tables(circuit, sim)
    out = {"qbar01_ghz": [tables.qbar_transition(l, 0) / (2e9 * math.pi)
                          for l in range(len(circuit.transmons))],
           "chi_mhz": [(chi / (2e6 * math.pi)).tolist() for chi in tables.chi]}
    if tables.exchange is not None:
        out["j_modesum_mhz"] = (tables.exchange.values / (2e6 * math.pi)).tolist()
        line = next(l for l in circuit.lines if l.taps)
        t1, t2 = line.taps[0], line.taps[1]
        qbar = (
            np.array([tables.qbar_transition(t1.transmon_id, j)
                      for j in range(tables.spectra[t1.transmon_id].level_count - 1)]),
            np.array([tables.qbar_transition(t2.transmon_id, j)
                      for j in range(tables.spectra[t2.transmon_id].level_count - 1)]),
        )
        imp = j_impedance(tables.spectra[t1.transmon_id],
                          tables.spectra[t2.transmon_id],
                          coupling_network(circuit), frequencies=qbar)
        out["j_impedance_mhz"] = (imp.values / (2e6 * math.pi)).tolist()
    if args.json:
        print(json.dumps(out, indent=2))
        return 0
    for l, q in enumerate(out["qbar01_ghz"]):
        print("qbar01(%d)/2pi = %.6f GHz" % (l, q))
    for l, chi in enumerate(out["chi_mhz"]):
        print("chi(%d)/2pi MHz: %s" % (l, np.array2string(
            np.asarray(chi), precision=3)))
    if "j_modesum_mhz" in out:
        print("J/2pi (mode sum)  MHz: %s" % np.array2string(
            np.asarray(out["j_modesum_mhz"]), precision=4))
        print("J/2pi (impedance) MHz: %s" % np.array2string(
            np.asarray(out["j_impedance_mhz"]), precision=4))
    return 0


def _cmd_impedance(args) -> int:
    circuit, _ = _load_config(args.config)
    network = coupling_network(circuit)
    freqs = np.linspace(args.fmin_ghz, args.fmax_ghz, args.points) * 1e9
    print("freq_ghz,reZ11,imZ11,reZ12,imZ12,reZ22,imZ22")
    for f in freqs:
        try:
            z = network_impedance(network, 2.0 * math.pi * f)
        except CosimError:
            continue
        print("%.9g,%.9g,%.9g,%.9g,%.9g,%.9g,%.9g"
              % (f / 1e9, z[0, 0].real, z[0, 0].imag, z[0, 1].real,
                 z[0, 1].imag, z[1, 1].real, z[1, 1].imag))
    return 0


# ---------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="cosim",
        description="semiclassical transmon / transmission-line co-simulation")
    sub = parser.add_subparsers(dest="command", required=True)

    def add_overrides(p):
        p.add_argument("--backend", choices=("ms", "ms_noba", "closed", "born"))
        p.add_argument("--dt-ps", type=float, help="time step override in ps")
        p.add_argument("--mesh", type=int, help="FEM element count override")
        p.add_argument("--levels", type=int, help="transmon level count override")
        p.add_argument("--integrator", choices=("expm", "leapfrog"))
        p.add_argument("--plots", action="store_true", help="emit SVG plots")

    p_run = sub.add_parser("run", help="run one scenario")
    p_run.add_argument("--scenario", required=True)
    p_run.add_argument("--out", default=None)
    add_overrides(p_run)
    p_run.set_defaults(func=_cmd_run)

    p_sweep = sub.add_parser("sweep", help="run a swept scenario")
    p_sweep.add_argument("--scenario", required=True)
    p_sweep.add_argument("--out", default=None)
    add_overrides(p_sweep)
    p_sweep.set_defaults(func=_cmd_sweep)

    p_spec = sub.add_parser("spectrum", help="print transmon spectra")
    p_spec.add_argument("--config", required=True)
    p_spec.add_argument("--json", action="store_true")
    p_spec.set_defaults(func=_cmd_spectrum)

    p_j = sub.add_parser("jcalc", help="print coupling coefficients")
    p_j.add_argument("--config", required=True)
    p_j.add_argument("--json", action="store_true")
    p_j.set_defaults(func=_cmd_jcalc)

    p_z = sub.add_parser("impedance", help="emit two-port impedance CSV")
    p_z.add_argument("--config", required=True)
    p_z.add_argument("--fmin-ghz", type=float, required=True)
    p_z.add_argument("--fmax-ghz", type=float, required=True)
    p_z.add_argument("--points", type=int, default=200)
    p_z.set_defaults(func=_cmd_impedance)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (CosimError, OSError) as exc:
        print("error: %s" % exc, file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
