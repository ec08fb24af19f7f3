"""Scenario loading, execution, output emission, and parameter sweeps."""

import copy
import json
import math

import numpy as np
import pytest

from cosim.constants import E, HBAR
from cosim.errors import ConfigError
from cosim.experiments import (config_hash, load_scenario, load_sweep,
                               run_scenario, run_sweep, _set_path)
from cosim.spectrum import diagonalize


def tiny_doc():
    return {
        "name": "tiny",
        "transmons": [
            {"ej_ghz": 11.0, "total_capacitance_ff": 67.95, "levels": 3},
        ],
        "lines": [
            {"length_mm": 5.66, "inductance_uh_per_m": 0.7,
             "capacitance_pf_per_m": 280,
             "taps": [{"position_mm": 5.66, "transmon": 0,
                       "coupling_capacitance_ff": 4}],
             "probes_mm": [0.0]},
        ],
        "drives": [
            {"transmon": 0, "coupling_capacitance_ff": 0.1,
             "pulse": {"type": "gaussian", "vmag_uv": 100,
                       "carrier_ghz": 4.9, "offset_ns": 10, "sigma_ns": 3}},
        ],
        "simulation": {"t_end_ns": 20, "mesh_elements": 100,
                       "sample_stride": 100},
        "backends": ["closed", "ms_noba"],
        "initial_states": ["0"],
        "comparisons": [
            {"a": {"backend": "closed", "initial": "0"},
             "b": {"backend": "ms_noba", "initial": "0"},
             "assert_max_pop_diff": 1e-9},
        ],
    }


class TestLoading:
    def test_basic_fields(self):
        sc = load_scenario(tiny_doc())
        assert sc.name == "tiny"
        assert sc.backends == ("closed", "ms_noba")
        assert sc.initial_states == ("0",)
        assert len(sc.comparisons) == 1
        assert sc.comparisons[0].max_pop_diff == 1e-9

    def test_unknown_backend_rejected(self):
        doc = tiny_doc()
        doc["backends"] = ["closed", "lindblad"]
        with pytest.raises(ConfigError, match="backend"):
            load_scenario(doc)

    def test_invalid_initial_state_rejected(self):
        doc = tiny_doc()
        doc["initial_states"] = ["3"]     # only levels 0..2 exist
        with pytest.raises(ConfigError):
            load_scenario(doc)

    def test_frequency_sugar_tunes_josephson_energy(self):
        doc = tiny_doc()
        del doc["transmons"][0]["ej_ghz"]
        doc["transmons"][0]["qbar01_ghz"] = 4.91
        doc["simulation"]["include_lamb_shift"] = False
        sc = load_scenario(doc)
        sp = diagonalize(sc.circuit.transmons[0])
        assert sp.transition(0) == pytest.approx(2 * math.pi * 4.91e9,
                                                 rel=1e-9)

    def test_pulse_area_sugar_sets_voltage(self):
        doc = tiny_doc()
        pulse = doc["drives"][0]["pulse"]
        del pulse["vmag_uv"]
        pulse["area_rad"] = math.pi
        sc = load_scenario(doc)
        tr = sc.circuit.transmons[0]
        n01 = abs(diagonalize(tr).charge_elements[0, 1].real)
        beta = 0.1e-15 / tr.total_capacitance
        expected = math.pi * HBAR / (2 * E * beta * n01
                                     * math.sqrt(2 * math.pi) * 3e-9)
        assert sc.circuit.direct_drives[0].pulse.vmag == pytest.approx(expected)

    def test_pulse_area_sugar_sets_duration(self):
        # with a fixed amplitude the area fixes the Gaussian width instead,
        # so sweeping the area sweeps the pulse duration
        doc = tiny_doc()
        pulse = doc["drives"][0]["pulse"]
        del pulse["sigma_ns"]
        pulse["vmag_uv"] = 50.0
        pulse["area_rad"] = math.pi
        sc = load_scenario(doc)
        tr = sc.circuit.transmons[0]
        n01 = abs(diagonalize(tr).charge_elements[0, 1].real)
        beta = 0.1e-15 / tr.total_capacitance
        expected = math.pi * HBAR / (2 * E * beta * n01
                                     * math.sqrt(2 * math.pi) * 50e-6)
        assert sc.circuit.direct_drives[0].pulse.sigma \
            == pytest.approx(expected)
        assert sc.circuit.direct_drives[0].pulse.vmag == pytest.approx(50e-6)

    def test_pulse_area_with_both_knobs_rejected(self):
        doc = tiny_doc()
        doc["drives"][0]["pulse"]["area_rad"] = math.pi   # vmag+sigma present
        with pytest.raises(ConfigError, match="ambiguous"):
            load_scenario(doc)

    def test_variants_are_patched_copies(self):
        doc = tiny_doc()
        doc["variants"] = [
            {"label": "weak", "patch": {"drives.0.pulse.vmag_uv": 10}},
        ]
        sc = load_scenario(doc)
        assert len(sc.variants) == 1
        label, sub = sc.variants[0]
        assert label == "weak"
        assert sub.name == "tiny_weak"
        assert sub.circuit.direct_drives[0].pulse.vmag == pytest.approx(10e-6)
        # the base scenario is untouched
        assert sc.circuit.direct_drives[0].pulse.vmag == pytest.approx(100e-6)


class TestSetPath:
    def test_dotted_path(self):
        doc = tiny_doc()
        _set_path(doc, "drives.0.pulse.sigma_ns", 7)
        assert doc["drives"][0]["pulse"]["sigma_ns"] == 7

    def test_wildcard_hits_every_element(self):
        doc = tiny_doc()
        doc["lines"][0]["taps"].append(
            {"position_mm": 0.0, "transmon": 0, "coupling_capacitance_ff": 4})
        _set_path(doc, "lines.*.taps.*.coupling_capacitance_ff", 6)
        assert all(t["coupling_capacitance_ff"] == 6
                   for t in doc["lines"][0]["taps"])

    def test_bad_path_rejected(self):
        with pytest.raises(ConfigError):
            _set_path(tiny_doc(), "resonators.0.length_mm", 1.0)


class TestConfigHash:
    def test_insensitive_to_key_order(self):
        doc = {"b": 1, "a": [1, 2]}
        assert config_hash(doc) == config_hash({"a": [1, 2], "b": 1})

    def test_sensitive_to_values(self):
        assert config_hash({"a": 1}) != config_hash({"a": 2})


class TestRunScenario:
    def test_outputs_and_metrics(self, tmp_path):
        sc = load_scenario(tiny_doc())
        result = run_scenario(sc, tmp_path)
        assert result.passed
        assert not result.failures
        out = tmp_path / "tiny"
        # the closed backend carries no line, hence no probe column
        header = (out / "closed_0.csv").read_text().splitlines()[0].split(",")
        assert header == ["t_ns", "pop_0", "pop_1", "pop_2", "n1"]
        header = (out / "ms_noba_0.csv").read_text().splitlines()[0].split(",")
        assert header == ["t_ns", "pop_0", "pop_1", "pop_2", "n1",
                          "v_probe_uv"]
        sidecar = json.loads((out / "closed_0.json").read_text())
        assert sidecar["config_hash"] == config_hash(sc.document)
        assert sidecar["backend"] == "closed"
        metrics = json.loads((out / "metrics.json").read_text())
        assert metrics["comparisons"][0]["passed"] is True
        assert not (out / "failures.json").exists()

    def test_backaction_off_comparison_is_exact(self):
        result = run_scenario(load_scenario(tiny_doc()))
        m = result.metrics[0]
        assert m["max_pop_diff"] <= 1e-9
        assert result.trajectory("closed", "0").backend == "closed"

    def test_variant_runs_included(self, tmp_path):
        doc = tiny_doc()
        doc["comparisons"] = []
        doc["variants"] = [
            {"label": "weak", "patch": {"drives.0.pulse.vmag_uv": 10}},
        ]
        result = run_scenario(load_scenario(doc), tmp_path)
        strong = result.trajectory("closed", "0")
        weak = result.trajectory("closed", "0", "weak")
        assert np.max(weak.populations[:, 1]) \
            < 0.5 * np.max(strong.populations[:, 1])
        assert (tmp_path / "tiny" / "closed_0_weak.csv").exists()

    def test_solver_failure_recorded_not_fatal(self, tmp_path):
        doc = tiny_doc()
        doc["transmons"].append(
            {"ej_ghz": 12.0, "total_capacitance_ff": 67.45, "levels": 3})
        doc["lines"][0]["taps"].append(
            {"position_mm": 0.0, "transmon": 1, "coupling_capacitance_ff": 4})
        doc["initial_states"] = ["00"]
        doc["backends"] = ["closed", "born"]   # born is single-qubit only
        doc["comparisons"] = []
        result = run_scenario(load_scenario(doc), tmp_path)
        assert not result.passed
        assert any(f["run"] == "born_00" for f in result.failures)
        assert ("closed", "00", "") in result.trajectories
        manifest = json.loads(
            (tmp_path / "tiny" / "failures.json").read_text())
        assert manifest

    def test_missing_endpoint_flagged(self):
        doc = tiny_doc()
        doc["comparisons"][0]["b"]["backend"] = "ms"   # never run
        result = run_scenario(load_scenario(doc))
        assert not result.passed
        assert any("missing trajectory" in f["error"]
                   for f in result.failures)

    def test_plots_emitted(self, tmp_path):
        sc = load_scenario(tiny_doc())
        run_scenario(sc, tmp_path, plots=True)
        svg = tmp_path / "tiny" / "populations_0.svg"
        assert svg.exists()
        assert svg.read_text().startswith("<svg")


class TestDeterminism:
    def test_repeated_runs_are_bit_identical(self, tmp_path):
        for sub in ("a", "b"):
            run_scenario(load_scenario(tiny_doc()), tmp_path / sub)
        for stem in ("closed_0", "ms_noba_0"):
            a = (tmp_path / "a" / "tiny" / (stem + ".csv")).read_bytes()
            b = (tmp_path / "b" / "tiny" / (stem + ".csv")).read_bytes()
            assert a == b


class TestSweeps:
    def sweep_doc(self):
        doc = tiny_doc()
        doc["comparisons"] = []
        doc["backends"] = ["closed"]
        doc["sweep"] = {"parameter": "drives.0.pulse.vmag_uv",
                        "values": [50, 100, 150]}
        return doc

    def test_one_row_per_value_in_order(self, tmp_path):
        report = run_sweep(load_sweep(self.sweep_doc()), tmp_path)
        assert [r["value"] for r in report["rows"]] == [50.0, 100.0, 150.0]
        assert not report["failures"]
        for row in report["rows"]:
            assert "rabi_closed_mhz" in row
            assert "j_over_2pi_mhz" not in row   # single transmon: no J
        lines = (tmp_path / "sweep.csv").read_text().splitlines()
        assert len(lines) == 4
        assert lines[0].split(",")[0] == "value"

    def test_bad_parameter_path_fails_fast(self):
        doc = self.sweep_doc()
        doc["sweep"]["parameter"] = "drives.0.pulse.nonsense.deeper"
        with pytest.raises(ConfigError):
            load_sweep(doc)

    def test_empty_values_rejected(self):
        doc = self.sweep_doc()
        doc["sweep"]["values"] = []
        with pytest.raises(ConfigError):
            load_sweep(doc)

    def test_point_failure_recorded(self, tmp_path):
        doc = self.sweep_doc()
        doc["sweep"]["parameter"] = "simulation.mesh_elements"
        doc["sweep"]["values"] = [100, 1]     # 1 element is invalid
        report = run_sweep(load_sweep(doc), tmp_path)
        assert len(report["rows"]) == 2
        assert "error" in report["rows"][1]
        assert report["failures"]
