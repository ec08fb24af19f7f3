"""Trajectory post-processing: Rabi extraction, envelopes, comparisons."""

import numpy as np
import pytest

from cosim.analysis import (compare, envelope, normalized_envelope_difference,
                            rabi_frequency)
from cosim.dynamics import Trajectory
from cosim.errors import AnalysisError


def tone(freq, t_end=2e-6, dt=1e-9, phase=0.0):
    t = np.arange(0.0, t_end, dt)
    return t, 0.5 - 0.5 * np.cos(2 * np.pi * freq * t + phase)


class TestRabiFrequency:
    def test_pure_tone_recovered(self):
        t, x = tone(1.5e6)
        est = rabi_frequency(t, x)
        assert est.frequency == pytest.approx(1.5e6, abs=est.bin_width)

    def test_two_tones_differ_by_their_spacing(self):
        t, a = tone(1.5e6)
        _, b = tone(1.8e6)
        fa = rabi_frequency(t, a)
        fb = rabi_frequency(t, b)
        assert abs(fb.frequency - fa.frequency) == pytest.approx(
            0.3e6, abs=fa.bin_width)

    def test_sub_period_resolution_with_padding(self):
        # under two full periods in the record: the padded grid still
        # separates nearby frequencies
        t, a = tone(0.75e6)
        _, b = tone(0.60e6)
        fa = rabi_frequency(t, a)
        fb = rabi_frequency(t, b)
        assert fa.frequency == pytest.approx(0.75e6, abs=2 * fa.bin_width)
        assert fb.frequency == pytest.approx(0.60e6, abs=2 * fb.bin_width)

    def test_bin_width_reflects_padding(self):
        t, x = tone(1.0e6)
        est8 = rabi_frequency(t, x, pad_factor=8)
        est1 = rabi_frequency(t, x, pad_factor=1)
        assert est8.bin_width == pytest.approx(est1.bin_width / 8.0)

    def test_rejects_nonuniform_grid(self):
        t = np.array([0.0, 1.0, 2.5, 3.0, 4.0, 5.0, 6.0, 7.0]) * 1e-9
        with pytest.raises(AnalysisError):
            rabi_frequency(t, np.ones_like(t))

    def test_rejects_short_records(self):
        with pytest.raises(AnalysisError):
            rabi_frequency(np.arange(4) * 1e-9, np.zeros(4))

    def test_rejects_shape_mismatch(self):
        with pytest.raises(AnalysisError):
            rabi_frequency(np.arange(10) * 1e-9, np.zeros(9))


class TestEnvelope:
    def test_recovers_amplitude_modulation(self):
        t = np.arange(0.0, 200e-9, 0.01e-9)
        carrier = 5e9
        mod = 1.0 + 0.5 * np.sin(2 * np.pi * 20e6 * t)
        centers, env = envelope(t, mod * np.sin(2 * np.pi * carrier * t),
                                carrier)
        expect = 1.0 + 0.5 * np.sin(2 * np.pi * 20e6 * centers)
        assert np.max(np.abs(env - expect)) < 0.03

    def test_requires_adequate_sampling(self):
        t = np.arange(0.0, 100e-9, 1e-9)
        with pytest.raises(AnalysisError, match="sample rate"):
            envelope(t, np.sin(2 * np.pi * 5e9 * t), 5e9)

    def test_scaled_signals_have_zero_normalized_difference(self):
        t = np.arange(0.0, 200e-9, 0.01e-9)
        mod = 1.0 + 0.5 * np.sin(2 * np.pi * 20e6 * t)
        x = mod * np.sin(2 * np.pi * 5e9 * t)
        diff = normalized_envelope_difference(t, x, t, 3.7 * x, 5e9)
        assert diff < 1e-12

    def test_different_modulations_detected(self):
        t = np.arange(0.0, 200e-9, 0.01e-9)
        x = (1.0 + 0.5 * np.sin(2 * np.pi * 20e6 * t)) \
            * np.sin(2 * np.pi * 5e9 * t)
        y = np.sin(2 * np.pi * 5e9 * t)
        assert normalized_envelope_difference(t, x, t, y, 5e9) > 0.1


def make_traj(times, pops, backend="closed"):
    n = len(times)
    return Trajectory(times=times, populations=pops,
                      charge=np.zeros((1, n)), probe_voltages=np.zeros((0, n)),
                      norms=np.ones(n), backend=backend)


class TestCompare:
    def test_identical_trajectories(self):
        t, x = tone(1.5e6)
        pops = np.column_stack([x, 1.0 - x])
        m = compare(make_traj(t, pops), make_traj(t, pops))
        assert m["max_pop_diff"] == 0.0
        assert m["rabi_freq_a"] == m["rabi_freq_b"]
        assert m["rel_L2_envelope_diff"] == 0.0

    def test_oscillation_column_chosen_per_trajectory(self):
        t, x = tone(1.0e6)
        flat = np.full_like(x, 0.2)
        a = make_traj(t, np.column_stack([x, flat]))
        b = make_traj(t, np.column_stack([flat, x]))
        m = compare(a, b)
        assert m["oscillation_column_a"] == 0
        assert m["oscillation_column_b"] == 1
        assert m["rabi_freq_a"] == pytest.approx(m["rabi_freq_b"])

    def test_resampling_over_common_window(self):
        t, x = tone(1.0e6)
        a = make_traj(t, np.column_stack([x, 1 - x]))
        half = len(t) // 2
        b = make_traj(t[:half], np.column_stack([x[:half], 1 - x[:half]]))
        m = compare(a, b)
        assert m["max_pop_diff"] < 1e-12

    def test_disjoint_ranges_rejected(self):
        t, x = tone(1.0e6)
        a = make_traj(t, np.column_stack([x]))
        b = make_traj(t + 1.0, np.column_stack([x]))
        with pytest.raises(AnalysisError):
            compare(a, b)

    def test_dimension_mismatch_rejected(self):
        t, x = tone(1.0e6)
        a = make_traj(t, np.column_stack([x]))
        b = make_traj(t, np.column_stack([x, x]))
        with pytest.raises(AnalysisError):
            compare(a, b)
