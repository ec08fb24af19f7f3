"""Post-processing: Rabi-frequency extraction, envelopes, trajectory metrics.

All routines operate on sampled arrays (or :class:`~cosim.dynamics.Trajectory`
objects for :func:`compare`) and are deliberately independent of the solvers.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .dynamics import Trajectory
from .errors import AnalysisError

_PAD_FACTOR = 8   # zero-padding multiple used by the Rabi-frequency FFT


@dataclass(frozen=True)
class RabiEstimate:
    """Dominant oscillation frequency of a sampled signal."""
    frequency: float       # Hz, quadratically interpolated peak
    bin_width: float       # Hz, spacing of the padded FFT grid
    peak_bin: int          # index of the raw maximum on that grid
    amplitude: float       # spectral magnitude at the peak


def rabi_frequency(times: np.ndarray, signal: np.ndarray,
                   pad_factor: int = _PAD_FACTOR) -> RabiEstimate:
    """Estimate the dominant oscillation frequency of a real signal.

    The mean is removed, a Hann window applied, and the signal zero-padded to
    ``pad_factor`` times its length before the FFT; the spectral peak is then
    refined by quadratic interpolation of the three bins around the maximum.
    """
    t = np.asarray(times, float)
    x = np.asarray(signal, float)
    if t.ndim != 1 or t.shape != x.shape:
        raise AnalysisError("times and signal must be matching 1-D arrays")
    if len(t) < 8:
        raise AnalysisError("record too short for a frequency estimate")
    if pad_factor < 1:
        raise AnalysisError("pad_factor must be >= 1")
    dt = float(t[1] - t[0])
    if dt <= 0 or np.max(np.abs(np.diff(t) - dt)) > 1e-9 * dt + 1e-20:
        raise AnalysisError("frequency extraction needs a uniform time grid")

    x = x - x.mean()
    window = np.hanning(len(x))
    nfft = pad_factor * len(x)
    spec = np.abs(np.fft.rfft(x * window, n=nfft))
    bin_width = 1.0 / (nfft * dt)

    # mean removal plus the Hann window leave only weak DC leakage, so the
    # search starts right above the DC bin; records holding only one or two
    # oscillation periods keep their (broad) spectral peak this way
    lo = 1
    if lo >= len(spec) - 1:
        raise AnalysisError("record too short for a frequency estimate")
    peak = lo + int(np.argmax(spec[lo:]))
    if peak + 1 >= len(spec):
        peak = len(spec) - 2
    a, b, c = spec[peak - 1], spec[peak], spec[peak + 1]
    denom = a - 2.0 * b + c
    shift = 0.0 if denom == 0 else 0.5 * (a - c) / denom
    shift = min(max(shift, -0.5), 0.5)
    return RabiEstimate(
        frequency=(peak + shift) * bin_width,
        bin_width=bin_width,
        peak_bin=peak,
        amplitude=float(b),
    )


def envelope(times: np.ndarray, signal: np.ndarray,
             carrier_freq: float) -> tuple[np.ndarray, np.ndarray]:
    """Carrier-period envelope: max |signal| over windows of one period.

    Windows hop by one carrier period; each output sample is stamped at the
    window center. The sample rate must resolve the carrier by at least 20x.
    """
    t = np.asarray(times, float)
    x = np.asarray(signal, float)
    if t.shape != x.shape or t.ndim != 1:
        raise AnalysisError("times and signal must be matching 1-D arrays")
    if carrier_freq <= 0:
        raise AnalysisError("carrier frequency must be > 0")
    dt = float(t[1] - t[0])
    period = 1.0 / carrier_freq
    if dt > period / 20.0:
        raise AnalysisError("sample rate below 20x the carrier frequency")
    per_window = int(round(period / dt))
    n_windows = len(x) // per_window
    if n_windows < 1:
        raise AnalysisError("record shorter than one carrier period")
    trimmed = x[: n_windows * per_window].reshape(n_windows, per_window)
    env = np.abs(trimmed).max(axis=1)
    centers = t[0] + (np.arange(n_windows) + 0.5) * per_window * dt
    return centers, env


def _resample(src_t: np.ndarray, src_y: np.ndarray,
              dst_t: np.ndarray) -> np.ndarray:
    """Linear interpolation of each column of src_y onto dst_t."""
    out = np.empty((len(dst_t), src_y.shape[1]))
    for j in range(src_y.shape[1]):
        out[:, j] = np.interp(dst_t, src_t, src_y[:, j])
    return out


def _oscillation_column(populations: np.ndarray) -> int:
    """Index of the population column with the largest variance."""
    return int(np.argmax(populations.var(axis=0)))


def compare(a: Trajectory, b: Trajectory) -> dict:
    """Pairwise metrics between two trajectories of the same scenario.

    Populations are resampled onto the common overlap of the two time grids
    by linear interpolation. The Rabi frequency is extracted from the most
    strongly oscillating population column, chosen per trajectory so that
    runs prepared in different initial states remain comparable; the
    envelope difference is the relative L2 distance between the
    peak-normalized envelopes of those columns.
    """
    t_lo = max(a.times[0], b.times[0])
    t_hi = min(a.times[-1], b.times[-1])
    if t_hi <= t_lo:
        raise AnalysisError("trajectories cover disjoint time ranges")
    base = a.times[(a.times >= t_lo) & (a.times <= t_hi)]
    pa = _resample(a.times, a.populations, base)
    pb = _resample(b.times, b.populations, base)
    if pa.shape[1] != pb.shape[1]:
        raise AnalysisError("trajectories have different state dimensions")

    col_a = _oscillation_column(pa)
    col_b = _oscillation_column(pb)
    rabi_a = rabi_frequency(base, pa[:, col_a])
    rabi_b = rabi_frequency(base, pb[:, col_b])

    env_a = _population_envelope(base, pa[:, col_a], rabi_a.frequency)
    env_b = _population_envelope(base, pb[:, col_b], rabi_b.frequency)
    n = min(len(env_a), len(env_b))
    diff = env_a[:n] - env_b[:n]
    scale = np.linalg.norm(env_a[:n])
    rel_l2 = float(np.linalg.norm(diff) / scale) if scale > 0 else 0.0

    return {
        "max_pop_diff": float(np.max(np.abs(pa - pb))),
        "rabi_freq_a": rabi_a.frequency,
        "rabi_freq_b": rabi_b.frequency,
        "rabi_bin_width": rabi_a.bin_width,
        "rel_L2_envelope_diff": rel_l2,
        "oscillation_column_a": col_a,
        "oscillation_column_b": col_b,
    }


def _population_envelope(t: np.ndarray, x: np.ndarray,
                         osc_freq: float) -> np.ndarray:
    """Peak-normalized per-cycle envelope; the raw signal when the
    oscillation is unresolved or slower than the record itself."""
    dt = float(t[1] - t[0])
    if (osc_freq <= 0 or dt > 1.0 / (20.0 * osc_freq)
            or (t[-1] - t[0]) * osc_freq < 1.0):
        env = np.abs(x - x.mean())
    else:
        _, env = envelope(t, x - x.mean(), osc_freq)
    peak = env.max()
    return env / peak if peak > 0 else env


def normalized_envelope_difference(times_a: np.ndarray, volts_a: np.ndarray,
                                   times_b: np.ndarray, volts_b: np.ndarray,
                                   carrier_freq: float) -> float:
    """Relative L2 distance between two peak-normalized voltage envelopes.

    Used to quantify how strongly two probe-voltage records differ in shape
    independent of their absolute magnitude.
    """
    ta, ea = envelope(times_a, volts_a, carrier_freq)
    tb, eb = envelope(times_b, volts_b, carrier_freq)
    if ea.max() <= 0 or eb.max() <= 0:
        raise AnalysisError("envelope comparison needs nonzero signals")
    ea = ea / ea.max()
    eb = np.interp(ta, tb, eb / eb.max())
    return float(np.linalg.norm(ea - eb) / np.linalg.norm(ea))
