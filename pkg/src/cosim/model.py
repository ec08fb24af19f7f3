"""Circuit, pulse and simulation specifications.

All stored quantities are SI (seconds, farads, meters, volts). Josephson and
carrier frequencies are plain frequencies in Hz; spectra and coupling rates
elsewhere in the package are angular (rad/s).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Union

import numpy as np

from .constants import E
from .errors import ConfigError


# ---------------------------------------------------------------------------
# transmons

@dataclass(frozen=True)
class TransmonSpec:
    josephson_energy: float          # E_J/h, Hz
    total_capacitance: float         # C_Sigma, F
    level_count: int = 3
    charge_cutoff: int = 15

    def __post_init__(self):
        if self.josephson_energy <= 0:
            raise ConfigError("josephson_energy must be > 0")
        if self.total_capacitance <= 0:
            raise ConfigError("total_capacitance must be > 0")
        if self.level_count < 2:
            raise ConfigError("level_count must be >= 2")
        if self.level_count > 2 * self.charge_cutoff + 1:
            raise ConfigError(
                "level_count %d exceeds charge basis size 2*%d+1"
                % (self.level_count, self.charge_cutoff)
            )

    @property
    def charging_energy(self) -> float:
        """E_C = e^2 / (2 C_Sigma), in joules."""
        return E ** 2 / (2.0 * self.total_capacitance)


def beta_factor(transmon: TransmonSpec, tap_capacitance: float) -> float:
    """Capacitive voltage divider beta = C_tap / C_Sigma.

    C_Sigma is the total transmon capacitance including every tap, so the
    two-capacitor divider is recovered in the single-tap limit.
    """
    if tap_capacitance < 0:
        raise ConfigError("tap capacitance must be >= 0")
    if tap_capacitance >= transmon.total_capacitance:
        raise ConfigError("tap capacitance must be below the total capacitance")
    return tap_capacitance / transmon.total_capacitance


# ---------------------------------------------------------------------------
# pulses

@dataclass(frozen=True)
class FlatTopGaussian:
    """Carrier times flat-top envelope with Gaussian rise/fall edges."""
    vmag: float            # V
    carrier_freq: float    # Hz
    phase: float = 0.0     # rad
    duration: float = 0.0  # tau, s (full pulse length)
    rise_fall: float = 0.0  # zeta, s
    sigma: float = 0.0     # s
    offset: float = 0.0    # t0, s

    def __post_init__(self):
        if self.vmag < 0:
            raise ConfigError("vmag must be >= 0")
        if self.sigma <= 0:
            raise ConfigError("sigma must be > 0")
        if self.duration <= 2 * self.rise_fall:
            raise ConfigError("flat-top duration must exceed twice the rise-fall time")

    def envelope(self, t: float) -> float:
        t0, tau, zeta, sig = self.offset, self.duration, self.rise_fall, self.sigma
        # far tails clamped; error below 3.4e-4 of vmag
        if t < t0 - 4.0 * sig or t > t0 + tau + 4.0 * sig:
            return 0.0
        if t < t0 + zeta:
            return math.exp(-0.5 * ((t - t0 - zeta) / sig) ** 2)
        if t <= t0 + tau - zeta:
            return 1.0
        return math.exp(-0.5 * ((t - t0 - tau + zeta) / sig) ** 2)

    def __call__(self, t: float) -> float:
        return (
            self.vmag
            * math.cos(2.0 * math.pi * self.carrier_freq * t + self.phase)
            * self.envelope(t)
        )


@dataclass(frozen=True)
class ModulatedGaussian:
    """Sine carrier under a decaying Gaussian envelope centred at the offset."""
    vmag: float            # V
    carrier_freq: float    # Hz
    offset: float = 0.0    # t0, s
    sigma: float = 0.0     # s

    def __post_init__(self):
        if self.vmag < 0:
            raise ConfigError("vmag must be >= 0")
        if self.sigma <= 0:
            raise ConfigError("sigma must be > 0")

    def envelope(self, t: float) -> float:
        return math.exp(-0.5 * ((t - self.offset) / self.sigma) ** 2)

    def __call__(self, t: float) -> float:
        return (
            self.vmag
            * math.sin(2.0 * math.pi * self.carrier_freq * (t - self.offset))
            * self.envelope(t)
        )


PulseSpec = Union[FlatTopGaussian, ModulatedGaussian]


def eval_pulse(pulse: PulseSpec, t: float) -> float:
    """Source voltage at time t (total function of finite t)."""
    return pulse(t)


def pulse_with_phase(pulse: PulseSpec, phase: float) -> PulseSpec:
    """Copy of a pulse with the carrier phase replaced (crosstalk channels)."""
    if isinstance(pulse, FlatTopGaussian):
        return FlatTopGaussian(
            vmag=pulse.vmag, carrier_freq=pulse.carrier_freq, phase=phase,
            duration=pulse.duration, rise_fall=pulse.rise_fall,
            sigma=pulse.sigma, offset=pulse.offset,
        )
    raise ConfigError("crosstalk phase override requires a flat-top pulse")


# ---------------------------------------------------------------------------
# transmission lines

@dataclass(frozen=True)
class Open:
    pass


@dataclass(frozen=True)
class Short:
    pass


@dataclass(frozen=True)
class Resistor:
    resistance: float  # Ohm

    def __post_init__(self):
        if self.resistance <= 0:
            raise ConfigError("termination resistance must be > 0")


@dataclass(frozen=True)
class TheveninSource:
    pulse: PulseSpec
    series_resistance: float  # Ohm

    def __post_init__(self):
        if self.series_resistance <= 0:
            raise ConfigError("source series resistance must be > 0")


Termination = Union[Open, Short, Resistor, TheveninSource]


@dataclass(frozen=True)
class Tap:
    position: float                # m, measured from the left end
    transmon_id: int
    coupling_capacitance: float    # F
    backaction_enabled: bool = True
    drive_to_qubit_enabled: bool = True

    def __post_init__(self):
        if self.coupling_capacitance < 0:
            raise ConfigError("coupling capacitance must be >= 0")


@dataclass(frozen=True)
class LineSpec:
    length: float            # m
    inductance_per_m: float  # H/m
    capacitance_per_m: float  # F/m
    left_end: Termination = Open()
    right_end: Termination = Open()
    taps: tuple[Tap, ...] = ()
    probes: tuple[float, ...] = ()   # probe positions, m

    def __post_init__(self):
        if self.length <= 0 or self.inductance_per_m <= 0 or self.capacitance_per_m <= 0:
            raise ConfigError("line length and per-unit-length L, C must be > 0")
        for tap in self.taps:
            if not 0.0 <= tap.position <= self.length:
                raise ConfigError("tap position outside line")
        for p in self.probes:
            if not 0.0 <= p <= self.length:
                raise ConfigError("probe position outside line")

    @property
    def wave_speed(self) -> float:
        return 1.0 / math.sqrt(self.inductance_per_m * self.capacitance_per_m)

    @property
    def characteristic_impedance(self) -> float:
        return math.sqrt(self.inductance_per_m / self.capacitance_per_m)


# ---------------------------------------------------------------------------
# drives

@dataclass(frozen=True)
class DirectDrive:
    """Voltage drive applied straight to a transmon (drive line folded into beta)."""
    transmon_id: int
    pulse: PulseSpec
    coupling_capacitance: Optional[float] = None   # C_D, F
    beta: Optional[float] = None                   # explicit divider override

    def __post_init__(self):
        if (self.coupling_capacitance is None) == (self.beta is None):
            raise ConfigError(
                "direct drive needs exactly one of coupling_capacitance or beta"
            )


@dataclass(frozen=True)
class CrosstalkDriveSpec:
    amplitude_scale: float   # A, dimensionless
    phase: float = 0.0       # phi_2, rad

    def __post_init__(self):
        if self.amplitude_scale < 0:
            raise ConfigError("crosstalk amplitude scale must be >= 0")


@dataclass(frozen=True)
class CrosstalkDrive:
    """Scaled, re-phased copy of another drive applied to a second transmon."""
    transmon_id: int
    spec: CrosstalkDriveSpec
    source_drive: int        # index into CircuitSpec.direct_drives
    only_backends: tuple[str, ...] = ()   # empty = applies to every backend


@dataclass(frozen=True)
class CircuitSpec:
    transmons: tuple[TransmonSpec, ...] = ()
    lines: tuple[LineSpec, ...] = ()
    direct_drives: tuple[DirectDrive, ...] = ()
    crosstalk_drives: tuple[CrosstalkDrive, ...] = ()

    def __post_init__(self):
        n = len(self.transmons)
        tap_sums = np.zeros(max(n, 1))
        for li, line in enumerate(self.lines):
            for tap in line.taps:
                if not 0 <= tap.transmon_id < n:
                    raise ConfigError(
                        "lines[%d]: tap references unknown transmon %d"
                        % (li, tap.transmon_id)
                    )
                tap_sums[tap.transmon_id] += tap.coupling_capacitance
        for i, tr in enumerate(self.transmons):
            if tap_sums[i] >= tr.total_capacitance:
                raise ConfigError(
                    "transmons[%d]: tap capacitances exceed the total capacitance" % i
                )
        for di, drv in enumerate(self.direct_drives):
            if not 0 <= drv.transmon_id < n:
                raise ConfigError("drives[%d]: unknown transmon %d" % (di, drv.transmon_id))
        for ci, ct in enumerate(self.crosstalk_drives):
            if not 0 <= ct.transmon_id < n:
                raise ConfigError(
                    "crosstalk_drives[%d]: unknown transmon %d" % (ci, ct.transmon_id)
                )
            if not 0 <= ct.source_drive < len(self.direct_drives):
                raise ConfigError(
                    "crosstalk_drives[%d]: unknown source drive %d"
                    % (ci, ct.source_drive)
                )

    def drive_beta(self, drive: DirectDrive) -> float:
        if drive.beta is not None:
            return drive.beta
        return beta_factor(self.transmons[drive.transmon_id], drive.coupling_capacitance)

    @property
    def dimension(self) -> int:
        dim = 1
        for tr in self.transmons:
            dim *= tr.level_count
        return dim


# ---------------------------------------------------------------------------
# simulation settings

BACKENDS = ("ms", "ms_noba", "closed", "born")


@dataclass(frozen=True)
class SimConfig:
    t_end: float                     # s
    dt: Optional[float] = None       # s; None = CFL-derived
    cfl_safety: float = 0.5
    mesh_elements: int = 400
    backend: str = "ms"
    fock_truncation: int = 12
    sample_stride: int = 1
    integrator: str = "expm"         # or "leapfrog"
    include_lamb_shift: bool = True
    lamb_modes: int = 5
    j_mode_pairs: int = 200
    consistent_mass: bool = False

    def __post_init__(self):
        if self.t_end <= 0:
            raise ConfigError("t_end must be > 0")
        if self.dt is not None and self.dt <= 0:
            raise ConfigError("dt must be > 0")
        if self.mesh_elements < 2:
            raise ConfigError("mesh must have at least 2 elements")
        if self.backend not in BACKENDS:
            raise ConfigError("unknown backend %r" % (self.backend,))
        if self.fock_truncation < 2:
            raise ConfigError("fock_truncation must be >= 2")
        if self.sample_stride < 1:
            raise ConfigError("sample_stride must be >= 1")
        if self.integrator not in ("expm", "leapfrog"):
            raise ConfigError("unknown integrator %r" % (self.integrator,))

    def timestep(self, circuit: CircuitSpec) -> float:
        """Explicit dt if given, else the CFL-limited step over all lines."""
        if self.dt is not None:
            return self.dt
        if not circuit.lines:
            raise ConfigError("dt must be given explicitly when no line is simulated")
        dt = math.inf
        for line in circuit.lines:
            h = line.length / self.mesh_elements
            dt = min(dt, self.cfl_safety * h / line.wave_speed)
        return dt
