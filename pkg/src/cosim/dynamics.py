"""Time-evolution backends.

Three solvers share one observable format:

* ``ms_evolve`` — co-simulation of the reduced qubit Hamiltonian with the FEM
  transmission line, exchanging tap voltages and back-action currents on
  staggered time grids (back-action optionally disabled).
* ``closed_evolve`` — dense evolution of the reduced Hamiltonian with pulse
  drives only (no line).
* ``born_evolve`` — factorized density-matrix reference solver for a single
  qubit coupled to one resonator mode.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Sequence, Union

import numpy as np

from . import _kernels
from .constants import E, HBAR
from .coupling import CouplingTables, build_tables
from .errors import ConfigError, StabilityError
from .line import LineSystem, assemble, eigenmodes
from .model import (CircuitSpec, FlatTopGaussian, LineSpec, ModulatedGaussian,
                    PulseSpec, SimConfig, TheveninSource, pulse_with_phase)
from .spectrum import TransmonSpectrum, diagonalize

_SPECTRAL_MARGIN = 0.02   # dt * max|H|/2pi must stay below this


# ---------------------------------------------------------------------------
# results

@dataclass
class Trajectory:
    """Sampled observables of one evolution run."""
    times: np.ndarray                  # (nsamp,), s
    populations: np.ndarray            # (nsamp, D)
    charge: np.ndarray                 # (n_transmons, nsamp), <n^(l)>
    probe_voltages: np.ndarray         # (n_probes, nsamp), V
    norms: np.ndarray                  # (nsamp,), state norm or |trace - 1|
    backend: str
    final_state: Optional[np.ndarray] = None      # amplitudes (pure backends)
    final_density: Optional[np.ndarray] = None    # qubit density matrix (born)
    resonator_voltage: Optional[np.ndarray] = None   # (nsamp,), born V_R rad/s
    metadata: dict = field(default_factory=dict)


# ---------------------------------------------------------------------------
# pulses on a time grid

def sample_pulse(pulse: PulseSpec, times: np.ndarray) -> np.ndarray:
    """Vectorized source voltage over a sample grid."""
    t = np.asarray(times, float)
    if isinstance(pulse, FlatTopGaussian):
        t0, tau, zeta, sig = pulse.offset, pulse.duration, pulse.rise_fall, pulse.sigma
        env = np.ones_like(t)
        rise = t < t0 + zeta
        fall = t > t0 + tau - zeta
        env[rise] = np.exp(-0.5 * ((t[rise] - t0 - zeta) / sig) ** 2)
        env[fall] = np.exp(-0.5 * ((t[fall] - t0 - tau + zeta) / sig) ** 2)
        env[(t < t0 - 4.0 * sig) | (t > t0 + tau + 4.0 * sig)] = 0.0
        carrier = np.cos(2.0 * np.pi * pulse.carrier_freq * t + pulse.phase)
        return pulse.vmag * carrier * env
    if isinstance(pulse, ModulatedGaussian):
        env = np.exp(-0.5 * ((t - pulse.offset) / pulse.sigma) ** 2)
        carrier = np.sin(2.0 * np.pi * pulse.carrier_freq * (t - pulse.offset))
        return pulse.vmag * carrier * env
    raise ConfigError("unknown pulse type %r" % type(pulse).__name__)


# ---------------------------------------------------------------------------
# the reduced Hamiltonian

@dataclass(frozen=True)
class DriveChannel:
    operator: np.ndarray     # (D, D) complex
    gain: float              # rad/s per volt (2 e beta / hbar, possibly scaled)
    pulse: PulseSpec


@dataclass(frozen=True)
class TapChannel:
    operator: np.ndarray
    transmon: int
    node_position: float     # m along the line
    gain: float              # rad/s per volt
    current_gain: float      # C (2 e beta)
    feels_line: bool
    back_action: bool


@dataclass(frozen=True)
class EffectiveHamiltonian:
    static: np.ndarray                     # (D, D) complex, rad/s
    n_ops: tuple[np.ndarray, ...]          # charge operator per transmon
    drives: tuple[DriveChannel, ...]
    taps: tuple[TapChannel, ...]
    dims: tuple[int, ...]


def _embed(op: np.ndarray, which: int, dims: Sequence[int]) -> np.ndarray:
    out = np.array([[1.0 + 0.0j]])
    for l, d in enumerate(dims):
        out = np.kron(out, op if l == which else np.eye(d))
    return out


def build_hamiltonian(circuit: CircuitSpec, sim: SimConfig,
                      tables: Optional[CouplingTables] = None) -> EffectiveHamiltonian:
    """Assemble the reduced Hamiltonian: shifted levels, exchange block, drives.

    All entries are angular frequencies; drive and tap channels carry the
    conversion gain from volts to rad/s.
    """
    if not circuit.transmons:
        raise ConfigError("circuit has no transmons")
    if tables is None:
        tables = build_tables(circuit, sim)
    dims = tuple(tr.level_count for tr in circuit.transmons)
    dim = int(np.prod(dims))

    static = np.zeros((dim, dim), complex)
    for l, levels in enumerate(tables.lamb_shifted):
        static += _embed(np.diag(levels.astype(complex)), l, dims)

    if tables.exchange is not None and len(dims) >= 2:
        jmat = tables.exchange.values
        for i in range(jmat.shape[0]):
            for j in range(jmat.shape[1]):
                lower = _embed(_ladder_down(dims[0], i), 0, dims)
                raiser = _embed(_ladder_down(dims[1], j).T, 1, dims)
                term = jmat[i, j] * (lower @ raiser)
                static += term + term.conj().T

    n_ops = tuple(_embed(tables.spectra[l].charge_elements, l, dims)
                  for l in range(len(dims)))

    drives = []
    for drv in circuit.direct_drives:
        gain = 2.0 * E * circuit.drive_beta(drv) / HBAR
        drives.append(DriveChannel(operator=n_ops[drv.transmon_id], gain=gain,
                                   pulse=drv.pulse))
    for ct in circuit.crosstalk_drives:
        src = circuit.direct_drives[ct.source_drive]
        gain = ct.spec.amplitude_scale * 2.0 * E * circuit.drive_beta(src) / HBAR
        drives.append(DriveChannel(
            operator=n_ops[ct.transmon_id], gain=gain,
            pulse=pulse_with_phase(src.pulse, ct.spec.phase),
        ))

    taps = []
    for line in circuit.lines:
        for tap in line.taps:
            beta = tap.coupling_capacitance \
                / circuit.transmons[tap.transmon_id].total_capacitance
            taps.append(TapChannel(
                operator=n_ops[tap.transmon_id],
                transmon=tap.transmon_id,
                node_position=tap.position,
                gain=2.0 * E * beta / HBAR,
                current_gain=2.0 * E * beta,
                feels_line=tap.drive_to_qubit_enabled,
                back_action=tap.backaction_enabled,
            ))

    return EffectiveHamiltonian(static=static, n_ops=n_ops, drives=tuple(drives),
                                taps=tuple(taps), dims=dims)


def _ladder_down(dim: int, i: int) -> np.ndarray:
    """|i><i+1| on a single ladder."""
    op = np.zeros((dim, dim), complex)
    op[i, i + 1] = 1.0
    return op


# ---------------------------------------------------------------------------
# initial states and observables

def basis_state(circuit: CircuitSpec, label: str) -> np.ndarray:
    """Amplitude vector for a product label such as "00" or "10"."""
    dims = [tr.level_count for tr in circuit.transmons]
    if len(label) != len(dims):
        raise ConfigError("state label %r needs %d digits" % (label, len(dims)))
    index = 0
    for ch, d in zip(label, dims):
        level = int(ch)
        if not 0 <= level < d:
            raise ConfigError("state label %r outside the level range" % label)
        index = index * d + level
    psi = np.zeros(int(np.prod(dims)), complex)
    psi[index] = 1.0
    return psi


def expectation_n(psi: np.ndarray, which: int,
                  spectra: Sequence[TransmonSpectrum]) -> float:
    """<psi| n^(which) (x) identity |psi>, real by Hermiticity."""
    dims = [sp.level_count for sp in spectra]
    op = _embed(spectra[which].charge_elements, which, dims)
    return float(np.real(np.conj(psi) @ (op @ psi)))


# ---------------------------------------------------------------------------
# shared driver plumbing

def _resolve_steps(t_end: float, dt: float, stride: int) -> int:
    nsteps = int(math.ceil(t_end / dt - 1e-9))
    if nsteps % stride:
        nsteps += stride - nsteps % stride
    return max(nsteps, stride)

def _check_spectral_bound(static: np.ndarray, dt: float) -> None:
    fmax = float(np.max(np.abs(np.linalg.eigvalsh(static)))) / (2.0 * np.pi)
    if fmax > 0 and dt > _SPECTRAL_MARGIN / fmax:
        raise ConfigError(
            "dt = %.3g s too coarse for the qubit spectrum (max %.3g s)"
            % (dt, _SPECTRAL_MARGIN / fmax)
        )


def _resolve_initial(circuit: CircuitSpec,
                     initial: Union[str, np.ndarray, None]) -> np.ndarray:
    if initial is None:
        return basis_state(circuit, "0" * len(circuit.transmons))
    if isinstance(initial, str):
        return basis_state(circuit, initial)
    psi = np.asarray(initial, complex)
    if abs(np.linalg.norm(psi) - 1.0) > 1e-9:
        raise ConfigError("initial state must be normalized")
    return psi


def _run_loop(ham: EffectiveHamiltonian, sim: SimConfig, psi0: np.ndarray,
              dt: float, system: Optional[LineSystem], back_action: bool,
              backend: str) -> Trajectory:
    dim = psi0.shape[0]
    stride = sim.sample_stride
    nsteps = _resolve_steps(sim.t_end, dt, stride)
    nsamp = nsteps // stride + 1
    leapfrog = 1 if sim.integrator == "leapfrog" else 0
    half = 0.0 if leapfrog else 0.5 * dt
    times = np.arange(nsteps) * dt

    drive_ops = np.array([ch.operator for ch in ham.drives]) \
        if ham.drives else np.zeros((0, dim, dim), complex)
    drive_vals = np.zeros((len(ham.drives), nsteps))
    for c, ch in enumerate(ham.drives):
        drive_vals[c] = ch.gain * sample_pulse(ch.pulse, times + half)

    if system is not None:
        nline = system.node_count
        h = system.coords[1] - system.coords[0]
        taps = ham.taps
        tap_nodes = np.array([int(round(ch.node_position / h)) for ch in taps],
                             np.int64)
        src_vals = np.zeros((len(system.source_nodes), nsteps))
        for s, src in enumerate(system.source_pulses):
            src_vals[s] = sample_pulse(src.pulse, times + 0.5 * dt) \
                / src.series_resistance
        src_nodes = np.array(system.source_nodes, np.int64)
        probe_nodes = np.array(system.probe_nodes, np.int64)
        mldt2 = system.mass_lumped / dt ** 2
        dmp2 = system.damping / (2.0 * dt)
        inv_diag = 1.0 / (mldt2 + dmp2)
        kdiag = np.diag(system.stiffness).copy()
        koff = np.diag(system.stiffness, 1).copy()
        short = system.short_mask.astype(np.uint8)
    else:
        taps = ()
        tap_nodes = np.zeros(0, np.int64)
        src_vals = np.zeros((0, nsteps))
        src_nodes = np.zeros(0, np.int64)
        probe_nodes = np.zeros(0, np.int64)
        nline = 0
        mldt2 = dmp2 = inv_diag = kdiag = np.zeros(0)
        koff = np.zeros(0)
        short = np.zeros(0, np.uint8)

    tap_ops = np.array([ch.operator for ch in taps]) \
        if taps else np.zeros((0, dim, dim), complex)
    tap_gain = np.array([ch.gain for ch in taps])
    tap_feel = np.array([1 if ch.feels_line else 0 for ch in taps], np.uint8)
    tap_back = np.array(
        [1 if (back_action and ch.back_action) else 0 for ch in taps], np.uint8)
    tap_igain = np.array([ch.current_gain for ch in taps])
    tap_transmon = np.array([ch.transmon for ch in taps], np.int64)
    n_ops = np.array(ham.n_ops)

    pops = np.zeros((nsamp, dim))
    n_out = np.zeros((len(ham.n_ops), nsamp))
    probe_out = np.zeros((len(probe_nodes), nsamp))
    norm_out = np.zeros(nsamp)
    phi_prev = np.zeros(nline)
    phi = np.zeros(nline)

    code, psi = _kernels.evolve_loop(
        psi0.astype(complex), ham.static,
        drive_ops, drive_vals,
        tap_ops, tap_gain, tap_feel, tap_back, tap_igain, tap_nodes, tap_transmon,
        n_ops,
        mldt2, dmp2, inv_diag, kdiag, koff, short,
        src_nodes, src_vals,
        phi_prev, phi,
        dt, nsteps, stride, probe_nodes, leapfrog,
        pops, n_out, probe_out, norm_out,
    )
    if code == _kernels.ERR_NORM:
        raise StabilityError("qubit state norm drifted beyond 1e-4")
    if code == _kernels.ERR_BLOWUP:
        raise StabilityError("line flux blew up: CFL violation suspected")

    return Trajectory(
        times=np.arange(nsamp) * (stride * dt),
        populations=pops,
        charge=n_out,
        probe_voltages=probe_out,
        norms=norm_out,
        backend=backend,
        final_state=psi,
        metadata={"dt": dt, "nsteps": nsteps, "integrator": sim.integrator,
                  "backend": backend},
    )


# ---------------------------------------------------------------------------
# public backends

def _cosim_line(circuit: CircuitSpec) -> LineSpec:
    for line in circuit.lines:
        if line.taps:
            return line
    raise ConfigError("co-simulation needs a line with at least one tap")


def ms_evolve(circuit: CircuitSpec, sim: SimConfig,
              initial: Union[str, np.ndarray, None] = None,
              back_action: bool = True,
              tables: Optional[CouplingTables] = None) -> Trajectory:
    """Co-evolve the reduced qubit state with the FEM line.

    The qubit advances on integer steps feeling the centered line voltage at
    its taps; the line advances on half-integer steps driven by the tap
    currents (2 e beta) d<n>/dt when ``back_action`` is on.
    """
    line = _cosim_line(circuit)
    system = assemble(line, sim.mesh_elements)
    dt = sim.timestep(circuit)
    if dt > system.cfl_timestep(1.0) * (1.0 + 1e-12):
        raise StabilityError("dt exceeds the line CFL limit")
    if tables is None:
        tables = build_tables(circuit, sim)
    ham = build_hamiltonian(circuit, sim, tables)
    _check_spectral_bound(ham.static, dt)
    psi0 = _resolve_initial(circuit, initial)
    backend = "ms" if back_action else "ms_noba"
    return _run_loop(ham, sim, psi0, dt, system, back_action, backend)


def closed_evolve(circuit: CircuitSpec, sim: SimConfig,
                  initial: Union[str, np.ndarray, None] = None,
                  tables: Optional[CouplingTables] = None) -> Trajectory:
    """Dense evolution of the reduced Hamiltonian with pulse drives only."""
    if tables is None:
        tables = build_tables(circuit, sim)
    ham = build_hamiltonian(circuit, sim, tables)
    dt = sim.timestep(circuit)
    _check_spectral_bound(ham.static, dt)
    psi0 = _resolve_initial(circuit, initial)
    return _run_loop(ham, sim, psi0, dt, None, False, "closed")


def born_evolve(circuit: CircuitSpec, sim: SimConfig,
                initial: Union[str, np.ndarray, None] = None) -> Trajectory:
    """Factorized density-matrix reference for one qubit and one mode.

    The resonator is reduced to its fundamental mode with a coupling strength
    rescaled by cos(pi q01 / w1) to stand in for the true standing-wave
    profile at the tap. Qubit and mode density matrices advance on staggered
    grids, each driven by the latest averaged samples of the other.
    """
    if len(circuit.transmons) != 1:
        raise ConfigError("the density-matrix backend is single-qubit only")
    line = _cosim_line(circuit)
    if len(line.taps) != 1:
        raise ConfigError("the density-matrix backend needs exactly one tap")
    if len(circuit.direct_drives) != 1 or circuit.crosstalk_drives:
        raise ConfigError("the density-matrix backend needs exactly one drive")
    transmon = circuit.transmons[0]
    spectrum = diagonalize(transmon)
    tap = line.taps[0]
    drive = circuit.direct_drives[0]

    modes = eigenmodes(line, 1)
    omega = float(modes.omegas[0])
    q01 = spectrum.transition(0)
    beta_r = tap.coupling_capacitance / transmon.total_capacitance
    g = (2.0 * E * beta_r / HBAR) \
        * math.sqrt(HBAR * omega / (line.length * line.capacitance_per_m)) \
        * math.cos(math.pi * q01 / omega) \
        * abs(modes.tap_factor(tap.position, 1))

    dt = sim.timestep(circuit)
    stride = sim.sample_stride
    nsteps = _resolve_steps(sim.t_end, dt, stride)
    nsamp = nsteps // stride + 1
    times = np.arange(nsteps + 1) * dt
    vd_vals = (2.0 * E * circuit.drive_beta(drive) / HBAR) \
        * sample_pulse(drive.pulse, times)

    psi0 = _resolve_initial(circuit, initial)
    rho_q = np.outer(psi0, np.conj(psi0))
    nf = sim.fock_truncation
    rho_r = np.zeros((nf, nf), complex)
    rho_r[0, 0] = 1.0
    a = np.zeros((nf, nf), complex)
    for n in range(1, nf):
        a[n - 1, n] = math.sqrt(n)
    freq_diff = spectrum.frequencies[:, None] - spectrum.frequencies[None, :]
    n_lab = spectrum.charge_elements.astype(complex)

    pops = np.zeros((nsamp, transmon.level_count))
    n_out = np.zeros(nsamp)
    vr_out = np.zeros(nsamp)
    trace_out = np.zeros(nsamp)
    top_out = np.zeros(nsamp)

    code, rho_final, max_top = _kernels.born_loop(
        rho_q, rho_r, n_lab, freq_diff, a, omega, g, vd_vals,
        dt, nsteps, stride,
        pops, n_out, vr_out, trace_out, top_out,
    )
    if code == _kernels.ERR_NORM:
        raise StabilityError("density-matrix trace drifted beyond 1e-8")
    if max_top > 1e-4:
        import warnings
        warnings.warn(
            "top Fock level reached occupation %.2e; increase fock_truncation"
            % max_top, stacklevel=2)

    return Trajectory(
        times=np.arange(nsamp) * (stride * dt),
        populations=pops,
        charge=n_out[None, :],
        probe_voltages=np.zeros((0, nsamp)),
        norms=trace_out,
        backend="born",
        final_density=rho_final,
        resonator_voltage=vr_out,
        metadata={"dt": dt, "nsteps": nsteps, "backend": "born",
                  "mode_coupling": g, "mode_frequency": omega,
                  "max_top_fock": max_top},
    )


def evolve(circuit: CircuitSpec, sim: SimConfig,
           initial: Union[str, np.ndarray, None] = None,
           tables: Optional[CouplingTables] = None) -> Trajectory:
    """Dispatch on ``sim.backend``."""
    if sim.backend == "ms":
        return ms_evolve(circuit, sim, initial, back_action=True, tables=tables)
    if sim.backend == "ms_noba":
        return ms_evolve(circuit, sim, initial, back_action=False, tables=tables)
    if sim.backend == "closed":
        return closed_evolve(circuit, sim, initial, tables=tables)
    if sim.backend == "born":
        return born_evolve(circuit, sim, initial)
    raise ConfigError("unknown backend %r" % (sim.backend,))


# ---------------------------------------------------------------------------
# gate fidelity

def fidelity(ideal: Sequence[Trajectory], actual: Sequence[Trajectory]) -> float:
    """State-averaged overlap between an ideal gate and a perturbed one.

    Both sequences hold the runs started from |0> and |1> in that order. The
    ideal final states form the columns of the reference unitary U and
    F = (1/2) sum_j |<j|U^dag|psi_j>|^2.
    """
    if len(ideal) != 2 or len(actual) != 2:
        raise ConfigError("fidelity needs the |0> and |1> runs of each method")
    for a, b in zip(ideal, actual):
        if a.final_state is None or b.final_state is None:
            raise ConfigError("fidelity needs amplitude-level final states")
        if a.times.shape != b.times.shape \
                or abs(a.times[-1] - b.times[-1]) > 1e-15 + 1e-9 * a.times[-1]:
            raise ConfigError("fidelity runs were produced on different grids")
    u = np.column_stack([traj.final_state[:2] for traj in ideal])
    total = 0.0
    for j, traj in enumerate(actual):
        total += abs(np.vdot(u[:, j], traj.final_state[:2])) ** 2
    return 0.5 * total
