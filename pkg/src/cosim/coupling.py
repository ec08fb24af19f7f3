"""Dispersive coupling coefficients: mode couplings, shifts and exchange rates.

Everything here is a pure function of the diagonalized transmon spectra and the
resonator description. The exchange rate J between two tapped transmons is
computed by two independent routes (virtual-photon mode sum and two-port
impedance) that agree at the sub-percent level in the dispersive regime.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, replace
from typing import Optional, Sequence

import numpy as np
from scipy.optimize import brentq

from .constants import E, HBAR
from .errors import ConfigError, ConvergenceError, DispersiveError
from .line import ModeData, eigenmodes
from .model import CircuitSpec, LineSpec, SimConfig, Tap, TransmonSpec, beta_factor
from .network import CouplingNetwork, network_impedance
from .spectrum import TransmonSpectrum, diagonalize

_RESONANCE_TOL = 1e-6      # relative detuning below which we refuse to divide
_DISPERSIVE_WARN = 0.3     # |B| beyond this is outside the perturbative window


@dataclass(frozen=True)
class ExchangeResult:
    """Exchange rates J_ij (rad/s) over transition pairs, with provenance."""
    values: np.ndarray       # (levels1 - 1, levels2 - 1)
    route: str               # "modesum(N)" or "impedance"
    convergence: Optional[float] = None   # rad/s, mode-sum truncation estimate


@dataclass(frozen=True)
class TapCoupling:
    """One transmon's capacitive connection to a resonator line."""
    spectrum: TransmonSpectrum
    beta: float                # voltage divider C_tap / C_Sigma
    position: float            # m along the line
    load_capacitance: float    # capacitance the line sees at the tap, F


def tap_coupling(spectrum: TransmonSpectrum, transmon: TransmonSpec,
                 tap: Tap) -> TapCoupling:
    """Bundle the per-tap quantities used by the exchange calculations.

    The line is loaded by the tap capacitance in series with the rest of the
    transmon shunt, C_tap (1 - beta).
    """
    beta = beta_factor(transmon, tap.coupling_capacitance)
    return TapCoupling(
        spectrum=spectrum,
        beta=beta,
        position=tap.position,
        load_capacitance=tap.coupling_capacitance * (1.0 - beta),
    )


def mode_couplings(spectrum: TransmonSpectrum, modes: ModeData, beta: float,
                   position: float) -> np.ndarray:
    """Coupling rates g_{j,k} (rad/s) between ladder transitions and line modes.

    g_{j,k} = n_{j,j+1} * (2 e beta / hbar) * sqrt(hbar w_k / (d C)) * cos(k pi z / d)
    """
    levels = spectrum.level_count
    k = np.arange(1, modes.count + 1)
    profile = np.cos(k * np.pi * position / modes.length)
    g_mode = (2.0 * E * beta / HBAR) \
        * np.sqrt(HBAR * modes.omegas / (modes.length * modes.capacitance_per_m)) \
        * profile
    n_ladder = np.array([spectrum.charge_elements[j, j + 1].real
                         for j in range(levels - 1)])
    return n_ladder[:, None] * g_mode[None, :]


def dispersive_coefficients(spectrum: TransmonSpectrum, g: np.ndarray,
                            modes: ModeData):
    """Per-transition shifts chi_{j,k}, mixing angles B_{j,k}, shifted levels.

    Returns (chi, b, shifted) where chi and b are (levels-1, modes) arrays and
    shifted[j+1] = q_{j+1} + sum_k chi_{j,k}, with shifted[0] = 0.
    """
    levels = spectrum.level_count
    if g.shape != (levels - 1, modes.count):
        raise ConfigError("coupling table shape does not match spectrum and modes")
    q = np.array([spectrum.transition(j) for j in range(levels - 1)])
    det = q[:, None] - modes.omegas[None, :]
    if np.min(np.abs(det)) < _RESONANCE_TOL * np.max(modes.omegas):
        raise DispersiveError(
            "dispersive breakdown: a transition is resonant with a line mode"
        )
    b = g / det
    chi = g * b
    if np.max(np.abs(b)) > _DISPERSIVE_WARN:
        warnings.warn(
            "mixing angle |B| exceeds %.1f; dispersive expressions are unreliable"
            % _DISPERSIVE_WARN,
            stacklevel=2,
        )
    shifted = spectrum.frequencies.copy()
    shifted[1:] += chi.sum(axis=1)
    return chi, b, shifted


def _loaded_omegas(modes: ModeData, ports: Sequence[TapCoupling]) -> np.ndarray:
    """Mode frequencies corrected for the capacitive loading at the taps.

    A point capacitance C_e at z shifts mode k by dw/w = -C_e cos^2(k pi z/d)/(d C),
    first order in C_e / (d C).
    """
    k = np.arange(1, modes.count + 1)
    shift = np.zeros(modes.count)
    for port in ports:
        weight = np.cos(k * np.pi * port.position / modes.length) ** 2
        shift += port.load_capacitance * weight
    return modes.omegas * (1.0 - shift / (modes.length * modes.capacitance_per_m))


def j_modesum(port1: TapCoupling, port2: TapCoupling, modes: ModeData,
              mode_pairs: int = 200) -> ExchangeResult:
    """Exchange rates from the virtual-photon sum over resonator modes.

    Each mode contributes (g1 g2 / 2)[1/(q1-w) - 1/(q1+w) + 1/(q2-w) - 1/(q2+w)]
    at the tap-loaded mode frequency w. Raw partial sums alternate with mode
    parity, so the result is the average of the N and N+1 truncations.
    """
    if mode_pairs < 1:
        raise ConfigError("mode_pairs must be >= 1")
    if modes.count < mode_pairs + 1:
        raise ConfigError("need at least mode_pairs + 1 modes")
    omegas = _loaded_omegas(modes, (port1, port2))
    loaded = ModeData(length=modes.length,
                      capacitance_per_m=modes.capacitance_per_m, omegas=omegas)
    g1 = mode_couplings(port1.spectrum, loaded, port1.beta, port1.position)
    g2 = mode_couplings(port2.spectrum, loaded, port2.beta, port2.position)
    q1 = np.array([port1.spectrum.transition(i)
                   for i in range(port1.spectrum.level_count - 1)])
    q2 = np.array([port2.spectrum.transition(j)
                   for j in range(port2.spectrum.level_count - 1)])
    if min(np.min(np.abs(q1[:, None] - omegas[None, :])),
           np.min(np.abs(q2[:, None] - omegas[None, :]))) \
            < _RESONANCE_TOL * omegas[-1]:
        raise DispersiveError(
            "dispersive breakdown: a transition is resonant with a line mode"
        )

    w = omegas[None, None, :]
    weight = 0.5 * (1.0 / (q1[:, None, None] - w) - 1.0 / (q1[:, None, None] + w)
                    + 1.0 / (q2[None, :, None] - w) - 1.0 / (q2[None, :, None] + w))
    terms = g1[:, None, :] * g2[None, :, :] * weight
    partial = np.cumsum(terms, axis=2)
    paired = 0.5 * (partial[:, :, :-1] + partial[:, :, 1:])
    values = paired[:, :, mode_pairs - 1]
    if mode_pairs >= 2:
        conv = float(np.max(np.abs(paired[:, :, mode_pairs - 1]
                                   - paired[:, :, mode_pairs - 2])))
    else:
        conv = float(np.max(np.abs(values - partial[:, :, 0])))
    return ExchangeResult(values=values, route="modesum(%d)" % mode_pairs,
                          convergence=conv)


def j_impedance(spectrum1: TransmonSpectrum, spectrum2: TransmonSpectrum,
                network: CouplingNetwork,
                frequencies: Optional[tuple[np.ndarray, np.ndarray]] = None,
                ) -> ExchangeResult:
    """Exchange rates from the transfer impedance of the coupling network.

    J_ij = -(2 e^2 / hbar) n1_{i,i+1} n2_{j,j+1}
           [q1 Im Z12(q1) + q2 Im Z21(q2)]

    The overall sign places the two port currents in the cascade convention
    (current flowing out of port 2), which makes this route agree with the
    mode-sum route rather than being its mirror image. By default the
    impedance is evaluated at the bare transition frequencies; pass
    ``frequencies`` to use shifted values instead.
    """
    if frequencies is None:
        q1 = np.array([spectrum1.transition(i)
                       for i in range(spectrum1.level_count - 1)])
        q2 = np.array([spectrum2.transition(j)
                       for j in range(spectrum2.level_count - 1)])
    else:
        q1, q2 = (np.asarray(f, float) for f in frequencies)
    n1 = np.array([spectrum1.charge_elements[i, i + 1].real
                   for i in range(len(q1))])
    n2 = np.array([spectrum2.charge_elements[j, j + 1].real
                   for j in range(len(q2))])
    z12 = np.array([network_impedance(network, w)[0, 1].imag for w in q1])
    z21 = np.array([network_impedance(network, w)[1, 0].imag for w in q2])
    values = -2.0 * (E ** 2 / HBAR) * n1[:, None] * n2[None, :] \
        * (q1[:, None] * z12[:, None] + q2[None, :] * z21[None, :])
    return ExchangeResult(values=values, route="impedance")


# ---------------------------------------------------------------------------
# circuit-level tables

@dataclass(frozen=True)
class CouplingTables:
    """All static coefficients needed by the reduced qubit Hamiltonian."""
    spectra: tuple[TransmonSpectrum, ...]
    g: tuple[np.ndarray, ...]             # (levels-1, modes) per transmon
    chi: tuple[np.ndarray, ...]
    b: tuple[np.ndarray, ...]
    lamb_shifted: tuple[np.ndarray, ...]  # level frequencies q-bar, rad/s
    exchange: Optional[ExchangeResult]    # between the first two tapped transmons

    def qbar_transition(self, transmon: int, j: int) -> float:
        levels = self.lamb_shifted[transmon]
        return levels[j + 1] - levels[j]


def _resonator_line(circuit: CircuitSpec) -> Optional[LineSpec]:
    for line in circuit.lines:
        if line.taps:
            return line
    return None


def build_tables(circuit: CircuitSpec, sim: SimConfig) -> CouplingTables:
    """Diagonalize every transmon and assemble its coupling tables.

    Uses the first tapped line for the mode expansion; transmons without taps
    get zero coupling rows and unshifted frequencies. The exchange block is
    computed (mode-sum route) when that line carries at least two taps.
    """
    spectra = tuple(diagonalize(tr) for tr in circuit.transmons)
    line = _resonator_line(circuit)
    n_modes = max(sim.lamb_modes, 1)

    g_list, chi_list, b_list, lamb_list = [], [], [], []
    if line is None:
        for sp in spectra:
            g_list.append(np.zeros((sp.level_count - 1, n_modes)))
            chi_list.append(np.zeros((sp.level_count - 1, n_modes)))
            b_list.append(np.zeros((sp.level_count - 1, n_modes)))
            lamb_list.append(sp.frequencies.copy())
        return CouplingTables(spectra=spectra, g=tuple(g_list),
                              chi=tuple(chi_list), b=tuple(b_list),
                              lamb_shifted=tuple(lamb_list), exchange=None)

    modes = eigenmodes(line, n_modes)
    tap_of = {tap.transmon_id: tap for tap in line.taps}
    for idx, (tr, sp) in enumerate(zip(circuit.transmons, spectra)):
        tap = tap_of.get(idx)
        if tap is None:
            g_list.append(np.zeros((sp.level_count - 1, n_modes)))
            chi_list.append(np.zeros((sp.level_count - 1, n_modes)))
            b_list.append(np.zeros((sp.level_count - 1, n_modes)))
            lamb_list.append(sp.frequencies.copy())
            continue
        beta = beta_factor(tr, tap.coupling_capacitance)
        g = mode_couplings(sp, modes, beta, tap.position)
        chi, b, shifted = dispersive_coefficients(sp, g, modes)
        g_list.append(g)
        chi_list.append(chi)
        b_list.append(b)
        lamb_list.append(shifted if sim.include_lamb_shift else sp.frequencies.copy())

    exchange = None
    if len(line.taps) >= 2:
        t1, t2 = line.taps[0], line.taps[1]
        ports = (
            tap_coupling(spectra[t1.transmon_id], circuit.transmons[t1.transmon_id], t1),
            tap_coupling(spectra[t2.transmon_id], circuit.transmons[t2.transmon_id], t2),
        )
        sum_modes = eigenmodes(line, sim.j_mode_pairs + 1)
        exchange = j_modesum(ports[0], ports[1], sum_modes,
                             mode_pairs=sim.j_mode_pairs)

    return CouplingTables(spectra=spectra, g=tuple(g_list), chi=tuple(chi_list),
                          b=tuple(b_list), lamb_shifted=tuple(lamb_list),
                          exchange=exchange)


def coupling_network(circuit: CircuitSpec) -> CouplingNetwork:
    """Two-port network between the first two tapped junctions of a circuit.

    Each junction port sees its transmon shunt (total capacitance minus the
    tap) in parallel, then the tap capacitance in series with the line.
    """
    line = _resonator_line(circuit)
    if line is None or len(line.taps) < 2:
        raise ConfigError("impedance route needs a line with two taps")
    t1, t2 = line.taps[0], line.taps[1]
    tr1 = circuit.transmons[t1.transmon_id]
    tr2 = circuit.transmons[t2.transmon_id]
    return CouplingNetwork(
        line=line,
        series_cap_1=t1.coupling_capacitance,
        series_cap_2=t2.coupling_capacitance,
        shunt_cap_1=tr1.total_capacitance - t1.coupling_capacitance,
        shunt_cap_2=tr2.total_capacitance - t2.coupling_capacitance,
    )


# ---------------------------------------------------------------------------
# device tuning

def tune_josephson_energy(target_qbar01: float, transmon: TransmonSpec,
                          line: Optional[LineSpec] = None,
                          tap: Optional[Tap] = None,
                          lamb_modes: int = 5) -> TransmonSpec:
    """Return a copy of ``transmon`` whose shifted q01 equals the target.

    ``target_qbar01`` is angular (rad/s). When a line and tap are given the
    target includes the static frequency shift from the line modes; otherwise
    it is the bare transition.
    """
    if target_qbar01 <= 0:
        raise ConfigError("target transition frequency must be > 0")
    modes = eigenmodes(line, lamb_modes) if line is not None else None

    def qbar01(ej_hz: float) -> float:
        sp = diagonalize(replace(transmon, josephson_energy=ej_hz))
        value = sp.transition(0)
        if modes is not None and tap is not None:
            beta = beta_factor(transmon, tap.coupling_capacitance)
            g = mode_couplings(sp, modes, beta, tap.position)
            _, _, shifted = dispersive_coefficients(sp, g, modes)
            value = shifted[1] - shifted[0]
        return value

    lo, hi = transmon.josephson_energy / 8.0, transmon.josephson_energy * 8.0
    f_lo, f_hi = qbar01(lo) - target_qbar01, qbar01(hi) - target_qbar01
    if f_lo * f_hi > 0:
        raise ConvergenceError("target transition frequency not bracketed")
    ej = brentq(lambda x: qbar01(x) - target_qbar01, lo, hi, xtol=1.0)
    return replace(transmon, josephson_energy=ej)
