"""Time-evolution backends: structure, conservation, cross-backend checks."""

import dataclasses
import math

import numpy as np
import pytest

from cosim.constants import E, HBAR
from cosim.coupling import build_tables
from cosim.dynamics import (basis_state, born_evolve, build_hamiltonian,
                            closed_evolve, evolve, expectation_n, fidelity,
                            ms_evolve, sample_pulse)
from cosim.errors import ConfigError, StabilityError
from cosim.model import (CircuitSpec, DirectDrive, FlatTopGaussian, LineSpec,
                         ModulatedGaussian, SimConfig, Tap, TransmonSpec)
from cosim.spectrum import diagonalize

TR1 = TransmonSpec(11.7e9, 67.95e-15)
TR2 = TransmonSpec(12.6e9, 67.45e-15)


def two_qubit_circuit(drive=True):
    line = LineSpec(length=5.66e-3, inductance_per_m=0.7e-6,
                    capacitance_per_m=280e-12,
                    taps=(Tap(0.0, 0, 4e-15), Tap(5.66e-3, 1, 4e-15)),
                    probes=(5.66e-3,))
    drives = ()
    if drive:
        pulse = FlatTopGaussian(vmag=140e-6, carrier_freq=5.06e9,
                                duration=20e-9, rise_fall=5e-9, sigma=2e-9,
                                offset=2e-9)
        drives = (DirectDrive(0, pulse, coupling_capacitance=0.1e-15),)
    return CircuitSpec(transmons=(TR1, TR2), lines=(line,),
                       direct_drives=drives)


def single_qubit_circuit(tap_cap=6e-15, vmag=None, area=math.pi,
                         sigma=10e-9, t0=50e-9):
    tr = TransmonSpec(11.0e9, 67.95e-15)
    line = LineSpec(length=5.66e-3, inductance_per_m=0.7e-6,
                    capacitance_per_m=280e-12,
                    taps=(Tap(5.66e-3, 0, tap_cap),))
    sp = diagonalize(tr)
    beta = 0.1e-15 / tr.total_capacitance
    if vmag is None:
        n01 = sp.charge_elements[0, 1].real
        vmag = area * HBAR / (2.0 * E * beta * n01
                              * math.sqrt(2.0 * math.pi) * sigma)
    pulse = ModulatedGaussian(vmag=vmag, offset=t0, sigma=sigma,
                              carrier_freq=sp.transition(0) / (2 * math.pi))
    drive = DirectDrive(0, pulse, coupling_capacitance=0.1e-15)
    return CircuitSpec(transmons=(tr,), lines=(line,), direct_drives=(drive,))


SIM20 = SimConfig(t_end=20e-9, mesh_elements=100, sample_stride=50)


class TestHamiltonianAssembly:
    def test_static_part_hermitian(self):
        circuit = two_qubit_circuit()
        ham = build_hamiltonian(circuit, SIM20)
        assert np.allclose(ham.static, ham.static.conj().T, atol=1e-9)
        for ch in ham.drives:
            assert np.allclose(ch.operator, ch.operator.conj().T, atol=1e-12)

    def test_exchange_block_in_static_part(self):
        circuit = two_qubit_circuit()
        tables = build_tables(circuit, SIM20)
        ham = build_hamiltonian(circuit, SIM20, tables)
        # |01><10| element equals J_00
        assert ham.static[1, 3] == pytest.approx(tables.exchange.values[0, 0])

    def test_tap_channels_reflect_flags(self):
        circuit = two_qubit_circuit()
        line = circuit.lines[0]
        line = dataclasses.replace(
            line, taps=(dataclasses.replace(line.taps[0],
                                            backaction_enabled=False),
                        line.taps[1]))
        circuit = dataclasses.replace(circuit, lines=(line,))
        ham = build_hamiltonian(circuit, SIM20)
        assert ham.taps[0].back_action is False
        assert ham.taps[1].back_action is True

    def test_requires_transmons(self):
        with pytest.raises(ConfigError):
            build_hamiltonian(CircuitSpec(), SIM20)


class TestStatesAndObservables:
    def test_basis_state_indexing(self):
        circuit = two_qubit_circuit()
        psi = basis_state(circuit, "12")
        assert psi[1 * 3 + 2] == 1.0
        assert np.sum(np.abs(psi)) == 1.0

    def test_invalid_labels_rejected(self):
        circuit = two_qubit_circuit()
        with pytest.raises(ConfigError):
            basis_state(circuit, "0")
        with pytest.raises(ConfigError):
            basis_state(circuit, "30")

    def test_charge_expectation_zero_in_basis_state(self):
        circuit = two_qubit_circuit()
        spectra = [diagonalize(tr) for tr in circuit.transmons]
        psi = basis_state(circuit, "10")
        assert expectation_n(psi, 0, spectra) == pytest.approx(0.0, abs=1e-12)


class TestSamplePulse:
    def test_matches_scalar_evaluation(self):
        pulse = FlatTopGaussian(vmag=1.0, carrier_freq=5e9, duration=40e-9,
                                rise_fall=10e-9, sigma=3e-9, offset=5e-9)
        t = np.linspace(0.0, 60e-9, 617)
        sampled = sample_pulse(pulse, t)
        scalar = np.array([pulse(ti) for ti in t])
        assert np.max(np.abs(sampled - scalar)) < 1e-14

    def test_gaussian_matches_scalar_evaluation(self):
        pulse = ModulatedGaussian(vmag=2.0, carrier_freq=4.6e9,
                                  offset=50e-9, sigma=10e-9)
        t = np.linspace(0.0, 100e-9, 311)
        assert np.max(np.abs(sample_pulse(pulse, t)
                             - [pulse(ti) for ti in t])) < 1e-14


class TestClosedEvolution:
    def test_undriven_ground_state_is_stationary(self):
        # |00> has no exchange partner, so it is a static eigenstate
        circuit = two_qubit_circuit(drive=False)
        traj = closed_evolve(circuit, SIM20, "00")
        assert np.max(np.abs(traj.populations[:, 0] - 1.0)) < 1e-9

    def test_undriven_excited_state_leaks_only_weakly(self):
        # |10> exchanges with |01> at rate J but stays mostly put because
        # the qubits are far detuned
        circuit = two_qubit_circuit(drive=False)
        traj = closed_evolve(circuit, SIM20, "10")
        assert np.max(np.abs(traj.populations[:, 3] - 1.0)) < 1e-2
        assert np.max(np.abs(traj.populations[:, 3] - 1.0)) > 1e-7

    def test_norm_and_population_sum_conserved(self):
        circuit = two_qubit_circuit()
        traj = closed_evolve(circuit, SIM20, "00")
        assert np.max(np.abs(traj.norms - 1.0)) < 1e-6
        assert np.max(np.abs(traj.populations.sum(axis=1) - 1.0)) < 1e-6

    def test_resonant_pi_pulse_inverts_qubit(self):
        circuit = single_qubit_circuit(area=math.pi)
        sim = SimConfig(t_end=100e-9, mesh_elements=100, sample_stride=100,
                        include_lamb_shift=False)
        traj = closed_evolve(circuit, sim, "0")
        assert traj.populations[-1, 1] >= 0.999

    def test_leapfrog_matches_exponential_integrator(self):
        circuit = two_qubit_circuit()
        a = closed_evolve(circuit, SIM20, "00")
        sim = dataclasses.replace(SIM20, integrator="leapfrog")
        b = closed_evolve(circuit, sim, "00")
        assert np.max(np.abs(a.populations - b.populations)) < 1e-3

    def test_spectral_bound_enforced(self):
        circuit = two_qubit_circuit()
        sim = dataclasses.replace(SIM20, dt=5e-12)
        with pytest.raises(ConfigError, match="too coarse"):
            closed_evolve(circuit, sim, "00")


class TestCosimEvolution:
    def test_backaction_off_equals_closed_exactly(self):
        circuit = two_qubit_circuit()
        a = ms_evolve(circuit, SIM20, "00", back_action=False)
        b = closed_evolve(circuit, SIM20, "00")
        assert np.max(np.abs(a.populations - b.populations)) < 1e-12
        assert a.backend == "ms_noba"

    def test_backaction_perturbs_trajectory(self):
        circuit = two_qubit_circuit()
        sim = dataclasses.replace(SIM20, t_end=40e-9)
        a = ms_evolve(circuit, sim, "00", back_action=True)
        b = ms_evolve(circuit, sim, "00", back_action=False)
        assert np.max(np.abs(a.populations - b.populations)) > 1e-7
        # back-action also radiates into the line
        assert np.max(np.abs(a.probe_voltages)) > 0.0

    def test_cfl_guard(self):
        circuit = two_qubit_circuit()
        sim = dataclasses.replace(SIM20, dt=1e-12)   # above the mesh CFL
        with pytest.raises(StabilityError):
            ms_evolve(circuit, sim, "00")

    def test_needs_tapped_line(self):
        circuit = CircuitSpec(transmons=(TR1,))
        with pytest.raises(ConfigError):
            ms_evolve(circuit, SIM20, "0")

    def test_trajectory_metadata(self):
        circuit = two_qubit_circuit()
        traj = ms_evolve(circuit, SIM20, "00")
        assert traj.metadata["dt"] == pytest.approx(SIM20.timestep(circuit))
        assert traj.metadata["integrator"] == "expm"
        assert traj.final_state is not None
        assert traj.populations.shape[1] == 9


class TestBornEvolution:
    def test_decoupled_pi_pulse_matches_closed(self):
        circuit = single_qubit_circuit(tap_cap=0.0, area=math.pi)
        sim = SimConfig(t_end=100e-9, mesh_elements=100, sample_stride=100,
                        include_lamb_shift=False)
        born = born_evolve(circuit, sim, "0")
        closed = closed_evolve(circuit, sim, "0")
        assert born.populations[-1, 1] >= 0.999
        assert np.max(np.abs(born.populations - closed.populations)) < 1e-3

    def test_trace_preserved_and_density_physical(self):
        circuit = single_qubit_circuit(area=0.5 * math.pi)
        sim = SimConfig(t_end=100e-9, mesh_elements=100, sample_stride=100,
                        include_lamb_shift=False)
        traj = born_evolve(circuit, sim, "0")
        assert np.max(traj.norms) < 1e-8          # |trace - 1|
        rho = traj.final_density
        assert np.allclose(rho, rho.conj().T, atol=1e-12)
        assert np.min(np.linalg.eigvalsh(rho)) > -1e-6
        assert traj.resonator_voltage is not None

    def test_single_qubit_only(self):
        with pytest.raises(ConfigError):
            born_evolve(two_qubit_circuit(), SIM20, "00")


class TestDispatchAndFidelity:
    def test_dispatch_matches_direct_calls(self):
        circuit = two_qubit_circuit()
        for backend, direct in (
                ("closed", closed_evolve(circuit, SIM20, "00")),
                ("ms", ms_evolve(circuit, SIM20, "00", back_action=True))):
            sim = dataclasses.replace(SIM20, backend=backend)
            via = evolve(circuit, sim, "00")
            assert np.array_equal(via.populations, direct.populations)

    def test_identical_runs_have_unit_fidelity(self):
        circuit = single_qubit_circuit(area=math.pi)
        sim = SimConfig(t_end=100e-9, mesh_elements=100, sample_stride=100,
                        include_lamb_shift=False)
        runs = [closed_evolve(circuit, sim, s) for s in ("0", "1")]
        assert fidelity(runs, runs) == pytest.approx(1.0, abs=1e-9)

    def test_fidelity_detects_rotation(self):
        circuit = single_qubit_circuit(area=math.pi)
        half = single_qubit_circuit(area=0.5 * math.pi)
        sim = SimConfig(t_end=100e-9, mesh_elements=100, sample_stride=100,
                        include_lamb_shift=False)
        ideal = [closed_evolve(circuit, sim, s) for s in ("0", "1")]
        actual = [closed_evolve(half, sim, s) for s in ("0", "1")]
        value = fidelity(ideal, actual)
        assert value < 0.99

    def test_fidelity_needs_two_runs(self):
        circuit = single_qubit_circuit()
        sim = SimConfig(t_end=20e-9, mesh_elements=100, sample_stride=100)
        traj = closed_evolve(circuit, sim, "0")
        with pytest.raises(ConfigError):
            fidelity([traj], [traj])


class TestTimestepRefinement:
    def test_halving_dt_changes_little(self):
        circuit = single_qubit_circuit(area=1.5 * math.pi)
        base = SimConfig(t_end=60e-9, mesh_elements=100, sample_stride=100,
                         include_lamb_shift=False)
        fine = dataclasses.replace(
            base, dt=0.5 * base.timestep(circuit), sample_stride=200)
        from cosim.analysis import compare
        for backend in ("ms", "ms_noba", "closed", "born"):
            a = evolve(circuit, dataclasses.replace(base, backend=backend),
                       "0")
            b = evolve(circuit, dataclasses.replace(fine, backend=backend),
                       "0")
            m = compare(a, b)
            assert m["max_pop_diff"] < 1e-3, backend
