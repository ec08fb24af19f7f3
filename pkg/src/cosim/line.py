"""1D FEM discretization and leapfrog time stepping of the node-flux wave equation.

Linear hat elements on a uniform mesh; row-sum lumped mass by default, so the
undamped update is fully explicit. The flux lives on half-integer time steps,
its time derivative (the line voltage) on integer steps.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

from .errors import ConfigError, StabilityError
from .model import LineSpec, Open, Resistor, Short, TheveninSource, eval_pulse

_END_OPEN, _END_SHORT, _END_RESISTOR, _END_SOURCE = 0, 1, 2, 3


@dataclass(frozen=True)
class LineSystem:
    spec: LineSpec
    coords: np.ndarray            # node positions, m
    mass_lumped: np.ndarray       # diagonal of the row-sum lumped mass, F
    mass_consistent: np.ndarray   # tridiagonal consistent mass, F (dense)
    stiffness: np.ndarray         # tridiagonal stiffness, 1/H (dense)
    damping: np.ndarray           # diagonal boundary damping, 1/Ohm
    short_mask: np.ndarray        # bool, nodes with essential phi = 0
    source_nodes: tuple[int, ...]
    source_pulses: tuple          # TheveninSource per source node
    tap_nodes: tuple[int, ...]    # one node per spec.taps entry
    probe_nodes: tuple[int, ...]

    @property
    def node_count(self) -> int:
        return len(self.coords)

    def node_at(self, z: float) -> int:
        return int(round(z / (self.coords[1] - self.coords[0])))

    def cfl_timestep(self, safety: float = 0.5) -> float:
        h = self.coords[1] - self.coords[0]
        return safety * h / self.spec.wave_speed

    # ---- time marching -------------------------------------------------

    def new_state(self, dt: float) -> "LineState":
        n = self.node_count
        return LineState(dt=dt, phi_prev=np.zeros(n), phi=np.zeros(n))

    def step(self, state: "LineState", injected: np.ndarray | None, t: float) -> None:
        """Advance the flux from t+dt/2 to t+3dt/2.

        ``injected`` holds external current loads (A) per node collocated at
        t+dt/2; Thevenin boundary sources are evaluated internally at the same
        half-step instant.
        """
        dt = state.dt
        f = np.zeros(self.node_count) if injected is None else np.asarray(injected, float)
        if injected is not None and f.shape != (self.node_count,):
            raise ConfigError("injected current array has wrong length")
        if self.source_nodes:
            f = f.copy() if injected is not None else f
            for node, src in zip(self.source_nodes, self.source_pulses):
                f[node] += eval_pulse(src.pulse, t + 0.5 * dt) / src.series_resistance

        ml = self.mass_lumped / dt ** 2
        dmp = self.damping / (2.0 * dt)
        rhs = f - self.stiffness @ state.phi + ml * (2.0 * state.phi - state.phi_prev) \
            + dmp * state.phi_prev
        phi_new = rhs / (ml + dmp)
        phi_new[self.short_mask] = 0.0

        # physical node flux is ~1e-10 Wb; 1 Wb means the leapfrog exploded
        peak = float(np.max(np.abs(phi_new)))
        if not math.isfinite(peak) or peak > 1.0:
            raise StabilityError("line flux blew up: CFL violation suspected")

        state.phi_prev = state.phi
        state.phi = phi_new

    def sample_phidot(self, state: "LineState", node: int) -> float:
        """Centered voltage estimate (phi^{m+1/2} - phi^{m-1/2}) / dt."""
        if not 0 <= node < self.node_count:
            raise ConfigError("invalid node index %d" % node)
        return (state.phi[node] - state.phi_prev[node]) / state.dt

    def energy(self, state: "LineState") -> float:
        """Discrete energy in the staggered form conserved exactly by leapfrog."""
        phidot = (state.phi - state.phi_prev) / state.dt
        return 0.5 * phidot @ (self.mass_lumped * phidot) \
            + 0.5 * state.phi_prev @ (self.stiffness @ state.phi)

    # ---- spectra -------------------------------------------------------

    def eigenfrequencies(self, count: int, consistent: bool = False) -> np.ndarray:
        """Lowest generalized eigenfrequencies of (K, M) in rad/s."""
        keep = ~self.short_mask
        k = self.stiffness[np.ix_(keep, keep)]
        if consistent:
            m = self.mass_consistent[np.ix_(keep, keep)]
        else:
            m = np.diag(self.mass_lumped[keep])
        vals = scipy.linalg.eigh(k, m, eigvals_only=True)
        vals = np.sqrt(np.clip(vals, 0.0, None))
        nonzero = vals[vals > 1e-6 * vals[-1]]
        return nonzero[:count]


@dataclass
class LineState:
    dt: float
    phi_prev: np.ndarray   # phi at m - 1/2
    phi: np.ndarray        # phi at m + 1/2


def assemble(line: LineSpec, elements: int) -> LineSystem:
    """Build the FEM system for a uniform mesh of linear hat elements."""
    if elements < 2:
        raise ConfigError("mesh must have at least 2 elements")
    n = elements + 1
    h = line.length / elements
    coords = np.linspace(0.0, line.length, n)
    c, l = line.capacitance_per_m, line.inductance_per_m

    mass = np.zeros((n, n))
    stiff = np.zeros((n, n))
    for e in range(elements):
        i = e
        mass[i, i] += c * h / 3.0
        mass[i + 1, i + 1] += c * h / 3.0
        mass[i, i + 1] += c * h / 6.0
        mass[i + 1, i] += c * h / 6.0
        ke = 1.0 / (l * h)
        stiff[i, i] += ke
        stiff[i + 1, i + 1] += ke
        stiff[i, i + 1] -= ke
        stiff[i + 1, i] -= ke

    damping = np.zeros(n)
    short_mask = np.zeros(n, bool)
    source_nodes: list[int] = []
    source_pulses: list[TheveninSource] = []
    for node, term in ((0, line.left_end), (n - 1, line.right_end)):
        if isinstance(term, Open):
            continue
        if isinstance(term, Short):
            short_mask[node] = True
        elif isinstance(term, Resistor):
            damping[node] += 1.0 / term.resistance
        elif isinstance(term, TheveninSource):
            damping[node] += 1.0 / term.series_resistance
            source_nodes.append(node)
            source_pulses.append(term)

    system = LineSystem(
        spec=line,
        coords=coords,
        mass_lumped=mass.sum(axis=1),
        mass_consistent=mass,
        stiffness=stiff,
        damping=damping,
        short_mask=short_mask,
        source_nodes=tuple(source_nodes),
        source_pulses=tuple(source_pulses),
        tap_nodes=tuple(int(round(t.position / h)) for t in line.taps),
        probe_nodes=tuple(int(round(p / h)) for p in line.probes),
    )
    return system


# ---------------------------------------------------------------------------
# analytic eigenmodes of the open-open line

@dataclass(frozen=True)
class ModeData:
    """Standing-wave modes omega_k = k pi v / d of an open-open line."""
    length: float
    capacitance_per_m: float
    omegas: np.ndarray    # (count,), rad/s, k = 1..count

    @property
    def count(self) -> int:
        return len(self.omegas)

    def tap_factor(self, z: float, k: int) -> float:
        """Node-flux amplitude cos(k pi z / d) of mode k at position z."""
        return math.cos(k * math.pi * z / self.length)


def eigenmodes(line: LineSpec, count: int) -> ModeData:
    if not (isinstance(line.left_end, Open) and isinstance(line.right_end, Open)):
        raise ConfigError("analytic eigenmodes require an open-open line")
    if count < 1:
        raise ConfigError("mode count must be >= 1")
    base = math.pi * line.wave_speed / line.length
    return ModeData(
        length=line.length,
        capacitance_per_m=line.capacitance_per_m,
        omegas=base * np.arange(1, count + 1, dtype=float),
    )
