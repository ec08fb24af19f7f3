"""Two-port impedance of the qubit-resonator-qubit coupling network.

The network is a cascade seen from the two transmon junctions:
port shunt C_Sigma1 - series C_R1 - uniform line - series C_R2 - shunt C_Sigma2.
Composition is done with ABCD matrices and converted to Z parameters.
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass

import numpy as np

from .errors import DispersiveError
from .model import LineSpec

_POLE_GUARD = 1e-9


@dataclass(frozen=True)
class CouplingNetwork:
    line: LineSpec
    series_cap_1: float   # C_R at port 1, F
    series_cap_2: float   # C_R at port 2, F
    shunt_cap_1: float = 0.0   # port shunt C_Sigma, F
    shunt_cap_2: float = 0.0


def line_abcd(line: LineSpec, omega: float) -> np.ndarray:
    beta = omega * math.sqrt(line.inductance_per_m * line.capacitance_per_m)
    bd = beta * line.length
    if abs(math.sin(bd)) < _POLE_GUARD:
        raise DispersiveError("impedance evaluated too close to a line pole")
    z0 = line.characteristic_impedance
    return np.array([
        [math.cos(bd), 1j * z0 * math.sin(bd)],
        [1j * math.sin(bd) / z0, math.cos(bd)],
    ])


def series_abcd(impedance: complex) -> np.ndarray:
    return np.array([[1.0, impedance], [0.0, 1.0]])


def shunt_abcd(admittance: complex) -> np.ndarray:
    return np.array([[1.0, 0.0], [admittance, 1.0]])


def _cap_impedance(cap: float, omega: float) -> complex:
    return 1.0 / (1j * omega * cap)


def network_impedance(network: CouplingNetwork, omega: float) -> np.ndarray:
    """Complex 2x2 Z matrix (Ohm) at angular frequency omega > 0."""
    if omega <= 0:
        raise DispersiveError("impedance requires omega > 0")
    abcd = np.eye(2, dtype=complex)
    if network.shunt_cap_1 > 0:
        abcd = abcd @ shunt_abcd(1j * omega * network.shunt_cap_1)
    if network.series_cap_1 > 0:
        abcd = abcd @ series_abcd(_cap_impedance(network.series_cap_1, omega))
    abcd = abcd @ line_abcd(network.line, omega)
    if network.series_cap_2 > 0:
        abcd = abcd @ series_abcd(_cap_impedance(network.series_cap_2, omega))
    if network.shunt_cap_2 > 0:
        abcd = abcd @ shunt_abcd(1j * omega * network.shunt_cap_2)

    a, b = abcd[0]
    c, d = abcd[1]
    if abs(c) < 1e-30:
        raise DispersiveError("impedance evaluated too close to a network pole")
    return np.array([
        [a / c, (a * d - b * c) / c],
        [1.0 / c, d / c],
    ])
