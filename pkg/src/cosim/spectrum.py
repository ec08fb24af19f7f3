"""Free-transmon diagonalization in the charge basis."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .constants import H, HBAR
from .errors import ConfigError, ConvergenceError
from .model import TransmonSpec


@dataclass(frozen=True)
class TransmonSpectrum:
    """Eigenfrequencies (rad/s, gauge q_0 = 0) and charge matrix elements."""
    frequencies: np.ndarray        # (levels,)
    charge_elements: np.ndarray    # complex (levels, levels)
    charging_energy: float         # J

    @property
    def level_count(self) -> int:
        return len(self.frequencies)

    def transition(self, j: int) -> float:
        """q_{j,j+1} = q_{j+1} - q_j in rad/s."""
        return self.frequencies[j + 1] - self.frequencies[j]


def _solve_charge_basis(ej_hz: float, ec_joule: float, cutoff: int, levels: int):
    n = np.arange(-cutoff, cutoff + 1, dtype=float)
    ej = H * ej_hz
    ham = np.diag(4.0 * ec_joule * n ** 2)
    off = np.full(2 * cutoff, -ej / 2.0)
    ham += np.diag(off, 1) + np.diag(off, -1)
    energies, vecs = np.linalg.eigh(ham)
    energies = energies[:levels]
    vecs = vecs[:, :levels]
    nmat = vecs.T @ (n[:, None] * vecs)   # real symmetric here (real eigenvectors)
    return energies, nmat


def diagonalize(spec: TransmonSpec) -> TransmonSpectrum:
    """Diagonalize H = 4 E_C n^2 - (E_J/2)(|n><n+1| + h.c.) at zero offset charge.

    Eigenvector phases are fixed so every nearest-neighbour charge element
    n_{j,j+1} is real and positive.
    """
    levels = spec.level_count
    if spec.charge_cutoff < levels + 4:
        raise ConfigError("charge_cutoff must be at least level_count + 4")
    ec = spec.charging_energy
    energies, nmat = _solve_charge_basis(spec.josephson_energy, ec,
                                         spec.charge_cutoff, levels)
    energies2, _ = _solve_charge_basis(spec.josephson_energy, ec,
                                       spec.charge_cutoff + 2, levels)
    scale = np.abs(energies2[-1] - energies2[0])
    if np.max(np.abs(energies - energies2)) > 1e-9 * scale:
        raise ConvergenceError(
            "transmon spectrum not converged at charge_cutoff=%d" % spec.charge_cutoff
        )

    # gauge: flip eigenvector signs left to right so n_{j,j+1} > 0
    signs = np.ones(levels)
    for j in range(levels - 1):
        if nmat[j, j + 1] * signs[j] < 0:
            signs[j + 1] = -signs[j]
        else:
            signs[j + 1] = signs[j]
    nmat = signs[:, None] * nmat * signs[None, :]

    freqs = (energies - energies[0]) / HBAR
    return TransmonSpectrum(
        frequencies=freqs,
        charge_elements=nmat.astype(complex),
        charging_energy=ec,
    )


def anharmonicity(spectrum: TransmonSpectrum) -> float:
    """q_{1,2} - q_{0,1} in rad/s; needs at least three levels."""
    if spectrum.level_count < 3:
        raise ConfigError("anharmonicity needs level_count >= 3")
    return spectrum.transition(1) - spectrum.transition(0)
