"""Fixed physical constants (CODATA 2018 exact values)."""

from dataclasses import dataclass
import math


@dataclass(frozen=True)
class PhysicalConstants:
    e: float = 1.602176634e-19        # elementary charge, C
    h: float = 6.62607015e-34         # Planck constant, J s
    hbar: float = 6.62607015e-34 / (2.0 * math.pi)


CONSTANTS = PhysicalConstants()

E = CONSTANTS.e
H = CONSTANTS.h
HBAR = CONSTANTS.hbar
