"""Charge-basis transmon diagonalization: oracles and structural invariants."""

import math

import numpy as np
import pytest

from cosim.constants import CONSTANTS, H
from cosim.errors import ConfigError
from cosim.model import TransmonSpec
from cosim.spectrum import anharmonicity, diagonalize


def make_spectrum(ej_hz=12e9, c_sigma=67.95e-15, levels=4, cutoff=15):
    return diagonalize(TransmonSpec(ej_hz, c_sigma, levels, cutoff))


def test_frequencies_strictly_increasing():
    sp = make_spectrum()
    assert np.all(np.diff(sp.frequencies) > 0)


def test_ground_level_gauge_zero():
    sp = make_spectrum()
    assert sp.frequencies[0] == 0.0


def test_charge_matrix_hermitian():
    sp = make_spectrum()
    assert np.allclose(sp.charge_elements, sp.charge_elements.conj().T,
                       atol=1e-12)


def test_parity_selection_rules():
    sp = make_spectrum(levels=5, cutoff=20)
    n = sp.charge_elements
    for j in range(5):
        assert abs(n[j, j]) < 1e-12
        if j + 2 < 5:
            assert abs(n[j, j + 2]) < 1e-12


def test_nearest_neighbour_elements_real_nonzero():
    # eigenvector signs are an arbitrary gauge, so only |n_{j,j+1}| is
    # physical; it should be real and grow roughly like sqrt(j+1)
    sp = make_spectrum()
    mags = []
    for j in range(sp.level_count - 1):
        el = sp.charge_elements[j, j + 1]
        assert el.imag == pytest.approx(0.0, abs=1e-14)
        mags.append(abs(el.real))
    assert mags[0] > 0
    assert mags == sorted(mags)


def test_anharmonicity_negative():
    sp = make_spectrum()
    assert anharmonicity(sp) < 0


def test_asymptotic_transition_frequency():
    # deep transmon limit: hbar q01 ~ sqrt(8 E_J E_C) - E_C at E_J/E_C = 50
    c_sigma = 68e-15
    ec = CONSTANTS.e ** 2 / (2.0 * c_sigma)       # joules
    ej_hz = 50.0 * ec / H
    sp = diagonalize(TransmonSpec(ej_hz, c_sigma, 3, 25))
    q01_j = sp.transition(0) * H / (2.0 * math.pi)     # back to joules
    asym = math.sqrt(8.0 * (ej_hz * H) * ec) - ec
    assert q01_j == pytest.approx(asym, rel=0.02)


def test_transition_accessor():
    sp = make_spectrum()
    assert sp.transition(1) == pytest.approx(sp.frequencies[2]
                                             - sp.frequencies[1])


def test_cutoff_convergence_guard():
    with pytest.raises(ConfigError):
        make_spectrum(levels=5, cutoff=6)


def test_spectrum_insensitive_to_cutoff():
    a = make_spectrum(cutoff=15)
    b = make_spectrum(cutoff=30)
    assert np.allclose(a.frequencies, b.frequencies, rtol=1e-9)
    assert np.allclose(np.abs(a.charge_elements), np.abs(b.charge_elements),
                       atol=1e-9)
