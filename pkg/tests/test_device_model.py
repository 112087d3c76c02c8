import dataclasses
import math

import numpy as np
import pytest

from qutritsim.device_model import (DeviceParams, dispersive_spectrum,
                                    level_frequencies, reference_device,
                                    shift_vs_qubit_frequency)


def closed_form_shifts():
    # independent evaluation of chi_n = g_n^2 / Delta_n and
    # s_n = -(chi_n - chi_{n-1}) with the reference numbers
    g = (115.0, 1.43 * 115.0, math.sqrt(3.0) * 115.0)
    delta = (5623.1 - 6942.1, 5623.1 - 298.0 - 6942.1,
             5623.1 - 596.0 - 6942.1)
    chi = [gn * gn / dn for gn, dn in zip(g, delta)]
    return (-chi[0], -(chi[1] - chi[0]), -(chi[2] - chi[1]))


def test_reference_shifts_match_closed_form(spectrum):
    target = closed_form_shifts()
    for got, want in zip(spectrum.s_n, target):
        assert got == pytest.approx(want, abs=1e-12)
    # frozen decimals, so a silent formula change cannot pass
    assert np.allclose(spectrum.s_n, (10.0265, 6.6981, 3.9933), atol=1e-3)


def test_shift_ordering_and_signs(spectrum):
    s0, s1, s2 = spectrum.s_n
    assert s0 > s1 > s2 > 0
    assert all(c < 0 for c in spectrum.chi_n)      # negative detunings
    assert all(d < 0 for d in spectrum.delta_n)


def test_critical_photon_number(spectrum):
    assert spectrum.n_crit == pytest.approx(1319.0 ** 2 / (4 * 115.0 ** 2),
                                            rel=1e-12)
    assert spectrum.n_crit == pytest.approx(32.888, abs=1e-3)


def test_level_frequencies_duffing(params):
    w = level_frequencies(params)
    assert w[0] == 0.0
    assert w[1] == pytest.approx(params.omega_01)
    assert w[2] == pytest.approx(2 * params.omega_01 + params.anharmonicity)
    # anharmonicity is exactly omega_12 - omega_01
    assert (w[2] - w[1]) - (w[1] - w[0]) == pytest.approx(
        params.anharmonicity)


def test_anharmonicity_defaults_to_minus_charging_energy():
    p = DeviceParams(charging_energy=298.0)
    assert p.anharmonicity == -298.0
    assert p.eta[2] == pytest.approx(math.sqrt(3.0))


def test_replace_revalidates(params):
    with pytest.raises(ValueError, match="dispersive regime"):
        dataclasses.replace(params, omega_01=6900.0)
    with pytest.raises(ValueError, match="kappa"):
        dataclasses.replace(params, kappa=0.0)


@pytest.mark.parametrize("kwargs, match", [
    (dict(g0=-1.0), "g0"),
    (dict(t1=(0.0, 700.0)), "t1"),
    (dict(t2=(None, -5.0)), "t2"),
    (dict(eta=(1.1, 1.43, 1.7)), "eta"),
    (dict(eta=(1.0,)), "eta"),
    (dict(n_levels=4), "n_levels"),
    (dict(omega_01=6942.1), "resonant"),
])
def test_parameter_validation(kwargs, match):
    with pytest.raises(ValueError, match=match):
        reference_device(**kwargs)


def test_t2_none_means_relaxation_limited(params):
    assert params.t2[0] is None
    assert params.t2[1] == 500.0


def test_shift_sweep_rows(params):
    grid = np.linspace(4500.0, 6300.0, 10)
    rows = shift_vs_qubit_frequency(params, grid)
    assert rows.shape == (10, 4)
    assert np.array_equal(rows[:, 0], grid)
    # each row equals a direct single-point evaluation
    spec = dispersive_spectrum(dataclasses.replace(params,
                                                   omega_01=float(grid[3])))
    assert np.allclose(rows[3, 1:], spec.s_n, atol=1e-12)
    # shifts grow toward the resonator
    assert rows[-1, 1] > rows[0, 1]


def test_shift_sweep_collects_bad_points(params):
    with pytest.raises(ValueError) as err:
        shift_vs_qubit_frequency(params, [5600.0, 6800.0, 6900.0])
    msg = str(err.value)
    assert "6800" in msg and "6900" in msg and "5600" not in msg
