import dataclasses

import numpy as np
import pytest

from qutritsim.cavity_bloch import (ReadoutSettings, max_steady_photons,
                                    simulate_readout, simulate_readout_batch,
                                    steady_state_field)


def cascade_populations(times, t1):
    """Closed-form 2 -> 1 -> 0 cascade from (0, 0, 1)."""
    g1, g2 = 1.0 / t1[0], 1.0 / t1[1]
    p2 = np.exp(-g2 * times)
    p1 = g2 / (g1 - g2) * (np.exp(-g2 * times) - np.exp(-g1 * times))
    return np.column_stack([1.0 - p1 - p2, p1, p2])


def test_settings_validation():
    with pytest.raises(ValueError, match="dt"):
        ReadoutSettings(dt=0.0)
    with pytest.raises(ValueError, match="t_end"):
        ReadoutSettings(t_start=10.0, t_end=10.0)


def test_time_grid(params, spectrum, settings):
    trace = simulate_readout(params, spectrum, settings, (1.0, 0.0, 0.0))
    n = int(round((settings.t_end - settings.t_start) / settings.dt))
    assert trace.times.shape == (n + 1,)
    assert trace.times[0] == settings.t_start
    assert trace.times[-1] == pytest.approx(settings.t_end)
    assert np.allclose(np.diff(trace.times), settings.dt)
    assert trace.i_quad.shape == trace.times.shape
    assert trace.populations.shape == (n + 1, 3)
    assert trace.amplitudes.shape == (n + 1, 3)


def test_cascade_matches_closed_form(params, spectrum, settings):
    trace = simulate_readout(params, spectrum, settings, (0.0, 0.0, 1.0))
    expected = cascade_populations(trace.times, params.t1)
    assert np.abs(trace.populations - expected).max() < 1e-9


def test_ground_state_is_stationary(params, spectrum, settings):
    trace = simulate_readout(params, spectrum, settings, (1.0, 0.0, 0.0))
    assert np.abs(trace.populations - trace.populations[0]).max() < 1e-12
    # 1/kappa = 1 us: by 3 us the transient has rung up to the steady state
    late = trace.i_quad[trace.times > 3000.0]
    assert np.ptp(late) < 1e-3 * np.abs(trace.i_quad).max()


def test_steady_state_field_matches_late_time(params, spectrum, settings):
    trace = simulate_readout(params, spectrum, settings, (1.0, 0.0, 0.0))
    a0 = steady_state_field(params, spectrum, settings, 0)
    assert trace.amplitudes[-1, 0] == pytest.approx(a0, abs=1e-3 * abs(a0))


def test_signal_linearity_in_initial_populations(params, spectrum, settings):
    """I(t) for a mixed state is the population-weighted sum of the basis
    traces; this linearity is what makes the OLS decomposition exact."""
    basis = [simulate_readout(params, spectrum, settings, p)
             for p in np.eye(3)]
    p = (0.2, 0.3, 0.5)
    mixed = simulate_readout(params, spectrum, settings, p)
    combo = sum(w * tr.i_quad for w, tr in zip(p, basis))
    assert np.abs(mixed.i_quad - combo).max() < 1e-9


def test_batch_agrees_with_single(params, spectrum, settings):
    p_init = np.array([[0.0, 0.0, 1.0], [1.0, 0.0, 0.0]])
    delta = np.array([settings.delta_rm, settings.delta_rm + 2.0])
    times, pops, amps = simulate_readout_batch(params, spectrum, settings,
                                               p_init, delta)
    single = simulate_readout(params, spectrum, settings, (0.0, 0.0, 1.0))
    assert np.array_equal(times, single.times)
    assert np.abs(pops[0] - single.populations).max() < 1e-12
    assert np.abs(amps[0] - single.amplitudes).max() < 1e-12
    # second row uses its own detuning
    shifted = simulate_readout(
        params, spectrum,
        dataclasses.replace(settings, delta_rm=float(delta[1])),
        (1.0, 0.0, 0.0))
    assert np.abs(amps[1] - shifted.amplitudes).max() < 1e-12


def test_invalid_initial_populations(params, spectrum, settings):
    with pytest.raises(ValueError, match="simplex"):
        simulate_readout(params, spectrum, settings, (0.5, 0.2, 0.2))
    with pytest.raises(ValueError, match="simplex"):
        simulate_readout(params, spectrum, settings, (1.2, -0.2, 0.0))
    with pytest.raises(ValueError, match="batch"):
        simulate_readout_batch(params, spectrum, settings,
                               [[1.0, 0.0, 0.0]], [1.0, 2.0])


def test_photon_budget_guard(params, spectrum, settings):
    hot = dataclasses.replace(settings, drive_amp=50.0)
    assert max_steady_photons(params, spectrum, hot) > spectrum.n_crit
    with pytest.raises(ValueError, match="n_crit"):
        simulate_readout(params, spectrum, hot, (1.0, 0.0, 0.0))


def test_quadratures_are_field_sums(params, spectrum, settings):
    trace = simulate_readout(params, spectrum, settings, (0.0, 1.0, 0.0))
    total = trace.amplitudes.sum(axis=1)
    assert np.abs(trace.i_quad - total.real).max() < 1e-12
    assert np.abs(trace.q_quad - total.imag).max() < 1e-12
