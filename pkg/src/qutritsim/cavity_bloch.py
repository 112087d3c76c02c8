"""Three-level cavity-Bloch readout transients.

The measurement tone populates the resonator whose frequency is pulled by
the state-dependent shift s_n. Per level the equations track a conditional
field amplitude A_n (already weighted by the population p_n) while the
populations cascade down through sequential relaxation:

    dp2/dt = -g2 p2,  dp1/dt = g2 p2 - g1 p1,  dp0/dt = g1 p1
    dA_n/dt = [i(Delta_rm - s_n) - kappa/2] A_n - i eps_m p_n
              + g_{n+1} A_{n+1} - g_n A_n

with g_0 = 0 and A_3 = 0. The averaged quadratures are I = Re(sum A_n),
Q = Im(sum A_n), up to one global gain and detection phase which are fixed
to 1 and 0 here.
"""

from dataclasses import dataclass

import numpy as np

from .kernels import MHZ_TO_ANG, cavity_bloch_batch


@dataclass(frozen=True)
class ReadoutSettings:
    """Measurement tone and simulation window.

    ``delta_rm`` is the detuning omega_r - omega_m in MHz (cyclic),
    ``drive_amp`` the measurement amplitude eps_m in MHz, ``t_start``,
    ``t_end`` and ``dt`` the output window and step in ns.
    """

    delta_rm: float = 5.1
    drive_amp: float = 1.0
    t_start: float = 0.0
    t_end: float = 4000.0
    dt: float = 4.0

    def __post_init__(self):
        if self.dt <= 0:
            raise ValueError("dt must be > 0")
        if self.t_end <= self.t_start:
            raise ValueError("t_end must exceed t_start")


@dataclass(frozen=True)
class ReadoutTrace:
    """Time-resolved averaged readout record.

    ``populations`` has shape (n, 3) and ``amplitudes`` holds the three
    complex conditional field amplitudes A_n used to form I and Q.
    """

    times: np.ndarray
    i_quad: np.ndarray
    q_quad: np.ndarray
    populations: np.ndarray
    amplitudes: np.ndarray


def steady_state_field(params, spectrum, settings, n):
    """Stationary conditional field amplitude for a transmon held in level n.

    alpha_n = -i eps_m / (kappa/2 + i (s_n - delta_rm)); the angular 2pi
    factors cancel so the MHz inputs can be used directly. The magnitude
    peaks when the tone sits on the pulled cavity line, delta_rm = s_n.
    """
    if n not in (0, 1, 2):
        raise ValueError("level index must be 0, 1 or 2")
    denom = 0.5 * params.kappa + 1j * (spectrum.s_n[n] - settings.delta_rm)
    return -1j * settings.drive_amp / denom


def max_steady_photons(params, spectrum, settings):
    """Largest steady-state cavity population over the three levels."""
    return max(abs(steady_state_field(params, spectrum, settings, n)) ** 2
               for n in range(3))


def _check_photon_budget(params, spectrum, settings):
    n_bar = max_steady_photons(params, spectrum, settings)
    if n_bar >= spectrum.n_crit:
        raise ValueError(
            "steady-state photon number %.2f exceeds n_crit %.2f; "
            "lower drive_amp or move delta_rm off the cavity lines"
            % (n_bar, spectrum.n_crit))


def _integration_plan(params, settings):
    # fixed-step RK4; keep the internal step at or below min(1/(10 kappa), 1 ns)
    dt_max = min(1.0 / (10.0 * params.kappa), 1.0)
    stride = max(1, int(np.ceil(settings.dt / dt_max - 1e-12)))
    n_out = int(round((settings.t_end - settings.t_start) / settings.dt))
    if n_out < 1:
        raise ValueError("window shorter than one output step")
    return stride, n_out


def _decay_rates(params):
    return 1.0 / params.t1[0], 1.0 / params.t1[1]


def simulate_readout_batch(params, spectrum, settings, p_init, delta_rm):
    """Vector version over matching arrays of initial populations/detunings.

    Returns (times, pops (B, n, 3), amps (B, n, 3)). Used by the detuning
    sweeps; ``simulate_readout`` wraps the single-trace case.
    """
    p_init = np.atleast_2d(np.asarray(p_init, dtype=float))
    delta_rm = np.atleast_1d(np.asarray(delta_rm, dtype=float))
    if p_init.shape[0] != delta_rm.shape[0]:
        raise ValueError("p_init and delta_rm batch sizes differ")
    for row in p_init:
        if abs(row.sum() - 1.0) > 1e-9 or np.any(row < -1e-9):
            raise ValueError("initial populations must lie on the simplex")
    _check_photon_budget(params, spectrum, settings)
    stride, n_out = _integration_plan(params, settings)
    g1, g2 = _decay_rates(params)
    dt_int = settings.dt / stride
    pops, amps = cavity_bloch_batch(
        p_init, delta_rm * MHZ_TO_ANG,
        np.asarray(spectrum.s_n) * MHZ_TO_ANG,
        settings.drive_amp * MHZ_TO_ANG, params.kappa * MHZ_TO_ANG,
        g1, g2, dt_int, n_out * stride, stride)
    if not (np.all(np.isfinite(pops)) and np.all(np.isfinite(amps))):
        raise RuntimeError("cavity-Bloch integration diverged; reduce dt")
    times = settings.t_start + settings.dt * np.arange(n_out + 1)
    return times, pops, amps


def simulate_readout(params, spectrum, settings, p_init):
    """Integrate one readout transient from initial populations ``p_init``.

    The cavity starts empty at ``t_start``; populations and conditional
    amplitudes are returned on the output grid together with I and Q.
    """
    times, pops, amps = simulate_readout_batch(
        params, spectrum, settings, [p_init], [settings.delta_rm])
    trace = ReadoutTrace(times=times, i_quad=amps[0].sum(axis=1).real,
                         q_quad=amps[0].sum(axis=1).imag,
                         populations=pops[0], amplitudes=amps[0])
    _validate_trace(trace)
    return trace


def _validate_trace(trace):
    psum = trace.populations.sum(axis=1)
    if np.max(np.abs(psum - 1.0)) > 1e-9:
        raise RuntimeError("population simplex violated by integrator")
    if trace.populations.min() < -1e-9 or trace.populations.max() > 1 + 1e-9:
        raise RuntimeError("population outside [0, 1] by more than 1e-9")


def reference_traces(params, spectrum, settings):
    """Calibration traces for the three basis-state initializations."""
    basis = np.eye(3)
    times, pops, amps = simulate_readout_batch(
        params, spectrum, settings, basis, [settings.delta_rm] * 3)
    traces = []
    for b in range(3):
        trace = ReadoutTrace(times=times, i_quad=amps[b].sum(axis=1).real,
                             q_quad=amps[b].sum(axis=1).imag,
                             populations=pops[b], amplitudes=amps[b])
        _validate_trace(trace)
        traces.append(trace)
    return tuple(traces)
