"""End-to-end experiment drivers.

Each driver composes preparation, pulse propagation, readout simulation
and reconstruction into one reproducible procedure. All of them are
deterministic functions of their arguments plus an integer seed; sweep
points are merged by sweep index, never by completion order.
"""

import math
from dataclasses import dataclass, replace

import numpy as np
from scipy.optimize import least_squares

from . import pulse_control as pc
from . import reconstruction as rc
from .cavity_bloch import (ReadoutSettings, reference_traces,
                           simulate_readout, simulate_readout_batch)
from .device_model import dispersive_spectrum
from .kernels import MHZ_TO_ANG

KINDS = ("ReadoutBasis", "DecayMap", "Rabi", "Ramsey12", "Tomography",
         "FidelityBatch")


@dataclass
class ExperimentResult:
    """Uniform container for one experiment run.

    ``payload`` holds raw curves and matrices; every key listed in
    ``per_point`` must have its first axis aligned with ``sweep_values``.
    ``fit_params`` maps extracted quantities to floats, with ``_err``
    companions where a meaningful uncertainty exists.
    """

    kind: str
    sweep_label: str
    sweep_values: np.ndarray
    payload: dict
    fit_params: dict
    per_point: tuple = ()

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError("unknown experiment kind %r" % (self.kind,))
        self.sweep_values = np.asarray(self.sweep_values)
        n = len(self.sweep_values)
        for key in self.per_point:
            if len(self.payload[key]) != n:
                raise ValueError(
                    "payload %r has %d entries for %d sweep points"
                    % (key, len(self.payload[key]), n))


@dataclass(frozen=True)
class NoiseModel:
    """Additive Gaussian noise on the integrated readout values.

    ``sigma`` is an absolute standard deviation in the units of the
    integrated I quadrature; when unset it defaults to ``fraction`` of
    the span of the measurement eigenvalues, calibrated so that the
    bootstrapped density-matrix element spreads come out near 0.02.
    """

    sigma: float = None
    fraction: float = 0.015

    def resolve(self, m_values):
        if self.sigma is not None:
            if self.sigma < 0:
                raise ValueError("sigma must be >= 0")
            return float(self.sigma)
        return self.fraction * (max(m_values) - min(m_values))


def _fit_errors(result, n_points):
    # 1-sigma parameter errors from the Gauss-Newton approximation
    dof = max(n_points - result.x.size, 1)
    jtj = result.jac.T @ result.jac
    try:
        cov = np.linalg.inv(jtj) * (2.0 * result.cost / dof)
    except np.linalg.LinAlgError:
        return np.full(result.x.size, np.nan)
    return np.sqrt(np.clip(np.diag(cov), 0.0, None))


def _integrate_window(times, values, window):
    mask = times <= window + 1e-9
    return float(np.trapezoid(values[mask], times[mask]))


# ---------------------------------------------------------------------------
# basis-state readout characterization
# ---------------------------------------------------------------------------

def run_readout_basis(params, settings=None, spectrum=None):
    """Prepare |0>, |1>, |2> and characterize their readout transients.

    Each prepared state is measured once; the dispersive shift of the
    addressed level and (for the excited states) its relaxation time are
    then refit against the same transient model, seeded away from the
    configured values so the fit does real work.
    """
    settings = settings or ReadoutSettings()
    if spectrum is None:
        spectrum = dispersive_spectrum(params)
    preps = []
    for n in range(3):
        target = np.zeros(3)
        target[n] = 1.0
        _, achieved = pc.prepare_state(params, target)
        preps.append(achieved.populations)
    traces = [simulate_readout(params, spectrum, settings, p)
              for p in preps]

    def model(s_value, level, t1_pair):
        shifts = list(spectrum.s_n)
        shifts[level] = s_value
        mod_spec = replace(spectrum, s_n=tuple(shifts))
        mod_par = replace(params, t1=t1_pair, t2=params.t2)
        tr = simulate_readout(mod_par, mod_spec, settings, preps[level])
        return np.concatenate([tr.i_quad, tr.q_quad])

    fits = {}
    data = [np.concatenate([tr.i_quad, tr.q_quad]) for tr in traces]

    r0 = least_squares(
        lambda x: model(x[0], 0, params.t1) - data[0],
        x0=[spectrum.s_n[0] + 0.5], bounds=([0.0], [20.0]))
    err0 = _fit_errors(r0, data[0].size)
    fits["s0_MHz"], fits["s0_MHz_err"] = float(r0.x[0]), float(err0[0])

    r1 = least_squares(
        lambda x: model(x[0], 1, (x[1], params.t1[1])) - data[1],
        x0=[spectrum.s_n[1] + 0.5, 1.2 * params.t1[0]],
        bounds=([0.0, 100.0], [20.0, 5000.0]))
    err1 = _fit_errors(r1, data[1].size)
    fits["s1_MHz"], fits["s1_MHz_err"] = float(r1.x[0]), float(err1[0])
    fits["t1_1_ns"], fits["t1_1_ns_err"] = float(r1.x[1]), float(err1[1])

    r2 = least_squares(
        lambda x: model(x[0], 2, (fits["t1_1_ns"], x[1])) - data[2],
        x0=[spectrum.s_n[2] + 0.5, 1.2 * params.t1[1]],
        bounds=([0.0, 100.0], [20.0, 5000.0]))
    err2 = _fit_errors(r2, data[2].size)
    fits["s2_MHz"], fits["s2_MHz_err"] = float(r2.x[0]), float(err2[0])
    fits["t1_2_ns"], fits["t1_2_ns_err"] = float(r2.x[1]), float(err2[1])

    payload = {
        "times": traces[0].times,
        "i_quad": np.stack([tr.i_quad for tr in traces]),
        "q_quad": np.stack([tr.q_quad for tr in traces]),
        "prepared_populations": np.stack(preps),
    }
    return ExperimentResult(
        kind="ReadoutBasis", sweep_label="level",
        sweep_values=np.arange(3), payload=payload, fit_params=fits,
        per_point=("i_quad", "q_quad", "prepared_populations"))


# ---------------------------------------------------------------------------
# decay map over measurement detuning
# ---------------------------------------------------------------------------

def run_decay_map(params, settings=None, detuning_grid=None):
    """Q(t, delta_rm) map from |2> and the two-T1 cascade refit.

    The map is simulated once on the grid; the relaxation times are then
    recovered by least squares on the rows closest to the three cavity
    lines, with both T1 values free and started well away from their
    configured values.
    """
    settings = settings or ReadoutSettings()
    if detuning_grid is None:
        detuning_grid = np.linspace(0.0, 13.0, 53)
    detuning_grid = np.asarray(detuning_grid, dtype=float)
    if detuning_grid.ndim != 1 or detuning_grid.size < 2:
        raise ValueError("detuning grid must be a 1-D array of >= 2 points")
    spectrum = dispersive_spectrum(params)
    _, prep = pc.prepare_state(params, np.array([0.0, 0.0, 1.0]))
    p2 = prep.populations

    times, _, amps = simulate_readout_batch(
        params, spectrum, settings, np.tile(p2, (detuning_grid.size, 1)),
        detuning_grid)
    fields = amps.sum(axis=2)
    q_map = fields.imag
    i_map = fields.real

    # fit rows nearest the three pulled cavity lines
    rows = sorted({int(np.argmin(np.abs(detuning_grid - s)))
                   for s in spectrum.s_n})
    target = q_map[rows].ravel()

    def residual(x):
        mod = replace(params, t1=(x[0], x[1]))
        _, _, a = simulate_readout_batch(
            mod, spectrum, settings, np.tile(p2, (len(rows), 1)),
            detuning_grid[rows])
        return a.sum(axis=2).imag.ravel() - target

    res = least_squares(residual, x0=[600.0, 900.0],
                        bounds=([100.0, 100.0], [4000.0, 4000.0]))
    errs = _fit_errors(res, target.size)
    fits = {"t1_1_ns": float(res.x[0]), "t1_1_ns_err": float(errs[0]),
            "t1_2_ns": float(res.x[1]), "t1_2_ns_err": float(errs[1])}
    payload = {"times": times, "q_map": q_map, "i_map": i_map,
               "prepared_populations": p2}
    return ExperimentResult(
        kind="DecayMap", sweep_label="delta_rm_MHz",
        sweep_values=detuning_grid, payload=payload, fit_params=fits,
        per_point=("q_map", "i_map"))


# ---------------------------------------------------------------------------
# Rabi amplitude calibration
# ---------------------------------------------------------------------------

def _dominant_angular_rate(x, y):
    # seed for the oscillation fit: dominant nonzero FFT bin
    step = x[1] - x[0]
    spec = np.abs(np.fft.rfft(y - y.mean()))
    k = int(np.argmax(spec[1:])) + 1
    return 2.0 * math.pi * k / (len(x) * step)


def run_rabi(params, transition, amplitude_grid=None, settings=None,
             contrast_threshold=0.25):
    """Sweep a fixed-shape resonant pulse over drive amplitude.

    The grid is in units of the 0-1 Rabi rate at the pulse peak; the
    1-2 leg is driven eta_1 times faster at the same field, so the two
    transitions' fitted oscillation rates expose the coupling ratio.
    Populations come from the full readout-plus-OLS chain, and a damped
    cosine fit returns the pi-pulse amplitude.
    """
    if transition not in (pc.T01, pc.T12):
        raise ValueError("transition must be %r or %r" % (pc.T01, pc.T12))
    settings = settings or ReadoutSettings()
    if amplitude_grid is None:
        amplitude_grid = np.linspace(0.0, 200.0, 41)
    amplitude_grid = np.asarray(amplitude_grid, dtype=float)
    if amplitude_grid.ndim != 1 or amplitude_grid.size < 8:
        raise ValueError("amplitude grid must be a 1-D array of >= 8 points")
    spectrum = dispersive_spectrum(params)
    refs = reference_traces(params, spectrum, settings)

    scale = params.eta[1] / params.eta[0] if transition == pc.T12 else 1.0
    level = 2 if transition == pc.T12 else 1
    pops = np.empty((amplitude_grid.size, 3))
    for i, amp in enumerate(amplitude_grid):
        seq = []
        if transition == pc.T12:
            seq.append(pc.PulseSegment(pc.T01, angle=math.pi))
        seq.append(pc.PulseSegment(transition, amplitude=scale * amp))
        state = pc.propagate(params, pc.QutritState.ground(), seq)
        trace = simulate_readout(params, spectrum, settings,
                                 state.populations)
        pops[i] = rc.ols_populations(trace, refs).populations
    y = pops[:, level]

    k0 = _dominant_angular_rate(amplitude_grid, y)

    def residual(x):
        c, a, k, phi = x
        return y - (c - a * np.cos(k * amplitude_grid + phi))

    res = least_squares(
        residual, x0=[y.mean(), 0.5 * np.ptp(y), k0, 0.0],
        bounds=([0.0, 0.0, 0.2 * k0, -1.0], [1.0, 1.0, 5.0 * k0, 1.0]))
    c, a, k, phi = res.x
    contrast = 2.0 * a
    if contrast < contrast_threshold:
        raise RuntimeError(
            "rabi fit rejected: oscillation contrast %.3f below "
            "threshold %.3f" % (contrast, contrast_threshold))
    errs = _fit_errors(res, y.size)
    # the oscillation is slightly chirped (the rotation slows toward
    # higher amplitude), so refine the pi amplitude with a parabola
    # through the first population maximum instead of trusting the
    # uniform-rate phase
    pi_amp = (math.pi - phi) / k
    near = np.abs(amplitude_grid - pi_amp) <= 0.6 * math.pi / k
    if near.sum() >= 5:
        ca, cb, _ = np.polyfit(amplitude_grid[near], y[near], 2)
        if ca < 0:
            vertex = -0.5 * cb / ca
            if amplitude_grid[0] < vertex < amplitude_grid[-1]:
                pi_amp = vertex
    fits = {
        "pi_amplitude_MHz": float(pi_amp),
        "rate_per_amplitude": float(k),
        "rate_per_amplitude_err": float(errs[2]),
        "contrast": float(contrast),
    }
    payload = {"populations": pops, "target_level": level}
    return ExperimentResult(
        kind="Rabi", sweep_label="amplitude_MHz",
        sweep_values=amplitude_grid, payload=payload, fit_params=fits,
        per_point=("populations",))


# ---------------------------------------------------------------------------
# Ramsey fringes on the 1-2 transition
# ---------------------------------------------------------------------------

def run_ramsey12(params, detuning=5.0, delay_grid=None, settings=None):
    """Detuned Ramsey sequence pi01 - (pi/2)12 - wait - (pi/2)12.

    Both pi/2 pulses run at the same detuned carrier; the drive phase is
    tracked in absolute time across the sequence, so the second pulse
    axis advances with the delay and the reconstructed p2 oscillates at
    the detuning frequency under the 1-2 coherence decay envelope.
    """
    if detuning == 0.0:
        raise ValueError("detuning must be nonzero to produce fringes")
    settings = settings or ReadoutSettings()
    if delay_grid is None:
        delay_grid = np.arange(0.0, 801.0, 5.0)
    delay_grid = np.asarray(delay_grid, dtype=float)
    if delay_grid.ndim != 1 or delay_grid.size < 16:
        raise ValueError("delay grid must be a 1-D array of >= 16 points")
    if np.any(delay_grid < 0):
        raise ValueError("delays must be nonnegative")
    spectrum = dispersive_spectrum(params)
    refs = reference_traces(params, spectrum, settings)

    half = 0.5 * math.pi
    pops = np.empty((delay_grid.size, 3))
    raw = np.empty((delay_grid.size, 3))
    for i, tau in enumerate(delay_grid):
        seq = [
            pc.PulseSegment(pc.T01, angle=math.pi),
            pc.PulseSegment(pc.T12, angle=half, detuning=detuning),
            pc.Delay(float(tau)),
            pc.PulseSegment(pc.T12, angle=half, detuning=detuning),
        ]
        state = pc.propagate(params, pc.QutritState.ground(), seq)
        trace = simulate_readout(params, spectrum, settings,
                                 state.populations)
        est = rc.ols_populations(trace, refs, constrain=True)
        pops[i] = est.populations
        raw[i] = rc.ols_populations(trace, refs).populations

    y = raw[:, 2]
    t2_seed = params.t2[1] if params.t2[1] else 2.0 * params.t1[1]

    def residual(x):
        f, t_env, amp, phi, c0, c1, t_bg = x
        model = (c0 + c1 * np.exp(-delay_grid / t_bg)
                 + amp * np.exp(-delay_grid / t_env)
                 * np.cos(MHZ_TO_ANG * f * delay_grid + phi))
        return y - model

    res = least_squares(
        residual,
        x0=[detuning, t2_seed, 0.4 * np.ptp(y), 0.0, y[-1], 0.3,
            params.t1[1]],
        bounds=([0.1, 50.0, 0.0, -math.pi, -1.0, -1.0, 50.0],
                [50.0, 5000.0, 1.0, math.pi, 1.0, 1.0, 5000.0]))
    errs = _fit_errors(res, y.size)
    fits = {
        "fringe_frequency_MHz": float(res.x[0]),
        "fringe_frequency_MHz_err": float(errs[0]),
        "envelope_decay_ns": float(res.x[1]),
        "envelope_decay_ns_err": float(errs[1]),
        "contrast": float(2.0 * res.x[2]),
    }
    payload = {"populations": pops, "populations_raw": raw}
    return ExperimentResult(
        kind="Ramsey12", sweep_label="delay_ns", sweep_values=delay_grid,
        payload=payload, fit_params=fits,
        per_point=("populations", "populations_raw"))


# ---------------------------------------------------------------------------
# tomography
# ---------------------------------------------------------------------------

def rotation_pulse_sequences():
    """Pulse realizations of the nine tomography rotations, in order."""
    half = 0.5 * math.pi
    return [
        [],
        [pc.PulseSegment(pc.T01, angle=half)],
        [pc.PulseSegment(pc.T01, angle=half, axis_phase=half)],
        [pc.PulseSegment(pc.T01, angle=math.pi)],
        [pc.PulseSegment(pc.T12, angle=half)],
        [pc.PulseSegment(pc.T12, angle=half, axis_phase=half)],
        [pc.PulseSegment(pc.T01, angle=math.pi),
         pc.PulseSegment(pc.T12, angle=half)],
        [pc.PulseSegment(pc.T01, angle=math.pi),
         pc.PulseSegment(pc.T12, angle=half, axis_phase=half)],
        [pc.PulseSegment(pc.T01, angle=math.pi),
         pc.PulseSegment(pc.T12, angle=math.pi)],
    ]


def _tomography_once(params, spectrum, refs, ops, rotations, target,
                     sigma, rng, bootstrap_resamples, settings):
    target = np.asarray(target, dtype=np.complex128).reshape(3)
    target = target / np.linalg.norm(target)
    prep_seq, prep_state = pc.prepare_state(params, target)
    prep_fidelity = rc.fidelity(target, prep_state.rho)

    values = np.empty(9)
    rotated_pops = np.empty((9, 3))
    for k, seq in enumerate(rotation_pulse_sequences()):
        state = pc.propagate(params, prep_state, seq) if seq else prep_state
        rotated_pops[k] = state.populations
        trace = simulate_readout(params, spectrum, settings,
                                 state.populations)
        values[k] = _integrate_window(trace.times, trace.i_quad, ops.window)
    noisy = values + rng.normal(scale=sigma, size=9)
    record = rc.TomographyRecord(values=tuple(noisy), sigmas=(sigma,) * 9)

    rho_lin = rc.linear_inversion(record, ops, rotations)
    mle = rc.mle_estimate(record, ops, rotations, rng=rng)
    fid = rc.fidelity(target, mle.rho)

    spread = None
    fid_err = 0.0
    if bootstrap_resamples:
        samples = rc.bootstrap_resample(record, ops, rotations,
                                        n_resamples=bootstrap_resamples,
                                        rng=rng)
        spread = rc.element_spread(samples)
        fid_err = float(np.std([rc.fidelity(target, s) for s in samples]))
    return {
        "record": record,
        "rho_mle": mle.rho,
        "rho_linear": rho_lin,
        "mle_cost": mle.cost,
        "fidelity": fid,
        "fidelity_err": fid_err,
        "prep_fidelity": prep_fidelity,
        "element_spread": spread,
        "rotated_populations": rotated_pops,
    }


def run_tomography(params, target, noise=None, settings=None, window=500.0,
                   seed=0, bootstrap_resamples=200):
    """Full tomography of one prepared state.

    Preparation and all rotation pulses run with dissipation; each of the
    nine branches is read out, integrated over ``window`` and perturbed
    with Gaussian noise of the configured scale before reconstruction.
    """
    settings = settings or ReadoutSettings()
    noise = noise or NoiseModel()
    spectrum = dispersive_spectrum(params)
    refs = reference_traces(params, spectrum, settings)
    ops = rc.MeasurementOperator.from_traces(refs, window=window)
    rotations = rc.tomography_rotations()
    sigma = noise.resolve(ops.m_values)
    rng = np.random.default_rng(seed)
    out = _tomography_once(params, spectrum, refs, ops, rotations, target,
                           sigma, rng, bootstrap_resamples, settings)
    payload = {
        "values": np.asarray(out["record"].values),
        "sigmas": np.asarray(out["record"].sigmas),
        "rotation_labels": list(rc.ROTATION_LABELS),
        "rho_mle": out["rho_mle"],
        "rho_linear": out["rho_linear"],
        "element_spread": out["element_spread"],
        "rotated_populations": out["rotated_populations"],
        "m_values": np.asarray(ops.m_values),
    }
    fits = {
        "fidelity": out["fidelity"],
        "fidelity_err": out["fidelity_err"],
        "preparation_fidelity": out["prep_fidelity"],
        "mle_cost": out["mle_cost"],
        "noise_sigma": sigma,
    }
    return ExperimentResult(
        kind="Tomography", sweep_label="rotation_index",
        sweep_values=np.arange(9), payload=payload, fit_params=fits,
        per_point=("values", "sigmas", "rotation_labels",
                   "rotated_populations"))


def default_targets():
    """The 14-state batch: poles, equal two-level superpositions on all
    three pairs (x and y phases), and named three-level states."""
    r2 = 1.0 / math.sqrt(2.0)
    r3 = 1.0 / math.sqrt(3.0)
    w = np.exp(2j * math.pi / 3.0)
    return [
        ("|0>", np.array([1.0, 0.0, 0.0])),
        ("|1>", np.array([0.0, 1.0, 0.0])),
        ("|2>", np.array([0.0, 0.0, 1.0])),
        ("(|0>+|1>)/sqrt2", np.array([r2, r2, 0.0])),
        ("(|0>+i|1>)/sqrt2", np.array([r2, 1j * r2, 0.0])),
        ("(|1>+|2>)/sqrt2", np.array([0.0, r2, r2])),
        ("(|1>+i|2>)/sqrt2", np.array([0.0, r2, 1j * r2])),
        ("(|0>+|2>)/sqrt2", np.array([r2, 0.0, r2])),
        ("(|0>+i|2>)/sqrt2", np.array([r2, 0.0, 1j * r2])),
        ("psi_a", np.array([0.0, r2, -r2])),
        ("psi_b", np.array([r3, 1j * r3, -r3])),
        ("(1,1,1)/sqrt3", np.array([r3, r3, r3])),
        ("(1,w,w2)/sqrt3", np.array([r3, r3 * w, r3 * w ** 2])),
        ("(1,w2,w)/sqrt3", np.array([r3, r3 * w ** 2, r3 * w])),
    ]


def run_fidelity_batch(params, targets=None, noise=None, settings=None,
                       window=500.0, seed=0):
    """Tomography fidelity over a list of target states.

    Shares the reference calibration across states; each state gets its
    own child random stream derived from (seed, index), so results do
    not depend on execution order. Bootstrap is skipped here; use
    run_tomography for per-state uncertainties.
    """
    if targets is None:
        targets = default_targets()
    if not targets:
        raise ValueError("target list must be nonempty")
    settings = settings or ReadoutSettings()
    noise = noise or NoiseModel()
    spectrum = dispersive_spectrum(params)
    refs = reference_traces(params, spectrum, settings)
    ops = rc.MeasurementOperator.from_traces(refs, window=window)
    rotations = rc.tomography_rotations()
    sigma = noise.resolve(ops.m_values)

    labels, fidelities, prep_fidelities, rhos, costs = [], [], [], [], []
    for idx, (label, target) in enumerate(targets):
        rng = np.random.default_rng([seed, idx])
        out = _tomography_once(params, spectrum, refs, ops, rotations,
                               target, sigma, rng, 0, settings)
        labels.append(label)
        fidelities.append(out["fidelity"])
        prep_fidelities.append(out["prep_fidelity"])
        rhos.append(out["rho_mle"])
        costs.append(out["mle_cost"])
    fidelities = np.asarray(fidelities)
    i_min = int(np.argmin(fidelities))
    payload = {
        "labels": labels,
        "fidelities": fidelities,
        "preparation_fidelities": np.asarray(prep_fidelities),
        "rho_mle": np.stack(rhos),
        "mle_costs": np.asarray(costs),
    }
    fits = {
        "mean_fidelity": float(fidelities.mean()),
        "min_fidelity": float(fidelities[i_min]),
        "min_state_index": float(i_min),
        "noise_sigma": sigma,
    }
    return ExperimentResult(
        kind="FidelityBatch", sweep_label="state_index",
        sweep_values=np.arange(len(targets)), payload=payload,
        fit_params=fits,
        per_point=("labels", "fidelities", "preparation_fidelities",
                   "rho_mle", "mle_costs"))
