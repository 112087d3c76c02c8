"""Command line entry points.

Each subcommand loads a configuration (or the built-in defaults), runs
one experiment and writes its results plus a manifest into
``<output_dir>/<command>/``. Outputs are byte identical for identical
(config, seed); errors are one line on stderr and a nonzero exit.
"""

import argparse
import dataclasses
import os
import sys

import numpy as np

from . import __version__, serialize
from . import reconstruction as rc
from .cavity_bloch import reference_traces, simulate_readout
from .config import (ConfigError, config_as_dict, default_config,
                     load_config, parse_target)
from .device_model import (dispersive_spectrum, reference_device,
                           shift_vs_qubit_frequency)
from .experiments import (NoiseModel, default_targets, run_decay_map,
                          run_fidelity_batch, run_rabi, run_ramsey12,
                          run_readout_basis, run_tomography)
from .pulse_control import prepare_state


def _noise_model(block):
    kwargs = {}
    if block.noise_sigma is not None:
        kwargs["sigma"] = float(block.noise_sigma)
    if block.noise_fraction is not None:
        kwargs["fraction"] = float(block.noise_fraction)
    return NoiseModel(**kwargs)


def _prepare_outdir(cfg, command):
    path = os.path.join(cfg.output_dir, command)
    os.makedirs(path, exist_ok=True)
    return path


def _write_manifest(outdir, cfg, command, extra=None):
    manifest = {
        "command": command,
        "package": "qutritsim",
        "version": __version__,
        "config": config_as_dict(cfg),
        "seed": cfg.seed,
    }
    if extra:
        manifest.update(extra)
    serialize.write_manifest(os.path.join(outdir, "manifest.json"), manifest)


def _vector_pairs(vec):
    return [[float(c.real), float(c.imag)] for c in np.asarray(vec)]


def cmd_spectrum(cfg, args):
    blk = cfg.spectrum
    grid = np.linspace(blk.omega_01_min_MHz, blk.omega_01_max_MHz,
                       blk.points)
    rows = shift_vs_qubit_frequency(cfg.device, grid)
    outdir = _prepare_outdir(cfg, "spectrum")
    path = os.path.join(outdir, "spectrum.csv")
    serialize.write_csv(path, ["omega01_MHz", "s0_MHz", "s1_MHz", "s2_MHz"],
                        rows)
    _write_manifest(outdir, cfg, "spectrum")
    print("spectrum: %d points -> %s" % (len(rows), path))
    return 0


def cmd_readout(cfg, args):
    res = run_readout_basis(cfg.device, settings=cfg.readout)
    outdir = _prepare_outdir(cfg, "readout")
    times = res.payload["times"]
    iq = res.payload["i_quad"]
    qq = res.payload["q_quad"]
    cols = [("time_ns", times)]
    for level in range(3):
        cols.append(("i_%d" % level, iq[level]))
        cols.append(("q_%d" % level, qq[level]))
    serialize.write_columns_csv(os.path.join(outdir, "traces.csv"), cols)
    serialize.write_fit_csv(os.path.join(outdir, "fits.csv"),
                            res.fit_params)
    _write_manifest(outdir, cfg, "readout")
    print("readout: s = (%.4f, %.4f, %.4f) MHz, T1 = (%.1f, %.1f) ns"
          % (res.fit_params["s0_MHz"], res.fit_params["s1_MHz"],
             res.fit_params["s2_MHz"], res.fit_params["t1_1_ns"],
             res.fit_params["t1_2_ns"]))
    return 0


def cmd_decay_map(cfg, args):
    blk = cfg.decay_map
    grid = np.linspace(blk.detuning_min_MHz, blk.detuning_max_MHz,
                       blk.points)
    res = run_decay_map(cfg.device, settings=cfg.readout,
                        detuning_grid=grid)
    outdir = _prepare_outdir(cfg, "decay-map")
    times = res.payload["times"]
    i_map = res.payload["i_map"]
    q_map = res.payload["q_map"]

    def rows():
        for k, delta in enumerate(res.sweep_values):
            for j, t in enumerate(times):
                yield (delta, t, i_map[k, j], q_map[k, j])

    serialize.write_csv(os.path.join(outdir, "map.csv"),
                        ["delta_rm_MHz", "time_ns", "i", "q"], rows())
    serialize.write_fit_csv(os.path.join(outdir, "fits.csv"),
                            res.fit_params)
    _write_manifest(outdir, cfg, "decay-map")
    print("decay-map: T1 = (%.1f, %.1f) ns over %d detunings"
          % (res.fit_params["t1_1_ns"], res.fit_params["t1_2_ns"],
             len(res.sweep_values)))
    return 0


def cmd_rabi(cfg, args):
    blk = cfg.rabi
    transition = args.transition or blk.transition
    if transition not in ("01", "12"):
        raise ValueError("rabi transition must be '01' or '12'")
    grid = np.linspace(0.0, blk.amplitude_max_MHz, blk.points)
    res = run_rabi(cfg.device, transition, amplitude_grid=grid,
                   settings=cfg.readout)
    outdir = _prepare_outdir(cfg, "rabi")
    pops = res.payload["populations"]
    serialize.write_columns_csv(
        os.path.join(outdir, "rabi.csv"),
        [("amplitude_MHz", res.sweep_values),
         ("p0", pops[:, 0]), ("p1", pops[:, 1]), ("p2", pops[:, 2])])
    serialize.write_fit_csv(os.path.join(outdir, "fits.csv"),
                            res.fit_params)
    _write_manifest(outdir, cfg, "rabi", {"transition": transition})
    print("rabi %s: pi amplitude %.4f MHz, contrast %.3f"
          % (transition, res.fit_params["pi_amplitude_MHz"],
             res.fit_params["contrast"]))
    return 0


def cmd_ramsey12(cfg, args):
    blk = cfg.ramsey12
    detuning = blk.detuning_MHz if args.detuning is None else args.detuning
    step = blk.delay_step_ns
    delays = np.arange(0.0, blk.delay_max_ns + 0.5 * step, step)
    res = run_ramsey12(cfg.device, detuning=detuning, delay_grid=delays,
                       settings=cfg.readout)
    outdir = _prepare_outdir(cfg, "ramsey12")
    pops = res.payload["populations"]
    raw = res.payload["populations_raw"]
    serialize.write_columns_csv(
        os.path.join(outdir, "ramsey12.csv"),
        [("delay_ns", res.sweep_values),
         ("p0", pops[:, 0]), ("p1", pops[:, 1]), ("p2", pops[:, 2]),
         ("p0_raw", raw[:, 0]), ("p1_raw", raw[:, 1]),
         ("p2_raw", raw[:, 2])])
    serialize.write_fit_csv(os.path.join(outdir, "fits.csv"),
                            res.fit_params)
    _write_manifest(outdir, cfg, "ramsey12", {"detuning_MHz": detuning})
    print("ramsey12: fringe %.4f MHz, envelope %.1f ns"
          % (res.fit_params["fringe_frequency_MHz"],
             res.fit_params["envelope_decay_ns"]))
    return 0


def cmd_tomo(cfg, args):
    blk = cfg.tomo
    label, vec = parse_target(args.target or blk.target)
    noise = _noise_model(blk)
    res = run_tomography(cfg.device, vec, noise=noise,
                         settings=cfg.readout, window=blk.window_ns,
                         seed=cfg.seed,
                         bootstrap_resamples=blk.bootstrap_resamples)
    outdir = _prepare_outdir(cfg, "tomo")
    serialize.write_csv(
        os.path.join(outdir, "record.csv"),
        ["rotation", "value", "sigma"],
        zip(res.payload["rotation_labels"], res.payload["values"],
            res.payload["sigmas"]))
    spread = res.payload["element_spread"]
    extras = [("spread", spread)] if spread is not None else []
    serialize.write_matrix_csv(os.path.join(outdir, "density_matrix.csv"),
                               res.payload["rho_mle"], extras)
    serialize.write_matrix_csv(
        os.path.join(outdir, "density_matrix_linear.csv"),
        res.payload["rho_linear"])
    pops = res.payload["rotated_populations"]
    serialize.write_csv(
        os.path.join(outdir, "populations.csv"),
        ["rotation", "p0", "p1", "p2"],
        ((lab,) + tuple(row) for lab, row in
         zip(res.payload["rotation_labels"], pops)))
    serialize.write_fit_csv(os.path.join(outdir, "fits.csv"),
                            res.fit_params)
    _write_manifest(outdir, cfg, "tomo",
                    {"target": label, "target_vector": _vector_pairs(vec)})
    print("tomo %s: F=%.4f +- %.4f (preparation F=%.4f)"
          % (label, res.fit_params["fidelity"],
             res.fit_params["fidelity_err"],
             res.fit_params["preparation_fidelity"]))
    return 0


def cmd_batch(cfg, args):
    blk = cfg.batch
    if blk.targets:
        targets = []
        for idx, spec in enumerate(blk.targets):
            label, vec = parse_target(spec)
            if label == "custom":
                label = "custom_%d" % idx
            targets.append((label, vec))
    else:
        targets = default_targets()
    noise = _noise_model(blk)
    res = run_fidelity_batch(cfg.device, targets=targets, noise=noise,
                             settings=cfg.readout, window=blk.window_ns,
                             seed=cfg.seed)
    outdir = _prepare_outdir(cfg, "batch")
    serialize.write_csv(
        os.path.join(outdir, "batch.csv"),
        ["index", "state", "fidelity", "preparation_fidelity", "mle_cost"],
        ((i, lab, f, pf, c) for i, (lab, f, pf, c) in enumerate(
            zip(res.payload["labels"], res.payload["fidelities"],
                res.payload["preparation_fidelities"],
                res.payload["mle_costs"]))))

    rhos = res.payload["rho_mle"]

    def rho_rows():
        for k in range(rhos.shape[0]):
            for i in range(3):
                for j in range(3):
                    yield (k, i, j, rhos[k, i, j].real, rhos[k, i, j].imag)

    serialize.write_csv(os.path.join(outdir, "density_matrices.csv"),
                        ["state_index", "row", "col", "real", "imag"],
                        rho_rows())
    serialize.write_fit_csv(os.path.join(outdir, "fits.csv"),
                            res.fit_params)
    targets_manifest = [
        {"label": lab, "vector": _vector_pairs(vec)} for lab, vec in targets]
    _write_manifest(outdir, cfg, "batch", {"targets": targets_manifest})
    i_min = int(res.fit_params["min_state_index"])
    print("batch: mean F=%.4f, min F=%.4f (%s) over %d states"
          % (res.fit_params["mean_fidelity"],
             res.fit_params["min_fidelity"],
             res.payload["labels"][i_min], len(targets)))
    return 0


# --------------------------------------------------------------------------
# selftest: fast embedded subset of the acceptance properties. The full
# suite lives in tests/ and runs under pytest; this needs no test files.

def _selftest_checks(cfg):
    params = cfg.device
    spectrum = dispersive_spectrum(params)

    def shifts():
        target = np.array([10.0265, 6.6981, 3.9933])
        err = np.abs(np.asarray(spectrum.s_n) - target).max()
        assert err < 1e-3, "shift error %.2e MHz" % err
        return "s = (%.4f, %.4f, %.4f) MHz" % spectrum.s_n

    def ground_trace():
        trace = simulate_readout(params, spectrum, cfg.readout,
                                 p_init=(1.0, 0.0, 0.0))
        drift = np.abs(trace.populations - trace.populations[0]).max()
        assert drift < 1e-9, "ground populations drift %.2e" % drift
        late = trace.i_quad[trace.times > 3000.0]
        scale = np.abs(trace.i_quad).max()
        assert np.ptp(late) < 1e-3 * scale, "steady state not reached"
        return "ground-state transient flat to %.1e" % (np.ptp(late) / scale)

    def preparation():
        worst = 1.0
        for _, vec in [default_targets()[1], default_targets()[9]]:
            _, achieved = prepare_state(params, vec)
            worst = min(worst, rc.fidelity(vec, achieved.rho))
        assert worst > 0.97, "preparation fidelity %.4f" % worst
        return "preparation fidelity >= %.4f" % worst

    def tomography_roundtrip():
        refs = reference_traces(params, spectrum, cfg.readout)
        ops = rc.MeasurementOperator.from_traces(refs)
        rotations = rc.tomography_rotations()
        _, cond = rc.design_matrix(ops, rotations)
        assert cond < 100.0, "design condition %.1f" % cond
        rng = np.random.default_rng(7)
        worst = 0.0
        for _ in range(20):
            psi = rng.normal(size=3) + 1j * rng.normal(size=3)
            psi /= np.linalg.norm(psi)
            rho = np.outer(psi, psi.conj())
            values = rc.expected_values(rho, ops, rotations)
            record = rc.TomographyRecord(values=tuple(values),
                                         sigmas=(1.0,) * 9)
            recov = rc.linear_inversion(record, ops, rotations)
            dist = 0.5 * np.abs(np.linalg.eigvalsh(recov - rho)).sum()
            worst = max(worst, dist)
        assert worst < 1e-8, "roundtrip trace distance %.2e" % worst
        return "design cond %.2f, worst roundtrip %.1e" % (cond, worst)

    def mle_physical():
        refs = reference_traces(params, spectrum, cfg.readout)
        ops = rc.MeasurementOperator.from_traces(refs)
        rotations = rc.tomography_rotations()
        rng = np.random.default_rng(11)
        span = max(ops.m_values) - min(ops.m_values)
        sigma = 0.05 * span
        for _ in range(5):
            psi = rng.normal(size=3) + 1j * rng.normal(size=3)
            psi /= np.linalg.norm(psi)
            rho = np.outer(psi, psi.conj())
            values = rc.expected_values(rho, ops, rotations)
            values = values + rng.normal(scale=sigma, size=9)
            record = rc.TomographyRecord(values=tuple(values),
                                         sigmas=(sigma,) * 9)
            est = rc.mle_estimate(record, ops, rotations, rng=rng,
                                  restarts=0, max_evaluations=20000)
            eigs = np.linalg.eigvalsh(est.rho)
            assert eigs.min() > -1e-9, "negative eigenvalue %.2e" % eigs.min()
            assert abs(np.trace(est.rho).real - 1.0) < 1e-9, "trace off"
        return "5 noisy records, all estimates physical"

    return [("dispersive-shifts", shifts),
            ("ground-state-readout", ground_trace),
            ("state-preparation", preparation),
            ("tomography-roundtrip", tomography_roundtrip),
            ("mle-physical", mle_physical)]


def cmd_selftest(cfg, args):
    failures = 0
    for name, check in _selftest_checks(cfg):
        try:
            detail = check()
            print("selftest: PASS %s (%s)" % (name, detail))
        except AssertionError as exc:
            failures += 1
            print("selftest: FAIL %s (%s)" % (name, exc))
    if failures:
        print("selftest: %d check(s) failed" % failures)
        return 1
    print("selftest: all checks passed")
    return 0


def build_parser():
    parser = argparse.ArgumentParser(
        prog="qutritsim",
        description="Dispersive readout, pulse control and tomography "
                    "of a three-level transmon.")
    parser.add_argument("--version", action="version",
                        version="qutritsim %s" % __version__)
    sub = parser.add_subparsers(dest="command", required=True)

    def add(name, handler, help_text):
        p = sub.add_parser(name, help=help_text)
        p.add_argument("--config", help="YAML configuration file")
        p.add_argument("--seed", type=int, help="override configured seed")
        p.add_argument("--out", help="override configured output directory")
        p.add_argument("--threads", type=int, default=1,
                       help="accepted for interface stability; execution "
                            "is sequential")
        p.set_defaults(handler=handler)
        return p

    add("spectrum", cmd_spectrum,
        "dispersive shifts versus qubit frequency")
    add("readout", cmd_readout, "readout transients of the basis states")
    add("decay-map", cmd_decay_map,
        "time-resolved Q map from |2> and T1 refit")
    p = add("rabi", cmd_rabi, "amplitude Rabi sweep")
    p.add_argument("--transition", choices=("01", "12"))
    p = add("ramsey12", cmd_ramsey12, "detuned Ramsey on the 1-2 pair")
    p.add_argument("--detuning", type=float,
                   help="override fringe detuning in MHz")
    p = add("tomo", cmd_tomo, "state tomography of one target")
    p.add_argument("--target",
                   help="target state name, e.g. psi_a or '0'")
    add("batch", cmd_batch, "tomography fidelity over a list of states")
    add("selftest", cmd_selftest, "run the built-in acceptance checks")
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.threads is not None and args.threads < 1:
        print("error: usage: --threads must be >= 1", file=sys.stderr)
        return 2
    try:
        cfg = load_config(args.config) if args.config else default_config()
        if args.seed is not None:
            if args.seed < 0:
                raise ConfigError("<cli>", None,
                                  "seed must be a nonnegative integer")
            cfg = dataclasses.replace(cfg, seed=args.seed)
        if args.out:
            cfg = dataclasses.replace(cfg, output_dir=args.out)
        return args.handler(cfg, args)
    except ConfigError as exc:
        print("error: config: %s" % exc, file=sys.stderr)
        return 2
    except (ValueError, RuntimeError) as exc:
        print("error: run: %s" % exc, file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
