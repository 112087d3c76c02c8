"""Compare the numba and pure-numpy integrator kernels.

Runs both implementations on the same representative workloads (the
detuning-sweep cavity-Bloch batch and a finely stepped Lindblad pulse),
checks they agree to float64 roundoff and reports the timings. Expect a
one-time compile pause on the first numba call.

    python3 benchmarks/benchmark_kernels.py [--repeats N]
"""

import argparse
import time

import numpy as np

from qutritsim import kernels
from qutritsim._backend import using_numba
from qutritsim.device_model import dispersive_spectrum, reference_device


def best_of(fn, args, repeats):
    result = fn(*args)  # warmup; compiles on the numba path
    best = float("inf")
    for _ in range(repeats):
        t0 = time.perf_counter()
        fn(*args)
        best = min(best, time.perf_counter() - t0)
    return best, result


def cavity_bloch_workload():
    params = reference_device()
    spectrum = dispersive_spectrum(params)
    n_batch = 53
    delta = np.linspace(0.0, 13.0, n_batch) * kernels.MHZ_TO_ANG
    p_init = np.tile([0.0, 0.0, 1.0], (n_batch, 1))
    dt, n_steps, stride = 0.1, 40000, 40  # 4 us at the internal step
    args = (p_init, delta, np.asarray(spectrum.s_n) * kernels.MHZ_TO_ANG,
            1.0 * kernels.MHZ_TO_ANG, params.kappa * kernels.MHZ_TO_ANG,
            1.0 / params.t1[0], 1.0 / params.t1[1], dt, n_steps, stride)
    label = "cavity-Bloch batch (%d traces x %d steps)" % (n_batch, n_steps)
    return label, args


def lindblad_workload():
    n_steps = 20000
    dt = 0.02
    t = np.linspace(0.0, n_steps * dt, 2 * n_steps + 1)
    mid, width = 0.5 * n_steps * dt, 0.1 * n_steps * dt
    shape = np.exp(-0.5 * ((t - mid) / width) ** 2)
    h01 = 0.25 * shape * np.exp(0.3j * t)
    h12 = 0.15 * shape * np.exp(-0.2j * t)
    rho0 = np.zeros((3, 3), dtype=np.complex128)
    rho0[0, 0] = 1.0
    args = (rho0, h01, h12, 1.0 / 800.0, 1.0 / 700.0, 0.0, 1.25e-3,
            dt, n_steps)
    return "Lindblad pulse (%d RK4 steps)" % n_steps, args


def compare(label, numpy_fn, numba_fn, args, repeats):
    print(label)
    t_np, ref = best_of(numpy_fn, args, repeats)
    print("  numpy  %8.3f s" % t_np)
    if not using_numba():
        print("  numba  skipped (backend unavailable or disabled)")
        return
    t_nb, out = best_of(numba_fn, args, repeats)
    if isinstance(ref, tuple):
        diff = max(np.abs(a - b).max() for a, b in zip(ref, out))
    else:
        diff = np.abs(ref - out).max()
    print("  numba  %8.3f s   speedup %5.1fx   max |diff| %.2e"
          % (t_nb, t_np / t_nb, diff))
    if diff > 1e-10:
        raise SystemExit("backend disagreement above roundoff: %.2e" % diff)


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--repeats", type=int, default=3)
    args = parser.parse_args()

    label, work = cavity_bloch_workload()
    compare(label, kernels.cavity_bloch_batch_numpy,
            kernels.cavity_bloch_batch_numba, work, args.repeats)
    label, work = lindblad_workload()
    compare(label, kernels.lindblad_rk4_numpy,
            kernels.lindblad_rk4_numba, work, args.repeats)


if __name__ == "__main__":
    main()
