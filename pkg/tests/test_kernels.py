import os
import subprocess
import sys

import numpy as np
import pytest

from qutritsim import kernels
from qutritsim._backend import backend_name, using_numba


def random_cavity_args(rng, n_batch=4, n_steps=400, stride=4):
    p = rng.random((n_batch, 3))
    p /= p.sum(axis=1, keepdims=True)
    delta = rng.uniform(0.0, 13.0, n_batch) * kernels.MHZ_TO_ANG
    s = np.array([10.0, 6.7, 4.0]) * kernels.MHZ_TO_ANG
    return (p, delta, s, 1.0 * kernels.MHZ_TO_ANG,
            1.0 * kernels.MHZ_TO_ANG, 1.0 / 800.0, 1.0 / 700.0,
            0.1, n_steps, stride)


def random_lindblad_args(rng, n_steps=300):
    psi = rng.normal(size=3) + 1j * rng.normal(size=3)
    psi /= np.linalg.norm(psi)
    rho0 = np.outer(psi, psi.conj())
    t = np.linspace(0.0, 1.0, 2 * n_steps + 1)
    h01 = 0.3 * np.exp(2j * np.pi * t) * np.sin(np.pi * t)
    h12 = 0.2 * np.exp(-3j * np.pi * t) * np.sin(np.pi * t)
    return (rho0, h01, h12, 1.0 / 800.0, 1.0 / 700.0, 1e-4, 1.3e-3,
            0.05, n_steps)


def test_angular_conversion_constant():
    assert kernels.MHZ_TO_ANG == pytest.approx(2.0e-3 * np.pi, rel=1e-15)


@pytest.mark.skipif(not using_numba(), reason="numba backend inactive")
def test_cavity_bloch_backends_agree():
    rng = np.random.default_rng(0)
    args = random_cavity_args(rng)
    pops_a, amps_a = kernels.cavity_bloch_batch_numpy(*args)
    pops_b, amps_b = kernels.cavity_bloch_batch_numba(*args)
    assert np.abs(pops_a - pops_b).max() < 1e-12
    assert np.abs(amps_a - amps_b).max() < 1e-12


@pytest.mark.skipif(not using_numba(), reason="numba backend inactive")
def test_lindblad_backends_agree():
    rng = np.random.default_rng(1)
    args = random_lindblad_args(rng)
    rho_a = kernels.lindblad_rk4_numpy(*args)
    rho_b = kernels.lindblad_rk4_numba(*args)
    assert np.abs(rho_a - rho_b).max() < 1e-13


def test_cavity_bloch_output_shapes():
    rng = np.random.default_rng(2)
    args = random_cavity_args(rng, n_batch=2, n_steps=100, stride=10)
    pops, amps = kernels.cavity_bloch_batch(*args)
    assert pops.shape == (2, 11, 3)
    assert amps.shape == (2, 11, 3)
    assert amps.dtype == np.complex128
    # populations stay on the simplex throughout
    assert np.abs(pops.sum(axis=2) - 1.0).max() < 1e-12
    assert pops.min() > -1e-12


def test_stride_must_divide_steps():
    rng = np.random.default_rng(3)
    args = list(random_cavity_args(rng))
    args[8], args[9] = 101, 10
    with pytest.raises(ValueError, match="stride"):
        kernels.cavity_bloch_batch(*args)


def test_envelope_length_validation():
    rng = np.random.default_rng(4)
    args = list(random_lindblad_args(rng))
    args[8] = len(args[1])  # more steps than the table supports
    with pytest.raises(ValueError, match="samples"):
        kernels.lindblad_rk4(*args)


def test_lindblad_preserves_trace_and_hermiticity():
    rng = np.random.default_rng(5)
    rho = kernels.lindblad_rk4(*random_lindblad_args(rng))
    assert abs(np.trace(rho).real - 1.0) < 1e-10
    assert np.abs(rho - rho.conj().T).max() < 1e-12


def _spawn(env_value):
    env = dict(os.environ)
    env["QUTRITSIM_BACKEND"] = env_value
    return subprocess.run(
        [sys.executable, "-c",
         "from qutritsim._backend import backend_name; print(backend_name())"],
        capture_output=True, text=True, env=env)


def test_backend_env_selection():
    out = _spawn("numpy")
    assert out.returncode == 0 and out.stdout.strip() == "numpy"
    out = _spawn("invalid")
    assert out.returncode != 0
    assert "QUTRITSIM_BACKEND" in out.stderr
    if using_numba():
        out = _spawn("numba")
        assert out.returncode == 0 and out.stdout.strip() == "numba"


def test_backend_name_consistent():
    assert backend_name() in ("numba", "numpy")
    assert (backend_name() == "numba") == using_numba()
