"""Hot fixed-step RK4 integrators.

Two physics kernels dominate runtime and exist in two versions each:

* ``cavity_bloch_batch`` - three-level cavity-Bloch equations (populations
  plus three conditional cavity field amplitudes) integrated for a batch of
  measurement detunings / initial populations.
* ``lindblad_rk4`` - Lindblad master equation of the driven three-level atom
  with half-step sampled drive envelopes on both transition legs.

The numba path compiles the ``*_loop`` functions; the numpy path uses the
vectorized ``*_numpy`` twins. All quantities are in angular units (rad/ns)
and rates in 1/ns; callers convert from the cyclic-MHz convention.
"""

import numpy as np

from ._backend import jit, using_numba

#: rad/ns per cyclic MHz; the only place units change representation
MHZ_TO_ANG = 2.0e-3 * np.pi


# ---------------------------------------------------------------------------
# cavity-Bloch: loop implementation (numba target)
# ---------------------------------------------------------------------------

def _cb_batch_loop(p_init, drm_ang, s_ang, eps_ang, kap_ang, g1, g2,
                   dt, n_steps, stride, pops, fields):
    n_traces = p_init.shape[0]
    for b in range(n_traces):
        c0 = 1j * (drm_ang[b] - s_ang[0]) - 0.5 * kap_ang
        c1 = 1j * (drm_ang[b] - s_ang[1]) - 0.5 * kap_ang
        c2 = 1j * (drm_ang[b] - s_ang[2]) - 0.5 * kap_ang
        p0 = p_init[b, 0]
        p1 = p_init[b, 1]
        p2 = p_init[b, 2]
        a0 = 0.0 + 0.0j
        a1 = 0.0 + 0.0j
        a2 = 0.0 + 0.0j
        pops[b, 0, 0] = p0
        pops[b, 0, 1] = p1
        pops[b, 0, 2] = p2
        fields[b, 0, 0] = a0
        fields[b, 0, 1] = a1
        fields[b, 0, 2] = a2
        out = 1
        for step in range(n_steps):
            # k1
            q0 = g1 * p1
            q1 = g2 * p2 - g1 * p1
            q2 = -g2 * p2
            b0 = c0 * a0 - 1j * eps_ang * p0 + g1 * a1
            b1 = c1 * a1 - 1j * eps_ang * p1 + g2 * a2 - g1 * a1
            b2 = c2 * a2 - 1j * eps_ang * p2 - g2 * a2
            # k2
            tp0 = p0 + 0.5 * dt * q0
            tp1 = p1 + 0.5 * dt * q1
            tp2 = p2 + 0.5 * dt * q2
            ta0 = a0 + 0.5 * dt * b0
            ta1 = a1 + 0.5 * dt * b1
            ta2 = a2 + 0.5 * dt * b2
            r0 = g1 * tp1
            r1 = g2 * tp2 - g1 * tp1
            r2 = -g2 * tp2
            d0 = c0 * ta0 - 1j * eps_ang * tp0 + g1 * ta1
            d1 = c1 * ta1 - 1j * eps_ang * tp1 + g2 * ta2 - g1 * ta1
            d2 = c2 * ta2 - 1j * eps_ang * tp2 - g2 * ta2
            # k3
            tp0 = p0 + 0.5 * dt * r0
            tp1 = p1 + 0.5 * dt * r1
            tp2 = p2 + 0.5 * dt * r2
            ta0 = a0 + 0.5 * dt * d0
            ta1 = a1 + 0.5 * dt * d1
            ta2 = a2 + 0.5 * dt * d2
            u0 = g1 * tp1
            u1 = g2 * tp2 - g1 * tp1
            u2 = -g2 * tp2
            e0 = c0 * ta0 - 1j * eps_ang * tp0 + g1 * ta1
            e1 = c1 * ta1 - 1j * eps_ang * tp1 + g2 * ta2 - g1 * ta1
            e2 = c2 * ta2 - 1j * eps_ang * tp2 - g2 * ta2
            # k4
            tp0 = p0 + dt * u0
            tp1 = p1 + dt * u1
            tp2 = p2 + dt * u2
            ta0 = a0 + dt * e0
            ta1 = a1 + dt * e1
            ta2 = a2 + dt * e2
            v0 = g1 * tp1
            v1 = g2 * tp2 - g1 * tp1
            v2 = -g2 * tp2
            f0 = c0 * ta0 - 1j * eps_ang * tp0 + g1 * ta1
            f1 = c1 * ta1 - 1j * eps_ang * tp1 + g2 * ta2 - g1 * ta1
            f2 = c2 * ta2 - 1j * eps_ang * tp2 - g2 * ta2
            sixth = dt / 6.0
            p0 += sixth * (q0 + 2.0 * (r0 + u0) + v0)
            p1 += sixth * (q1 + 2.0 * (r1 + u1) + v1)
            p2 += sixth * (q2 + 2.0 * (r2 + u2) + v2)
            a0 += sixth * (b0 + 2.0 * (d0 + e0) + f0)
            a1 += sixth * (b1 + 2.0 * (d1 + e1) + f1)
            a2 += sixth * (b2 + 2.0 * (d2 + e2) + f2)
            if (step + 1) % stride == 0:
                pops[b, out, 0] = p0
                pops[b, out, 1] = p1
                pops[b, out, 2] = p2
                fields[b, out, 0] = a0
                fields[b, out, 1] = a1
                fields[b, out, 2] = a2
                out += 1


_cb_batch_compiled = jit(_cb_batch_loop)


def cavity_bloch_batch_numpy(p_init, drm_ang, s_ang, eps_ang, kap_ang,
                             g1, g2, dt, n_steps, stride):
    """Vectorized pure-numpy twin of the cavity-Bloch kernel."""
    n_traces = p_init.shape[0]
    n_out = n_steps // stride + 1
    pops = np.empty((n_traces, n_out, 3))
    fields = np.empty((n_traces, n_out, 3), dtype=np.complex128)
    c = 1j * (drm_ang[:, None] - s_ang[None, :]) - 0.5 * kap_ang
    p = p_init.astype(np.float64).copy()
    a = np.zeros((n_traces, 3), dtype=np.complex128)
    pops[:, 0] = p
    fields[:, 0] = a

    def rhs(pv, av):
        dp = np.empty_like(pv)
        dp[:, 0] = g1 * pv[:, 1]
        dp[:, 1] = g2 * pv[:, 2] - g1 * pv[:, 1]
        dp[:, 2] = -g2 * pv[:, 2]
        da = c * av - 1j * eps_ang * pv
        da[:, 0] += g1 * av[:, 1]
        da[:, 1] += g2 * av[:, 2] - g1 * av[:, 1]
        da[:, 2] -= g2 * av[:, 2]
        return dp, da

    out = 1
    half = 0.5 * dt
    for step in range(n_steps):
        dp1, da1 = rhs(p, a)
        dp2, da2 = rhs(p + half * dp1, a + half * da1)
        dp3, da3 = rhs(p + half * dp2, a + half * da2)
        dp4, da4 = rhs(p + dt * dp3, a + dt * da3)
        p = p + (dt / 6.0) * (dp1 + 2.0 * (dp2 + dp3) + dp4)
        a = a + (dt / 6.0) * (da1 + 2.0 * (da2 + da3) + da4)
        if (step + 1) % stride == 0:
            pops[:, out] = p
            fields[:, out] = a
            out += 1
    return pops, fields


def cavity_bloch_batch_numba(p_init, drm_ang, s_ang, eps_ang, kap_ang,
                             g1, g2, dt, n_steps, stride):
    n_traces = p_init.shape[0]
    n_out = n_steps // stride + 1
    pops = np.empty((n_traces, n_out, 3))
    fields = np.empty((n_traces, n_out, 3), dtype=np.complex128)
    _cb_batch_compiled(
        np.ascontiguousarray(p_init, dtype=np.float64),
        np.ascontiguousarray(drm_ang, dtype=np.float64),
        np.ascontiguousarray(s_ang, dtype=np.float64),
        float(eps_ang), float(kap_ang), float(g1), float(g2),
        float(dt), int(n_steps), int(stride), pops, fields)
    return pops, fields


def cavity_bloch_batch(p_init, drm_ang, s_ang, eps_ang, kap_ang,
                       g1, g2, dt, n_steps, stride=1):
    """Integrate the cavity-Bloch system for a batch of traces.

    ``p_init`` has shape (B, 3), ``drm_ang`` shape (B,); the field starts
    empty. Returns populations (B, n_out, 3) and complex conditional field
    amplitudes (B, n_out, 3) sampled every ``stride`` steps including t=0.
    ``n_steps`` must be divisible by ``stride``.
    """
    if n_steps % stride != 0:
        raise ValueError("n_steps must be a multiple of stride")
    impl = cavity_bloch_batch_numba if using_numba() else cavity_bloch_batch_numpy
    return impl(np.asarray(p_init, dtype=np.float64),
                np.asarray(drm_ang, dtype=np.float64),
                np.asarray(s_ang, dtype=np.float64),
                eps_ang, kap_ang, g1, g2, dt, n_steps, stride)


# ---------------------------------------------------------------------------
# Lindblad propagation: loop implementation (numba target)
# ---------------------------------------------------------------------------

def _lindblad_rhs_loop(rho, h, g1, g2, gp1, gp2, out):
    # -i[H, rho], H hermitian with nonzero (0,1) and (1,2) legs only
    for i in range(3):
        for j in range(3):
            acc = 0.0 + 0.0j
            for k in range(3):
                acc += h[i, k] * rho[k, j] - rho[i, k] * h[k, j]
            out[i, j] = -1j * acc
    # relaxation 1->0 at g1 and 2->1 at g2
    out[0, 0] += g1 * rho[1, 1]
    out[1, 1] += g2 * rho[2, 2] - g1 * rho[1, 1]
    out[2, 2] -= g2 * rho[2, 2]
    h1 = 0.5 * (g1 + gp1)
    h2 = 0.5 * (g2 + gp2)
    out[0, 1] -= h1 * rho[0, 1]
    out[1, 0] -= h1 * rho[1, 0]
    out[0, 2] -= h2 * rho[0, 2]
    out[2, 0] -= h2 * rho[2, 0]
    out[1, 2] -= (h1 + h2) * rho[1, 2]
    out[2, 1] -= (h1 + h2) * rho[2, 1]


_lindblad_rhs_compiled = jit(_lindblad_rhs_loop)


def _lindblad_loop(rho0, h01, h12, g1, g2, gp1, gp2, dt, n_steps):
    rho = rho0.copy()
    ha = np.zeros((3, 3), dtype=np.complex128)
    k1 = np.empty((3, 3), dtype=np.complex128)
    k2 = np.empty((3, 3), dtype=np.complex128)
    k3 = np.empty((3, 3), dtype=np.complex128)
    k4 = np.empty((3, 3), dtype=np.complex128)
    tmp = np.empty((3, 3), dtype=np.complex128)
    half = 0.5 * dt
    for step in range(n_steps):
        i2 = 2 * step
        ha[0, 1] = 0.5 * h01[i2]
        ha[1, 0] = 0.5 * np.conj(h01[i2])
        ha[1, 2] = 0.5 * h12[i2]
        ha[2, 1] = 0.5 * np.conj(h12[i2])
        _lindblad_rhs_compiled(rho, ha, g1, g2, gp1, gp2, k1)
        ha[0, 1] = 0.5 * h01[i2 + 1]
        ha[1, 0] = 0.5 * np.conj(h01[i2 + 1])
        ha[1, 2] = 0.5 * h12[i2 + 1]
        ha[2, 1] = 0.5 * np.conj(h12[i2 + 1])
        for i in range(3):
            for j in range(3):
                tmp[i, j] = rho[i, j] + half * k1[i, j]
        _lindblad_rhs_compiled(tmp, ha, g1, g2, gp1, gp2, k2)
        for i in range(3):
            for j in range(3):
                tmp[i, j] = rho[i, j] + half * k2[i, j]
        _lindblad_rhs_compiled(tmp, ha, g1, g2, gp1, gp2, k3)
        ha[0, 1] = 0.5 * h01[i2 + 2]
        ha[1, 0] = 0.5 * np.conj(h01[i2 + 2])
        ha[1, 2] = 0.5 * h12[i2 + 2]
        ha[2, 1] = 0.5 * np.conj(h12[i2 + 2])
        for i in range(3):
            for j in range(3):
                tmp[i, j] = rho[i, j] + dt * k3[i, j]
        _lindblad_rhs_compiled(tmp, ha, g1, g2, gp1, gp2, k4)
        sixth = dt / 6.0
        for i in range(3):
            for j in range(3):
                rho[i, j] += sixth * (k1[i, j] + 2.0 * (k2[i, j] + k3[i, j])
                                      + k4[i, j])
    return rho


_lindblad_compiled = jit(_lindblad_loop)


def lindblad_rk4_numba(rho0, h01, h12, g1, g2, gp1, gp2, dt, n_steps):
    return _lindblad_compiled(
        np.ascontiguousarray(rho0, dtype=np.complex128),
        np.ascontiguousarray(h01, dtype=np.complex128),
        np.ascontiguousarray(h12, dtype=np.complex128),
        float(g1), float(g2), float(gp1), float(gp2), float(dt), int(n_steps))


def lindblad_rk4_numpy(rho0, h01, h12, g1, g2, gp1, gp2, dt, n_steps):
    """Pure-numpy twin of the Lindblad kernel."""
    rho = np.array(rho0, dtype=np.complex128)
    h1 = 0.5 * (g1 + gp1)
    h2 = 0.5 * (g2 + gp2)
    damp = np.array([[0.0, h1, h2],
                     [h1, g1, h1 + h2],
                     [h2, h1 + h2, g2]])

    def rhs(r, h):
        out = -1j * (h @ r - r @ h)
        out[0, 0] += g1 * r[1, 1]
        out[1, 1] += g2 * r[2, 2]
        out -= damp * r
        return out

    half = 0.5 * dt
    ha = np.zeros((3, 3), dtype=np.complex128)
    for step in range(n_steps):
        i2 = 2 * step
        ha[0, 1] = 0.5 * h01[i2]
        ha[1, 0] = np.conj(ha[0, 1])
        ha[1, 2] = 0.5 * h12[i2]
        ha[2, 1] = np.conj(ha[1, 2])
        k1 = rhs(rho, ha)
        ha[0, 1] = 0.5 * h01[i2 + 1]
        ha[1, 0] = np.conj(ha[0, 1])
        ha[1, 2] = 0.5 * h12[i2 + 1]
        ha[2, 1] = np.conj(ha[1, 2])
        k2 = rhs(rho + half * k1, ha)
        k3 = rhs(rho + half * k2, ha)
        ha[0, 1] = 0.5 * h01[i2 + 2]
        ha[1, 0] = np.conj(ha[0, 1])
        ha[1, 2] = 0.5 * h12[i2 + 2]
        ha[2, 1] = np.conj(ha[1, 2])
        k4 = rhs(rho + dt * k3, ha)
        rho = rho + (dt / 6.0) * (k1 + 2.0 * (k2 + k3) + k4)
    return rho


def lindblad_rk4(rho0, h01, h12, g1, g2, gp1, gp2, dt, n_steps):
    """Propagate a 3x3 density matrix under drive plus dissipation.

    ``h01``/``h12`` are the complex drive amplitudes (rad/ns, already
    including all frame phases) on the 0-1 and 1-2 legs, sampled on the
    half-step grid t = k*dt/2 with 2*n_steps+1 points. ``g1``/``g2`` are the
    1->0 and 2->1 relaxation rates, ``gp1``/``gp2`` the pure-dephasing rates
    of levels 1 and 2 (Lindblad prefactors of the |n><n| collapse operators).
    """
    if len(h01) < 2 * n_steps + 1 or len(h12) < 2 * n_steps + 1:
        raise ValueError("envelope arrays must have 2*n_steps+1 samples")
    impl = lindblad_rk4_numba if using_numba() else lindblad_rk4_numpy
    return impl(rho0, h01, h12, g1, g2, gp1, gp2, dt, n_steps)
