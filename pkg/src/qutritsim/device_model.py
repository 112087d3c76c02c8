"""Static spectral model of the transmon-resonator system.

Everything here is pure arithmetic on the device parameters: level
frequencies from the Duffing closure, transition couplings g_n = eta_n * g0,
partial shifts chi_n = g_n^2 / Delta_n, dispersive cavity shifts s_n and the
critical photon number.

Units: all frequencies are cyclic (MHz, the "/2pi" numbers); times are ns.
Angular conversion happens only inside integrators.
"""

import math
from dataclasses import dataclass, replace

import numpy as np

#: minimum |Delta_n| / g_n for the dispersive approximation to be trusted
DISPERSIVE_RATIO_MIN = 5.0


def _default_eta(n_levels):
    # sqrt(n+1) ladder of a harmonic oscillator, eta_0 = 1 by definition
    return tuple(math.sqrt(n + 1) for n in range(n_levels))


@dataclass(frozen=True)
class DeviceParams:
    """Physical parameters of the qutrit-resonator system.

    ``t1`` and ``t2`` are indexed by excited level: ``t1[0]`` is the
    relaxation time of level 1, ``t1[1]`` of level 2. A ``t2`` entry of
    ``None`` means relaxation-limited (no extra pure dephasing on that
    level). ``ej_max`` is carried as metadata only and never enters any
    computation.
    """

    charging_energy: float = 298.0
    omega_r: float = 6942.1
    omega_01: float = 5623.1
    g0: float = 115.0
    eta: tuple = None
    anharmonicity: float = None
    kappa: float = 1.0
    t1: tuple = (800.0, 700.0)
    t2: tuple = (None, 500.0)
    n_levels: int = 3
    ej_max: float = None

    def __post_init__(self):
        if self.n_levels != 3:
            raise ValueError("n_levels is fixed to 3")
        if self.anharmonicity is None:
            object.__setattr__(self, "anharmonicity", -self.charging_energy)
        if self.eta is None:
            object.__setattr__(self, "eta", _default_eta(self.n_levels))
        else:
            object.__setattr__(self, "eta", tuple(float(e) for e in self.eta))
        object.__setattr__(self, "t1", tuple(float(t) for t in self.t1))
        object.__setattr__(
            self, "t2",
            tuple(None if t is None else float(t) for t in self.t2))
        if self.charging_energy <= 0:
            raise ValueError("charging_energy must be > 0")
        if self.g0 <= 0:
            raise ValueError("g0 must be > 0")
        if self.kappa <= 0:
            raise ValueError("kappa must be > 0")
        if len(self.eta) < self.n_levels:
            raise ValueError(
                "eta must cover transitions 0..%d" % (self.n_levels - 1))
        if abs(self.eta[0] - 1.0) > 1e-12:
            raise ValueError("eta[0] (the 0-1 coupling ratio) must be 1")
        if len(self.t1) != self.n_levels - 1 or len(self.t2) != self.n_levels - 1:
            raise ValueError("t1 and t2 need one entry per excited level")
        if any(t <= 0 for t in self.t1):
            raise ValueError("all t1 must be > 0")
        if any(t is not None and t <= 0 for t in self.t2):
            raise ValueError("all t2 must be > 0")
        for n, (delta, g) in enumerate(zip(self._deltas(), self._couplings())):
            if delta == 0.0:
                raise ValueError("transition %d resonant with cavity" % n)
            ratio = abs(delta) / g
            if ratio < DISPERSIVE_RATIO_MIN:
                raise ValueError(
                    "dispersive regime violated on transition %d: "
                    "|Delta|/g = %.3f < %.1f"
                    % (n, ratio, DISPERSIVE_RATIO_MIN))

    def _deltas(self):
        # Delta_n = omega_{n,n+1} - omega_r for n = 0..n_levels-1; the last
        # one involves the virtual level above the qutrit manifold
        return tuple(self.omega_01 + n * self.anharmonicity - self.omega_r
                     for n in range(self.n_levels))

    def _couplings(self):
        return tuple(self.eta[n] * self.g0 for n in range(self.n_levels))


@dataclass(frozen=True)
class DispersiveSpectrum:
    """Derived spectral quantities, all in MHz except n_crit."""

    omega_n: tuple
    delta_n: tuple
    chi_n: tuple
    s_n: tuple
    n_crit: float


def reference_device(**overrides):
    """Parameter set used by the example configuration and the test suite."""
    base = dict(charging_energy=298.0, omega_r=6942.1, omega_01=5623.1,
                g0=115.0, eta=(1.0, 1.43, math.sqrt(3.0)),
                anharmonicity=-298.0, kappa=1.0,
                t1=(800.0, 700.0), t2=(None, 500.0), ej_max=38000.0)
    base.update(overrides)
    return DeviceParams(**base)


def level_frequencies(params):
    """Level frequencies (MHz) relative to the ground state.

    Duffing closure: omega_n = n*omega_01 + n(n-1)/2 * anharmonicity.
    """
    return tuple(n * params.omega_01 + 0.5 * n * (n - 1) * params.anharmonicity
                 for n in range(params.n_levels))


def dispersive_spectrum(params):
    """Dispersive shifts s_n, partial shifts chi_n and n_crit.

    chi_n = g_n^2 / Delta_n with g_n = eta_n * g0; s_0 = -chi_0 and
    s_n = -(chi_n - chi_{n-1}) for n >= 1; n_crit = Delta_0^2 / (4 g0^2).
    """
    deltas = params._deltas()
    gs = params._couplings()
    chi = tuple(g * g / d for g, d in zip(gs, deltas))
    s = (-chi[0],) + tuple(-(chi[n] - chi[n - 1])
                           for n in range(1, params.n_levels))
    n_crit = deltas[0] ** 2 / (4.0 * params.g0 ** 2)
    return DispersiveSpectrum(omega_n=level_frequencies(params),
                              delta_n=deltas, chi_n=chi, s_n=s,
                              n_crit=n_crit)


def shift_vs_qubit_frequency(params, omega_01_grid):
    """Dispersive shifts evaluated over a grid of 0-1 transition frequencies.

    Returns an array of rows (omega_01, s0, s1, s2). Grid points that leave
    the dispersive regime are collected and reported in one error rather than
    silently dropped.
    """
    grid = np.asarray(omega_01_grid, dtype=float)
    rows = np.empty((grid.size, 1 + params.n_levels))
    bad = []
    for i, w in enumerate(grid):
        try:
            spec = dispersive_spectrum(replace(params, omega_01=float(w)))
        except ValueError as err:
            bad.append((float(w), str(err)))
            continue
        rows[i, 0] = w
        rows[i, 1:] = spec.s_n
    if bad:
        listing = "; ".join("omega_01=%g: %s" % item for item in bad)
        raise ValueError("grid points outside dispersive validity: " + listing)
    return rows
