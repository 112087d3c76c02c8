"""Measurement inversion: OLS population extraction and qutrit state
tomography.

Populations come from a least-squares fit of a measured I-quadrature trace
against the three basis-state reference traces, one linear equation per
time step. Full density matrices come from nine rotated measurements of
the time-integrated operator M_I: linear inversion with a hard trace
constraint gives the (possibly unphysical) starting point, a bounded
likelihood search over a Cholesky parameterization restores positivity.
"""

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import minimize

#: the nine tomography pulse identifiers, in order
ROTATION_LABELS = (
    "I",
    "(pi/2)x01",
    "(pi/2)y01",
    "(pi)x01",
    "(pi/2)x12",
    "(pi/2)y12",
    "(pi)x01(pi/2)x12",
    "(pi)x01(pi/2)y12",
    "(pi)x01(pi)x12",
)

_DISTINCT_RTOL = 1e-9


@dataclass(frozen=True)
class MeasurementOperator:
    """Time-integrated readout observable, diagonal in the energy basis.

    m_values are the integrals of the three reference I-quadrature traces
    over [0, window]; they are the operator's eigenvalues. They must be
    pairwise distinct or the nine-rotation design matrix degenerates.
    """

    m_values: tuple
    window: float

    def __post_init__(self):
        if len(self.m_values) != 3:
            raise ValueError("m_values must have three entries")
        if self.window <= 0:
            raise ValueError("window must be positive")
        scale = max(abs(m) for m in self.m_values) or 1.0
        for i in range(3):
            for j in range(i + 1, 3):
                if abs(self.m_values[i] - self.m_values[j]) \
                        <= _DISTINCT_RTOL * scale:
                    raise ValueError(
                        "m_values must be pairwise distinct; levels %d and "
                        "%d are degenerate" % (i, j))

    @classmethod
    def from_traces(cls, refs, window=500.0):
        """Integrate three basis-state reference traces up to ``window``."""
        if len(refs) != 3:
            raise ValueError("need exactly three reference traces")
        times = refs[0].times
        if times[-1] < window:
            raise ValueError("references end before the integration window")
        mask = times <= window + 1e-9
        ms = tuple(float(np.trapezoid(r.i_quad[mask], times[mask]))
                   for r in refs)
        return cls(m_values=ms, window=float(window))

    def matrix(self):
        return np.diag(np.asarray(self.m_values, dtype=np.complex128))


@dataclass(frozen=True)
class TomographyRecord:
    """The nine measured <I_k> with statistical uncertainties."""

    values: tuple
    sigmas: tuple
    rotation_labels: tuple = ROTATION_LABELS

    def __post_init__(self):
        if len(self.values) != 9 or len(self.sigmas) != 9:
            raise ValueError("record must carry nine values and sigmas")
        if len(self.rotation_labels) != 9:
            raise ValueError("record must carry nine rotation labels")
        if any(s <= 0 for s in self.sigmas):
            raise ValueError("sigmas must be positive")


@dataclass
class PopulationEstimate:
    """OLS population fit with its covariance and design conditioning."""

    populations: np.ndarray
    covariance: np.ndarray
    condition: float
    residual_norm: float = field(default=0.0)


def check_density_matrix(rho, positive=False):
    """Validate Hermiticity, unit trace and (optionally) positivity."""
    rho = np.asarray(rho, dtype=np.complex128)
    if rho.shape != (3, 3):
        raise ValueError("density matrix must be 3x3")
    if np.max(np.abs(rho - rho.conj().T)) > 1e-10:
        raise ValueError("density matrix must be Hermitian to 1e-10")
    if abs(np.trace(rho).real - 1.0) > 1e-10:
        raise ValueError("density matrix must have trace 1 to 1e-10")
    if positive and np.linalg.eigvalsh(rho).min() < -1e-9:
        raise ValueError("density matrix must be positive semidefinite")
    return rho


def project_physical(rho):
    """Nearest physical state: clip negative eigenvalues, renormalize."""
    rho = 0.5 * (rho + np.asarray(rho).conj().T)
    vals, vecs = np.linalg.eigh(rho)
    vals = np.clip(vals, 0.0, None)
    s = vals.sum()
    if s <= 0:
        return np.eye(3, dtype=np.complex128) / 3.0
    out = (vecs * (vals / s)) @ vecs.conj().T
    return 0.5 * (out + out.conj().T)


def ols_populations(trace, refs, constrain=False):
    """Fit level populations to a trace against basis references.

    Solves min_p sum_i (I(t_i) - sum_n p_n I_n(t_i))^2 jointly over all
    time steps. Returns the unconstrained estimate, its covariance from
    the design matrix with the empirical residual variance, and the
    design condition number; ``constrain`` projects the estimate onto the
    probability simplex afterwards.
    """
    times = trace.times
    for r in refs:
        if r.times.shape != times.shape or \
                not np.allclose(r.times, times, rtol=0, atol=1e-9):
            raise ValueError("trace and references must share a time grid")
    a = np.column_stack([r.i_quad for r in refs])
    cond = float(np.linalg.cond(a))
    if cond > 1e12:
        raise ValueError(
            "reference traces are indistinguishable (condition number "
            "%.3e)" % cond)
    y = trace.i_quad
    p, res, _, _ = np.linalg.lstsq(a, y, rcond=None)
    dof = max(len(y) - 3, 1)
    ssr = float(res[0]) if res.size else float(np.sum((y - a @ p) ** 2))
    cov = ssr / dof * np.linalg.inv(a.T @ a)
    if constrain:
        p = _simplex_projection(p)
    return PopulationEstimate(populations=p, covariance=cov,
                              condition=cond,
                              residual_norm=math.sqrt(ssr))


def _simplex_projection(p):
    # Euclidean projection onto {p >= 0, sum p = 1}
    u = np.sort(p)[::-1]
    css = np.cumsum(u)
    k = np.nonzero(u * np.arange(1, len(p) + 1) > (css - 1.0))[0][-1]
    tau = (css[k] - 1.0) / (k + 1.0)
    return np.clip(p - tau, 0.0, None)


def _rotation(levels, theta, axis_phase):
    u = np.eye(3, dtype=np.complex128)
    i, j = levels
    c, s = math.cos(0.5 * theta), math.sin(0.5 * theta)
    u[i, i] = u[j, j] = c
    u[i, j] = -1j * s * np.exp(-1j * axis_phase)
    u[j, i] = -1j * s * np.exp(1j * axis_phase)
    return u


def tomography_rotations():
    """The nine tomography unitaries, ordered as ROTATION_LABELS.

    (theta)_a on levels {i,j} is exp(-i theta/2 (cos a X_ij + sin a Y_ij)).
    Composite labels read left to right in time: the 01 pi pulse acts on
    the state first, then the 12 rotation, so the operator product is
    R12 @ R01. This ordering is the informationally complete one: the pi
    pulse swaps levels 0 and 1, turning the otherwise unreachable 02
    coherence into a 12 coherence that the second rotation converts to
    populations. The reverse ordering leaves the design matrix rank 7.
    """
    half = 0.5 * math.pi
    x01_90 = _rotation((0, 1), half, 0.0)
    y01_90 = _rotation((0, 1), half, half)
    x01_180 = _rotation((0, 1), math.pi, 0.0)
    x12_90 = _rotation((1, 2), half, 0.0)
    y12_90 = _rotation((1, 2), half, half)
    x12_180 = _rotation((1, 2), math.pi, 0.0)
    return [
        np.eye(3, dtype=np.complex128),
        x01_90,
        y01_90,
        x01_180,
        x12_90,
        y12_90,
        x12_90 @ x01_180,
        y12_90 @ x01_180,
        x12_180 @ x01_180,
    ]


def effective_operators(ops, rotations):
    """M'_k = U_k^dag M_I U_k for each tomography rotation."""
    m = ops.matrix()
    return [u.conj().T @ m @ u for u in rotations]


def _basis_coefficients(mk):
    # row of the real design: coefficients of (p0, p1, p2, Re01, Im01,
    # Re12, Im12, Re02, Im02) in Tr[rho M'_k]
    return np.array([
        mk[0, 0].real, mk[1, 1].real, mk[2, 2].real,
        2.0 * mk[1, 0].real, -2.0 * mk[1, 0].imag,
        2.0 * mk[2, 1].real, -2.0 * mk[2, 1].imag,
        2.0 * mk[2, 0].real, -2.0 * mk[2, 0].imag,
    ])


def _params_to_rho(x):
    return np.array([
        [x[0], x[3] + 1j * x[4], x[7] + 1j * x[8]],
        [x[3] - 1j * x[4], x[1], x[5] + 1j * x[6]],
        [x[7] - 1j * x[8], x[5] - 1j * x[6], x[2]],
    ], dtype=np.complex128)


def design_matrix(ops, rotations):
    """9x9 real tomography design and its condition number.

    Raises when the measurement set is not informationally complete
    (rank below nine).
    """
    rows = [_basis_coefficients(mk)
            for mk in effective_operators(ops, rotations)]
    a = np.vstack(rows)
    svals = np.linalg.svd(a, compute_uv=False)
    if svals[-1] <= 1e-12 * svals[0]:
        rank = int(np.sum(svals > 1e-12 * svals[0]))
        raise ValueError(
            "tomography design matrix is singular (rank %d of 9): "
            "measurement set is not informationally complete" % rank)
    return a, float(svals[0] / svals[-1])


def expected_values(rho, ops, rotations):
    """Noiseless <I_k> = Tr[rho U_k^dag M_I U_k] for the nine rotations."""
    rho = np.asarray(rho, dtype=np.complex128)
    return np.array([float(np.trace(rho @ mk).real)
                     for mk in effective_operators(ops, rotations)])


def linear_inversion(record, ops, rotations):
    """Weighted least-squares state estimate; may be unphysical.

    Hermiticity and unit trace hold by construction (the trace enters as
    a hard constraint, removing the arbitrary-units gauge); positivity is
    not enforced here.
    """
    a, _ = design_matrix(ops, rotations)
    y = np.asarray(record.values, dtype=float)
    w = 1.0 / np.asarray(record.sigmas, dtype=float) ** 2
    ata = a.T @ (w[:, None] * a)
    aty = a.T @ (w * y)
    c = np.zeros(9)
    c[:3] = 1.0
    kkt = np.zeros((10, 10))
    kkt[:9, :9] = 2.0 * ata
    kkt[:9, 9] = c
    kkt[9, :9] = c
    rhs = np.concatenate([2.0 * aty, [1.0]])
    x = np.linalg.solve(kkt, rhs)[:9]
    return _params_to_rho(x)


def _chol_params(rho):
    # lower-triangular factor of a physical state, flattened to 9 reals
    t = np.linalg.cholesky(project_physical(rho)
                           + 1e-12 * np.eye(3))
    return np.array([t[0, 0].real, t[1, 1].real, t[2, 2].real,
                     t[1, 0].real, t[1, 0].imag,
                     t[2, 1].real, t[2, 1].imag,
                     t[2, 0].real, t[2, 0].imag])


def _params_to_physical(x):
    t = np.array([
        [x[0], 0.0, 0.0],
        [x[3] + 1j * x[4], x[1], 0.0],
        [x[7] + 1j * x[8], x[5] + 1j * x[6], x[2]],
    ], dtype=np.complex128)
    rho = t @ t.conj().T
    tr = np.trace(rho).real
    if tr <= 0:
        return np.eye(3, dtype=np.complex128) / 3.0
    return rho / tr


@dataclass
class MLEResult:
    """Physical state estimate with the weighted squared-residual cost."""

    rho: np.ndarray
    cost: float
    n_evaluations: int


def mle_cost(rho, record, ops, rotations):
    """Sum_k (<I_k> - Tr[rho M'_k])^2 / sigma_k^2."""
    pred = expected_values(rho, ops, rotations)
    y = np.asarray(record.values, dtype=float)
    s = np.asarray(record.sigmas, dtype=float)
    return float(np.sum(((y - pred) / s) ** 2))


def mle_estimate(record, ops, rotations, seed=None, restarts=2,
                 max_evaluations=100000, rng=None, fatol=1e-12,
                 xatol=1e-9):
    """Maximum-likelihood state reconstruction.

    The state is parameterized as T T^dag / Tr(T T^dag) with T lower
    triangular (9 real parameters), which enforces positivity and unit
    trace exactly. Seeded from the projected linear inversion unless a
    ``seed`` state is supplied; a derivative-free simplex search runs
    from the seed and from ``restarts`` perturbed copies, and the best
    result is kept. The returned cost never exceeds the seed's.
    """
    if seed is None:
        seed = linear_inversion(record, ops, rotations)
    seed_phys = project_physical(seed)
    if rng is None:
        rng = np.random.default_rng(0)
    mks = effective_operators(ops, rotations)
    rows = np.vstack([_basis_coefficients(mk) for mk in mks])
    y = np.asarray(record.values, dtype=float)
    inv_s = 1.0 / np.asarray(record.sigmas, dtype=float)

    def cost_params(x):
        rho = _params_to_physical(x)
        pred = rows @ np.array([
            rho[0, 0].real, rho[1, 1].real, rho[2, 2].real,
            rho[0, 1].real, rho[0, 1].imag,
            rho[1, 2].real, rho[1, 2].imag,
            rho[0, 2].real, rho[0, 2].imag])
        return float(np.sum(((y - pred) * inv_s) ** 2))

    x0 = _chol_params(seed_phys)
    seed_cost = cost_params(x0)
    budget = max_evaluations // (restarts + 1)
    best_x, best_cost, used = x0, seed_cost, 0
    for trial in range(restarts + 1):
        start = x0 if trial == 0 else \
            best_x + rng.normal(scale=1e-3, size=9)
        res = minimize(cost_params, start, method="Nelder-Mead",
                       options={"maxfev": budget, "fatol": fatol,
                                "xatol": xatol})
        used += res.nfev
        if res.fun < best_cost:
            best_cost, best_x = res.fun, res.x
    rho = _params_to_physical(best_x)
    rho = 0.5 * (rho + rho.conj().T)
    return MLEResult(rho=rho, cost=float(best_cost), n_evaluations=used)


def fidelity(psi, rho):
    """State fidelity <psi|rho|psi> of a pure target with an estimate."""
    psi = np.asarray(psi, dtype=np.complex128).reshape(3)
    psi = psi / np.linalg.norm(psi)
    return float(np.real(psi.conj() @ np.asarray(rho) @ psi))


def bootstrap_resample(record, ops, rotations, n_resamples=200, rng=None):
    """Parametric bootstrap: resample the record from N(value, sigma)
    and refit each draw. Returns the (n_resamples, 3, 3) MLE states.
    """
    if n_resamples < 2:
        raise ValueError("need at least two resamples")
    if rng is None:
        rng = np.random.default_rng(0)
    sig = np.asarray(record.sigmas, dtype=float)
    base = np.asarray(record.values, dtype=float)
    # warm-start every refit from the base estimate; resample optima sit
    # close by, so the tight headline tolerance buys nothing here
    warm = mle_estimate(record, ops, rotations, restarts=0, rng=rng).rho
    samples = np.empty((n_resamples, 3, 3), dtype=np.complex128)
    for i in range(n_resamples):
        values = tuple(base + rng.normal(scale=sig))
        rec = TomographyRecord(values=values, sigmas=record.sigmas,
                               rotation_labels=record.rotation_labels)
        samples[i] = mle_estimate(rec, ops, rotations, seed=warm,
                                  restarts=0, rng=rng, fatol=1e-9,
                                  xatol=1e-5).rho
    return samples


def element_spread(samples):
    """Per-element total standard deviation sqrt(Var Re + Var Im) over
    a stack of density matrices."""
    samples = np.asarray(samples)
    return np.sqrt(samples.real.var(axis=0) + samples.imag.var(axis=0))


def bootstrap_spread(record, ops, rotations, n_resamples=200, rng=None):
    """Element-wise bootstrap spread of the MLE state; see
    bootstrap_resample."""
    return element_spread(bootstrap_resample(
        record, ops, rotations, n_resamples=n_resamples, rng=rng))
