import dataclasses

import numpy as np
import pytest

import qutritsim.reconstruction as rc


def random_pure_rho(rng):
    psi = rng.normal(size=3) + 1j * rng.normal(size=3)
    psi /= np.linalg.norm(psi)
    return np.outer(psi, psi.conj())


def random_mixed_rho(rng):
    t = rng.normal(size=(3, 3)) + 1j * rng.normal(size=(3, 3))
    rho = t @ t.conj().T
    return rho / np.trace(rho).real


def make_record(rho, ops, rotations, sigma=1.0, rng=None):
    values = rc.expected_values(rho, ops, rotations)
    if rng is not None:
        values = values + rng.normal(scale=sigma, size=9)
    return rc.TomographyRecord(values=tuple(float(v) for v in values),
                               sigmas=(sigma,) * 9)


# ---------------------------------------------------------------------------
# measurement operator


def test_from_traces_integrates_window(refs, ops):
    times = refs[0].times
    mask = times <= 500.0 + 1e-9
    for k, trace in enumerate(refs):
        m = np.trapezoid(trace.i_quad[mask], times[mask])
        assert ops.m_values[k] == pytest.approx(m, rel=1e-12)
    # frozen reference numbers for the stock configuration
    assert np.allclose(ops.m_values, (-98.5866, -212.1151, 117.9281),
                       atol=1e-3)


def test_operator_matrix_is_diagonal(ops):
    m = ops.matrix()
    assert np.allclose(m, np.diag(np.diag(m)))
    assert np.allclose(np.diag(m).real, ops.m_values)


def test_degenerate_m_values_rejected():
    with pytest.raises(ValueError, match="distinct"):
        rc.MeasurementOperator(m_values=(1.0, 1.0 + 1e-12, 2.0),
                               window=500.0)
    with pytest.raises(ValueError, match="window"):
        rc.MeasurementOperator(m_values=(1.0, 2.0, 3.0), window=0.0)


def test_record_validation():
    with pytest.raises(ValueError):
        rc.TomographyRecord(values=(0.0,) * 8, sigmas=(1.0,) * 8)
    with pytest.raises(ValueError, match="sigma"):
        rc.TomographyRecord(values=(0.0,) * 9, sigmas=(0.0,) * 9)


# ---------------------------------------------------------------------------
# population OLS


def test_ols_recovers_noiseless_mixture(refs):
    p = np.array([0.2, 0.3, 0.5])
    synthetic = dataclasses.replace(
        refs[0], i_quad=sum(w * tr.i_quad for w, tr in zip(p, refs)))
    est = rc.ols_populations(synthetic, refs)
    assert np.abs(est.populations - p).max() < 1e-10
    assert est.condition < 1e4
    assert est.residual_norm < 1e-9
    assert est.covariance.shape == (3, 3)


def test_ols_constrained_projects_to_simplex(refs):
    rng = np.random.default_rng(0)
    p = np.array([0.98, 0.02, 0.0])
    noisy = sum(w * tr.i_quad for w, tr in zip(p, refs))
    noisy = noisy + rng.normal(scale=0.3 * np.abs(noisy).max(),
                               size=noisy.shape)
    synthetic = dataclasses.replace(refs[0], i_quad=noisy)
    est = rc.ols_populations(synthetic, refs, constrain=True)
    assert est.populations.min() >= -1e-12
    assert est.populations.sum() == pytest.approx(1.0, abs=1e-12)


def test_ols_rejects_singular_design(refs):
    degenerate = (refs[0], refs[0], refs[0])
    with pytest.raises(ValueError, match="condition"):
        rc.ols_populations(refs[0], degenerate)


def test_ols_rejects_mismatched_grid(refs):
    shifted = dataclasses.replace(refs[0], times=refs[0].times + 1.0)
    with pytest.raises(ValueError, match="time"):
        rc.ols_populations(shifted, refs)


# ---------------------------------------------------------------------------
# rotations and design


def test_rotations_are_unitary(rotations):
    assert len(rotations) == 9
    for u in rotations:
        assert np.abs(u @ u.conj().T - np.eye(3)).max() < 1e-12


def test_composite_rotation_order(rotations):
    """Composite labels read left to right in time: the pi01 pulse acts
    first. From |0> the (pi)x01(pi)x12 branch must reach |2>; with the
    opposite ordering the 0-2 coherence would never become measurable
    and the design would lose rank."""
    e0 = np.array([1.0, 0.0, 0.0])
    final = rotations[8] @ e0
    assert abs(final[2]) == pytest.approx(1.0, abs=1e-12)
    # and the (pi)x01(pi/2)x12 branch splits |0> across |1>, |2>
    mid = rotations[6] @ e0
    assert abs(mid[1]) == pytest.approx(np.sqrt(0.5), abs=1e-12)
    assert abs(mid[2]) == pytest.approx(np.sqrt(0.5), abs=1e-12)


def test_design_matrix_full_rank(ops, rotations):
    a, cond = rc.design_matrix(ops, rotations)
    assert a.shape == (9, 9)
    assert np.linalg.matrix_rank(a) == 9
    assert cond == pytest.approx(7.584, abs=0.01)


def test_design_matrix_rejects_incomplete_set(ops):
    with pytest.raises(ValueError, match="rank"):
        rc.design_matrix(ops, [np.eye(3)] * 9)


def test_expected_values_linear_in_rho(ops, rotations):
    rng = np.random.default_rng(1)
    r1, r2 = random_mixed_rho(rng), random_mixed_rho(rng)
    v1 = rc.expected_values(r1, ops, rotations)
    v2 = rc.expected_values(r2, ops, rotations)
    v_mix = rc.expected_values(0.3 * r1 + 0.7 * r2, ops, rotations)
    assert np.abs(0.3 * v1 + 0.7 * v2 - v_mix).max() < 1e-9


# ---------------------------------------------------------------------------
# linear inversion


def test_linear_inversion_roundtrip(ops, rotations):
    rng = np.random.default_rng(2)
    for _ in range(20):
        rho = random_mixed_rho(rng)
        rec = make_record(rho, ops, rotations)
        out = rc.linear_inversion(rec, ops, rotations)
        assert np.abs(out - rho).max() < 1e-10


def test_linear_inversion_output_is_hermitian_unit_trace(ops, rotations):
    rng = np.random.default_rng(3)
    rec = make_record(random_pure_rho(rng), ops, rotations, sigma=20.0,
                      rng=rng)
    out = rc.linear_inversion(rec, ops, rotations)
    assert np.abs(out - out.conj().T).max() < 1e-12
    assert np.trace(out).real == pytest.approx(1.0, abs=1e-12)


def test_linear_inversion_uses_weights(ops, rotations):
    """The three population rows (I, pi01, pi01 pi12) plus the trace
    constraint over-determine the diagonal, so a corrupted population
    reading with a huge stated sigma must not move the estimate, while
    the same corruption at equal weights must."""
    rng = np.random.default_rng(4)
    rho = random_pure_rho(rng)
    clean = rc.expected_values(rho, ops, rotations)
    values = list(clean)
    values[3] += 500.0
    sigmas = [1.0] * 9
    sigmas[3] = 1e8
    rec = rc.TomographyRecord(values=tuple(values), sigmas=tuple(sigmas))
    out = rc.linear_inversion(rec, ops, rotations)
    assert np.abs(out - rho).max() < 1e-6
    flat = rc.TomographyRecord(values=tuple(values), sigmas=(1.0,) * 9)
    biased = rc.linear_inversion(flat, ops, rotations)
    assert np.abs(biased - rho).max() > 0.1


# ---------------------------------------------------------------------------
# physicality helpers


def test_project_physical_clips_negative_eigenvalues():
    rho = np.diag([0.7, 0.5, -0.2]).astype(complex)
    out = rc.project_physical(rho)
    assert np.linalg.eigvalsh(out).min() >= -1e-15
    assert np.trace(out).real == pytest.approx(1.0, abs=1e-12)
    # already-physical input passes through unchanged
    ok = np.diag([0.5, 0.3, 0.2]).astype(complex)
    assert np.abs(rc.project_physical(ok) - ok).max() < 1e-12


def test_check_density_matrix():
    rc.check_density_matrix(np.eye(3) / 3.0, positive=True)
    with pytest.raises(ValueError, match="Hermitian"):
        rc.check_density_matrix(np.triu(np.ones((3, 3))) / 3.0)
    with pytest.raises(ValueError, match="trace"):
        rc.check_density_matrix(np.eye(3))
    with pytest.raises(ValueError, match="positive"):
        rc.check_density_matrix(np.diag([1.2, -0.2, 0.0]), positive=True)


# ---------------------------------------------------------------------------
# maximum likelihood


def test_mle_recovers_noiseless_state(ops, rotations):
    rng = np.random.default_rng(5)
    rho = random_pure_rho(rng)
    rec = make_record(rho, ops, rotations)
    est = rc.mle_estimate(rec, ops, rotations, rng=np.random.default_rng(0))
    assert np.abs(est.rho - rho).max() < 1e-5
    assert est.cost < 1e-8


def test_mle_output_physical_and_no_worse_than_seed(ops, rotations):
    rng = np.random.default_rng(6)
    for _ in range(5):
        rho = random_pure_rho(rng)
        rec = make_record(rho, ops, rotations, sigma=15.0, rng=rng)
        seed = rc.project_physical(rc.linear_inversion(rec, ops, rotations))
        est = rc.mle_estimate(rec, ops, rotations, restarts=1,
                              max_evaluations=20000,
                              rng=np.random.default_rng(1))
        assert np.linalg.eigvalsh(est.rho).min() >= -1e-9
        assert np.trace(est.rho).real == pytest.approx(1.0, abs=1e-10)
        assert est.cost <= rc.mle_cost(seed, rec, ops, rotations) + 1e-9
        assert est.n_evaluations > 0


def test_mle_deterministic_given_rng(ops, rotations):
    rng = np.random.default_rng(7)
    rec = make_record(random_pure_rho(rng), ops, rotations, sigma=10.0,
                      rng=rng)
    a = rc.mle_estimate(rec, ops, rotations, rng=np.random.default_rng(42))
    b = rc.mle_estimate(rec, ops, rotations, rng=np.random.default_rng(42))
    assert np.array_equal(a.rho, b.rho)
    assert a.cost == b.cost


# ---------------------------------------------------------------------------
# fidelity and bootstrap


def test_fidelity_pure_overlap():
    psi = np.array([1.0, 1.0j, 0.0]) / np.sqrt(2.0)
    rho = np.outer(psi, psi.conj())
    assert rc.fidelity(psi, rho) == pytest.approx(1.0, abs=1e-12)
    # unnormalized target is normalized internally
    assert rc.fidelity(2.0 * psi, rho) == pytest.approx(1.0, abs=1e-12)
    other = np.array([1.0, 0.0, 0.0])
    assert rc.fidelity(other, rho) == pytest.approx(0.5, abs=1e-12)


def test_bootstrap_spread_tracks_noise_scale(ops, rotations):
    rng = np.random.default_rng(8)
    rho = random_pure_rho(rng)
    rec = make_record(rho, ops, rotations, sigma=8.0, rng=rng)
    samples = rc.bootstrap_resample(rec, ops, rotations, n_resamples=40,
                                    rng=np.random.default_rng(2))
    assert samples.shape == (40, 3, 3)
    spread = rc.element_spread(samples)
    assert spread.shape == (3, 3)
    assert np.all(spread >= 0.0)
    assert np.allclose(spread, spread.T, atol=1e-12)
    # spreads should sit at the few-percent scale for this noise level
    assert 1e-4 < spread.max() < 0.1
    wrapper = rc.bootstrap_spread(rec, ops, rotations, n_resamples=40,
                                  rng=np.random.default_rng(2))
    assert np.array_equal(wrapper, spread)
