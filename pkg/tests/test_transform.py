"""Core solver tests: prox, closed-form update, objective, fit loop."""
import numpy as np
import numpy.testing as npt
import pytest

from ktlearn.errors import CholeskyFailure, SingularTransform
from ktlearn.transform import (FitReport, TlConfig, TransformModel,
                               fit_transform, hard_threshold,
                               initial_transform, regularized_cholesky,
                               relative_change, seeded_orthogonal, tl_encode,
                               tl_gradient_T, tl_objective, transform_update)

GOLDEN_RATIO_HALF = (1.0 + np.sqrt(5.0)) / 4.0


# ---------------------------------------------------------------- prox

def test_hard_threshold_matches_per_entry_rule():
    rng = np.random.default_rng(11)
    values = rng.normal(size=(40, 30))
    out = hard_threshold(values, 0.8)
    for idx in np.ndindex(values.shape):
        expected = values[idx] if abs(values[idx]) >= 0.8 else 0.0
        assert out[idx] == expected


def test_hard_threshold_keeps_boundary_entries():
    values = np.array([0.5, -0.5, 0.4999999, -0.25, 0.75])
    out = hard_threshold(values, 0.5)
    npt.assert_array_equal(out, [0.5, -0.5, 0.0, 0.0, 0.75])


def test_hard_threshold_zero_level_keeps_everything():
    values = np.array([-1.0, 0.0, 2.0])
    npt.assert_array_equal(hard_threshold(values, 0.0), values)


def test_hard_threshold_preserves_shape_and_dtype():
    out = hard_threshold(np.ones((3, 4)), 2.0)
    assert out.shape == (3, 4)
    assert out.dtype == np.float64
    assert np.count_nonzero(out) == 0


# ------------------------------------------------- closed-form update

def test_update_identity_data_identity_codes():
    # stationarity of c(c-1)*2 + 2c - 1/c = 0 gives 4c^2 - 2c - 1 = 0,
    # whose positive root is (1 + sqrt 5)/4
    eye = np.eye(2)
    t_mat = transform_update(eye, eye, 1.0)
    npt.assert_allclose(t_mat, GOLDEN_RATIO_HALF * eye, rtol=0, atol=1e-12)


def test_update_identity_data_zero_codes():
    # 4c^2 = 1 when the residual pulls straight toward zero
    eye = np.eye(2)
    t_mat = transform_update(eye, np.zeros((2, 2)), 1.0)
    npt.assert_allclose(t_mat, 0.5 * eye, rtol=0, atol=1e-12)


@pytest.mark.parametrize("m,n_cols,seed", [(3, 10, 0), (5, 20, 1), (8, 12, 2)])
def test_update_is_stationary_for_random_instances(m, n_cols, seed):
    rng = np.random.default_rng(seed)
    x = rng.normal(size=(m, n_cols))
    z = rng.normal(size=(m, n_cols))
    lam = 0.7
    t_mat = transform_update(x, z, lam)
    grad = tl_gradient_T(t_mat, x, z, lam)
    assert np.linalg.norm(grad) <= 1e-9 * (1.0 + np.linalg.norm(t_mat))
    assert np.linalg.det(t_mat) > 0


def test_update_handles_orientation_flip():
    # X Z^T with negative determinant forces the mirrored branch; the
    # result must stay positively oriented and stationary
    x = np.eye(3)
    z = np.diag([1.0, 1.0, -1.0])
    t_mat = transform_update(x, z, 1.0)
    assert np.linalg.det(t_mat) > 0
    grad = tl_gradient_T(t_mat, x, z, 1.0)
    assert np.linalg.norm(grad) <= 1e-10


def test_update_orientation_flip_is_the_cheaper_branch():
    # flipping the smallest singular direction must beat flipping any other
    rng = np.random.default_rng(5)
    x = rng.normal(size=(4, 9))
    z = rng.normal(size=(4, 9))
    if np.linalg.det(x @ z.T) > 0:
        z[0] = -z[0]
    assert np.linalg.det(x @ z.T) < 0
    lam = 1.0
    t_best = transform_update(x, z, lam)
    best = tl_objective(t_best, x, z, lam, 0.0)
    ell = regularized_cholesky(x, lam)
    inv_ell = np.linalg.inv(ell)
    q, s, rt = np.linalg.svd(inv_ell @ x @ z.T)
    for flip_at in range(3):
        mid = 0.5 * (s + np.sqrt(s * s + 2.0 * lam))
        mid[flip_at] = 0.5 * (s[flip_at] - np.sqrt(s[flip_at] ** 2 + 2.0 * lam))
        alt = (rt.T * mid) @ q.T @ inv_ell
        alt_val = tl_objective(alt, x, z, lam, 0.0)
        assert best <= alt_val + 1e-9


def test_update_zero_product_falls_back_to_identity_frame():
    x = np.eye(3)
    z = np.zeros((3, 3))
    t_mat = transform_update(x, z, 2.0)
    # scalar case: 2c^2 = 1 per direction against X X^T + lam I = 3 I
    expected = 0.5 * (0.0 + np.sqrt(0.0 + 2 * 2.0)) / np.sqrt(3.0) * np.eye(3)
    npt.assert_allclose(t_mat, expected, atol=1e-12)


def test_update_accepts_precomputed_cholesky():
    rng = np.random.default_rng(3)
    x = rng.normal(size=(4, 11))
    z = rng.normal(size=(4, 11))
    ell = regularized_cholesky(x, 0.9)
    npt.assert_array_equal(transform_update(x, z, 0.9, chol=ell),
                           transform_update(x, z, 0.9))


def test_regularized_cholesky_factorizes_gram_plus_ridge():
    rng = np.random.default_rng(8)
    x = rng.normal(size=(5, 7))
    ell = regularized_cholesky(x, 1.3)
    npt.assert_allclose(ell @ ell.T, x @ x.T + 1.3 * np.eye(5), atol=1e-12)
    assert np.all(np.diag(ell) > 0)


def test_regularized_cholesky_rejects_bad_inputs():
    x = np.ones((3, 4))
    with pytest.raises(CholeskyFailure):
        regularized_cholesky(x, 0.0)
    with pytest.raises(CholeskyFailure):
        regularized_cholesky(x, -1.0)
    bad = x.copy()
    bad[0, 0] = np.nan
    with pytest.raises(CholeskyFailure):
        regularized_cholesky(bad, 1.0)


# ----------------------------------------------------- objective/grad

def test_objective_matches_hand_formula():
    t_mat = np.array([[2.0, 0.0], [0.0, 3.0]])
    x = np.array([[1.0, 0.0], [0.0, 1.0]])
    z = np.array([[1.5, 0.0], [0.0, 0.0]])
    lam = 0.5
    threshold = 0.8
    resid = t_mat @ x - z
    expected = (np.sum(resid ** 2)
                + lam * (np.sum(t_mat ** 2) - np.log(6.0))
                + threshold ** 2 * 1)
    assert tl_objective(t_mat, x, z, lam, threshold) == pytest.approx(expected,
                                                                      rel=1e-14)


def test_objective_is_infinite_for_nonpositive_determinant():
    x = np.eye(3)
    z = np.eye(3)
    assert tl_objective(-np.eye(3), x, z, 1.0, 0.5) == np.inf
    assert tl_objective(np.zeros((3, 3)), x, z, 1.0, 0.5) == np.inf
    flipped = np.diag([1.0, 1.0, -1.0])
    assert tl_objective(flipped, x, z, 1.0, 0.5) == np.inf


def test_gradient_matches_central_differences():
    rng = np.random.default_rng(21)
    x = rng.normal(size=(3, 8))
    z = rng.normal(size=(3, 8))
    t_mat = np.eye(3) + 0.1 * rng.normal(size=(3, 3))
    assert np.linalg.det(t_mat) > 0
    lam = 0.6
    grad = tl_gradient_T(t_mat, x, z, lam)
    h = 1e-6
    for i in range(3):
        for j in range(3):
            plus = t_mat.copy()
            minus = t_mat.copy()
            plus[i, j] += h
            minus[i, j] -= h
            fd = (tl_objective(plus, x, z, lam, 0.0)
                  - tl_objective(minus, x, z, lam, 0.0)) / (2 * h)
            assert grad[i, j] == pytest.approx(fd, rel=1e-5, abs=1e-7)


def test_gradient_rejects_singular_transform():
    with pytest.raises(SingularTransform):
        tl_gradient_T(np.zeros((2, 2)), np.eye(2), np.eye(2), 1.0)


def test_relative_change_basics():
    assert relative_change(10.0, 9.0) == pytest.approx(0.1)
    assert relative_change(0.0, 1.0) > 1e200  # floored denominator


# ------------------------------------------------------------ fitting

def test_config_validation():
    with pytest.raises(ValueError):
        TlConfig(threshold=-0.1)
    with pytest.raises(ValueError):
        TlConfig(threshold=0.5, lam=0.0)
    with pytest.raises(ValueError):
        TlConfig(threshold=0.5, max_iters=0)
    with pytest.raises(ValueError):
        TlConfig(threshold=0.5, rel_tol=-1e-3)
    with pytest.raises(ValueError):
        TlConfig(threshold=0.5, init="diagonal")


def test_model_validation():
    with pytest.raises(ValueError):
        TransformModel(matrix=np.eye(2), threshold=-1.0, lam=1.0)
    with pytest.raises(ValueError):
        TransformModel(matrix=np.eye(2), threshold=0.5, lam=0.0)
    rect = TransformModel(matrix=np.ones((2, 5)), threshold=0.5, lam=1.0)
    assert rect.matrix.shape == (2, 5)


def test_initial_transform_variants():
    cfg_eye = TlConfig(threshold=0.5, init="identity")
    npt.assert_array_equal(initial_transform(4, cfg_eye), np.eye(4))
    cfg_rand = TlConfig(threshold=0.5, init="random_orthogonal", seed=3)
    t0 = initial_transform(5, cfg_rand)
    npt.assert_allclose(t0 @ t0.T, np.eye(5), atol=1e-12)
    assert np.linalg.det(t0) == pytest.approx(1.0, abs=1e-10)
    npt.assert_array_equal(t0, initial_transform(5, cfg_rand))


def test_seeded_orthogonal_is_deterministic_rotation():
    q = seeded_orthogonal(6, 42)
    npt.assert_allclose(q @ q.T, np.eye(6), atol=1e-12)
    assert np.linalg.det(q) == pytest.approx(1.0, abs=1e-10)
    npt.assert_array_equal(q, seeded_orthogonal(6, 42))
    assert not np.array_equal(q, seeded_orthogonal(6, 43))


def _random_problem(m=6, n_cols=40, seed=0):
    rng = np.random.default_rng(seed)
    return rng.normal(size=(m, n_cols))


def test_fit_trace_is_monotone_and_finite():
    x = _random_problem(seed=4)
    config = TlConfig(threshold=0.6, lam=1.0, max_iters=40, rel_tol=0.0)
    _, _, report = fit_transform(x, config)
    trace = report.objective_trace
    assert len(trace) == report.iterations_run
    assert np.isfinite(trace).all()
    for prev, cur in zip(trace, trace[1:]):
        assert cur <= prev + 1e-9 * (1.0 + abs(prev))


def test_fit_converged_flag_and_early_stop():
    x = _random_problem(seed=5)
    loose = TlConfig(threshold=0.6, lam=1.0, max_iters=200, rel_tol=1e-4)
    _, _, report = fit_transform(x, loose)
    assert report.converged
    assert report.iterations_run < 200
    forced = TlConfig(threshold=0.6, lam=1.0, max_iters=3, rel_tol=0.0)
    _, _, report2 = fit_transform(x, forced)
    assert not report2.converged
    assert report2.iterations_run == 3


def test_fit_returns_refreshed_codes():
    x = _random_problem(seed=6)
    config = TlConfig(threshold=0.7, lam=1.0, max_iters=10, rel_tol=0.0)
    model, codes, report = fit_transform(x, config)
    npt.assert_array_equal(codes, hard_threshold(model.matrix @ x, 0.7))
    assert report.code_density == pytest.approx(
        np.count_nonzero(codes) / codes.size)
    assert 0.0 < report.code_density < 1.0


def test_fit_is_deterministic():
    x = _random_problem(seed=7)
    config = TlConfig(threshold=0.6, lam=1.0, max_iters=12, rel_tol=0.0,
                      init="random_orthogonal", seed=9)
    m1, c1, r1 = fit_transform(x, config)
    m2, c2, r2 = fit_transform(x, config)
    npt.assert_array_equal(m1.matrix, m2.matrix)
    npt.assert_array_equal(c1, c2)
    npt.assert_array_equal(r1.objective_trace, r2.objective_trace)


def test_fit_improves_on_initial_objective():
    x = _random_problem(seed=8)
    config = TlConfig(threshold=0.6, lam=1.0, max_iters=30, rel_tol=0.0)
    model, codes, report = fit_transform(x, config)
    z0 = hard_threshold(x, 0.6)  # identity start
    start = tl_objective(np.eye(x.shape[0]), x, z0, 1.0, 0.6)
    assert report.objective_trace[-1] < start


def test_fit_rejects_nan_data():
    x = _random_problem(seed=9)
    x[2, 3] = np.nan
    with pytest.raises(CholeskyFailure):
        fit_transform(x, TlConfig(threshold=0.5))


def test_encode_matches_threshold_rule_and_handles_vectors():
    x = _random_problem(m=4, n_cols=9, seed=10)
    config = TlConfig(threshold=0.5, lam=1.0, max_iters=8, rel_tol=0.0)
    model, _, _ = fit_transform(x, config)
    feats = tl_encode(model, x)
    npt.assert_array_equal(feats, hard_threshold(model.matrix @ x, 0.5))
    single = tl_encode(model, x[:, 0])
    assert single.shape == (4,)
    npt.assert_array_equal(single, hard_threshold(model.matrix @ x[:, 0], 0.5))
    # vector and matrix BLAS paths may differ in the last bit
    npt.assert_allclose(single, feats[:, 0], rtol=1e-13, atol=1e-15)


def test_encode_with_rectangular_matrix():
    proj = np.vstack([np.eye(3), np.zeros((0, 3))])  # 3x3 slice of a taller map
    model = TransformModel(matrix=np.ones((2, 3)), threshold=1.0, lam=1.0)
    out = tl_encode(model, np.eye(3))
    assert out.shape == (2, 3)
    npt.assert_array_equal(out, hard_threshold(np.ones((2, 3)), 1.0))
    assert proj.shape == (3, 3)
