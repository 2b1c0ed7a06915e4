import warnings

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from oracles import loop_lambda_y, loop_residuals, loop_sigma, loop_weighted_moment
from pieqr.moments import Dataset, center, lambda_r, lambda_y, residuals, symmetrize


def small_data(max_n=8, max_p=5):
    """(X, y) with bounded, finite entries."""
    elems = st.floats(-10, 10, allow_nan=False, allow_infinity=False)

    @st.composite
    def build(draw):
        n = draw(st.integers(2, max_n))
        p = draw(st.integers(1, max_p))
        X = draw(arrays(float, (n, p), elements=elems))
        y = draw(arrays(float, n, elements=elems))
        return X, y

    return build()


# -- Dataset ------------------------------------------------------------------

def test_dataset_rejects_non_finite_naming_cell():
    X = np.ones((3, 2))
    X[1, 0] = np.nan
    with pytest.raises(ValueError, match="row 1, column 0"):
        Dataset(X, np.zeros(3))
    with pytest.raises(ValueError, match="row 2"):
        Dataset(np.ones((3, 2)), [0.0, 1.0, np.inf])


def test_dataset_shape_checks():
    with pytest.raises(ValueError):
        Dataset(np.ones((1, 2)), [1.0])
    with pytest.raises(ValueError):
        Dataset(np.ones((3, 2)), [1.0, 2.0])


def test_dataset_is_read_only():
    d = Dataset(np.ones((3, 2)), np.zeros(3))
    with pytest.raises(ValueError):
        d.X[0, 0] = 2.0


# -- center -------------------------------------------------------------------

def test_two_point_variance():
    s = center(Dataset([[1.0], [3.0]], [0.0, 0.0]))
    assert s.xbar.tolist() == [2.0]
    np.testing.assert_allclose(s.d, [1.0])


def test_centering_is_idempotent(rng):
    X = rng.standard_normal((6, 3))
    X -= X.mean(axis=0)
    s = center(Dataset(X, rng.standard_normal(6)))
    np.testing.assert_allclose(s.xbar, 0.0, atol=1e-15)
    np.testing.assert_allclose(s.Xc, X, atol=1e-15)


def test_spectral_factors_match_gram_5x3():
    X = np.array([[0.3, -1.2, 2.0], [1.1, 0.4, -0.7], [-0.5, 0.9, 0.1],
                  [2.2, -0.3, -1.5], [0.0, 1.7, 0.6]])
    s = center(Dataset(X, np.zeros(5)))
    frozen = np.array([[0.8936, -0.392, -0.766], [-0.392, 0.988, -0.254],
                       [-0.766, -0.254, 1.412]])
    np.testing.assert_allclose(loop_sigma(X), frozen, atol=1e-12)
    assert np.abs(s.U @ np.diag(s.d) @ s.U.T - frozen).max() <= 1e-10
    assert np.abs(s.sigma() - frozen).max() <= 1e-12


@given(small_data(max_n=12, max_p=8))
def test_center_invariants(data):
    X, y = data
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        s = center(Dataset(X, y))
    m = min(X.shape)
    assert s.U.shape == (X.shape[1], m) and s.d.shape == (m,)
    scale = np.maximum(1.0, np.abs(X).max(axis=0))
    assert np.all(np.abs(s.Xc.mean(axis=0)) <= 1e-10 * scale)
    assert np.all(s.d >= 0) and np.all(np.diff(s.d) <= 1e-12 * max(1.0, s.d.max()))
    assert np.abs(s.U.T @ s.U - np.eye(m)).max() <= 1e-8
    S = s.Xc.T @ s.Xc / X.shape[0]
    assert np.abs(S - s.U @ np.diag(s.d) @ s.U.T).max() <= 1e-8 * max(1.0, s.d.max())


def test_zero_variance_column_warns(rng):
    X = rng.standard_normal((5, 3))
    X[:, 1] = 4.0
    with pytest.warns(RuntimeWarning, match=r"\[1\]"):
        s = center(Dataset(X, rng.standard_normal(5)))
    assert s.d.min() >= 0


def test_sigma_apply_matches_dense(rng):
    X = rng.standard_normal((7, 10))
    s = center(Dataset(X, np.zeros(7)))
    B = symmetrize(rng.standard_normal((10, 10)))
    S = s.sigma()
    np.testing.assert_allclose(s.sigma_apply(B), S @ B @ S, atol=1e-12)


# -- lambda_y / residuals / lambda_r -----------------------------------------

def test_lambda_y_constant_response_is_zero(rng):
    s = center(Dataset(rng.standard_normal((6, 3)), np.full(6, 1.7)))
    assert np.all(lambda_y(s, np.full(6, 1.7)) == 0.0)


def test_lambda_y_two_point_example():
    X = np.array([[0.0], [2.0]])
    y = np.array([0.0, 4.0])
    np.testing.assert_allclose(lambda_y(center(Dataset(X, y)), y), [[0.0]], atol=1e-15)


def test_lambda_y_hand_instance():
    X = np.array([[1.0, 2.0], [0.0, -1.0], [3.0, 1.0]])
    y = np.array([2.0, 0.0, 1.0])
    frozen = np.array([[-5 / 9, -8 / 9], [-8 / 9, -1 / 3]])
    np.testing.assert_allclose(loop_lambda_y(X, y), frozen, atol=1e-12)
    np.testing.assert_allclose(lambda_y(center(Dataset(X, y)), y), frozen, atol=1e-12)


def test_lambda_y_length_mismatch(rng):
    s = center(Dataset(rng.standard_normal((4, 2)), np.zeros(4)))
    with pytest.raises(ValueError):
        lambda_y(s, np.zeros(5))


def test_residuals_hand_instance():
    X = np.array([[1.0, 2.0], [0.0, -1.0], [3.0, 1.0]])
    y = np.array([2.0, 0.0, 1.0])
    beta = np.array([0.5, -1.0])
    s = center(Dataset(X, y))
    np.testing.assert_allclose(residuals(s, y, beta), [2.5, -2.0, -0.5], atol=1e-12)
    np.testing.assert_allclose(residuals(s, y, beta), loop_residuals(X, y, beta), atol=1e-12)
    frozen = np.array([[-14 / 9, -35 / 18], [-35 / 18, -7 / 18]])
    np.testing.assert_allclose(lambda_r(s, y, beta), frozen, atol=1e-12)


def test_residuals_zero_beta_and_exact_linear(rng):
    X = rng.standard_normal((9, 3))
    beta = np.array([1.5, -2.0, 0.25])
    y = 3.0 + X @ beta
    s = center(Dataset(X, y))
    np.testing.assert_array_equal(residuals(s, y, np.zeros(3)), y - y.mean())
    assert np.abs(residuals(s, y, beta)).max() <= 1e-12
    assert np.abs(lambda_r(s, y, beta)).max() <= 1e-12


def test_residuals_dimension_mismatch(rng):
    s = center(Dataset(rng.standard_normal((4, 2)), np.zeros(4)))
    with pytest.raises(ValueError):
        residuals(s, np.zeros(4), np.zeros(3))


@given(small_data())
def test_lambda_r_zero_beta_is_lambda_y_exactly(data):
    X, y = data
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        s = center(Dataset(X, y))
    np.testing.assert_array_equal(lambda_r(s, y, np.zeros(X.shape[1])), lambda_y(s, y))


@given(small_data(max_n=6, max_p=4), st.integers(0, 2**32 - 1))
def test_moments_match_triple_loop_and_are_symmetric(data, seed):
    X, y = data
    beta = np.random.default_rng(seed).standard_normal(X.shape[1])
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        s = center(Dataset(X, y))
    Ly, Lr = lambda_y(s, y), lambda_r(s, y, beta)
    scale = 1.0 + np.abs(X).max() ** 2 * (np.abs(y).max() + np.abs(X).max() * np.abs(beta).sum())
    assert np.abs(Ly - loop_lambda_y(X, y)).max() <= 1e-12 * scale
    assert np.abs(Lr - loop_weighted_moment(X, loop_residuals(X, y, beta))).max() <= 1e-12 * scale
    np.testing.assert_array_equal(Ly, Ly.T)
    np.testing.assert_array_equal(Lr, Lr.T)


@given(small_data(max_n=10, max_p=6))
def test_vec_identity_with_expanded_products(data):
    # flattening the cross moment of y with z_i = x_i kron x_i, centered after
    # forming z, reproduces vec(lambda_y) when x is centered first
    X, y = data
    Xc = X - X.mean(axis=0)
    Z = np.einsum("ik,il->ikl", Xc, Xc).reshape(X.shape[0], -1)
    cross = ((y - y.mean())[:, None] * (Z - Z.mean(axis=0))).mean(axis=0)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        L = lambda_y(center(Dataset(X, y)), y)
    scale = 1.0 + np.abs(y).max() * np.abs(X).max() ** 2
    assert np.abs(cross - L.reshape(-1)).max() <= 1e-10 * scale


def test_plug_in_moment_recovers_interactions():
    rng = np.random.default_rng(2024)
    n, p = 100_000, 8
    idx = np.arange(p)
    Sigma = 0.5 ** np.abs(np.subtract.outer(idx, idx))
    X = rng.standard_normal((n, p)) @ np.linalg.cholesky(Sigma).T
    Omega = np.zeros((p, p))
    Omega[0, 0] = 1.0
    Omega[1, 4] = Omega[4, 1] = 0.75
    Omega[6, 2] = Omega[2, 6] = -0.5
    y = 0.3 + X @ np.linspace(-1, 1, p) + np.einsum("ij,jk,ik->i", X, Omega, X)
    y += rng.standard_normal(n)
    s = center(Dataset(X, y))
    Si = np.linalg.inv(s.sigma())
    est = Si @ lambda_y(s, y) @ Si / 2
    assert np.abs(est - Omega).max() <= 0.05
