import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from oracles import jacobi_eigh
from svdprune import (
    DegenerateInputError,
    FeatureMatrix,
    NumericalError,
    ShapeError,
    SvdFactors,
    thin_svd,
    validate_factors,
)

METHODS = ["lapack", "jacobi"]


@pytest.mark.parametrize("method", METHODS)
def test_identity(method):
    f = thin_svd(np.eye(3), method=method)
    np.testing.assert_allclose(f.singular_values, [1.0, 1.0, 1.0], atol=1e-15)
    np.testing.assert_allclose(f.U @ f.Vt, np.eye(3), atol=1e-15)
    report = validate_factors(f, np.eye(3))
    assert report.passed
    assert max(report.u_orthonormality, report.v_orthonormality, report.reconstruction) <= 1e-12


@pytest.mark.parametrize("method", METHODS)
def test_diagonal(method):
    f = thin_svd(np.diag([3.0, 2.0, 1.0]), method=method)
    np.testing.assert_allclose(f.singular_values, [3.0, 2.0, 1.0], atol=1e-14)
    # sign convention makes U the identity permutation, not a reflection of it
    np.testing.assert_allclose(f.U, np.eye(3), atol=1e-14)
    np.testing.assert_allclose(f.Vt, np.eye(3), atol=1e-14)


def test_negative_diagonal_sign_moves_to_vt():
    f = thin_svd(np.diag([-3.0, 2.0]))
    np.testing.assert_allclose(f.U, np.eye(2), atol=1e-15)
    np.testing.assert_allclose(f.Vt, np.diag([-1.0, 1.0]), atol=1e-15)


@pytest.mark.parametrize("method", METHODS)
@pytest.mark.parametrize("shape", [(32, 16), (16, 32), (20, 20), (1, 9), (9, 1)])
def test_random_matches_gram_eigen_oracle(method, shape):
    a = np.random.default_rng(11).standard_normal(shape)
    f = thin_svd(a, method=method)
    assert validate_factors(f, a).passed
    gram = a.T @ a if shape[0] >= shape[1] else a @ a.T
    w, _ = jacobi_eigh(gram)
    np.testing.assert_allclose(f.singular_values, np.sqrt(w[: f.rank]), rtol=1e-8)


def test_oracle_eigensolver_against_numpy():
    rng = np.random.default_rng(5)
    b = rng.standard_normal((12, 12))
    sym = b + b.T
    w, v = jacobi_eigh(sym)
    np.testing.assert_allclose(w, np.linalg.eigvalsh(sym)[::-1], atol=1e-12)
    np.testing.assert_allclose(v.T @ v, np.eye(12), atol=1e-13)
    np.testing.assert_allclose(sym @ v, v * w, atol=1e-12)


def test_jacobi_and_lapack_agree():
    a = np.random.default_rng(2).standard_normal((40, 24))
    f1, f2 = thin_svd(a), thin_svd(a, method="jacobi")
    np.testing.assert_allclose(f1.singular_values, f2.singular_values, rtol=1e-12)
    np.testing.assert_allclose(f1.U, f2.U, atol=1e-10)
    np.testing.assert_allclose(f1.Vt, f2.Vt, atol=1e-10)


@pytest.mark.parametrize("method", METHODS)
def test_rank_deficient_truncated(method):
    rng = np.random.default_rng(4)
    a = rng.standard_normal((30, 3)) @ rng.standard_normal((3, 12))
    f = thin_svd(a, method=method)
    assert f.rank == 3
    assert f.U.shape == (30, 3) and f.Vt.shape == (3, 12)
    assert validate_factors(f, a).passed


def test_rank_one():
    u = np.array([1.0, 2.0, 2.0])
    v = np.array([0.6, 0.8])
    f = thin_svd(np.outer(u, v))
    assert f.rank == 1
    np.testing.assert_allclose(f.singular_values, [3.0])
    np.testing.assert_allclose(f.U[:, 0], u / 3.0)


@pytest.mark.parametrize("method", METHODS)
def test_zero_matrix_is_degenerate(method):
    with pytest.raises(DegenerateInputError):
        thin_svd(np.zeros((4, 3)), method=method)


def test_jacobi_sweep_cap():
    a = np.random.default_rng(0).standard_normal((12, 8))
    with pytest.raises(NumericalError):
        thin_svd(a, method="jacobi", max_sweeps=1)


def test_unknown_method():
    with pytest.raises(ValueError):
        thin_svd(np.eye(2), method="qr")


def test_single_precision_input_computed_in_double():
    a = np.random.default_rng(8).standard_normal((10, 6)).astype(np.float32)
    f = thin_svd(FeatureMatrix(a))
    assert f.U.dtype == np.float64
    np.testing.assert_allclose((f.U * f.singular_values) @ f.Vt, a.astype(np.float64), atol=1e-12)


def test_factors_read_only():
    f = thin_svd(np.eye(2))
    with pytest.raises(ValueError):
        f.U[0, 0] = 2.0


def test_validate_detects_scaled_column():
    f = thin_svd(np.eye(3))
    u = f.U.copy()
    u[:, 0] *= 1.1
    report = validate_factors(SvdFactors(u, f.singular_values, f.Vt), np.eye(3))
    assert report.u_orthonormality == pytest.approx(0.21, abs=1e-12)
    assert not report.passed


def test_validate_detects_ascending_order():
    a = np.diag([3.0, 2.0, 1.0])
    f = thin_svd(a)
    flipped = SvdFactors(f.U[:, ::-1], f.singular_values[::-1], f.Vt[::-1])
    report = validate_factors(flipped, a)
    assert not report.descending
    assert not report.passed
    # the reordered factors still reconstruct the matrix exactly
    assert report.reconstruction <= 1e-15


def test_validate_shape_mismatch():
    f = thin_svd(np.eye(3))
    with pytest.raises(ShapeError):
        validate_factors(f, np.eye(4))


def test_validate_does_not_mutate():
    a = np.random.default_rng(1).standard_normal((5, 4))
    f = thin_svd(a)
    before = (f.U.copy(), f.singular_values.copy(), f.Vt.copy())
    validate_factors(f, a)
    for x, y in zip(before, (f.U, f.singular_values, f.Vt)):
        assert np.array_equal(x, y)


@pytest.mark.parametrize("method", METHODS)
def test_repeat_runs_bit_identical(method):
    a = np.random.default_rng(9).standard_normal((33, 17))
    f1, f2 = thin_svd(a, method=method), thin_svd(a.copy(), method=method)
    for x, y in zip((f1.U, f1.singular_values, f1.Vt), (f2.U, f2.singular_values, f2.Vt)):
        assert x.tobytes() == y.tobytes()


@settings(max_examples=40, deadline=None)
@given(
    rows=st.integers(1, 24),
    cols=st.integers(1, 24),
    seed=st.integers(0, 2**32 - 1),
    scale=st.floats(1e-3, 1e3),
)
def test_scaling_equivariance(rows, cols, seed, scale):
    a = np.random.default_rng(seed).standard_normal((rows, cols))
    f, g = thin_svd(a), thin_svd(scale * a)
    assert f.rank == g.rank
    np.testing.assert_allclose(g.singular_values, scale * f.singular_values, rtol=1e-10)
    np.testing.assert_allclose(g.U, f.U, atol=1e-8)


@settings(max_examples=40, deadline=None)
@given(rows=st.integers(1, 40), cols=st.integers(1, 40), seed=st.integers(0, 2**32 - 1))
def test_contract_property(rows, cols, seed):
    a = np.random.default_rng(seed).standard_normal((rows, cols))
    f = thin_svd(a)
    report = validate_factors(f, a)
    assert report.passed and report.sign_convention
