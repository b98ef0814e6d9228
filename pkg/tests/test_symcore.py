import numpy as np
import pytest
from hypothesis import given, seed, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from psdOU.errors import BranchCutError, DimensionError, NotPositiveSemidefiniteError, NumericalError
from psdOU.symcore import (
    HalfVec,
    PsdMat,
    SymMat,
    commutation_matrix,
    duplication_matrix,
    elimination_matrix,
    halfvec_transform,
    is_positive_definite,
    is_psd,
    matrix_exponential,
    matrix_logarithm,
    psd_check,
    sqrtm_psd,
    symmetric_basis,
    unvec,
    unvech,
    vec,
    vech,
    vech_labels,
)

MAX_DIM = 4
ENTRIES = st.floats(min_value=-10.0, max_value=10.0, allow_nan=False, allow_infinity=False)


def square(d):
    return arrays(np.float64, (d, d), elements=ENTRIES)


@st.composite
def any_square(draw):
    d = draw(st.integers(min_value=1, max_value=MAX_DIM))
    return draw(square(d))


def test_vech_order_and_labels():
    X = np.array([[1.0, 2.0], [2.0, 3.0]])
    np.testing.assert_array_equal(vech(X), [1.0, 2.0, 3.0])
    assert vech_labels(2) == ["s_11", "s_21", "s_22"]
    assert vech_labels(3) == ["s_11", "s_21", "s_31", "s_22", "s_32", "s_33"]


@seed(1)
@given(M=any_square())
def test_vech_unvech_recovers_symmetric_part(M):
    S = 0.5 * (M + M.T)
    np.testing.assert_array_equal(unvech(vech(S)), S)


def test_halfvec_transform_both_ways():
    S = SymMat([[2.0, -1.0], [-1.0, 4.0]])
    h = halfvec_transform(S)
    assert isinstance(h, HalfVec)
    assert h.to_list() == [2.0, -1.0, 4.0]
    assert halfvec_transform(h) == S


def test_halfvec_rejects_bad_length():
    with pytest.raises(DimensionError):
        HalfVec([1.0, 2.0])


def test_vec_is_column_major():
    X = np.array([[1.0, 3.0], [2.0, 4.0]])
    np.testing.assert_array_equal(vec(X), [1.0, 2.0, 3.0, 4.0])
    np.testing.assert_array_equal(unvec(vec(X)), X)


@seed(2)
@given(M=any_square())
def test_commutation_matrix_transposes(M):
    K = commutation_matrix(M.shape[0])
    np.testing.assert_array_equal(K @ vec(M), vec(M.T))


@pytest.mark.parametrize("d", [1, 2, 3, 4])
def test_commutation_matrix_is_permutation(d):
    K = commutation_matrix(d).matrix
    np.testing.assert_array_equal(K.sum(axis=0), np.ones(d * d))
    np.testing.assert_array_equal(K.sum(axis=1), np.ones(d * d))
    np.testing.assert_array_equal(K @ K, np.eye(d * d))


@pytest.mark.parametrize("d", [1, 2, 3])
def test_duplication_and_elimination(d):
    D = duplication_matrix(d)
    L = elimination_matrix(d)
    np.testing.assert_array_equal(L @ D, np.eye(d * (d + 1) // 2))
    S = np.arange(1.0, d * d + 1).reshape(d, d)
    S = S + S.T
    np.testing.assert_array_equal(D @ vech(S), vec(S))
    np.testing.assert_array_equal(L @ vec(S), vech(S))


def test_symmat_symmetrises_rounding_and_rejects_asymmetry():
    S = SymMat([[1.0, 2.0 + 1e-12], [2.0, 1.0]])
    assert S.entries[0, 1] == S.entries[1, 0]
    with pytest.raises(DimensionError):
        SymMat([[1.0, 2.0], [0.0, 1.0]])
    with pytest.raises(DimensionError):
        SymMat(np.ones((2, 3)))


def test_psd_check_certifies_and_rejects():
    P = psd_check([[2.0, 1.0], [1.0, 2.0]])
    assert isinstance(P, PsdMat)
    assert P.eig_floor == pytest.approx(1.0)
    with pytest.raises(NotPositiveSemidefiniteError) as info:
        psd_check([[1.0, 2.0], [2.0, 1.0]])
    assert info.value.eig_floor == pytest.approx(-1.0)
    assert is_psd(np.zeros((3, 3)))
    assert not is_positive_definite(np.zeros((3, 3)))
    assert is_positive_definite(np.eye(3))


def test_psd_check_tolerates_rounding_below_zero():
    X = np.array([[1.0, 1.0], [1.0, 1.0]]) - 1e-12 * np.eye(2)
    assert psd_check(X).eig_floor < 0


@pytest.mark.parametrize("bad", [np.nan, np.inf, -np.inf])
def test_non_finite_entries_are_numerical_failures(bad):
    X = np.array([[1.0, 0.0], [0.0, bad]])
    with pytest.raises(NumericalError):
        psd_check(X)
    with pytest.raises(NumericalError):
        psd_check(X, scale_aware=True)
    with pytest.raises(NumericalError):
        is_psd(X)
    with pytest.raises(NumericalError):
        SymMat(X)


@seed(3)
@given(M=square(3), s=st.floats(0.0, 1.0), t=st.floats(0.0, 1.0))
@settings(max_examples=50)
def test_matrix_exponential_semigroup(M, s, t):
    M = M / 10.0
    lhs = matrix_exponential(M, s + t)
    rhs = matrix_exponential(M, s) @ matrix_exponential(M, t)
    np.testing.assert_allclose(lhs, rhs, rtol=1e-10, atol=1e-10)


def test_matrix_exponential_of_zero_is_identity():
    np.testing.assert_array_equal(matrix_exponential(np.zeros((3, 3)), 5.0), np.eye(3))


def test_matrix_logarithm_inverts_exponential():
    M = np.array([[-0.3, 0.5], [0.1, -1.2]])
    np.testing.assert_allclose(matrix_logarithm(matrix_exponential(M)), M, atol=1e-10)


def test_matrix_logarithm_branch_cut():
    with pytest.raises(BranchCutError):
        matrix_logarithm(np.diag([-1.0, 2.0]))
    with pytest.raises(BranchCutError):
        matrix_logarithm(np.diag([0.0, 2.0]))


def test_sqrtm_psd_clipping():
    X = np.array([[4.0, 2.0], [2.0, 1.0]])
    R = sqrtm_psd(X - 1e-12 * np.eye(2))
    np.testing.assert_allclose(R @ R, X, atol=1e-6)
    np.testing.assert_allclose(R, R.T)
    with pytest.raises(NotPositiveSemidefiniteError):
        sqrtm_psd(np.diag([1.0, -1e-3]))


@pytest.mark.parametrize("d", [1, 2, 3])
def test_symmetric_basis_is_orthonormal(d):
    basis = symmetric_basis(d)
    assert len(basis) == d * (d + 1) // 2
    gram = np.array([[np.trace(E @ F) for F in basis] for E in basis])
    np.testing.assert_allclose(gram, np.eye(len(basis)), atol=1e-15)
