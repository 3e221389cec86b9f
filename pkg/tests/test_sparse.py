import numpy as np
import pytest
import scipy.sparse
from hypothesis import given, settings, strategies as st

from amgtune.sparse import (
    CooMatrix, MatrixMarketError, SparseStructureError, DimensionMismatchError, bandwidth,
    build, from_dense, identity, permute_symmetric, read_matrix_market, reorder, spgemm, spmv,
    transpose, triple_product, write_matrix_market,
)

from conftest import coo, csr, laplacian_1d, random_sparse, tridiag


def test_build_hand_conversion():
    A = csr(2, 2, [(0, 0, 2), (0, 1, -1), (1, 0, -1), (1, 1, 2)])
    assert A.row_ptr.tolist() == [0, 2, 4]
    assert A.val.tolist() == [2, -1, -1, 2]
    assert A.col_idx.tolist() == [0, 1, 0, 1]


def test_build_sums_duplicates():
    A = csr(1, 1, [(0, 0, 1), (0, 0, 1)])
    assert A.nnz == 1 and A.val[0] == 2


def test_build_empty_rows():
    A = csr(3, 3, [(0, 0, 1)])
    assert A.row_ptr.tolist() == [0, 1, 1, 1]


def test_build_drops_cancelled_entries():
    A = csr(2, 2, [(0, 1, 1.0), (0, 1, -1.0), (1, 1, 3.0)])
    assert A.nnz == 1
    assert A.to_dense().tolist() == [[0, 0], [0, 3]]


def test_build_rejects_out_of_range():
    with pytest.raises(SparseStructureError):
        build(coo(2, 2, [(2, 0, 1.0)]))
    with pytest.raises(SparseStructureError):
        build(coo(2, 2, [(0, -1, 1.0)]))


def test_coo_rejects_ragged_arrays():
    with pytest.raises(SparseStructureError):
        CooMatrix(2, 2, np.array([0]), np.array([0, 1]), np.array([1.0]))


@settings(max_examples=40, deadline=None)
@given(st.integers(1, 12), st.integers(1, 12), st.integers(0, 60), st.integers(0, 2**31))
def test_build_matches_scipy(n_rows, n_cols, k, seed):
    r = np.random.default_rng(seed)
    rows, cols = r.integers(0, n_rows, k), r.integers(0, n_cols, k)
    vals = r.integers(-3, 4, k).astype(float)
    A = build(CooMatrix(n_rows, n_cols, rows, cols, vals))
    A.validate()
    ref = scipy.sparse.coo_matrix((vals, (rows, cols)), shape=(n_rows, n_cols)).toarray()
    np.testing.assert_array_equal(A.to_dense(), ref)
    assert np.all(A.val != 0)
    for i in range(n_rows):
        assert np.all(np.diff(A.col_idx[A.row_ptr[i]:A.row_ptr[i + 1]]) > 0)


def test_spmv_examples():
    x = np.arange(4.0)
    np.testing.assert_array_equal(spmv(identity(4), x), x)
    np.testing.assert_array_equal(spmv(laplacian_1d(5), np.ones(5)), [1, 0, 0, 0, 1])
    np.testing.assert_array_equal(spmv(csr(3, 3, []), np.ones(3)), np.zeros(3))


def test_spmv_dimension_mismatch():
    with pytest.raises(DimensionMismatchError):
        spmv(identity(3), np.ones(4))


def test_transpose_examples(rng):
    A = laplacian_1d(6)
    np.testing.assert_array_equal(transpose(A).to_dense(), A.to_dense())
    T = transpose(csr(2, 3, [(0, 1, 5.0)]))
    assert T.shape == (3, 2)
    assert T.to_dense()[1, 0] == 5.0
    B, M = random_sparse(rng, 7, 4)
    np.testing.assert_array_equal(transpose(B).to_dense(), M.T)


def test_spgemm_against_dense(rng):
    for _ in range(20):
        A, Ad = random_sparse(rng, 9, 6, 0.3)
        B, Bd = random_sparse(rng, 6, 8, 0.3)
        np.testing.assert_allclose(spgemm(A, B).to_dense(), Ad @ Bd, atol=1e-13)
    with pytest.raises(DimensionMismatchError):
        spgemm(identity(3), identity(4))


def test_triple_product_examples():
    A = laplacian_1d(4)
    I = identity(4)
    np.testing.assert_array_equal(triple_product(I, A, I).to_dense(), A.to_dense())
    T = laplacian_1d(3)
    P = from_dense([[0.5], [1.0], [0.5]])
    np.testing.assert_allclose(triple_product(transpose(P), T, P).to_dense(), [[1.0]], atol=1e-15)


def test_matrix_market_roundtrip(tmp_path, rng):
    A, M = random_sparse(rng, 6, 5, 0.4)
    path = tmp_path / "a.mtx"
    write_matrix_market(path, A, comment="test matrix")
    B = read_matrix_market(path)
    assert B.shape == A.shape
    np.testing.assert_array_equal(B.to_dense(), M)


def test_matrix_market_symmetric_expansion(tmp_path):
    path = tmp_path / "s.mtx"
    path.write_text("%%MatrixMarket matrix coordinate real symmetric\n"
                    "% lower triangle only\n2 2 3\n1 1 2\n2 1 -1\n2 2 2\n")
    A = read_matrix_market(path)
    assert A.nnz == 4
    np.testing.assert_array_equal(A.to_dense(), [[2, -1], [-1, 2]])


def test_matrix_market_rejects_array_format(tmp_path):
    path = tmp_path / "d.mtx"
    path.write_text("%%MatrixMarket matrix array real general\n2 2\n1\n2\n3\n4\n")
    with pytest.raises(MatrixMarketError):
        read_matrix_market(path)


def test_matrix_market_rejects_bad_count(tmp_path):
    path = tmp_path / "b.mtx"
    path.write_text("%%MatrixMarket matrix coordinate real general\n2 2 3\n1 1 1\n")
    with pytest.raises(MatrixMarketError):
        read_matrix_market(path)


def test_reorder_natural_is_identity():
    A = laplacian_1d(7)
    B, perm = reorder(A, "natural")
    np.testing.assert_array_equal(perm, np.arange(7))
    np.testing.assert_array_equal(B.to_dense(), A.to_dense())


def test_reversal_keeps_tridiagonal():
    A = laplacian_1d(7)
    B = permute_symmetric(A, np.arange(7)[::-1].copy())
    assert bandwidth(B) == 1
    np.testing.assert_array_equal(B.to_dense(), tridiag(7))


@pytest.mark.parametrize("method", ["cuthill_mckee", "reverse_cuthill_mckee", "random"])
def test_reorder_is_symmetric_permutation(method, rng):
    M = rng.random((15, 15)) * (rng.random((15, 15)) < 0.2)
    M = M + M.T + np.eye(15)
    A = from_dense(M)
    B, perm = reorder(A, method, seed=3)
    assert sorted(perm.tolist()) == list(range(15))
    np.testing.assert_array_equal(B.to_dense(), M[np.ix_(perm, perm)])


def test_rcm_reduces_bandwidth_of_shuffled_path(rng):
    A = laplacian_1d(30)
    S = permute_symmetric(A, rng.permutation(30))
    B, _ = reorder(S, "reverse_cuthill_mckee")
    assert bandwidth(B) == 1 < bandwidth(S)
