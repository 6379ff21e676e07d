import itertools

import numpy as np
import pytest
from hypothesis import given, strategies as st
from hypothesis.extra.numpy import arrays

from bilayer import gf2
from bilayer.gf2 import BitMatrix, InconsistentSystemError, SparseIndexMatrix
from bilayer.presets import preset_code


def small_matrices(max_rows=8, max_cols=80):
    return st.tuples(st.integers(1, max_rows), st.integers(1, max_cols)).flatmap(
        lambda s: arrays(np.uint8, s, elements=st.integers(0, 1)))


def span_size(dense: np.ndarray) -> int:
    """Oracle: size of the row span by enumerating every combination."""
    seen = set()
    for coeffs in itertools.product((0, 1), repeat=dense.shape[0]):
        v = (np.asarray(coeffs, dtype=np.int64) @ dense) % 2
        seen.add(v.tobytes())
    return len(seen)


@given(small_matrices())
def test_pack_roundtrip(dense):
    assert np.array_equal(BitMatrix.from_dense(dense).to_dense(), dense)


@given(small_matrices())
def test_rank_matches_span_enumeration(dense):
    assert 2 ** gf2.rank(BitMatrix.from_dense(dense)) == span_size(dense)


@given(small_matrices(12, 70))
def test_rank_equals_rank_of_transpose(dense):
    m = BitMatrix.from_dense(dense)
    assert gf2.rank(m) == gf2.rank(m.T)


@given(small_matrices(10, 70))
def test_nullspace_is_kernel_of_full_dimension(dense):
    m = BitMatrix.from_dense(dense)
    ns = gf2.nullspace_basis(m)
    assert ns.rows == m.cols - gf2.rank(m)
    assert gf2.rank(ns) == ns.rows
    if ns.rows:
        assert (m @ ns.T).is_zero()


@given(small_matrices(10, 70))
def test_rref_is_reduced(dense):
    red, piv = gf2.rref(BitMatrix.from_dense(dense))
    d = red.to_dense()
    assert piv == sorted(piv)
    for r, c in enumerate(piv):
        assert d[:, c].sum() == 1 and d[r, c] == 1
        assert not d[r, :c].any()
    assert not d[len(piv):].any()


def test_identity_rank():
    assert gf2.rank(BitMatrix.identity(8)) == 8


def test_matmul_against_integer_product():
    rng = np.random.default_rng(3)
    a = rng.integers(0, 2, (9, 130), dtype=np.uint8)
    b = rng.integers(0, 2, (130, 7), dtype=np.uint8)
    got = (BitMatrix.from_dense(a) @ BitMatrix.from_dense(b)).to_dense()
    assert np.array_equal(got, (a.astype(int) @ b.astype(int)) % 2)
    with pytest.raises(ValueError):
        BitMatrix.from_dense(a) @ BitMatrix.from_dense(a)


def test_bb72_check_matrix_rank_and_kernel():
    code = preset_code("bb72")
    assert gf2.rank(code.h_x) == 32
    assert gf2.nullspace_basis(code.h_x).rows == 40


@pytest.mark.parametrize("seed", range(5))
def test_solve_affine_random_full_rank(seed):
    rng = np.random.default_rng(seed)
    while True:
        m = BitMatrix.from_dense(rng.integers(0, 2, (10, 20), dtype=np.uint8))
        if gf2.rank(m) == 10:
            break
    s = rng.integers(0, 2, 10, dtype=np.uint8)
    e = gf2.solve_affine(m, s)
    assert not (gf2.mat_vec(m, e) ^ s).any()


def test_solve_affine_inconsistent():
    m = BitMatrix.from_dense(np.array([[1, 0], [1, 0]], dtype=np.uint8))
    with pytest.raises(InconsistentSystemError):
        gf2.solve_affine(m, [1, 0])
    with pytest.raises(ValueError):
        gf2.solve_affine(m, [1, 0, 0])


@given(st.integers(1, 12), st.integers(0, 2**31 - 1))
def test_inverse(n, seed):
    rng = np.random.default_rng(seed)
    while True:
        m = BitMatrix.from_dense(rng.integers(0, 2, (n, n), dtype=np.uint8))
        if gf2.rank(m) == n:
            break
    assert gf2.inverse(m) @ m == BitMatrix.identity(n)


def test_inverse_singular():
    with pytest.raises(ValueError):
        gf2.inverse(BitMatrix.zeros(3, 3))


def test_in_row_space():
    basis = BitMatrix.from_dense(np.array([[1, 1, 0], [0, 1, 1]], dtype=np.uint8))
    vecs = BitMatrix.from_dense(np.array([[1, 0, 1], [1, 0, 0], [0, 0, 0]], dtype=np.uint8))
    assert gf2.in_row_space(basis, vecs).tolist() == [True, False, True]


@given(small_matrices(10, 40))
def test_sparse_roundtrip_and_transpose(dense):
    s = SparseIndexMatrix.from_dense(dense)
    assert np.array_equal(s.to_dense(), dense)
    assert np.array_equal(s.transpose().to_dense(), dense.T)
    assert s.nnz == int(dense.sum())


def test_sparse_rejects_unsorted():
    with pytest.raises(ValueError):
        SparseIndexMatrix(1, 4, np.array([0, 2]), np.array([3, 1]))
