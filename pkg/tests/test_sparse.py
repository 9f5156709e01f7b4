"""CSR construction, symmetric normalization, and sparse matmul."""

import numpy as np
import pytest

from shiftreg.errors import InputError
from shiftreg.sparse import SparseMatrix, build_csr, normalize_adjacency, spmm


def dense_adj(edges, n):
    a = np.zeros((n, n))
    for u, v in edges:
        if u != v:
            a[u, v] = 1.0
            a[v, u] = 1.0
    return a


def test_build_csr_symmetrizes_and_sorts():
    m = build_csr([(0, 1), (2, 1)], 3)
    d = m.to_dense()
    assert np.array_equal(d, dense_adj([(0, 1), (2, 1)], 3))
    # within-row column order is strictly increasing
    for i in range(m.num_rows):
        cols = m.col_indices[m.row_offsets[i]:m.row_offsets[i + 1]]
        assert np.all(np.diff(cols) > 0)


def test_build_csr_deduplicates():
    m = build_csr([(0, 1), (1, 0), (0, 1)], 2)
    assert m.nnz == 2
    assert np.array_equal(m.to_dense(), np.array([[0.0, 1.0], [1.0, 0.0]]))


def test_build_csr_drops_self_loops():
    m = build_csr([(0, 0), (0, 1)], 2)
    assert m.nnz == 2
    assert m.to_dense()[0, 0] == 0.0


def test_build_csr_rejects_out_of_range():
    with pytest.raises(InputError):
        build_csr([(0, 3)], 3)
    with pytest.raises(InputError):
        build_csr([(-1, 0)], 3)


def test_build_csr_isolated_nodes_get_empty_rows():
    m = build_csr([(0, 1)], 4)
    assert m.row_offsets[2] == m.row_offsets[3] == m.row_offsets[4]


def test_normalize_two_node_edge():
    # single edge: A+I has all degrees 2, every entry of the normalized
    # matrix is 1/2
    m = normalize_adjacency(build_csr([(0, 1)], 2))
    assert np.allclose(m.to_dense(), np.full((2, 2), 0.5), atol=1e-15)


def test_normalize_path_graph_hand_values():
    # path 0-1-2: deg+1 = (2, 3, 2); entry (0,1) = 1/sqrt(6)
    m = normalize_adjacency(build_csr([(0, 1), (1, 2)], 3)).to_dense()
    assert abs(m[0, 1] - 1.0 / np.sqrt(6.0)) < 1e-15
    assert abs(m[0, 0] - 0.5) < 1e-15
    assert abs(m[1, 1] - 1.0 / 3.0) < 1e-15


def test_normalize_matches_dense_formula():
    rng = np.random.default_rng(7)
    for _ in range(10):
        n = int(rng.integers(2, 30))
        density = rng.uniform(0.05, 0.4)
        upper = np.triu(rng.random((n, n)) < density, k=1)
        edges = [(int(u), int(v)) for u, v in zip(*np.nonzero(upper))]
        a = dense_adj(edges, n)
        a_tilde = a + np.eye(n)
        d_inv_sqrt = 1.0 / np.sqrt(a_tilde.sum(axis=1))
        expected = d_inv_sqrt[:, None] * a_tilde * d_inv_sqrt[None, :]
        got = normalize_adjacency(build_csr(edges, n)).to_dense()
        assert np.max(np.abs(got - expected)) < 1e-12


def test_normalize_exact_symmetry():
    rng = np.random.default_rng(11)
    upper = np.triu(rng.random((40, 40)) < 0.15, k=1)
    edges = [(int(u), int(v)) for u, v in zip(*np.nonzero(upper))]
    d = normalize_adjacency(build_csr(edges, 40)).to_dense()
    # bitwise, not approximate: value at (i,j) is computed from the same
    # commutative product as (j,i)
    assert np.array_equal(d, d.T)


def test_normalize_spectral_radius_at_most_one():
    rng = np.random.default_rng(3)
    for _ in range(5):
        n = int(rng.integers(5, 40))
        upper = np.triu(rng.random((n, n)) < 0.2, k=1)
        edges = [(int(u), int(v)) for u, v in zip(*np.nonzero(upper))]
        d = normalize_adjacency(build_csr(edges, n)).to_dense()
        eigs = np.linalg.eigvalsh(d)
        assert np.max(np.abs(eigs)) <= 1.0 + 1e-9


def test_spmm_matches_dense():
    rng = np.random.default_rng(5)
    for _ in range(10):
        n = int(rng.integers(2, 25))
        k = int(rng.integers(1, 8))
        upper = np.triu(rng.random((n, n)) < 0.3, k=1)
        edges = [(int(u), int(v)) for u, v in zip(*np.nonzero(upper))]
        m = normalize_adjacency(build_csr(edges, n))
        h = rng.standard_normal((n, k))
        assert np.max(np.abs(spmm(m, h) - m.to_dense() @ h)) < 1e-12


def test_spmm_dimension_mismatch():
    m = build_csr([(0, 1)], 2)
    with pytest.raises(InputError):
        spmm(m, np.zeros((3, 4)))


def test_from_dense_round_trip():
    a = np.array([[0.0, 2.0, 0.0], [0.0, 0.0, -1.5], [3.0, 0.0, 0.0]])
    assert np.array_equal(SparseMatrix.from_dense(a).to_dense(), a)


def test_transpose_round_trip():
    a = np.array([[0.0, 2.0], [0.0, 0.0], [3.0, 1.0]])
    m = SparseMatrix.from_dense(a)
    t = m.transpose()
    assert np.array_equal(t.to_dense(), a.T)
    # cached in both directions
    assert t.transpose() is m


def test_invalid_csr_rejected():
    with pytest.raises(InputError):
        SparseMatrix(2, 2, np.array([0, 1]), np.array([0]), np.array([1.0]))
    with pytest.raises(InputError):
        SparseMatrix(2, 2, np.array([0, 1, 1]), np.array([5]), np.array([1.0]))
    with pytest.raises(InputError):
        SparseMatrix(2, 2, np.array([0, 2, 1]), np.array([0, 1]), np.array([1.0, 1.0]))
