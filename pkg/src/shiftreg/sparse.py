"""Compressed sparse row matrices and the kernels built on them.

One canonical layout is used everywhere: CSR with strictly increasing
column indices inside each row and no explicitly stored zeros. Matrices
are immutable after construction (the backing arrays are marked
read-only), so instances can be shared freely across threads.
"""

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from .errors import InputError


@dataclass
class SparseMatrix:
    """CSR matrix over float64 values.

    ``row_offsets`` has ``num_rows + 1`` entries, is non-decreasing, and
    ends at ``len(values)``. ``col_indices`` are strictly increasing
    within each row.
    """

    num_rows: int
    num_cols: int
    row_offsets: np.ndarray
    col_indices: np.ndarray
    values: np.ndarray
    _scipy_cache: sp.csr_matrix | None = field(default=None, repr=False, compare=False)
    _t_cache: "SparseMatrix | None" = field(default=None, repr=False, compare=False)

    def __post_init__(self):
        self.row_offsets = np.ascontiguousarray(self.row_offsets, dtype=np.int64)
        self.col_indices = np.ascontiguousarray(self.col_indices, dtype=np.int64)
        self.values = np.ascontiguousarray(self.values, dtype=np.float64)
        if self.row_offsets.shape != (self.num_rows + 1,):
            raise InputError(
                f"row_offsets must have length num_rows+1, got {self.row_offsets.shape}"
            )
        if self.row_offsets[0] != 0 or self.row_offsets[-1] != len(self.values):
            raise InputError("row_offsets must start at 0 and end at nnz")
        if np.any(np.diff(self.row_offsets) < 0):
            raise InputError("row_offsets must be non-decreasing")
        if len(self.col_indices) != len(self.values):
            raise InputError("col_indices and values must have equal length")
        if len(self.col_indices) and (
            self.col_indices.min() < 0 or self.col_indices.max() >= self.num_cols
        ):
            raise InputError("column index out of range")
        for arr in (self.row_offsets, self.col_indices, self.values):
            arr.flags.writeable = False

    @property
    def nnz(self):
        return len(self.values)

    @classmethod
    def from_dense(cls, dense) -> "SparseMatrix":
        dense = np.asarray(dense, dtype=np.float64)
        if dense.ndim != 2:
            raise InputError("from_dense expects a 2-d array")
        m = sp.csr_matrix(dense)
        m.sort_indices()
        m.eliminate_zeros()
        return cls(
            num_rows=dense.shape[0],
            num_cols=dense.shape[1],
            row_offsets=m.indptr.astype(np.int64),
            col_indices=m.indices.astype(np.int64),
            values=m.data.astype(np.float64),
        )

    def to_dense(self) -> np.ndarray:
        out = np.zeros((self.num_rows, self.num_cols))
        for i in range(self.num_rows):
            lo, hi = self.row_offsets[i], self.row_offsets[i + 1]
            out[i, self.col_indices[lo:hi]] = self.values[lo:hi]
        return out

    def as_scipy(self) -> sp.csr_matrix:
        if self._scipy_cache is None:
            self._scipy_cache = sp.csr_matrix(
                (self.values, self.col_indices, self.row_offsets),
                shape=(self.num_rows, self.num_cols),
            )
        return self._scipy_cache

    def transpose(self) -> "SparseMatrix":
        if self._t_cache is None:
            t = self.as_scipy().T.tocsr()
            t.sort_indices()
            self._t_cache = SparseMatrix(
                num_rows=self.num_cols,
                num_cols=self.num_rows,
                row_offsets=t.indptr.astype(np.int64),
                col_indices=t.indices.astype(np.int64),
                values=t.data.astype(np.float64),
            )
            self._t_cache._t_cache = self
        return self._t_cache

    def __eq__(self, other):
        if not isinstance(other, SparseMatrix):
            return NotImplemented
        return (
            self.num_rows == other.num_rows
            and self.num_cols == other.num_cols
            and np.array_equal(self.row_offsets, other.row_offsets)
            and np.array_equal(self.col_indices, other.col_indices)
            and np.array_equal(self.values, other.values)
        )


def build_csr(edge_list, n: int) -> SparseMatrix:
    """Build a symmetric binary adjacency matrix from an edge list.

    Duplicate pairs and both orientations of the same edge collapse to a
    single undirected edge. Self-loops are dropped here; normalization
    re-adds them so (A+I) never double-counts.
    """
    for i, j in edge_list:
        if not (0 <= i < n and 0 <= j < n):
            raise InputError(f"edge ({i}, {j}) out of range for n={n}")
    if len(edge_list) == 0:
        pairs = np.empty((0, 2), dtype=np.int64)
    else:
        e = np.asarray(edge_list, dtype=np.int64)
        e = e[e[:, 0] != e[:, 1]]
        both = np.vstack([e, e[:, ::-1]])
        pairs = np.unique(both, axis=0)
    rows = pairs[:, 0]
    counts = np.bincount(rows, minlength=n)
    offsets = np.concatenate([[0], np.cumsum(counts)]).astype(np.int64)
    # np.unique sorts lexicographically, so columns are sorted within rows
    return SparseMatrix(n, n, offsets, pairs[:, 1], np.ones(len(pairs)))


def normalize_adjacency(adj: SparseMatrix) -> SparseMatrix:
    """Symmetric degree normalization with self-loops added first.

    Returns d(i)^{-1/2} (A+I) d(j)^{-1/2} where d is the degree of A+I.
    Each value is computed as inv_sqrt[i] * inv_sqrt[j], which makes the
    output exactly symmetric. An isolated node keeps degree 1 from its
    own self-loop.
    """
    n = adj.num_rows
    if adj.num_cols != n:
        raise InputError("adjacency must be square")
    deg = np.diff(adj.row_offsets) + 1  # +1 for the self-loop
    inv_sqrt = 1.0 / np.sqrt(deg.astype(np.float64))

    counts = deg.astype(np.int64)
    offsets = np.concatenate([[0], np.cumsum(counts)]).astype(np.int64)
    cols = np.empty(offsets[-1], dtype=np.int64)
    vals = np.empty(offsets[-1], dtype=np.float64)
    for i in range(n):
        lo, hi = adj.row_offsets[i], adj.row_offsets[i + 1]
        row_cols = adj.col_indices[lo:hi]
        pos = int(np.searchsorted(row_cols, i))
        merged = np.insert(row_cols, pos, i)
        out_lo = offsets[i]
        cols[out_lo : out_lo + len(merged)] = merged
        vals[out_lo : out_lo + len(merged)] = inv_sqrt[i] * inv_sqrt[merged]
    return SparseMatrix(n, n, offsets, cols, vals)


def spmm(m: SparseMatrix, h: np.ndarray) -> np.ndarray:
    """Sparse-dense product M @ H in float64."""
    h = np.asarray(h, dtype=np.float64)
    rows = h.shape[0] if h.ndim == 2 else len(h)
    if m.num_cols != rows:
        raise InputError(
            f"dimension mismatch: sparse is {m.num_rows}x{m.num_cols}, dense has {rows} rows"
        )
    return m.as_scipy() @ h
