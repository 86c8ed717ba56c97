"""Symmetric sparse matrices in CSR form and the kernels built on them.

All system matrices live here: pattern construction from grid connectivity,
matrix-vector products, diagonal shifts, and the plain-text exchange format
used by the CLI.  Matrices are immutable after construction; the kernels are
pure functions and safe to call concurrently.
"""

from __future__ import annotations

import numpy as np

from .grid import GridGraph


class SparseSym:
    """Structurally symmetric sparse matrix, compressed sparse row layout.

    Column indices are strictly increasing within each row and both
    triangles are stored.  ``values`` may be asymmetric only transiently
    (e.g. while filling); every public constructor in this package produces
    symmetric values, and :meth:`check_symmetric` verifies it.
    """

    __slots__ = ("dim", "row_offsets", "col_indices", "values",
                 "_diag_pos", "_row_index", "_transpose_order")

    def __init__(self, dim, row_offsets, col_indices, values, _trusted=False):
        self.dim = int(dim)
        self.row_offsets = np.asarray(row_offsets, dtype=np.int64)
        self.col_indices = np.asarray(col_indices, dtype=np.int64)
        self.values = np.asarray(values, dtype=np.float64)
        self._diag_pos = None
        self._row_index = None
        self._transpose_order = None
        if not _trusted:
            self._validate_structure()

    def _validate_structure(self):
        if self.dim < 1:
            raise ValueError("matrix dimension must be >= 1")
        if self.row_offsets.shape != (self.dim + 1,):
            raise ValueError("row_offsets must have length dim + 1")
        if self.row_offsets[0] != 0 or self.row_offsets[-1] != self.col_indices.shape[0]:
            raise ValueError("row_offsets must start at 0 and end at nnz")
        if np.any(np.diff(self.row_offsets) < 0):
            raise ValueError("row_offsets must be non-decreasing")
        if self.values.shape != self.col_indices.shape:
            raise ValueError("values and col_indices must have equal length")
        if self.nnz and (self.col_indices.min() < 0 or self.col_indices.max() >= self.dim):
            raise ValueError("column index out of range")
        # strictly increasing columns within each row (also rules out duplicates)
        if self.nnz > 1:
            d = np.diff(self.col_indices)
            row_starts = self.row_offsets[1:-1]  # positions where a new row begins
            allowed = np.zeros(self.nnz - 1, dtype=bool)
            allowed[row_starts[(row_starts > 0) & (row_starts < self.nnz)] - 1] = True
            if np.any((d <= 0) & ~allowed):
                raise ValueError("column indices must be strictly increasing within rows")

    @property
    def nnz(self) -> int:
        return int(self.col_indices.shape[0])

    def row_index(self) -> np.ndarray:
        """Row index of every stored entry (cached, CSR order)."""
        if self._row_index is None:
            counts = np.diff(self.row_offsets)
            self._row_index = np.repeat(np.arange(self.dim, dtype=np.int64), counts)
        return self._row_index

    def diag_positions(self) -> np.ndarray:
        """Storage positions of the diagonal entries that are present."""
        if self._diag_pos is None:
            self._diag_pos = np.flatnonzero(self.row_index() == self.col_indices)
        return self._diag_pos

    def has_full_diagonal(self) -> bool:
        return self.diag_positions().shape[0] == self.dim

    def diagonal(self) -> np.ndarray:
        """Diagonal as a dense vector (zero where structurally absent)."""
        d = np.zeros(self.dim)
        pos = self.diag_positions()
        d[self.row_index()[pos]] = self.values[pos]
        return d

    def transpose_order(self) -> np.ndarray:
        """Permutation mapping CSR order to transposed-CSR order.

        Entry k of the pattern, read in (col, row) order, is the original
        entry ``transpose_order()[k]``.  For a structurally symmetric
        pattern, ``values[transpose_order()]`` is the value of the mirrored
        entry at each position.
        """
        if self._transpose_order is None:
            order = np.lexsort((self.row_index(), self.col_indices))
            if not (np.array_equal(self.col_indices[order], self.row_index())
                    and np.array_equal(self.row_index()[order], self.col_indices)):
                raise ValueError("pattern is not structurally symmetric")
            self._transpose_order = order
        return self._transpose_order

    def check_symmetric(self) -> bool:
        """True when a(i, j) == a(j, i) exactly for every stored entry."""
        return bool(np.array_equal(self.values, self.values[self.transpose_order()]))

    def get(self, i: int, j: int) -> float:
        """Stored value at (i, j), or 0.0 if the entry is not in the pattern."""
        lo, hi = self.row_offsets[i], self.row_offsets[i + 1]
        pos = lo + np.searchsorted(self.col_indices[lo:hi], j)
        if pos < hi and self.col_indices[pos] == j:
            return float(self.values[pos])
        return 0.0

    def with_values(self, values: np.ndarray) -> "SparseSym":
        """Same pattern, new values; cached index structures are shared."""
        values = np.asarray(values, dtype=np.float64)
        if values.shape != self.col_indices.shape:
            raise ValueError("value array does not match pattern")
        out = SparseSym(self.dim, self.row_offsets, self.col_indices, values,
                        _trusted=True)
        out._diag_pos = self._diag_pos
        out._row_index = self._row_index
        out._transpose_order = self._transpose_order
        return out

    def copy(self) -> "SparseSym":
        return self.with_values(self.values.copy())

    def to_dense(self) -> np.ndarray:
        """Dense copy; intended for small diagnostics and test oracles only."""
        out = np.zeros((self.dim, self.dim))
        out[self.row_index(), self.col_indices] = self.values
        return out


def assemble(dim: int, rows: np.ndarray, cols: np.ndarray, values: np.ndarray) -> SparseSym:
    """Build a SparseSym from coordinate triplets (both triangles supplied).

    Entries are sorted into CSR order; duplicate coordinates are an error.
    """
    rows = np.asarray(rows, dtype=np.int64)
    cols = np.asarray(cols, dtype=np.int64)
    values = np.asarray(values, dtype=np.float64)
    if not (rows.shape == cols.shape == values.shape):
        raise ValueError("rows, cols, values must have equal length")
    order = np.lexsort((cols, rows))
    rows, cols, values = rows[order], cols[order], values[order]
    if rows.size:
        dup = (np.diff(rows) == 0) & (np.diff(cols) == 0)
        if np.any(dup):
            raise ValueError("duplicate entries in coordinate input")
    counts = np.bincount(rows, minlength=dim) if rows.size else np.zeros(dim, dtype=np.int64)
    row_offsets = np.zeros(dim + 1, dtype=np.int64)
    np.cumsum(counts, out=row_offsets[1:])
    return SparseSym(dim, row_offsets, cols, values)


def pattern_from_edges(nodes: int, edges: np.ndarray, labels: int = 1,
                       label_coupled: bool = False) -> SparseSym:
    """Zero-valued symmetric pattern for an undirected edge list plus full diagonal.

    With ``label_coupled=False`` the pattern is nodes x nodes: one entry per
    directed edge plus the diagonal.  With ``label_coupled=True`` every edge
    (p, q) expands to all labels x labels interactions between the variable
    blocks of p and q, and the diagonal covers each (node, label) variable;
    same-node cross-label entries are not part of the pattern.
    """
    if nodes < 1:
        raise ValueError("need at least one node")
    edges = np.asarray(edges, dtype=np.int64).reshape(-1, 2)
    if edges.size and (edges.min() < 0 or edges.max() >= nodes):
        raise ValueError("edge endpoint out of range")
    if edges.size and np.any(edges[:, 0] == edges[:, 1]):
        raise ValueError("self-edges are not allowed")
    dp = np.concatenate([edges[:, 0], edges[:, 1]])
    dq = np.concatenate([edges[:, 1], edges[:, 0]])
    if not label_coupled:
        dim = nodes
        rows = np.concatenate([dp, np.arange(nodes, dtype=np.int64)])
        cols = np.concatenate([dq, np.arange(nodes, dtype=np.int64)])
    else:
        L = int(labels)
        dim = nodes * L
        k = np.repeat(np.arange(L, dtype=np.int64), L)   # row label per block entry
        m = np.tile(np.arange(L, dtype=np.int64), L)     # col label per block entry
        rows = (np.repeat(dp * L, L * L) + np.tile(k, dp.shape[0]))
        cols = (np.repeat(dq * L, L * L) + np.tile(m, dq.shape[0]))
        diag = np.arange(dim, dtype=np.int64)
        rows = np.concatenate([rows, diag])
        cols = np.concatenate([cols, diag])
    return assemble(dim, rows, cols, np.zeros(rows.shape[0]))


def build_pattern(graph: GridGraph, label_coupled: bool = False) -> SparseSym:
    """Zero-valued pattern for a grid graph.

    ``label_coupled=False`` gives the P x P pixel pattern (shared pairwise
    terms); ``label_coupled=True`` gives the full (P*L) x (P*L) pattern in
    which every label pair at neighbouring pixels interacts.
    """
    return pattern_from_edges(graph.pixels, graph.edges(), graph.labels, label_coupled)


def spmv(M: SparseSym, v: np.ndarray) -> np.ndarray:
    """Sparse matrix-vector product M @ v."""
    v = np.asarray(v, dtype=np.float64)
    if v.shape != (M.dim,):
        raise ValueError(f"vector length {v.shape} does not match dim {M.dim}")
    prod = M.values * v[M.col_indices]
    return np.bincount(M.row_index(), weights=prod, minlength=M.dim)


def offdiag_apply(M: SparseSym, v: np.ndarray) -> np.ndarray:
    """Row sums of a(i, j) * v[j] over stored j != i (diagonal contributes 0)."""
    v = np.asarray(v, dtype=np.float64)
    if v.shape != (M.dim,):
        raise ValueError(f"vector length {v.shape} does not match dim {M.dim}")
    prod = M.values * v[M.col_indices]
    prod[M.diag_positions()] = 0.0
    return np.bincount(M.row_index(), weights=prod, minlength=M.dim)


def add_scaled_identity(M: SparseSym, lam: float) -> SparseSym:
    """Return M + lam * I.  Requires the full diagonal in the pattern."""
    if not M.has_full_diagonal():
        raise ValueError("pattern must contain every diagonal entry")
    values = M.values.copy()
    values[M.diag_positions()] += lam
    return M.with_values(values)


def gershgorin_margin(M: SparseSym) -> float:
    """min_i (a_ii - sum_{j != i} |a_ij|); positive guarantees SPD."""
    absums = np.bincount(M.row_index(), weights=np.abs(M.values), minlength=M.dim)
    diag = M.diagonal()
    return float(np.min(diag - (absums - np.abs(diag))))


def symmetrize_values(M: SparseSym, values: np.ndarray) -> np.ndarray:
    """Average each entry with its mirror so that a(i,j) == a(j,i) exactly."""
    values = np.asarray(values, dtype=np.float64)
    return 0.5 * (values + values[M.transpose_order()])


# ---------------------------------------------------------------------------
# Plain-text exchange format: header "dim nnz", one "row col value" line per
# stored entry (0-based, both triangles); vectors are one value per line.
# ---------------------------------------------------------------------------

_FLOAT_FMT = "%.17g"  # round-trips float64 exactly


def save_system(path, M: SparseSym) -> None:
    rows = M.row_index()
    with open(path, "w") as fh:
        fh.write(f"{M.dim} {M.nnz}\n")
        for r, c, v in zip(rows, M.col_indices, M.values):
            fh.write(f"{r} {c} {_FLOAT_FMT % v}\n")


def load_system(path) -> SparseSym:
    with open(path) as fh:
        header = fh.readline().split()
        if len(header) != 2:
            raise ValueError("system file must start with a 'dim nnz' header")
        dim, nnz = int(header[0]), int(header[1])
        rows = np.empty(nnz, dtype=np.int64)
        cols = np.empty(nnz, dtype=np.int64)
        vals = np.empty(nnz)
        for t in range(nnz):
            parts = fh.readline().split()
            if len(parts) != 3:
                raise ValueError(f"malformed entry line {t + 2}")
            rows[t], cols[t], vals[t] = int(parts[0]), int(parts[1]), float(parts[2])
    M = assemble(dim, rows, cols, vals)
    if not M.check_symmetric():
        raise ValueError("system file is not symmetric")
    return M


def save_vector(path, v: np.ndarray) -> None:
    v = np.asarray(v, dtype=np.float64).ravel()
    with open(path, "w") as fh:
        for x in v:
            fh.write(f"{_FLOAT_FMT % x}\n")


def load_vector(path) -> np.ndarray:
    with open(path) as fh:
        return np.array([float(line) for line in fh if line.strip()], dtype=np.float64)
