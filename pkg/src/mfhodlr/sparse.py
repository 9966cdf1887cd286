"""Sparse matrix storage, Matrix Market I/O, row scaling, and adjacency.

The storage format is compressed column-major (CSC), wrapped around scipy so
the rest of the library gets validated, immutable inputs with a symmetry flag
attached.
"""

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp


class SparseMatrix:
    """Real sparse matrix in compressed column-major storage.

    Instances are immutable after construction: indices are sorted within
    each column and duplicates are rejected. ``symmetric`` asserts that both
    the pattern and the values are symmetric (files with a symmetric Matrix
    Market header are expanded to full storage on load).
    """

    def __init__(self, matrix, symmetric=False):
        csc = sp.csc_matrix(matrix, dtype=np.float64)
        csc.sum_duplicates()
        csc.sort_indices()
        self._csc = csc
        self.symmetric = bool(symmetric)
        if self.symmetric:
            if csc.shape[0] != csc.shape[1]:
                raise ValueError("symmetric flag requires a square matrix")
            if (csc != csc.T).nnz != 0:
                raise ValueError("symmetric flag set but matrix is not symmetric")

    @property
    def n_rows(self):
        return self._csc.shape[0]

    @property
    def n_cols(self):
        return self._csc.shape[1]

    @property
    def shape(self):
        return self._csc.shape

    @property
    def nnz(self):
        return self._csc.nnz

    @classmethod
    def from_triplets(cls, n_rows, n_cols, rows, cols, values, symmetric=False):
        rows = np.asarray(rows, dtype=np.int64)
        cols = np.asarray(cols, dtype=np.int64)
        values = np.asarray(values, dtype=np.float64)
        if rows.size and (rows.min() < 0 or rows.max() >= n_rows):
            raise ValueError("row index out of range")
        if cols.size and (cols.min() < 0 or cols.max() >= n_cols):
            raise ValueError("column index out of range")
        key = rows.astype(np.int64) * n_cols + cols
        if np.unique(key).size != key.size:
            raise ValueError("duplicate (row, col) entry")
        coo = sp.coo_matrix((values, (rows, cols)), shape=(n_rows, n_cols))
        return cls(coo, symmetric=symmetric)

    def to_csc(self):
        return self._csc.copy()

    def to_csr(self):
        return self._csc.tocsr()

    def toarray(self):
        return self._csc.toarray()

    def diagonal(self):
        return self._csc.diagonal()

    def triplets(self):
        """Entries as (rows, cols, values) in column-major order."""
        coo = self._csc.tocoo()
        order = np.lexsort((coo.row, coo.col))
        return coo.row[order], coo.col[order], coo.data[order]

    def __repr__(self):
        return (
            f"SparseMatrix({self.n_rows}x{self.n_cols}, nnz={self.nnz},"
            f" symmetric={self.symmetric})"
        )


class AdjGraph:
    """Undirected adjacency of a matrix pattern, self-loops removed.

    Neighbor lists are sorted and duplicate-free; the structure is immutable.
    """

    def __init__(self, n_vertices, indptr, indices):
        self.n_vertices = int(n_vertices)
        self.indptr = np.asarray(indptr, dtype=np.int64)
        self.indices = np.asarray(indices, dtype=np.int64)

    @classmethod
    def from_pattern(cls, pattern):
        """Build from any scipy sparse pattern; symmetrizes and drops the diagonal."""
        n = pattern.shape[0]
        pat = pattern.tocsr().astype(bool)
        sym = (pat + pat.T).tocsr()
        sym.setdiag(False)
        sym.eliminate_zeros()
        sym.sort_indices()
        return cls(n, sym.indptr.astype(np.int64), sym.indices.astype(np.int64))

    def neighbors(self, v):
        return self.indices[self.indptr[v] : self.indptr[v + 1]]

    def degree(self, v):
        return int(self.indptr[v + 1] - self.indptr[v])

    @property
    def n_edges(self):
        return int(len(self.indices) // 2)

    def subgraph(self, vertices):
        """Induced subgraph with vertices relabelled 0..len(vertices)-1."""
        vertices = np.asarray(vertices, dtype=np.int64)
        pat = sp.csr_matrix(
            (np.ones(len(self.indices), dtype=np.uint8), self.indices, self.indptr),
            shape=(self.n_vertices, self.n_vertices),
        )
        sub = pat[vertices][:, vertices].tocsr()
        sub.sort_indices()
        return AdjGraph(len(vertices), sub.indptr.astype(np.int64), sub.indices.astype(np.int64))


@dataclass(frozen=True)
class ScalingRecord:
    """Per-row divisors applied by :func:`row_scale`."""

    row_scales: np.ndarray


def load_matrix_market(path):
    """Read a Matrix Market coordinate file (real, general or symmetric).

    Symmetric files must store the lower triangle; the pattern is expanded to
    full storage and the symmetric flag is set. Indices are converted to
    0-based. Errors carry the offending line number.
    """
    with open(path, "r", encoding="ascii") as fh:
        lines = fh.read().splitlines()

    def fail(lineno, msg):
        raise ValueError(f"{path}:{lineno}: {msg}")

    if not lines:
        fail(1, "empty file")
    header = lines[0].split()
    if len(header) != 5 or header[0] != "%%MatrixMarket":
        fail(1, "missing '%%MatrixMarket' header")
    _, obj, fmt, field, symmetry = (tok.lower() for tok in header)
    if obj != "matrix" or fmt != "coordinate":
        fail(1, f"unsupported header '{lines[0]}' (need coordinate matrix)")
    if field != "real":
        fail(1, f"unsupported field '{field}' (only real is accepted)")
    if symmetry not in ("general", "symmetric"):
        fail(1, f"unsupported symmetry '{symmetry}'")
    is_symmetric = symmetry == "symmetric"

    lineno = 1
    size = None
    for lineno, line in enumerate(lines[1:], start=2):
        text = line.strip()
        if not text or text.startswith("%"):
            continue
        size = text.split()
        break
    if size is None:
        fail(lineno, "missing size line")
    if len(size) != 3:
        fail(lineno, f"malformed size line '{line.strip()}'")
    try:
        n_rows, n_cols, n_entries = (int(tok) for tok in size)
    except ValueError:
        fail(lineno, f"malformed size line '{line.strip()}'")
    if is_symmetric and n_rows != n_cols:
        fail(lineno, "symmetric matrix must be square")

    rows, cols, vals = [], [], []
    seen = set()
    count = 0
    for entry_lineno, line in enumerate(lines[lineno:], start=lineno + 1):
        text = line.strip()
        if not text:
            continue
        parts = text.split()
        if len(parts) != 3:
            fail(entry_lineno, f"malformed entry line '{text}'")
        try:
            i = int(parts[0])
            j = int(parts[1])
            v = float(parts[2])
        except ValueError:
            fail(entry_lineno, f"malformed entry line '{text}'")
        if not (1 <= i <= n_rows and 1 <= j <= n_cols):
            fail(entry_lineno, f"entry ({i}, {j}) out of range for {n_rows}x{n_cols}")
        if (i, j) in seen:
            fail(entry_lineno, f"duplicate entry ({i}, {j})")
        seen.add((i, j))
        count += 1
        if count > n_entries:
            raise ValueError(
                f"{path}: entry count mismatch: header declares {n_entries}, file has more"
            )
        if is_symmetric and j > i:
            fail(entry_lineno, "symmetric file stores an entry above the diagonal")
        rows.append(i - 1)
        cols.append(j - 1)
        vals.append(v)
        if is_symmetric and i != j:
            rows.append(j - 1)
            cols.append(i - 1)
            vals.append(v)
    if count != n_entries:
        raise ValueError(
            f"{path}: entry count mismatch: header declares {n_entries}, file has {count}"
        )
    return SparseMatrix.from_triplets(
        n_rows, n_cols, rows, cols, vals, symmetric=is_symmetric
    )


def write_matrix_market(A, path):
    """Write in Matrix Market coordinate format, 1-based ASCII.

    Symmetric matrices are written with a symmetric header and only the lower
    triangle stored, so load/write round-trips reproduce the entry multiset.
    """
    rows, cols, vals = A.triplets()
    if A.symmetric:
        keep = rows >= cols
        rows, cols, vals = rows[keep], cols[keep], vals[keep]
        symmetry = "symmetric"
    else:
        symmetry = "general"
    with open(path, "w", encoding="ascii") as fh:
        fh.write(f"%%MatrixMarket matrix coordinate real {symmetry}\n")
        fh.write(f"{A.n_rows} {A.n_cols} {len(vals)}\n")
        for i, j, v in zip(rows, cols, vals):
            fh.write(f"{i + 1} {j + 1} {float(v)!r}\n")


def row_scale(A, b):
    """Scale each row of ``A`` (and ``b``) by its largest absolute entry.

    Returns the scaled matrix, scaled right-hand side and a
    :class:`ScalingRecord` holding the divisors. Rows without any nonzero
    entry are an error. Scaling generally breaks symmetry, so the returned
    matrix never carries the symmetric flag.
    """
    b = np.asarray(b, dtype=np.float64)
    if b.shape[0] != A.n_rows:
        raise ValueError("right-hand side length does not match matrix rows")
    csr = A.to_csr()
    scales = np.zeros(A.n_rows)
    for i in range(A.n_rows):
        lo, hi = csr.indptr[i], csr.indptr[i + 1]
        if hi == lo:
            raise ValueError(f"row {i} has no nonzero entries")
        m = np.max(np.abs(csr.data[lo:hi]))
        if m == 0.0:
            raise ValueError(f"row {i} has no nonzero entries")
        scales[i] = m
        csr.data[lo:hi] /= m
    return SparseMatrix(csr), b / scales, ScalingRecord(scales)


def spmv(A, x):
    """Sparse matrix-vector product ``A @ x``."""
    x = np.asarray(x, dtype=np.float64)
    if x.shape[0] != A.n_cols:
        raise ValueError(
            f"dimension mismatch: matrix has {A.n_cols} columns, vector has {x.shape[0]}"
        )
    return A._csc @ x


def adjacency_graph(A):
    """Symmetrized pattern of a square matrix with the diagonal dropped."""
    if A.n_rows != A.n_cols:
        raise ValueError("adjacency graph requires a square matrix")
    return AdjGraph.from_pattern(A._csc)
