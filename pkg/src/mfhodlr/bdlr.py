"""Boundary-distance row/column selection and pseudoskeleton compression.

An off-diagonal block is compressed from actual rows and columns: the ones
whose graph vertices lie within distance ``d`` of the opposite index set. The
intersection submatrix is factorized with full-pivot LU, the rank is cut where
the pivot ratio drops below the requested accuracy, and the two skeleton
factors are recovered with triangular solves.
"""

from collections import deque
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import solve_triangular

from ._kernels import full_pivot_lu


class BlockSampler:
    """Deterministic entry oracle for a dense block.

    ``fn(rows, cols)`` must return the dense sub-block for any subsets of
    ``row_ids`` / ``col_ids``, in the requested order.
    """

    def __init__(self, row_ids, col_ids, fn):
        self.row_ids = np.asarray(row_ids, dtype=np.int64)
        self.col_ids = np.asarray(col_ids, dtype=np.int64)
        self._fn = fn

    @property
    def shape(self):
        return (len(self.row_ids), len(self.col_ids))

    def sample(self, rows, cols):
        rows = np.asarray(rows, dtype=np.int64)
        cols = np.asarray(cols, dtype=np.int64)
        block = np.asarray(self._fn(rows, cols), dtype=np.float64)
        if block.shape != (len(rows), len(cols)):
            raise ValueError(
                f"sampler returned shape {block.shape}, expected {(len(rows), len(cols))}"
            )
        return block


@dataclass
class LowRankFactor:
    """Skeleton pair: ``block ~= col_factor @ row_factor``.

    ``col_factor`` is (n_rows, r), ``row_factor`` is (r, n_cols);
    ``selected_rows`` / ``selected_cols`` record the sampled index sets.
    """

    col_factor: np.ndarray
    row_factor: np.ndarray
    selected_rows: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=np.int64))
    selected_cols: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=np.int64))
    #: pivot ratio |u_{r+1,r+1}/u_11| left behind at the rank cut (0 if exact)
    achieved_ratio: float = 0.0

    @property
    def rank(self):
        return self.col_factor.shape[1]

    @property
    def shape(self):
        return (self.col_factor.shape[0], self.row_factor.shape[1])

    def to_dense(self):
        return self.col_factor @ self.row_factor

    def extract(self, rows, cols):
        """Dense sub-block at local row/column positions."""
        return self.col_factor[rows, :] @ self.row_factor[:, cols]

    def matvec(self, x):
        return self.col_factor @ (self.row_factor @ x)

    def rmatvec(self, x):
        return self.row_factor.T @ (self.col_factor.T @ x)

    def stored_reals(self):
        return self.col_factor.size + self.row_factor.size

    def as_factors(self):
        return self.col_factor, self.row_factor


def bfs_distance_mask(g, sources, cutoff):
    """Vertices within ``cutoff`` edges of the source set (multi-source BFS)."""
    dist = np.full(g.n_vertices, -1, dtype=np.int64)
    queue = deque()
    for s in sources:
        dist[s] = 0
        queue.append(int(s))
    while queue:
        v = queue.popleft()
        if dist[v] >= cutoff:
            continue
        for w in g.indices[g.indptr[v] : g.indptr[v + 1]]:
            if dist[w] < 0:
                dist[w] = dist[v] + 1
                queue.append(int(w))
    return dist


def select_boundary_indices(rows, cols, g, d):
    """Pick the rows/columns whose vertices lie within distance ``d`` of the
    opposite set, measured through any vertices of ``g``.

    Falls back to the full set on a side that comes out empty (e.g. when the
    two sets live in different graph components).
    """
    rows = np.asarray(rows, dtype=np.int64)
    cols = np.asarray(cols, dtype=np.int64)
    if rows.size == 0 or cols.size == 0:
        raise ValueError("rows and cols must be nonempty")
    if np.intersect1d(rows, cols).size:
        raise ValueError("rows and cols must be disjoint")
    if d < 1:
        raise ValueError("distance must be at least 1")
    for v in (int(rows.max()), int(cols.max())):
        if v >= g.n_vertices:
            raise ValueError(f"vertex {v} not in graph")
    if rows.min() < 0 or cols.min() < 0:
        raise ValueError("negative vertex id")

    dist_to_cols = bfs_distance_mask(g, cols, d)
    sel_rows = rows[(dist_to_cols[rows] >= 0) & (dist_to_cols[rows] <= d)]
    dist_to_rows = bfs_distance_mask(g, rows, d)
    sel_cols = cols[(dist_to_rows[cols] >= 0) & (dist_to_rows[cols] <= d)]
    if sel_rows.size == 0:
        sel_rows = rows.copy()
    if sel_cols.size == 0:
        sel_cols = cols.copy()
    return np.sort(sel_rows), np.sort(sel_cols)


def pseudoskeleton_compress(sampler, sel_rows, sel_cols, eps, max_rank=None):
    """CUR-style compression of the sampled block.

    Samples ``R = B(I, :)`` and ``C = B(:, J)``, runs full-pivot LU on the
    intersection ``B(I, J)``, cuts the rank at pivot ratio ``eps`` (capped at
    ``max_rank``), and forms the skeleton factors through triangular solves;
    no inverse is ever formed explicitly. An exactly zero intersection yields
    a rank-0 factor.
    """
    sel_rows = np.asarray(sel_rows, dtype=np.int64)
    sel_cols = np.asarray(sel_cols, dtype=np.int64)
    if not (0.0 < eps < 1.0):
        raise ValueError("eps must lie in (0, 1)")
    if not np.isin(sel_rows, sampler.row_ids).all():
        raise ValueError("selected rows are not a subset of the sampler rows")
    if not np.isin(sel_cols, sampler.col_ids).all():
        raise ValueError("selected cols are not a subset of the sampler cols")
    if max_rank is None:
        max_rank = min(len(sel_rows), len(sel_cols))
    if max_rank < 1:
        raise ValueError("max_rank must be at least 1")

    n_rows, n_cols = sampler.shape
    R = sampler.sample(sel_rows, sampler.col_ids)
    C = sampler.sample(sampler.row_ids, sel_cols)
    # the intersection is a column slice of R (sampler determinism)
    col_pos = {int(c): k for k, c in enumerate(sampler.col_ids)}
    inter_cols = np.array([col_pos[int(c)] for c in sel_cols], dtype=np.int64)
    core = R[:, inter_cols]

    lu, row_perm, col_perm, rank, ratio = full_pivot_lu(core, eps, max_rank)
    if rank == 0:
        return LowRankFactor(
            np.zeros((n_rows, 0)),
            np.zeros((0, n_cols)),
            sel_rows,
            sel_cols,
            achieved_ratio=ratio,
        )
    lower = np.tril(lu[:rank, :rank], -1) + np.eye(rank)
    upper = np.triu(lu[:rank, :rank])
    picked_r = R[row_perm[:rank], :]
    row_factor = solve_triangular(lower, picked_r, lower=True, unit_diagonal=True)
    picked_c = C[:, col_perm[:rank]]
    col_factor = solve_triangular(upper, picked_c.T, trans="T", lower=False).T
    return LowRankFactor(col_factor, row_factor, sel_rows, sel_cols, achieved_ratio=ratio)
