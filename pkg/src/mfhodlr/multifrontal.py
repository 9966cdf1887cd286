"""Multifrontal LU: conventional dense fronts and the HODLR-accelerated
variant with sampling-based extend-add, plus the two-pass solve.

Fronts are assembled in post-order over the elimination tree; each node seeds
its front from the (permuted) matrix entries, scatter-adds the children's
update matrices, eliminates its pivot block, and hands the Schur complement
upward. Fronts at or above the conversion threshold keep their pivot block as
a HODLR factorization, their couplings as skeleton low-rank factors, and
defer the update as a HODLR block minus an outer product that is never
multiplied out.
"""

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
from scipy.linalg import lu_solve

from .hodlr import (
    UpdateRep,
    build_hodlr,
    compress_block,
    hodlr_factorize,
    hodlr_solve,
)
from .bdlr import BlockSampler
from .sparse import AdjGraph, SparseMatrix
from .hodlr import _lu_factor_quiet

CONVENTIONAL = "conventional"
ACCELERATED = "accelerated"


@dataclass
class MfParams:
    """Knobs of the accelerated path.

    ``n_c``: front size at which dense handling switches to HODLR;
    ``eps``: low-rank truncation accuracy; ``d``: boundary-distance depth;
    ``n_leaf``: dense leaf size inside fronts; ``max_rank``: optional hard
    cap on block ranks for memory-bounded runs.
    """

    n_c: int = 256
    eps: float = 1e-1
    d: int = 1
    n_leaf: int = 64
    max_rank: int | None = None


@dataclass
class FrontRecord:
    node_id: int
    front_size: int
    n_pivot: int
    path: str
    max_offdiag_rank: int
    stored_reals: int


class FactorStats:
    """Per-node records plus the deterministic memory/allocation counters."""

    def __init__(self):
        self.records = []
        self.peak_stored_reals = 0
        self.retained_reals = 0
        self._live_update_reals = 0
        self.structured_fronts = 0
        self.dense_fronts = 0
        #: dense blocks materialized on the structured path at full front or
        #: full update size (must stay zero; the conventional outer product
        #: is exactly such an allocation)
        self.full_square_allocs = 0

    def note_front(self, live_front_reals):
        candidate = self.retained_reals + self._live_update_reals + live_front_reals
        self.peak_stored_reals = max(self.peak_stored_reals, candidate)

    def settle_node(self, record, freed_updates, new_update_reals):
        self.records.append(record)
        self.retained_reals += record.stored_reals
        self._live_update_reals -= freed_updates
        self._live_update_reals += new_update_reals
        candidate = self.retained_reals + self._live_update_reals
        self.peak_stored_reals = max(self.peak_stored_reals, candidate)

    def structured_alloc_note(self, full_dim, n_leaf=0):
        """Counter hook for the structured path.

        Flags any dense materialization covering the full ``full_dim`` square
        unless that square fits within a single dense leaf anyway (degenerate
        single-leaf fronts are dense by representation, not by expansion).
        """

        def note(n_rows, n_cols):
            if full_dim > n_leaf and n_rows >= full_dim and n_cols >= full_dim:
                self.full_square_allocs += 1

        return note

    def note_child_expansion(self):
        self.full_square_allocs += 1

    def to_csv(self, path):
        with open(path, "w", encoding="ascii") as fh:
            fh.write("node_id,front_size,n_pivot,path,max_offdiag_rank,stored_reals\n")
            for r in self.records:
                fh.write(
                    f"{r.node_id},{r.front_size},{r.n_pivot},{r.path},"
                    f"{r.max_offdiag_rank},{r.stored_reals}\n"
                )


@dataclass
class DenseUpdate:
    """Dense Schur complement of a dense-path node over its frontal ids."""

    values: np.ndarray
    global_ids: np.ndarray

    @property
    def n(self):
        return len(self.global_ids)

    def extract_positions(self, rpos, cpos):
        return self.values[np.ix_(rpos, cpos)]

    def to_dense(self):
        return self.values

    def stored_reals(self):
        return self.values.size


@dataclass
class StructuredPayload:
    pivot_block: object  # HodlrMatrix or None when there are no pivots
    pf: object  # pivot-rows x frontal-cols coupling
    fp: object  # frontal-rows x pivot-cols coupling
    ff: object  # HodlrMatrix over the frontal ids or None


@dataclass
class FrontalMatrix:
    """One assembled front: payload is a dense array or a structured bundle."""

    node_id: int
    ids: np.ndarray
    n_pivot: int
    payload: object

    @property
    def front_size(self):
        return len(self.ids)

    @property
    def is_dense(self):
        return isinstance(self.payload, np.ndarray)


class DenseNodeFactor:
    def __init__(self, node_id, ids, n_pivot, lu_piv, pf, fp):
        self.node_id = node_id
        self.ids = ids
        self.n_pivot = n_pivot
        self._lu_piv = lu_piv
        self._pf = pf
        self._fp = fp

    def pp_solve(self, v):
        return lu_solve(self._lu_piv, v)

    def apply_pf(self, v):
        return self._pf @ v

    def apply_fp(self, v):
        return self._fp @ v

    def stored_reals(self):
        total = self._lu_piv[0].size if self._lu_piv is not None else 0
        return total + self._pf.size + self._fp.size

    def max_offdiag_rank(self):
        return 0


class StructuredNodeFactor:
    def __init__(self, node_id, ids, n_pivot, pp_fact, pf, fp, rank_hint=0):
        self.node_id = node_id
        self.ids = ids
        self.n_pivot = n_pivot
        self._pp_fact = pp_fact
        self._pf = pf
        self._fp = fp
        self._rank_hint = rank_hint

    def pp_solve(self, v):
        return hodlr_solve(self._pp_fact, v)

    def apply_pf(self, v):
        return self._pf.matvec(v)

    def apply_fp(self, v):
        return self._fp.matvec(v)

    def stored_reals(self):
        total = self._pp_fact.stored_reals() if self._pp_fact is not None else 0
        if self._pf is not None:
            total += self._pf.stored_reals()
        if self._fp is not None:
            total += self._fp.stored_reals()
        return total

    def max_offdiag_rank(self):
        return self._rank_hint


@dataclass
class SolveWorkspace:
    """Permuted upward-pass vector and the accumulating solution."""

    b_u: np.ndarray
    x: np.ndarray


class MfFactorization:
    """Retained per-node solve data plus the tree and permutation."""

    def __init__(self, mode, params, tree, node_factors, stats):
        self.mode = mode
        self.params = params
        self.tree = tree
        self.permutation = tree.permutation
        self.node_factors = node_factors
        self.stats = stats
        self.n = tree.n

    def stored_reals(self):
        return sum(
            f.stored_reals() for f in self.node_factors.values() if f is not None
        )


def permute_matrix(A, permutation):
    """``P A P^T`` as a scipy CSR matrix (permutation maps old -> new)."""
    coo = (A.to_csc() if isinstance(A, SparseMatrix) else sp.csc_matrix(A)).tocoo()
    return sp.csr_matrix(
        (coo.data, (permutation[coo.row], permutation[coo.col])), shape=coo.shape
    )


def assemble_fbar(node_id, Ap, tree):
    """Sparse frontal seed: permuted-matrix entries over the front's ids with
    the frontal-by-frontal block forced to zero."""
    node = tree.nodes[node_id]
    ids = node.front_ids()
    npv = node.n_pivot
    if len(ids) == 0:
        return sp.csr_matrix((0, 0))
    Ap = Ap if sp.issparse(Ap) else Ap.to_csr()
    block = Ap[ids][:, ids].tocoo()
    keep = (block.row < npv) | (block.col < npv)
    return sp.csr_matrix(
        (block.data[keep], (block.row[keep], block.col[keep])),
        shape=(len(ids), len(ids)),
    )


def _positions_in(parent_ids, child_ids, node_id):
    pos = np.searchsorted(parent_ids, child_ids)
    bad = (pos >= len(parent_ids)) | (
        parent_ids[np.minimum(pos, len(parent_ids) - 1)] != child_ids
    )
    if np.any(bad):
        raise ValueError(
            f"update index {child_ids[bad][0]} not present in parent front"
            f" (node {node_id})"
        )
    return pos


def extend_add_dense(seed, parent_ids, updates, node_id=-1):
    """Dense front: seed plus the children's updates scattered by global id."""
    parent_ids = np.asarray(parent_ids, dtype=np.int64)
    F = seed.toarray() if sp.issparse(seed) else np.array(seed, dtype=np.float64)
    for values, child_ids in updates:
        pos = _positions_in(parent_ids, np.asarray(child_ids, dtype=np.int64), node_id)
        F[np.ix_(pos, pos)] += values
    return F


def eliminate_dense(F, n_pivot, node_id=-1):
    """LU of the pivot block with partial pivoting; returns the retained
    factor and the dense Schur-complement update."""
    npv = n_pivot
    F = np.asarray(F, dtype=np.float64)
    pf = F[:npv, npv:].copy()
    fp = F[npv:, :npv].copy()
    ff = F[npv:, npv:]
    if npv:
        lu_piv = _lu_factor_quiet(F[:npv, :npv])
        diag = np.abs(np.diag(lu_piv[0]))
        if diag.min() == 0.0 or not np.isfinite(diag).all():
            raise ValueError(f"singular pivot block at node {node_id}")
        update = ff - fp @ lu_solve(lu_piv, pf) if pf.shape[1] else ff.copy()
    else:
        lu_piv = None
        update = ff.copy()
    return DenseNodeFactor(node_id, None, npv, lu_piv, pf, fp), update


def _front_sampler(seed_csr, front_ids, child_updates, node_id, stats=None, n_leaf=0):
    """Entry oracle over the front's global ids: seed plus child updates.

    A single request that fully expands a structured child's update (beyond
    one dense leaf) is exactly the conventional outer-product materialization
    and gets reported to the allocation counter.
    """
    seed_csc = seed_csr.tocsc()
    maps = []
    n_hat = len(front_ids)
    for child in child_updates:
        front_pos = _positions_in(front_ids, child.global_ids, node_id)
        to_child = np.full(n_hat, -1, dtype=np.int64)
        to_child[front_pos] = np.arange(child.n)
        maps.append((child, to_child))

    def fn(rows_global, cols_global):
        rows = np.searchsorted(front_ids, rows_global)
        cols = np.searchsorted(front_ids, cols_global)
        if len(rows) <= len(cols):
            block = seed_csr[rows][:, cols].toarray()
        else:
            block = seed_csc[:, cols][rows].toarray()
        for child, to_child in maps:
            cr = to_child[rows]
            cc = to_child[cols]
            rmask = cr >= 0
            cmask = cc >= 0
            if rmask.any() and cmask.any():
                kr = int(rmask.sum())
                kc = int(cmask.sum())
                if stats is not None and child.n > n_leaf and kr >= child.n and kc >= child.n:
                    stats.note_child_expansion()
                sub = child.extract_positions(cr[rmask], cc[cmask])
                block[np.ix_(np.flatnonzero(rmask), np.flatnonzero(cmask))] += sub
        return block

    return BlockSampler(front_ids, front_ids, fn)


def extend_add_hodlr(front_ids, n_pivot, params, seed, child_updates,
                     interaction_graph, stats=None, node_id=-1):
    """Assemble a structured front without ever forming it densely.

    The BDLR selections fix a priori which rows and columns are needed, so
    the sampler only reconstructs those from the seed and the children's
    HODLR-minus-outer-product updates. ``interaction_graph`` must cover the
    front's ids; handing it the whole matrix graph lets the boundary
    distances run through eliminated vertices, which is what makes the
    selections span Schur-complement fill.
    """
    front_ids = np.asarray(front_ids, dtype=np.int64)
    n_hat = len(front_ids)
    npv = n_pivot
    child_updates = [u for u in child_updates if u is not None and u.n > 0]
    sampler = _front_sampler(
        seed, front_ids, child_updates, node_id, stats, params.n_leaf
    )
    note = (
        stats.structured_alloc_note(n_hat, params.n_leaf) if stats is not None else None
    )

    pp_ids = front_ids[:npv]
    ff_ids = front_ids[npv:]
    front_graph = interaction_graph
    pivot_block = (
        build_hodlr(
            sampler, pp_ids, front_graph,
            n_leaf=params.n_leaf, eps=params.eps, d=params.d,
            max_rank=params.max_rank, alloc_note=note, strict_certificate=True,
        )
        if npv
        else None
    )
    if npv and n_hat > npv:
        pf = compress_block(
            sampler, pp_ids, ff_ids, front_graph, params.eps, params.d,
            params.max_rank, note, strict_certificate=True,
        )
        fp = compress_block(
            sampler, ff_ids, pp_ids, front_graph, params.eps, params.d,
            params.max_rank, note, strict_certificate=True,
        )
    else:
        pf = fp = None
    ff = (
        build_hodlr(
            sampler, ff_ids, front_graph,
            n_leaf=params.n_leaf, eps=params.eps, d=params.d,
            max_rank=params.max_rank, alloc_note=note, strict_certificate=True,
        )
        if n_hat > npv
        else None
    )
    payload = StructuredPayload(pivot_block, pf, fp, ff)
    return FrontalMatrix(node_id, front_ids, npv, payload)


def eliminate_hodlr(front, stats=None):
    """Factorize the structured pivot block and defer the update.

    The Schur correction stays an outer product ``W V^T`` built from the
    coupling skeletons and one multi-RHS HODLR solve; it is never expanded to
    a dense frontal-size block.
    """
    payload = front.payload
    npv = front.n_pivot
    nf = front.front_size - npv
    note = (
        stats.structured_alloc_note(nf) if stats is not None else (lambda r, c: None)
    )
    pp_fact = hodlr_factorize(payload.pivot_block) if npv else None
    if npv and nf:
        col_pf, row_pf = payload.pf.as_factors()
        col_fp, row_fp = payload.fp.as_factors()
        x = hodlr_solve(pp_fact, col_pf)  # pivot-block solves, n_p x r_pf
        note(*x.shape)
        core = row_fp @ x  # r_fp x r_pf
        if row_pf.shape[0] <= col_fp.shape[1]:
            outer_w = col_fp @ core
            outer_v = row_pf.T.copy()
        else:
            outer_w = col_fp
            outer_v = (core @ row_pf).T
        note(*outer_w.shape)
        note(*outer_v.shape)
    else:
        outer_w = np.zeros((nf, 0))
        outer_v = np.zeros((nf, 0))
    rank_hint = 0
    if payload.pivot_block is not None:
        rank_hint = payload.pivot_block.max_offdiag_rank()
    if payload.ff is not None:
        rank_hint = max(rank_hint, payload.ff.max_offdiag_rank())
    for coupling in (payload.pf, payload.fp):
        if coupling is not None:
            rank_hint = max(rank_hint, coupling.rank)
    factor = StructuredNodeFactor(
        front.node_id, front.ids, npv, pp_fact, payload.pf, payload.fp, rank_hint
    )
    update = (
        UpdateRep(payload.ff, outer_w, outer_v, front.ids[npv:]) if nf else None
    )
    return factor, update


def mf_factorize(A, tree, mode=CONVENTIONAL, params=None):
    """Post-order factorization; fronts below ``params.n_c`` stay dense.

    ``mode='conventional'`` is the accelerated engine with the threshold at
    infinity, so setting ``n_c`` above every front size reproduces it
    bit-for-bit.
    """
    if mode not in (CONVENTIONAL, ACCELERATED):
        raise ValueError(f"unknown mode '{mode}'")
    params = params or MfParams()
    Ap = permute_matrix(A, tree.permutation)
    threshold = params.n_c if mode == ACCELERATED else np.inf
    # selection distances run over the whole (permuted) matrix graph so that
    # frontal vertices coupled through eliminated regions stay visible
    adj = AdjGraph.from_pattern(Ap) if mode == ACCELERATED else None

    stats = FactorStats()
    updates = {}
    node_factors = {}
    for p in tree.post_order:
        node = tree.nodes[p]
        ids = node.front_ids()
        npv = node.n_pivot
        n_hat = len(ids)
        child_ups = [updates.pop(c) for c in node.children]
        child_ups = [u for u in child_ups if u is not None]
        freed = sum(u.stored_reals() for u in child_ups)
        if n_hat == 0:
            node_factors[p] = None
            updates[p] = None
            stats.settle_node(FrontRecord(p, 0, 0, "empty", 0, 0), freed, 0)
            continue
        seed = assemble_fbar(p, Ap, tree)
        if n_hat < threshold:
            dense_ups = [(u.to_dense(), u.global_ids) for u in child_ups]
            F = extend_add_dense(seed, ids, dense_ups, node_id=p)
            stats.note_front(F.size)
            factor, update_vals = eliminate_dense(F, npv, node_id=p)
            factor.ids = ids
            update = (
                DenseUpdate(update_vals, ids[npv:]) if n_hat > npv else None
            )
            stats.dense_fronts += 1
            path = "dense"
        else:
            front = extend_add_hodlr(
                ids, npv, params, seed, child_ups, adj, stats, node_id=p
            )
            front_reals = sum(
                part.stored_reals()
                for part in (
                    front.payload.pivot_block,
                    front.payload.pf,
                    front.payload.fp,
                    front.payload.ff,
                )
                if part is not None
            )
            stats.note_front(front_reals)
            factor, update = eliminate_hodlr(front, stats)
            stats.structured_fronts += 1
            path = "structured"
        node_factors[p] = factor
        updates[p] = update
        new_reals = update.stored_reals() if update is not None else 0
        stats.settle_node(
            FrontRecord(p, n_hat, npv, path, factor.max_offdiag_rank(),
                        factor.stored_reals()),
            freed,
            new_reals,
        )
    return MfFactorization(mode, params, tree, node_factors, stats)


def mf_solve(F, b):
    """Two-pass solve: eliminate the right-hand side upward, back-substitute
    downward, in the permuted ordering."""
    b = np.asarray(b, dtype=np.float64)
    if b.shape[0] != F.n:
        raise ValueError(f"dimension mismatch: system is {F.n}, rhs is {b.shape[0]}")
    ws = SolveWorkspace(b_u=np.empty(F.n), x=np.zeros(F.n))
    ws.b_u[F.permutation] = b
    order = list(F.tree.post_order)
    for p in order:
        nf = F.node_factors[p]
        if nf is None or nf.n_pivot == 0:
            continue
        piv = nf.ids[: nf.n_pivot]
        fro = nf.ids[nf.n_pivot :]
        if len(fro):
            ws.b_u[fro] -= nf.apply_fp(nf.pp_solve(ws.b_u[piv]))
    for p in reversed(order):
        nf = F.node_factors[p]
        if nf is None or nf.n_pivot == 0:
            continue
        piv = nf.ids[: nf.n_pivot]
        fro = nf.ids[nf.n_pivot :]
        rhs = ws.b_u[piv]
        if len(fro):
            rhs = rhs - nf.apply_pf(ws.x[fro])
        ws.x[piv] = nf.pp_solve(rhs)
    return ws.x[F.permutation]
