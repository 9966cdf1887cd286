import numpy as np
import pytest
import scipy.sparse as sp

from mfhodlr.multifrontal import (
    ACCELERATED,
    CONVENTIONAL,
    DenseUpdate,
    MfParams,
    assemble_fbar,
    eliminate_dense,
    eliminate_hodlr,
    extend_add_dense,
    extend_add_hodlr,
    mf_factorize,
    mf_solve,
    permute_matrix,
)
from mfhodlr.hodlr import UpdateRep, build_hodlr, sample_update
from mfhodlr.bdlr import BlockSampler
from mfhodlr.ordering import build_elimination_tree, nested_dissection
from mfhodlr.problems import gen_poisson7
from mfhodlr.sparse import AdjGraph, SparseMatrix, adjacency_graph, spmv


def chain_matrix(n):
    return SparseMatrix(
        sp.diags([-1.0, 2.0, -1.0], [-1, 0, 1], shape=(n, n)).tocsc(), symmetric=True
    )


def make_tree(A, leaf_size=4):
    return build_elimination_tree(
        nested_dissection(adjacency_graph(A), leaf_size=leaf_size), A
    )


def full_graph(n):
    return AdjGraph.from_pattern(sp.csr_matrix(np.ones((n, n))))


def random_spd(n, rng):
    M = rng.standard_normal((n, n))
    return M @ M.T + n * np.eye(n)


def dense_update_rep(values, ids, rng=None, n_leaf=4):
    """Wrap a dense update as an UpdateRep (single-structure HODLR, no outer)."""
    n = len(ids)
    sampler = BlockSampler(
        np.arange(n), np.arange(n), lambda r, c: values[np.ix_(r, c)]
    )
    H = build_hodlr(sampler, np.arange(n), full_graph(n), n_leaf=n, eps=1e-12)
    return UpdateRep(H, np.zeros((n, 0)), np.zeros((n, 0)), ids)


class TestAssembleFbar:
    def test_diagonal_leaf(self):
        A = SparseMatrix(sp.diags([3.0, 5.0]).tocsc())
        tree = make_tree(A, leaf_size=1)
        leaf = next(
            p for p in tree.post_order if tree.nodes[p].n_pivot and not tree.nodes[p].children
        )
        Ap = permute_matrix(A, tree.permutation)
        seed = assemble_fbar(leaf, Ap, tree)
        assert seed.shape == (1, 1)
        assert seed[0, 0] in (3.0, 5.0)

    def test_chain_leaf_zeroed_ff(self):
        A = chain_matrix(3)
        tree = make_tree(A, leaf_size=1)
        Ap = permute_matrix(A, tree.permutation)
        leaves = [
            p
            for p in tree.post_order
            if tree.nodes[p].n_pivot and not tree.nodes[p].children
        ]
        for p in leaves:
            seed = assemble_fbar(p, Ap, tree).toarray()
            assert seed.shape == (2, 2)
            assert seed[0, 0] == 2.0
            assert seed[0, 1] == -1.0 and seed[1, 0] == -1.0
            assert seed[1, 1] == 0.0  # frontal block zeroed

    def test_root_plain_submatrix(self):
        A = chain_matrix(7)
        tree = make_tree(A, leaf_size=3)
        Ap = permute_matrix(A, tree.permutation)
        root = tree.root
        assert tree.nodes[root].frontal_ids.size == 0
        seed = assemble_fbar(root, Ap, tree).toarray()
        ids = tree.nodes[root].pivot_ids
        np.testing.assert_array_equal(seed, Ap.toarray()[np.ix_(ids, ids)])


class TestExtendAddDense:
    def test_no_children(self):
        seed = np.array([[1.0, 2.0], [3.0, 4.0]])
        F = extend_add_dense(seed, np.array([0, 5]), [])
        np.testing.assert_array_equal(F, seed)

    def test_identical_index_map(self):
        seed = np.eye(3)
        upd = np.full((3, 3), 2.0)
        F = extend_add_dense(seed, np.array([1, 4, 9]), [(upd, np.array([1, 4, 9]))])
        np.testing.assert_array_equal(F, np.eye(3) + 2.0)

    def test_two_children_overlap_one_index(self):
        seed = np.zeros((3, 3))
        ids = np.array([0, 5, 7])
        u1 = np.ones((2, 2))
        u2 = np.full((2, 2), 10.0)
        F = extend_add_dense(
            seed, ids, [(u1, np.array([0, 5])), (u2, np.array([5, 7]))]
        )
        expected = np.array(
            [[1.0, 1.0, 0.0], [1.0, 11.0, 10.0], [0.0, 10.0, 10.0]]
        )
        np.testing.assert_array_equal(F, expected)

    def test_foreign_index_rejected(self):
        with pytest.raises(ValueError, match="not present in parent front"):
            extend_add_dense(
                np.zeros((2, 2)), np.array([0, 1]), [(np.ones((1, 1)), np.array([9]))]
            )

    def test_order_independent(self):
        rng = np.random.default_rng(0)
        ids = np.array([0, 2, 3, 6, 8])
        children = []
        for _ in range(4):
            k = int(rng.integers(1, 5))
            sub = np.sort(rng.choice(ids, size=k, replace=False))
            children.append((rng.standard_normal((k, k)), sub))
        seed = rng.standard_normal((5, 5))
        F1 = extend_add_dense(seed, ids, children)
        F2 = extend_add_dense(seed, ids, children[::-1])
        assert np.abs(F1 - F2).max() <= 1e-13


class TestEliminateDense:
    def test_root_empty_update(self):
        F = np.array([[2.0]])
        factor, update = eliminate_dense(F, 1)
        assert update.shape == (0, 0)
        np.testing.assert_allclose(factor.pp_solve(np.array([4.0])), [2.0])

    def test_hand_schur(self):
        F = np.array([[2.0, 1.0], [1.0, 2.0]])
        _, update = eliminate_dense(F, 1)
        np.testing.assert_allclose(update, [[1.5]])

    def test_block_diagonal_passthrough(self):
        F = np.zeros((4, 4))
        F[:2, :2] = [[2.0, 0.0], [0.0, 2.0]]
        F[2:, 2:] = [[5.0, 1.0], [1.0, 5.0]]
        _, update = eliminate_dense(F, 2)
        np.testing.assert_array_equal(update, [[5.0, 1.0], [1.0, 5.0]])

    def test_singular_pivot_names_node(self):
        F = np.zeros((2, 2))
        with pytest.raises(ValueError, match="node 7"):
            eliminate_dense(F, 2, node_id=7)


class TestExtendAddHodlr:
    def params(self, eps=1e-12, n_c=4, n_leaf=8, d=3):
        return MfParams(n_c=n_c, eps=eps, d=d, n_leaf=n_leaf)

    def assemble_front_dense(self, front):
        """Dense oracle assembly of a structured front."""
        npv = front.n_pivot
        n = front.front_size
        out = np.zeros((n, n))
        if front.payload.pivot_block is not None:
            out[:npv, :npv] = front.payload.pivot_block.to_dense()
        if front.payload.pf is not None:
            out[:npv, npv:] = front.payload.pf.to_dense()
            out[npv:, :npv] = front.payload.fp.to_dense()
        if front.payload.ff is not None:
            out[npv:, npv:] = front.payload.ff.to_dense()
        return out

    def test_no_children_diagonal_seed(self):
        seed = sp.csr_matrix(sp.diags([1.0, 2.0, 3.0, 4.0]))
        ids = np.array([0, 1, 2, 3])
        g = AdjGraph.from_pattern(sp.eye(4).tocsr())
        front = extend_add_hodlr(ids, 4, self.params(n_leaf=1), seed, [], g)
        H = front.payload.pivot_block
        assert H.max_offdiag_rank() == 0
        np.testing.assert_allclose(H.to_dense(), np.diag([1.0, 2.0, 3.0, 4.0]))

    def test_single_child_zero_seed(self):
        rng = np.random.default_rng(1)
        n = 12
        vals = random_spd(n, rng)
        ids = np.arange(n) * 2 + 1
        child = dense_update_rep(vals, ids)
        seed = sp.csr_matrix((n, n))
        g = full_graph(2 * n)  # interaction graph must cover the global ids
        front = extend_add_hodlr(ids, n, self.params(n_leaf=4), seed, [child], g)
        # oracle: direct sampling of the child at 30 random entry pairs
        for _ in range(30):
            i = int(rng.integers(n))
            j = int(rng.integers(n))
            got = front.payload.pivot_block.to_dense()[i, j]
            ref = sample_update(child, ids[[i]], ids[[j]])[0, 0]
            assert abs(got - ref) <= 1e-12 * max(1.0, abs(ref))

    def test_two_overlapping_children_matches_dense_pipeline(self):
        rng = np.random.default_rng(2)
        ids = np.arange(24)
        npv = 10
        seed_dense = np.zeros((24, 24))
        seed_dense[:npv, :] = rng.standard_normal((npv, 24))
        seed_dense[:, :npv] = seed_dense[:npv, :].T  # symmetric-ish seed
        seed = sp.csr_matrix(seed_dense)
        ids1 = np.sort(rng.choice(ids, size=14, replace=False))
        ids2 = np.sort(rng.choice(ids, size=11, replace=False))
        u1 = random_spd(14, rng)
        u2 = random_spd(11, rng)
        children = [dense_update_rep(u1, ids1), dense_update_rep(u2, ids2)]
        dense_oracle = extend_add_dense(seed, ids, [(u1, ids1), (u2, ids2)])
        front = extend_add_hodlr(
            ids, npv, self.params(eps=1e-12, n_leaf=4), seed, children, full_graph(24)
        )
        assembled = self.assemble_front_dense(front)
        err = np.linalg.norm(assembled - dense_oracle, "fro") / np.linalg.norm(
            dense_oracle, "fro"
        )
        assert err <= 1e-10


class TestEliminateHodlr:
    def build_front(self, F_dense, npv, ids, eps=1e-12):
        n = len(ids)
        seed = sp.csr_matrix(F_dense)
        params = MfParams(n_c=1, eps=eps, d=4, n_leaf=4)
        return extend_add_hodlr(ids, npv, params, seed, [], full_graph(n))

    def test_zero_coupling_gives_rank_zero_outer(self):
        rng = np.random.default_rng(3)
        npv, nf = 6, 5
        F = np.zeros((11, 11))
        F[:npv, :npv] = random_spd(npv, rng)
        F[npv:, npv:] = random_spd(nf, rng)
        # keep the seed's ff block: mimic an already-assembled front
        front = self.build_front(F, npv, np.arange(11))
        # ff seed block is zeroed by assemble, so feed it as a child instead
        factor, update = eliminate_hodlr(front)
        assert update.outer_rank == 0

    def test_matches_dense_elimination(self):
        rng = np.random.default_rng(4)
        npv, nf = 9, 7
        n = npv + nf
        F = random_spd(n, rng)
        front = self.build_front(F, npv, np.arange(n))
        factor, update = eliminate_hodlr(front)
        _, update_oracle = eliminate_dense(F, npv)
        got = update.to_dense()
        err = np.linalg.norm(got - update_oracle, "fro") / np.linalg.norm(
            update_oracle, "fro"
        )
        assert err <= 1e-9

    def test_rank_one_couplings_give_rank_one_outer(self):
        rng = np.random.default_rng(5)
        npv, nf = 8, 6
        n = npv + nf
        F = np.zeros((n, n))
        F[:npv, :npv] = random_spd(npv, rng)
        F[npv:, npv:] = random_spd(nf, rng)
        u = rng.standard_normal(npv)
        v = rng.standard_normal(nf)
        F[:npv, npv:] = np.outer(u, v)
        F[npv:, :npv] = np.outer(v, u)
        front = self.build_front(F, npv, np.arange(n))
        _, update = eliminate_hodlr(front)
        assert update.outer_rank == 1


class TestMfFactorize:
    def test_nc_infinite_matches_conventional_bitwise(self):
        A, b = gen_poisson7(4, 4, 4)
        tree = make_tree(A, leaf_size=8)
        conv = mf_factorize(A, tree, CONVENTIONAL)
        acc = mf_factorize(A, tree, ACCELERATED, MfParams(n_c=10**9))
        x1 = mf_solve(conv, b)
        x2 = mf_solve(acc, b)
        np.testing.assert_array_equal(x1, x2)
        assert acc.stats.structured_fronts == 0

    def test_poisson_5cubed_conventional(self):
        A, b = gen_poisson7(5, 5, 5)
        tree = make_tree(A, leaf_size=16)
        F = mf_factorize(A, tree, CONVENTIONAL)
        x = mf_solve(F, b)
        res = np.linalg.norm(spmv(A, x) - b) / np.linalg.norm(b)
        assert res <= 1e-10
        oracle = np.linalg.solve(A.toarray(), b)
        assert np.linalg.norm(x - oracle) / np.linalg.norm(oracle) <= 1e-10

    def test_accelerated_high_accuracy_matches_conventional(self):
        A, b = gen_poisson7(8, 8, 8)
        tree = make_tree(A, leaf_size=64)
        conv = mf_solve(mf_factorize(A, tree, CONVENTIONAL), b)
        params = MfParams(n_c=32, eps=1e-12, d=3, n_leaf=64)
        facc = mf_factorize(A, tree, ACCELERATED, params)
        assert facc.stats.structured_fronts > 0
        acc = mf_solve(facc, b)
        assert np.linalg.norm(acc - conv) / np.linalg.norm(conv) <= 1e-8

    def test_accelerated_error_monotone_in_eps(self):
        # d beyond the grid diameter saturates the selections, so the error
        # responds to eps alone
        A, b = gen_poisson7(12, 12, 12)
        tree = make_tree(A, leaf_size=32)
        ref = mf_solve(mf_factorize(A, tree, CONVENTIONAL), b)
        errors = []
        for eps in (1e-4, 1e-8, 1e-12):
            params = MfParams(n_c=64, eps=eps, d=40, n_leaf=32)
            x = mf_solve(mf_factorize(A, tree, ACCELERATED, params), b)
            errors.append(np.linalg.norm(x - ref) / np.linalg.norm(ref))
        assert errors[0] >= errors[1] >= errors[2]
        assert errors[2] <= 1e-9

    def test_no_full_square_allocations_on_structured_path(self):
        A, b = gen_poisson7(8, 8, 8)
        tree = make_tree(A, leaf_size=32)
        F = mf_factorize(A, tree, ACCELERATED, MfParams(n_c=64, eps=1e-2, d=2))
        assert F.stats.structured_fronts > 0
        assert F.stats.full_square_allocs == 0

    def test_front_stats_csv(self, tmp_path):
        A, b = gen_poisson7(4, 4, 4)
        tree = make_tree(A, leaf_size=8)
        F = mf_factorize(A, tree, CONVENTIONAL)
        out = tmp_path / "fronts.csv"
        F.stats.to_csv(out)
        lines = out.read_text().splitlines()
        assert lines[0].startswith("node_id,front_size")
        assert len(lines) == len(F.tree.nodes) + 1


class TestMfSolve:
    def test_identity(self):
        A = SparseMatrix(sp.eye(10).tocsc(), symmetric=True)
        tree = make_tree(A, leaf_size=4)
        F = mf_factorize(A, tree, CONVENTIONAL)
        b = np.linspace(0, 1, 10)
        np.testing.assert_allclose(mf_solve(F, b), b, atol=1e-14)

    def test_zero_rhs(self):
        A = chain_matrix(12)
        tree = make_tree(A, leaf_size=4)
        F = mf_factorize(A, tree, CONVENTIONAL)
        np.testing.assert_array_equal(mf_solve(F, np.zeros(12)), np.zeros(12))

    def test_random_spd_matches_dense_oracle(self):
        rng = np.random.default_rng(6)
        n = 50
        dense = random_spd(n, rng)
        dense[np.abs(dense) < np.percentile(np.abs(dense), 70)] = 0.0
        dense = (dense + dense.T) / 2 + n * np.eye(n)
        A = SparseMatrix(sp.csc_matrix(dense))
        tree = make_tree(A, leaf_size=6)
        F = mf_factorize(A, tree, CONVENTIONAL)
        b = rng.standard_normal(n)
        x = mf_solve(F, b)
        oracle = np.linalg.solve(dense, b)
        assert np.linalg.norm(x - oracle) / np.linalg.norm(oracle) <= 1e-10

    def test_oracle_equivalence_generator_matrices(self):
        rng = np.random.default_rng(7)
        for dims in ((6, 6, 6), (9, 5, 4)):
            A, b = gen_poisson7(*dims)
            tree = make_tree(A, leaf_size=24)
            F = mf_factorize(A, tree, CONVENTIONAL)
            x = mf_solve(F, b)
            oracle = np.linalg.solve(A.toarray(), b)
            assert np.linalg.norm(x - oracle) / np.linalg.norm(oracle) <= 1e-10

    def test_dimension_mismatch(self):
        A = chain_matrix(5)
        tree = make_tree(A, leaf_size=2)
        F = mf_factorize(A, tree, CONVENTIONAL)
        with pytest.raises(ValueError, match="dimension mismatch"):
            mf_solve(F, np.ones(6))

    def test_extend_add_structured_order_independent(self):
        rng = np.random.default_rng(8)
        ids = np.arange(20)
        seed = sp.csr_matrix((20, 20))
        ids1 = np.sort(rng.choice(ids, size=12, replace=False))
        ids2 = np.sort(rng.choice(ids, size=9, replace=False))
        u1 = random_spd(12, rng)
        u2 = random_spd(9, rng)
        c1 = dense_update_rep(u1, ids1)
        c2 = dense_update_rep(u2, ids2)
        params = MfParams(n_c=1, eps=1e-12, d=4, n_leaf=4)
        f12 = extend_add_hodlr(ids, 8, params, seed, [c1, c2], full_graph(20))
        f21 = extend_add_hodlr(ids, 8, params, seed, [c2, c1], full_graph(20))
        a = TestExtendAddHodlr().assemble_front_dense(f12)
        b = TestExtendAddHodlr().assemble_front_dense(f21)
        assert np.abs(a - b).max() <= 1e-13
