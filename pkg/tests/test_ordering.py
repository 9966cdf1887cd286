import numpy as np
import pytest
import scipy.sparse as sp

from mfhodlr.ordering import build_elimination_tree, nested_dissection
from mfhodlr.sparse import AdjGraph, SparseMatrix, adjacency_graph


def path_graph(n):
    pattern = sp.diags([1.0, 1.0], [-1, 1], shape=(n, n))
    return AdjGraph.from_pattern(pattern.tocsr())


def grid_graph_3x3():
    edges = []
    for r in range(3):
        for c in range(3):
            v = 3 * r + c
            if c < 2:
                edges.append((v, v + 1))
            if r < 2:
                edges.append((v, v + 3))
    rows = [e[0] for e in edges] + [e[1] for e in edges]
    cols = [e[1] for e in edges] + [e[0] for e in edges]
    pattern = sp.coo_matrix((np.ones(len(rows)), (rows, cols)), shape=(9, 9))
    return AdjGraph.from_pattern(pattern.tocsr())


def random_symmetric_sparse(n, rng, density=0.08):
    dense = rng.standard_normal((n, n))
    mask = rng.random((n, n)) < density
    dense = dense * mask
    dense = dense + dense.T
    dense += np.diag(np.abs(dense).sum(axis=1) + 1.0)
    return SparseMatrix(sp.csc_matrix(dense), symmetric=False)


def tree_vertex_sets(tree):
    return [set(node.vertices.tolist()) for node in tree.nodes]


class TestNestedDissection:
    def test_path7_leaf3(self):
        tree = nested_dissection(path_graph(7), leaf_size=3)
        root = tree.nodes[tree.root]
        assert set(root.vertices.tolist()) == {3}
        left, right = root.children
        child_sets = {
            frozenset(tree.nodes[left].vertices.tolist()),
            frozenset(tree.nodes[right].vertices.tolist()),
        }
        assert child_sets == {frozenset({0, 1, 2}), frozenset({4, 5, 6})}

    def test_complete_graph_single_leaf(self):
        pattern = sp.csr_matrix(np.ones((4, 4)))
        g = AdjGraph.from_pattern(pattern)
        tree = nested_dissection(g, leaf_size=4)
        assert len(tree.nodes) == 1
        assert tree.nodes[tree.root].is_leaf
        assert set(tree.nodes[tree.root].vertices.tolist()) == {0, 1, 2, 3}

    def test_grid3x3_leaf3(self):
        tree = nested_dissection(grid_graph_3x3(), leaf_size=3)
        root = tree.nodes[tree.root]
        sep = set(root.vertices.tolist())
        assert len(sep) == 3
        kids = [set(tree.nodes[c].vertices.tolist()) for c in root.children]
        assert sorted(len(k) for k in kids) == [3, 3]
        # separator property: no edge crosses between the two children
        g = grid_graph_3x3()
        for v in kids[0]:
            assert not (set(g.neighbors(v).tolist()) & kids[1])

    def test_partition_property(self):
        rng = np.random.default_rng(5)
        for n in (17, 40, 73):
            A = random_symmetric_sparse(n, rng)
            g = adjacency_graph(A)
            tree = nested_dissection(g, leaf_size=5)
            all_vertices = np.concatenate(
                [node.vertices for node in tree.nodes if len(node.vertices)]
            )
            assert sorted(all_vertices.tolist()) == list(range(n))
            assert sorted(tree.permutation.tolist()) == list(range(n))

    def test_separator_property_random(self):
        rng = np.random.default_rng(9)
        A = random_symmetric_sparse(60, rng, density=0.1)
        g = adjacency_graph(A)
        tree = nested_dissection(g, leaf_size=6)

        def collect(node_id):
            node = tree.nodes[node_id]
            s = set(node.vertices.tolist())
            if node.children is not None:
                for c in node.children:
                    s |= collect(c)
            return s

        for node in tree.nodes:
            if node.children is None:
                continue
            left = collect(node.children[0])
            right = collect(node.children[1])
            for v in left:
                assert not (set(g.neighbors(v).tolist()) & right), "crossing edge"

    def test_separator_numbered_after_subtrees(self):
        g = path_graph(31)
        tree = nested_dissection(g, leaf_size=4)

        def check(node_id):
            node = tree.nodes[node_id]
            if node.children is None:
                return
            own = tree.permutation[node.vertices] if len(node.vertices) else []
            for c in node.children:
                sub = tree.nodes[c]
                below = collect_perm(c)
                if len(node.vertices) and below.size:
                    assert below.max() < min(own)
                check(c)

        def collect_perm(node_id):
            node = tree.nodes[node_id]
            parts = [tree.permutation[node.vertices]] if len(node.vertices) else []
            if node.children is not None:
                parts.extend(collect_perm(c) for c in node.children)
            parts = [p for p in parts if len(p)]
            return np.concatenate(parts) if parts else np.zeros(0, dtype=np.int64)

        check(tree.root)

    def test_empty_graph(self):
        g = AdjGraph(0, np.zeros(1, dtype=np.int64), np.zeros(0, dtype=np.int64))
        tree = nested_dissection(g, leaf_size=4)
        assert tree.root is None and tree.nodes == []

    def test_disconnected_components(self):
        # two disjoint paths of length 6
        pattern = sp.block_diag(
            [sp.diags([1.0, 1.0], [-1, 1], shape=(6, 6)) for _ in range(2)]
        )
        g = AdjGraph.from_pattern(pattern.tocsr())
        tree = nested_dissection(g, leaf_size=4)
        root = tree.nodes[tree.root]
        assert len(root.vertices) == 0 and root.children is not None

    def test_leaf_size_validation(self):
        with pytest.raises(ValueError):
            nested_dissection(path_graph(3), leaf_size=0)


def symbolic_lu_pattern(dense_pattern):
    """Fill pattern of an in-place LU without pivoting; exact cancellation
    counts as nonzero because only the pattern is propagated."""
    n = dense_pattern.shape[0]
    pat = dense_pattern.copy().astype(bool)
    for k in range(n):
        rows = np.where(pat[k + 1 :, k])[0] + k + 1
        cols = np.where(pat[k, k + 1 :])[0] + k + 1
        if rows.size and cols.size:
            pat[np.ix_(rows, cols)] = True
    return pat


class TestEliminationTree:
    def test_chain3_manual_tree(self):
        A = SparseMatrix(
            sp.diags([-1.0, 2.0, -1.0], [-1, 0, 1], shape=(3, 3)).tocsc()
        )
        g = adjacency_graph(A)
        tree = nested_dissection(g, leaf_size=1)
        et = build_elimination_tree(tree, A)
        root = et.nodes[et.root]
        # separator {1} is numbered last
        assert tree.permutation[1] == 2
        assert root.pivot_ids.tolist() == [2]
        assert root.frontal_ids.tolist() == []
        leaves = [et.nodes[c] for c in root.children]
        for leaf in leaves:
            assert leaf.coupled_ids.tolist() == [2]
            assert leaf.frontal_ids.tolist() == [2]

    def test_diagonal_matrix_no_couplings(self):
        A = SparseMatrix(sp.diags(np.arange(1.0, 9.0)).tocsc())
        tree = nested_dissection(adjacency_graph(A), leaf_size=2)
        et = build_elimination_tree(tree, A)
        for node in et.nodes:
            assert node.coupled_ids.size == 0
            assert node.frontal_ids.size == 0

    def test_grid3x3_frontal_sets(self):
        rows, cols, vals = [], [], []
        for r in range(3):
            for c in range(3):
                v = 3 * r + c
                rows.append(v), cols.append(v), vals.append(4.0)
                if c < 2:
                    rows += [v, v + 1]
                    cols += [v + 1, v]
                    vals += [-1.0, -1.0]
                if r < 2:
                    rows += [v, v + 3]
                    cols += [v + 3, v]
                    vals += [-1.0, -1.0]
        A = SparseMatrix.from_triplets(9, 9, rows, cols, vals, symmetric=True)
        tree = nested_dissection(adjacency_graph(A), leaf_size=3)
        et = build_elimination_tree(tree, A)
        root = et.nodes[et.root]
        assert root.frontal_ids.size == 0
        sep_perm = set(tree.permutation[tree.nodes[tree.root].vertices].tolist())
        for c in root.children:
            assert set(et.nodes[c].frontal_ids.tolist()) == sep_perm

    def test_post_order_children_first(self):
        rng = np.random.default_rng(2)
        A = random_symmetric_sparse(50, rng)
        tree = nested_dissection(adjacency_graph(A), leaf_size=5)
        et = build_elimination_tree(tree, A)
        seen = set()
        for node_id in et.post_order:
            for c in et.nodes[node_id].children:
                assert c in seen
            seen.add(node_id)

    def test_pivot_sets_partition(self):
        rng = np.random.default_rng(4)
        A = random_symmetric_sparse(64, rng)
        tree = nested_dissection(adjacency_graph(A), leaf_size=7)
        et = build_elimination_tree(tree, A)
        concat = np.concatenate([et.nodes[p].pivot_ids for p in et.post_order])
        assert sorted(concat.tolist()) == list(range(64))

    def test_invariants_random(self):
        rng = np.random.default_rng(14)
        A = random_symmetric_sparse(80, rng)
        tree = nested_dissection(adjacency_graph(A), leaf_size=8)
        et = build_elimination_tree(tree, A)
        for node in et.nodes:
            piv = set(node.pivot_ids.tolist())
            fro = set(node.frontal_ids.tolist())
            assert not (piv & fro)
            assert set(node.coupled_ids.tolist()) <= fro
            if piv and fro:
                assert min(fro) > max(piv)

    @pytest.mark.parametrize("n", [40, 120, 200])
    def test_fill_containment(self, n):
        rng = np.random.default_rng(n)
        A = random_symmetric_sparse(n, rng, density=0.04)
        tree = nested_dissection(adjacency_graph(A), leaf_size=8)
        et = build_elimination_tree(tree, A)
        perm = tree.permutation
        dense = A.toarray()
        inv = np.argsort(perm)
        permuted = dense[np.ix_(inv, inv)]
        fill = symbolic_lu_pattern(permuted != 0)

        owner = np.empty(n, dtype=np.int64)
        for node in et.nodes:
            owner[node.pivot_ids] = node.id
        for i, j in zip(*np.where(fill)):
            k = min(i, j)  # pivot side of the entry
            node = et.nodes[owner[k]]
            allowed = set(node.pivot_ids.tolist()) | set(node.frontal_ids.tolist())
            assert max(i, j) in allowed, f"fill entry ({i},{j}) escapes its front"

    def test_outline_dump(self):
        A = SparseMatrix(
            sp.diags([-1.0, 2.0, -1.0], [-1, 0, 1], shape=(9, 9)).tocsc()
        )
        tree = nested_dissection(adjacency_graph(A), leaf_size=3)
        et = build_elimination_tree(tree, A)
        text = et.outline()
        assert "node" in text and "|pivots|" in text
