"""Nested-dissection ordering and elimination tree construction.

The bisection heuristic is BFS level-set partitioning from a pseudo-peripheral
vertex: the level sets are split where the cumulative vertex count crosses
half the region, the median level supplies the separator (only its vertices
adjacent to the smaller side are kept, the rest join the larger side), and
recursion stops at ``leaf_size`` vertices. Deterministic throughout; ties fall
to the lower vertex index.
"""

from collections import deque
from dataclasses import dataclass, field

import numpy as np

DEFAULT_LEAF_SIZE = 64


@dataclass
class SepNode:
    """Separator-tree node: a vertex set plus an optional child pair."""

    vertices: np.ndarray
    children: tuple | None = None
    parent: int | None = None

    @property
    def is_leaf(self):
        return self.children is None


class SeparatorTree:
    def __init__(self, nodes, root, permutation):
        self.nodes = nodes
        self.root = root
        #: old vertex id -> position in the elimination order
        self.permutation = permutation
        self.n = len(permutation)

    def post_order(self):
        """Node ids, children always before their parent."""
        order = []
        if self.root is None:
            return order
        stack = [(self.root, False)]
        while stack:
            node_id, expanded = stack.pop()
            if expanded:
                order.append(node_id)
                continue
            stack.append((node_id, True))
            node = self.nodes[node_id]
            if node.children is not None:
                stack.append((node.children[1], False))
                stack.append((node.children[0], False))
        return order


def _bfs_levels(g, region_mask, start):
    """Level sets of the induced subgraph component containing ``start``."""
    levels = [[start]]
    dist = {start: 0}
    frontier = [start]
    while frontier:
        nxt = []
        for v in frontier:
            for w in g.neighbors(v):
                w = int(w)
                if region_mask[w] and w not in dist:
                    dist[w] = len(levels)
                    nxt.append(w)
        if nxt:
            nxt.sort()
            levels.append(nxt)
        frontier = nxt
    return levels


def _pseudo_peripheral(g, region_mask, region):
    """George–Liu style sweep; keeps the current root on eccentricity ties."""
    root = int(region.min())
    levels = _bfs_levels(g, region_mask, root)
    ecc = len(levels) - 1
    while True:
        last = levels[-1]
        candidate = min(last, key=lambda v: (g.degree(v), v))
        if candidate == root:
            return root, levels
        cand_levels = _bfs_levels(g, region_mask, candidate)
        if len(cand_levels) - 1 > ecc:
            root, levels, ecc = candidate, cand_levels, len(cand_levels) - 1
        else:
            return root, levels


def _components(g, region_mask, region):
    comps = []
    seen = set()
    for v in region:
        v = int(v)
        if v in seen:
            continue
        comp = []
        queue = deque([v])
        seen.add(v)
        while queue:
            u = queue.popleft()
            comp.append(u)
            for w in g.neighbors(u):
                w = int(w)
                if region_mask[w] and w not in seen:
                    seen.add(w)
                    queue.append(w)
        comps.append(np.array(sorted(comp), dtype=np.int64))
    return comps


def _split_connected(g, region_mask, region):
    """Split one connected region into (side_a, side_b, separator)."""
    _, levels = _pseudo_peripheral(g, region_mask, region)
    total = sum(len(level) for level in levels)

    # median level: where the cumulative count reaches half the region
    cum = 0
    for median, level in enumerate(levels):
        cum += len(level)
        if cum >= (total + 1) // 2:
            break
    if median == len(levels) - 1 and median > 0:
        median -= 1

    side_a = [v for level in levels[:median] for v in level]
    side_b = [v for level in levels[median + 1 :] for v in level]
    mid = levels[median]

    # separator: median-level vertices facing the smaller side; the rest of
    # the median level can safely join the larger side
    smaller_is_a = len(side_a) <= len(side_b)
    smaller_set = set(side_a if smaller_is_a else side_b)
    sep = [v for v in mid if any(int(w) in smaller_set for w in g.neighbors(v))]
    if not sep:
        sep = list(mid)
    else:
        sep_set = set(sep)
        leftover = [v for v in mid if v not in sep_set]
        if smaller_is_a:
            side_b += leftover
        else:
            side_a += leftover
    return (
        np.array(sorted(side_a), dtype=np.int64),
        np.array(sorted(side_b), dtype=np.int64),
        np.array(sorted(sep), dtype=np.int64),
    )


def nested_dissection(g, leaf_size=DEFAULT_LEAF_SIZE):
    """Recursive vertex bisection of ``g`` into a :class:`SeparatorTree`.

    Internal nodes hold separators whose removal disconnects their two child
    regions; regions of at most ``leaf_size`` vertices become leaves. Each
    connected component of a larger region is split off under an
    empty-separator node. The permutation numbers every separator after all
    vertices of both its subtrees (post-order).
    """
    if leaf_size < 1:
        raise ValueError("leaf_size must be at least 1")
    n = g.n_vertices
    nodes = []
    perm = np.empty(n, dtype=np.int64)
    counter = [0]
    region_mask = np.zeros(n, dtype=bool)

    def number(vertices):
        for v in vertices:
            perm[v] = counter[0]
            counter[0] += 1

    def add_node(vertices, children=None):
        nodes.append(SepNode(np.asarray(vertices, dtype=np.int64), children))
        node_id = len(nodes) - 1
        if children is not None:
            nodes[children[0]].parent = node_id
            nodes[children[1]].parent = node_id
        return node_id

    def build(region):
        if len(region) <= leaf_size:
            number(region)
            return add_node(region)
        region_mask[region] = True
        comps = _components(g, region_mask, region)
        if len(comps) > 1:
            region_mask[region] = False
            left = build(comps[0])
            right = build(np.sort(np.concatenate(comps[1:])))
            return add_node(np.zeros(0, dtype=np.int64), (left, right))
        side_a, side_b, sep = _split_connected(g, region_mask, region)
        region_mask[region] = False
        left = build(side_a)
        right = build(side_b)
        number(sep)
        return add_node(sep, (left, right))

    if n == 0:
        return SeparatorTree([], None, perm)
    root = build(np.arange(n, dtype=np.int64))
    return SeparatorTree(nodes, root, perm)


@dataclass
class EtNode:
    """Elimination-tree node with pivot, coupled, and frontal index sets.

    All index sets live in the permuted numbering; ``pivot_ids`` is a
    contiguous run, every frontal index is strictly above it.
    """

    id: int
    pivot_ids: np.ndarray
    coupled_ids: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=np.int64))
    frontal_ids: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=np.int64))
    children: list = field(default_factory=list)
    parent: int | None = None

    @property
    def n_pivot(self):
        return len(self.pivot_ids)

    @property
    def front_size(self):
        return len(self.pivot_ids) + len(self.frontal_ids)

    def front_ids(self):
        return np.concatenate([self.pivot_ids, self.frontal_ids])


class EliminationTree:
    def __init__(self, nodes, post_order, permutation, root):
        self.nodes = nodes
        self.post_order = post_order
        self.permutation = permutation
        self.root = root
        self.n = len(permutation)

    def outline(self):
        """Indented text dump: node id, pivot count, frontal count."""
        lines = []

        def walk(node_id, depth):
            node = self.nodes[node_id]
            lines.append(
                "  " * depth
                + f"node {node_id}: |pivots|={node.n_pivot} |frontal|={len(node.frontal_ids)}"
            )
            for c in node.children:
                walk(c, depth + 1)

        if self.root is not None:
            walk(self.root, 0)
        return "\n".join(lines)


def build_elimination_tree(tree, A):
    """Derive per-node index sets from a separator tree and matrix pattern.

    For each node the coupled set collects all indices above the pivot block
    that share a (symmetrized) nonzero with it; the frontal set adds the
    children's update indices.
    """
    if tree.n != A.n_rows or A.n_rows != A.n_cols:
        raise ValueError("separator tree size does not match the matrix")
    perm = tree.permutation
    csr = A.to_csr()
    pat = csr + csr.T  # symmetrized coupling pattern
    pat = pat.tocsr()

    nodes = {}
    post = tree.post_order()
    for node_id in post:
        snode = tree.nodes[node_id]
        pivots = np.sort(perm[snode.vertices]) if len(snode.vertices) else np.zeros(
            0, dtype=np.int64
        )
        et = EtNode(id=node_id, pivot_ids=pivots.astype(np.int64))
        et.parent = snode.parent
        if snode.children is not None:
            et.children = list(snode.children)
        if len(pivots):
            max_piv = pivots[-1]
            coupled = set()
            for v in snode.vertices:
                row = pat.indices[pat.indptr[v] : pat.indptr[v + 1]]
                coupled.update(int(perm[j]) for j in row)
            et.coupled_ids = np.array(
                sorted(j for j in coupled if j > max_piv), dtype=np.int64
            )
        frontal = set(et.coupled_ids.tolist())
        for c in et.children:
            frontal.update(nodes[c].frontal_ids.tolist())
        frontal.difference_update(et.pivot_ids.tolist())
        et.frontal_ids = np.array(sorted(frontal), dtype=np.int64)
        if len(pivots) and len(et.frontal_ids) and et.frontal_ids[0] <= pivots[-1]:
            raise RuntimeError(
                f"node {node_id}: frontal index below the pivot block"
            )
        nodes[node_id] = et

    node_list = [None] * len(tree.nodes)
    for node_id, et in nodes.items():
        node_list[node_id] = et
    return EliminationTree(node_list, post, perm, tree.root)
