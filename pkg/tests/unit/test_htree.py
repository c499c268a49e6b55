"""Tests for the H-tree: naming, initialization, edges, merging and distances."""

import numpy as np
import pytest

from hlu.errors import DimensionError
from hlu.htree import UNREACHABLE, NodeKind, init_htree, merge_red_nodes
from hlu.matrix import BlockSparseMatrix
from hlu.partition import build_nested_partitioning, contiguous_partitioning
from hlu.problems import GridSpec, identity, poisson, ring


def _path(n: int) -> BlockSparseMatrix:
    i = np.arange(n - 1)
    rows = np.concatenate([np.arange(n), i, i + 1])
    cols = np.concatenate([np.arange(n), i + 1, i])
    vals = np.concatenate([np.full(n, 2.0), -np.ones(n - 1), -np.ones(n - 1)])
    return BlockSparseMatrix(n, rows, cols, vals)


def _tree(m: BlockSparseMatrix, depth: int):
    return init_htree(m, contiguous_partitioning(m.n, depth))


def test_node_names_and_clusters():
    """Test node naming and cluster lookup."""
    tree = _tree(ring(16), 3)
    assert tree.root.name == "root"
    assert tree.red[3, 0].name == "r0[3,1]"
    assert tree.red[3, 5].name == "r1[3,3]"
    assert tree.red[2, 1].name == "r1[2,1]"
    assert tree.supers[3, 1].name == "s[3,2]"
    assert tree.blacks[2, 0].name == "b[2,1]"

    assert tree.red[3, 5].cluster == (3, 5)
    assert tree.supers[3, 1].cluster == (2, 1)
    assert tree.blacks[3, 1].cluster == (2, 1)
    assert tree.parent_red(tree.blacks[3, 1]) is tree.red[2, 1]
    assert tree.supers[3, 1].children == (tree.red[3, 2], tree.red[3, 3])
    assert tree.supers[3, 1].kind is NodeKind.SUPER


def test_tree_sizes():
    """Leaf sizes follow the partitioning; other nodes start empty."""
    tree = _tree(ring(16), 3)
    assert len(tree.red) == 1 + 2 + 4 + 8
    assert len(tree.supers) == len(tree.blacks) == 1 + 2 + 4
    assert [leaf.size for leaf in tree.leaves()] == [2] * 8
    assert tree.root.size == 0
    assert all(tree.red[i, c].size == 0 for i in range(3) for c in range(2**i))


def test_initial_edges_represent_matrix():
    """Initial edges reassemble the permuted matrix."""
    m = poisson(GridSpec((6, 5)))
    nested = build_nested_partitioning(m, 3, seed=4)
    tree = init_htree(m, nested)
    dense, slices = tree.materialize(tree.leaves())
    order = np.concatenate([nested.leaves.members(c) for c in range(8)])
    np.testing.assert_array_equal(dense, m.to_dense()[np.ix_(order, order)])
    for edge in tree.edges():
        assert edge.block.shape == (edge.target.size, edge.source.size)
        assert np.any(edge.block != 0)


def test_edge_shape_is_checked():
    """Edge blocks must match the endpoint sizes."""
    tree = _tree(ring(16), 3)
    a, b = tree.red[3, 0], tree.red[3, 1]
    with pytest.raises(DimensionError):
        tree.set_edge(a, b, np.zeros((3, 2)))


def test_edges_are_shared_between_endpoints():
    """Both endpoints see the same edge block."""
    tree = _tree(ring(16), 3)
    a, b = tree.red[3, 0], tree.red[3, 1]
    assert a.outgoing[b] is b.incoming[a]
    tree.set_edge(a, b, np.ones((2, 2)))
    assert a.outgoing[b] is b.incoming[a]
    tree.remove_edge(a, b)
    assert tree.edge(a, b) is None
    assert a not in b.incoming


def test_edge_created_hook():
    """Overwriting an edge does not fire the hook again."""
    tree = _tree(ring(16), 3)
    created = []
    tree.on_edge_created = lambda s, t: created.append((s.name, t.name))
    a, c = tree.red[3, 0], tree.red[3, 4]
    tree.set_edge(a, c, np.zeros((2, 2)))
    tree.set_edge(a, c, np.ones((2, 2)))
    assert created == [("r0[3,1]", "r0[3,3]")]
    np.testing.assert_array_equal(tree.edge(a, c), np.ones((2, 2)))


def test_merge_preserves_the_system():
    """Merging siblings keeps the dense system."""
    m = ring(16)
    tree = _tree(m, 3)
    before, _ = tree.materialize(tree.leaves())
    supers = [merge_red_nodes(tree, j, 3) for j in range(4)]
    after, _ = tree.materialize(supers)
    np.testing.assert_array_equal(after, before)
    assert [s.size for s in supers] == [4] * 4
    assert all(leaf.merged_into is not None and not leaf.active for leaf in tree.leaves())
    assert all(not leaf.outgoing and not leaf.incoming for leaf in tree.leaves())


def test_merge_with_empty_sibling():
    """Test merging when one sibling is empty."""
    tree = _tree(ring(16), 3)
    s = merge_red_nodes(tree, 0, 2)
    assert s.size == 0
    assert not s.outgoing
    assert tree.red[2, 0].merged_into is s


def test_merge_does_not_fire_hook():
    """Merges move edges without reporting new ones."""
    tree = _tree(ring(16), 3)
    tree.on_edge_created = lambda s, t: pytest.fail("merge created an edge")
    merge_red_nodes(tree, 0, 3)


def test_distances_on_a_path():
    """Test cluster distances along a path graph."""
    tree = _tree(_path(16), 3)
    leaves = tree.leaves()
    assert tree.node_distance(leaves[0], leaves[0]) == 0
    assert tree.node_distance(leaves[0], leaves[1]) == 1
    assert tree.node_distance(leaves[0], leaves[7]) == 7
    assert tree.node_distance(leaves[7], leaves[0]) == 7
    assert not tree.is_well_separated(leaves[2], leaves[3])
    assert tree.is_well_separated(leaves[2], leaves[4])
    assert not tree.is_well_separated(leaves[2], leaves[4], separation=2)
    assert tree.is_well_separated(leaves[2], leaves[5], separation=2)


def test_distances_lift_to_the_shallower_level():
    """Nodes at different levels compare at the coarser one."""
    tree = _tree(_path(16), 3)
    # leaf 5 sits in level-2 cluster 2, a neighbor of cluster 1
    assert tree.node_distance(tree.red[3, 5], tree.red[2, 1]) == 1
    assert tree.node_distance(tree.red[3, 5], tree.red[2, 2]) == 0
    assert tree.node_distance(tree.red[3, 0], tree.red[1, 1]) == 1
    assert tree.node_distance(tree.supers[3, 0], tree.red[2, 3]) == 3


def test_unreachable_clusters():
    """Disconnected clusters are unreachable, hence well separated."""
    tree = _tree(identity(8), 2)
    leaves = tree.leaves()
    assert tree.node_distance(leaves[0], leaves[3]) == UNREACHABLE
    assert tree.is_well_separated(leaves[0], leaves[3], separation=5)


def test_active_nodes_and_order():
    """Test active node listing and elimination order."""
    tree = _tree(ring(16), 3)
    assert tree.active_nodes() == tree.leaves()
    s = merge_red_nodes(tree, 0, 3)
    assert tree.assign_order(s) == 0
    assert s.eliminated
    assert s not in tree.active_nodes()
    assert tree.assign_order(tree.blacks[3, 0]) == 1
