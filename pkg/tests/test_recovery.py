import networkx as nx
import numpy as np
import pytest

from topoinfer import errors
from topoinfer.graph import NetworkGraph, reduce_to_minimal
from topoinfer.interference import interference_matrix
from topoinfer.recovery import (
    all_neighbors, are_siblings, identify_general, identify_ring, identify_rings, identify_tree,
    same_cycle, sibling_set, tree_groups,
)
from topoinfer.topologies import (
    three_router_tree, inflate_tree, random_minimal_tree, ring_network, ring_with_pendant_tree, star_network,
)

from conftest import rings, trees


def same_network(a, b):
    """Isomorphic with overlay labels fixed."""
    return nx.is_isomorphic(a.to_networkx(), b.to_networkx(),
                            node_match=lambda x, y: x["kind"] == y["kind"] and x["label"] == y["label"])


def true_siblings(g, i, j):
    return g.parent(i) == g.parent(j)


def test_sibling_test_matches_shared_parent_on_trees():
    for g in trees(15, lo=3, hi=12, seed=31):
        f = interference_matrix(g)
        for i in sorted(g.overlays):
            for j in sorted(g.overlays):
                if i < j:
                    assert are_siblings(f, i, j) == true_siblings(g, i, j)


def test_sibling_set_includes_self():
    f = interference_matrix(three_router_tree())
    assert sibling_set(f, 5) == {5, 6, 7}
    assert sibling_set(f, 1) == {1, 2}


def test_three_router_tree_recovery_and_groups():
    g = three_router_tree()
    rg = identify_tree(interference_matrix(g))
    assert same_network(rg.graph, g)
    groups = [sorted(s) for s in rg.diagnostics["groups"]]
    assert groups == [[1, 2], [1, 2, 3, 4], [1, 2, 3, 4, 5, 6, 7]]


@pytest.mark.parametrize("g", [star_network(2), star_network(3), star_network(6)])
def test_star_recovery(g):
    assert same_network(identify_tree(interference_matrix(g)).graph, g)


def test_random_tree_recovery():
    for g in trees(40, seed=32):
        rg = identify_tree(interference_matrix(g))
        assert same_network(rg.graph, g)
        assert rg.graph.num_edges == g.num_edges


def test_non_minimal_tree_reduces():
    rng = np.random.default_rng(33)
    for g in trees(20, seed=34):
        big = inflate_tree(g, rng)
        rg = identify_tree(interference_matrix(big))
        assert same_network(rg.graph, reduce_to_minimal(big))


def test_tree_on_ring_input_fails():
    g, _ = rings(1, seed=35)[0]
    with pytest.raises(errors.NotATree):
        identify_tree(interference_matrix(g))


def test_ring_recovery():
    for g, order in rings(30, seed=36):
        rg = identify_ring(interference_matrix(g))
        assert same_cycle(rg.diagnostics["order"], order)
        assert same_network(rg.graph, g)


def test_ring_needs_five_overlays():
    with pytest.raises(errors.TooFewOverlays):
        identify_ring(interference_matrix(ring_network([1, 2, 3, 4])))


def test_ring_on_tree_input_fails():
    with pytest.raises(errors.NotARing):
        identify_ring(interference_matrix(random_minimal_tree(8, np.random.default_rng(1))))


def test_same_cycle():
    assert same_cycle([1, 2, 3, 4], [3, 4, 1, 2])
    assert same_cycle([1, 2, 3, 4], [2, 1, 4, 3])
    assert not same_cycle([1, 2, 3, 4], [1, 3, 2, 4])
    assert not same_cycle([1, 2, 3], [1, 2, 3, 4])


def test_all_neighbors_on_ring():
    order = [1, 4, 2, 6, 3, 5, 7]
    f = interference_matrix(ring_network(order))
    for n, i in enumerate(order):
        want = {order[n - 1], order[(n + 1) % len(order)]}
        assert set(all_neighbors(f, None, i)) == want


def test_identify_rings_on_single_ring():
    g = ring_network([1, 3, 5, 7, 2, 4, 6])
    rg = identify_rings(interference_matrix(g))
    assert same_network(rg.graph, g)


def test_tree_groups_find_pendant_tree():
    g = ring_with_pendant_tree(7, tree_leaves=3)
    groups, anchors = tree_groups(interference_matrix(g))
    leaves = {o for o in g.overlays if g.parent(o) == max(g.underlays)}
    assert any(leaves <= set(s) for s in groups)


@pytest.mark.parametrize("k", [7, 9])
def test_general_on_ring_with_pendant_tree(k):
    g = ring_with_pendant_tree(k, tree_leaves=2)
    rg = identify_general(interference_matrix(g))
    assert rg.diagnostics["f_hamming"] == 0
    assert same_network(rg.graph, g)


def test_general_reproduces_dedicated_algorithms():
    for g in trees(10, seed=37):
        f = interference_matrix(g)
        assert same_network(identify_general(f).graph, identify_tree(f).graph)
    for g, _ in rings(10, seed=38):
        f = interference_matrix(g)
        assert same_network(identify_general(f).graph, identify_ring(f).graph)


SIX_RING = """overlay 6 underlay 6
1 7
2 8
3 9
4 10
5 11
6 12
7 10
7 11
8 10
8 12
9 11
9 12
"""


def test_general_drops_false_tree_group_on_six_ring():
    g = NetworkGraph.from_text(SIX_RING)
    f = interference_matrix(g)
    rg = identify_general(f)
    # hosts on three consecutive routers look like siblings here
    assert rg.diagnostics["groups"] == [[2, 4, 6]]
    assert rg.diagnostics["tree_free"] and rg.diagnostics["f_hamming"] == 0
    assert same_network(rg.graph, identify_ring(f).graph)
    assert same_network(rg.graph, g)

def test_recovered_routes_realize_input():
    g = three_router_tree()
    f = interference_matrix(g)
    rg = identify_tree(f)
    assert interference_matrix(rg.graph).hamming(f) == 0
