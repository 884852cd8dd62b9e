"""Standard network constructions: rings, stars, grids and random trees.

Every builder returns a validated :class:`NetworkGraph` with overlays
numbered ``1..k``.
"""

from __future__ import annotations

from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from .graph import NetworkGraph, build_network


def star_network(overlays: int) -> NetworkGraph:
    """One router with ``overlays`` hosts attached."""
    hub = overlays + 1
    return build_network(overlays, 1, [(o, hub) for o in range(1, overlays + 1)])


def ring_network(order: Sequence[int]) -> NetworkGraph:
    """Minimal ring: one router per overlay, routers joined in ``order``.

    ``order`` is the cyclic sequence of overlay ids around the ring; overlay
    ``o`` hangs off router ``k + o``.
    """
    k = len(order)
    if sorted(order) != list(range(1, k + 1)):
        raise ValueError("order must be a permutation of 1..k")
    edges = [(o, k + o) for o in range(1, k + 1)]
    for a, b in zip(order, list(order[1:]) + [order[0]]):
        edges.append((k + a, k + b))
    return build_network(k, k, edges)


def ladder_grid() -> NetworkGraph:
    """The 3x2 router grid with one host per router.

    Routers are laid out as::

        9  - 10
        |    |
        7  - 8
        |    |
        11 - 12

    with hosts 1..6 attached to routers 10, 8, 12, 9, 7, 11. Under
    lowest-id routing the top and bottom rungs each carry at most one tunnel
    per direction.
    """
    parent = {1: 10, 2: 8, 3: 12, 4: 9, 5: 7, 6: 11}
    grid = [(9, 10), (7, 8), (11, 12), (9, 7), (7, 11), (10, 8), (8, 12)]
    return build_network(6, 6, list(parent.items()) + grid)


def three_router_tree() -> NetworkGraph:
    """Three routers in a line carrying hosts {1,2}, {3,4} and {5,6,7}."""
    a, b, c = 8, 9, 10
    edges = [(1, a), (2, a), (3, b), (4, b), (5, c), (6, c), (7, c), (a, b), (b, c)]
    return build_network(7, 3, edges)


def random_minimal_tree(leaves: int, rng: np.random.Generator) -> NetworkGraph:
    """Random tree whose leaves are the overlays and whose routers have degree >= 3.

    Grows from a three-leaf star by either hanging a new leaf off a random
    router or subdividing a random edge with a new router carrying the leaf.
    Overlay labels are shuffled so ids carry no structural information.
    """
    if leaves < 2:
        raise ValueError("need at least two leaves")
    if leaves == 2:
        return build_network(2, 1, [(1, 3), (2, 3)])
    # internal ids are negative while growing; leaves are positive
    edges: List[Tuple[int, int]] = [(-1, 1), (-1, 2), (-1, 3)]
    internal = [-1]
    for leaf in range(4, leaves + 1):
        if rng.random() < 0.5:
            edges.append((internal[rng.integers(len(internal))], leaf))
        else:
            i = int(rng.integers(len(edges)))
            u, v = edges.pop(i)
            w = -(len(internal) + 1)
            internal.append(w)
            edges.extend([(u, w), (w, v), (w, leaf)])
    return _label_tree(leaves, internal, edges, rng)


def _label_tree(leaves, internal, edges, rng) -> NetworkGraph:
    perm = rng.permutation(leaves) + 1
    mapping: Dict[int, int] = {leaf: int(perm[leaf - 1]) for leaf in range(1, leaves + 1)}
    for n, w in enumerate(internal):
        mapping[w] = leaves + 1 + n
    return build_network(leaves, len(internal), [(mapping[u], mapping[v]) for u, v in edges])


def inflate_tree(g: NetworkGraph, rng: np.random.Generator, splices: int = 3,
                 dangling: int = 1) -> NetworkGraph:
    """Make a tree non-minimal without changing its interference matrix.

    Inserts ``splices`` degree-2 routers into random edges and hangs
    ``dangling`` extra routers off random routers.
    """
    edges = sorted(g.edges)
    nxt = max(g.nodes) + 1
    underlays = set(g.underlays)
    for _ in range(splices):
        i = int(rng.integers(len(edges)))
        u, v = edges.pop(i)
        edges.extend([(u, nxt), (nxt, v)])
        underlays.add(nxt)
        nxt += 1
    routers = sorted(g.underlays)
    for _ in range(dangling):
        if not routers:
            break
        edges.append((routers[int(rng.integers(len(routers)))], nxt))
        underlays.add(nxt)
        nxt += 1
    return NetworkGraph.from_edges(g.overlays, underlays, edges).validate()


def random_ring(k: int, rng: np.random.Generator) -> Tuple[NetworkGraph, List[int]]:
    """Minimal ring with a random cyclic overlay order (returned alongside)."""
    order = [int(x) for x in rng.permutation(k) + 1]
    return ring_network(order), order


def ring_with_pendant_tree(k: int, tree_leaves: int = 2, host: Optional[int] = None) -> NetworkGraph:
    """Ring of ``k`` routers, one host each, except router ``host`` which
    instead carries a small star of ``tree_leaves`` hosts behind a branch router.
    """
    host = 1 if host is None else host
    ring_hosts = [o for o in range(1, k + 1) if o != host]
    n_over = len(ring_hosts) + tree_leaves
    routers = list(range(n_over + 1, n_over + k + 1))
    edges = [(routers[i], routers[(i + 1) % k]) for i in range(k)]
    ov = 1
    for i in range(k):
        if i + 1 == host:
            continue
        edges.append((ov, routers[i]))
        ov += 1
    branch = n_over + k + 1
    edges.append((routers[host - 1], branch))
    for _ in range(tree_leaves):
        edges.append((ov, branch))
        ov += 1
    return build_network(n_over, k + 1, edges)
