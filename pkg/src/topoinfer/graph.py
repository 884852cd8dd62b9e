"""Network graphs, tunnels and shortest-path routing.

A network is an undirected graph whose nodes are either *overlay* nodes
(controllable hosts, each hanging off exactly one router) or *underlay* nodes
(routers). Overlays are numbered ``1..k`` and underlays follow, so tunnel
labels and ILP indices line up.

Every undirected edge ``{i, j}`` stands for the two directed links ``(i, j)``
and ``(j, i)``; each tunnel is the shortest path between an ordered pair of
overlays, with ties broken by the lexicographically smallest node sequence.
"""

from __future__ import annotations

import enum
from collections import deque
from dataclasses import dataclass, field
from functools import cached_property
from typing import Dict, Iterable, Iterator, List, Mapping, Optional, Sequence, Tuple

from .errors import (
    Disconnected,
    DuplicateEdge,
    OverlayDegreeViolation,
    SelfLoop,
    UnknownNode,
    Unreachable,
)

Edge = Tuple[int, int]
Link = Tuple[int, int]
Pair = Tuple[int, int]


class NodeKind(enum.Enum):
    OVERLAY = "overlay"
    UNDERLAY = "underlay"


def _canon(i: int, j: int) -> Edge:
    return (i, j) if i < j else (j, i)


def path_links(path: Sequence[int]) -> Tuple[Link, ...]:
    """Directed links traversed by a node path, in order."""
    return tuple(zip(path[:-1], path[1:]))


@dataclass(frozen=True)
class NetworkGraph:
    """Immutable overlay/underlay network.

    Construct with :meth:`from_edges` (which canonicalizes and rejects
    duplicates) or :func:`build_network` (which also validates the network
    model). The raw constructor trusts its input.
    """

    overlays: frozenset
    underlays: frozenset
    edges: frozenset

    @classmethod
    def from_edges(cls, overlays: Iterable[int], underlays: Iterable[int],
                   edges: Iterable[Edge]) -> "NetworkGraph":
        overlays = frozenset(overlays)
        underlays = frozenset(underlays)
        if overlays & underlays:
            raise ValueError(f"nodes are both overlay and underlay: {sorted(overlays & underlays)}")
        nodes = overlays | underlays
        seen = set()
        for i, j in edges:
            if i == j:
                raise SelfLoop(f"self-loop on node {i}")
            if i not in nodes or j not in nodes:
                raise UnknownNode(f"edge ({i}, {j}) references an unknown node")
            e = _canon(i, j)
            if e in seen:
                raise DuplicateEdge(f"duplicate edge {e}")
            seen.add(e)
        return cls(overlays, underlays, frozenset(seen))

    # -- basic structure -------------------------------------------------

    @cached_property
    def nodes(self) -> Tuple[int, ...]:
        return tuple(sorted(self.overlays | self.underlays))

    @cached_property
    def adjacency(self) -> Dict[int, Tuple[int, ...]]:
        adj: Dict[int, List[int]] = {n: [] for n in self.nodes}
        for i, j in self.edges:
            adj[i].append(j)
            adj[j].append(i)
        return {n: tuple(sorted(v)) for n, v in adj.items()}

    @property
    def num_edges(self) -> int:
        return len(self.edges)

    def kind(self, node: int) -> NodeKind:
        if node in self.overlays:
            return NodeKind.OVERLAY
        if node in self.underlays:
            return NodeKind.UNDERLAY
        raise UnknownNode(f"node {node} is not in the graph")

    def is_overlay(self, node: int) -> bool:
        return node in self.overlays

    def neighbors(self, node: int) -> Tuple[int, ...]:
        return self.adjacency[node]

    def degree(self, node: int) -> int:
        return len(self.adjacency[node])

    def parent(self, overlay: int) -> int:
        """The router an overlay node hangs off."""
        nbrs = self.adjacency[overlay]
        if len(nbrs) != 1:
            raise OverlayDegreeViolation(f"overlay {overlay} has {len(nbrs)} edges")
        return nbrs[0]

    def has_edge(self, i: int, j: int) -> bool:
        return _canon(i, j) in self.edges

    def directed_links(self) -> List[Link]:
        out = []
        for i, j in sorted(self.edges):
            out.append((i, j))
            out.append((j, i))
        return out

    def components(self) -> List[frozenset]:
        seen = set()
        comps = []
        for n in self.nodes:
            if n in seen:
                continue
            comp = set(bfs_distances(self.adjacency, n))
            seen |= comp
            comps.append(frozenset(comp))
        return comps

    def is_connected(self) -> bool:
        return len(self.components()) <= 1

    # -- validation --------------------------------------------------------

    def validate(self) -> "NetworkGraph":
        """Check the network-model invariants; return ``self`` on success."""
        for o in sorted(self.overlays):
            nbrs = self.adjacency[o]
            if len(nbrs) != 1:
                raise OverlayDegreeViolation(f"overlay {o} has {len(nbrs)} edges, expected 1")
            if nbrs[0] in self.overlays:
                raise OverlayDegreeViolation(f"overlay {o} is attached to overlay {nbrs[0]}")
        if not self.is_connected():
            raise Disconnected(f"graph has {len(self.components())} components")
        return self

    # -- derived graphs ----------------------------------------------------

    def with_edges(self, add: Iterable[Edge] = (), remove: Iterable[Edge] = ()) -> "NetworkGraph":
        edges = set(self.edges)
        for e in remove:
            edges.discard(_canon(*e))
        for e in add:
            edges.add(_canon(*e))
        return NetworkGraph(self.overlays, self.underlays, frozenset(edges))

    def relabeled(self) -> Tuple["NetworkGraph", Dict[int, int]]:
        """Renumber nodes to ``1..k`` (overlays) then ``k+1..`` (underlays).

        Relative order inside each kind is preserved.
        """
        mapping = {}
        for new, old in enumerate(sorted(self.overlays), start=1):
            mapping[old] = new
        for new, old in enumerate(sorted(self.underlays), start=len(self.overlays) + 1):
            mapping[old] = new
        g = NetworkGraph(
            frozenset(mapping[o] for o in self.overlays),
            frozenset(mapping[u] for u in self.underlays),
            frozenset(_canon(mapping[i], mapping[j]) for i, j in self.edges),
        )
        return g, mapping

    def to_networkx(self):
        import networkx as nx

        G = nx.Graph()
        for n in self.nodes:
            kind = "O" if n in self.overlays else "U"
            G.add_node(n, kind=kind, label=n if kind == "O" else None)
        G.add_edges_from(self.edges)
        return G

    # -- text formats ------------------------------------------------------

    def to_text(self) -> str:
        k = len(self.overlays)
        if self.overlays != frozenset(range(1, k + 1)):
            raise ValueError("overlay ids must be 1..k to write the graph format")
        g, _ = self.relabeled()
        lines = [f"overlay {k} underlay {len(g.underlays)}"]
        lines.extend(f"{i} {j}" for i, j in sorted(g.edges))
        return "\n".join(lines) + "\n"

    @classmethod
    def from_text(cls, text: str) -> "NetworkGraph":
        header = None
        edges = []
        for lineno, raw in enumerate(text.splitlines(), start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            parts = line.split()
            if header is None:
                if len(parts) != 4 or parts[0] != "overlay" or parts[2] != "underlay":
                    raise ValueError(f"line {lineno}: expected 'overlay <k> underlay <m>'")
                header = (int(parts[1]), int(parts[3]))
                continue
            if len(parts) != 2:
                raise ValueError(f"line {lineno}: expected an 'i j' edge line")
            edges.append((int(parts[0]), int(parts[1])))
        if header is None:
            raise ValueError("missing header line")
        return build_network(header[0], header[1], edges)

    def to_dot(self, name: str = "G") -> str:
        lines = [f"graph {name} {{"]
        for n in self.nodes:
            shape = "circle" if n in self.overlays else "box"
            lines.append(f"  {n} [shape={shape}];")
        for i, j in sorted(self.edges):
            lines.append(f"  {i} -- {j};")
        lines.append("}")
        return "\n".join(lines) + "\n"


def build_network(overlay_count: int, underlay_count: int, edges: Iterable[Edge]) -> NetworkGraph:
    """Build and validate a network with overlays ``1..overlay_count``.

    Raises:
        DuplicateEdge, SelfLoop, UnknownNode: malformed edge list.
        OverlayDegreeViolation: an overlay without exactly one router neighbor.
        Disconnected: the graph falls apart.
    """
    if overlay_count < 0 or underlay_count < 0:
        raise ValueError("node counts must be non-negative")
    overlays = range(1, overlay_count + 1)
    underlays = range(overlay_count + 1, overlay_count + underlay_count + 1)
    return NetworkGraph.from_edges(overlays, underlays, edges).validate()


# -- routing -----------------------------------------------------------------

def bfs_distances(adj: Mapping[int, Sequence[int]], root: int) -> Dict[int, int]:
    dist = {root: 0}
    queue = deque([root])
    while queue:
        u = queue.popleft()
        for v in adj[u]:
            if v not in dist:
                dist[v] = dist[u] + 1
                queue.append(v)
    return dist


def _route(adj, src, dst, dist_to_dst) -> Optional[Tuple[int, ...]]:
    if src not in dist_to_dst:
        return None
    path = [src]
    cur = src
    while cur != dst:
        want = dist_to_dst[cur] - 1
        # smallest admissible next hop gives the lexicographically smallest path
        cur = min(v for v in adj[cur] if dist_to_dst.get(v) == want)
        path.append(cur)
    return tuple(path)


@dataclass(frozen=True)
class Tunnel:
    path: Tuple[int, ...]
    index: int = -1

    @property
    def src(self) -> int:
        return self.path[0]

    @property
    def dst(self) -> int:
        return self.path[-1]

    @property
    def pair(self) -> Pair:
        return (self.path[0], self.path[-1])

    @property
    def links(self) -> Tuple[Link, ...]:
        return path_links(self.path)

    @property
    def label(self) -> str:
        return f"{self.src}>{self.dst}"


@dataclass(frozen=True)
class TunnelSet:
    """All tunnels between ordered overlay pairs, sorted by (src, dst)."""

    tunnels: Tuple[Tunnel, ...]
    overlays: Tuple[int, ...]

    def __len__(self) -> int:
        return len(self.tunnels)

    def __iter__(self) -> Iterator[Tunnel]:
        return iter(self.tunnels)

    def __getitem__(self, i: int) -> Tunnel:
        return self.tunnels[i]

    @property
    def pairs(self) -> Tuple[Pair, ...]:
        return tuple(t.pair for t in self.tunnels)

    @cached_property
    def by_pair(self) -> Dict[Pair, Tunnel]:
        return {t.pair: t for t in self.tunnels}


def ordered_pairs(overlays: Iterable[int]) -> List[Pair]:
    ov = sorted(overlays)
    return [(s, d) for s in ov for d in ov if s != d]


def shortest_path_route(g: NetworkGraph, src: int, dst: int) -> Tunnel:
    """Deterministic hop-count shortest path from ``src`` to ``dst``."""
    if src == dst:
        raise ValueError("source and destination must differ")
    for n in (src, dst):
        if n not in g.overlays:
            raise ValueError(f"node {n} is not an overlay node")
    path = _route(g.adjacency, src, dst, bfs_distances(g.adjacency, dst))
    if path is None:
        raise Unreachable(f"no path from {src} to {dst}")
    return Tunnel(path)


def route_all(g: NetworkGraph, overlays: Optional[Iterable[int]] = None) -> Dict[Pair, Optional[Tuple[int, ...]]]:
    """Route every ordered overlay pair; unreachable pairs map to ``None``."""
    ov = sorted(g.overlays if overlays is None else overlays)
    adj = g.adjacency
    routes = {}
    for d in ov:
        dist = bfs_distances(adj, d) if d in adj else {}
        for s in ov:
            if s != d:
                routes[(s, d)] = _route(adj, s, d, dist) if s in adj else None
    return {p: routes[p] for p in ordered_pairs(ov)}


def enumerate_tunnels(g: NetworkGraph, overlays: Optional[Iterable[int]] = None) -> TunnelSet:
    """One shortest-path tunnel per ordered overlay pair, in canonical order."""
    routes = route_all(g, overlays)
    tunnels = []
    for idx, (pair, path) in enumerate(routes.items()):
        if path is None:
            raise Unreachable(f"no path from {pair[0]} to {pair[1]}")
        tunnels.append(Tunnel(path, idx))
    ov = tuple(sorted(g.overlays if overlays is None else overlays))
    return TunnelSet(tuple(tunnels), ov)


# -- minimal form ------------------------------------------------------------

def reduce_to_minimal(g: NetworkGraph) -> NetworkGraph:
    """Drop dangling routers and splice out pass-through routers.

    One node is handled per step, always the lowest-id candidate, until no
    underlay node has fewer than three neighbors. Two exceptions keep the
    network model intact: a router whose only neighbor is an overlay is kept,
    and a degree-2 router between two overlays is not spliced (that would
    wire two hosts directly together).
    """
    adj = {n: set(v) for n, v in g.adjacency.items()}
    underlays = set(g.underlays)
    overlays = g.overlays

    def candidate():
        for u in sorted(underlays):
            nbrs = adj[u]
            if len(nbrs) == 0:
                return u
            if len(nbrs) == 1 and next(iter(nbrs)) not in overlays:
                return u
            if len(nbrs) == 2 and not nbrs <= overlays:
                return u
        return None

    while (u := candidate()) is not None:
        nbrs = sorted(adj.pop(u))
        underlays.discard(u)
        for v in nbrs:
            adj[v].discard(u)
        if len(nbrs) == 2:
            a, b = nbrs
            adj[a].add(b)
            adj[b].add(a)

    edges = frozenset(_canon(i, j) for i, nb in adj.items() for j in nb)
    return NetworkGraph(g.overlays, frozenset(underlays), edges)


# -- materialized tunnel assignments ----------------------------------------

@dataclass(frozen=True)
class RecoveredGraph:
    """A candidate topology together with one path per tunnel.

    ``routes`` maps each ordered overlay pair to its node path. Recovery
    algorithms fill it by shortest-path routing; the feasible line
    constructions and imported ILP solutions supply their own paths.
    """

    graph: NetworkGraph
    routes: Mapping[Pair, Tuple[int, ...]]
    diagnostics: Mapping[str, object] = field(default_factory=dict)

    @classmethod
    def from_routing(cls, g: NetworkGraph, diagnostics=None) -> "RecoveredGraph":
        ts = enumerate_tunnels(g)
        return cls(g, {t.pair: t.path for t in ts}, diagnostics or {})

    def links(self, pair: Pair) -> Tuple[Link, ...]:
        return path_links(self.routes[pair])

    @property
    def num_edges(self) -> int:
        return self.graph.num_edges
