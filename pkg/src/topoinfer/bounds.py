"""Bounds on the size of the minimal topology.

* :func:`feasible_graph` builds a (wasteful) network that reproduces any
  realizable interference matrix, giving the upper bound of
  :func:`upper_bound`.
* :func:`min_edge_clique_cover` computes the intersection number ``C`` of
  the interference graph; every feasible network has at least ``C / 2``
  undirected links (:func:`lower_bound`).
* :func:`check_unique_intersection_condition` certifies that a network is
  minimal: every directed link has a tunnel pair meeting there and nowhere
  else.
* :func:`verify_solution` checks a candidate network and tunnel assignment
  against the integer-program constraints.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Dict, Iterable, List, Optional, Sequence, Tuple

import numpy as np

from .errors import BudgetExceeded, IndexMismatch
from .graph import (
    Link,
    NetworkGraph,
    Pair,
    RecoveredGraph,
    TunnelSet,
    enumerate_tunnels,
    path_links,
)
from .interference import (
    InterferenceGraph,
    InterferenceMatrix,
    build_interference_graph,
    gram,
    link_incidence,
)

EXACT = "exact"
GREEDY = "greedy"
DEFAULT_MAX_EDGES = 40


def structural_violations(f: InterferenceMatrix) -> List[Tuple[Pair, Pair]]:
    """Tunnel pairs with a common endpoint that are marked non-interfering.

    Tunnels leaving the same host share its access link (and tunnels entering
    the same host share the last link), so any matrix measured on a real
    network interferes on all such pairs.
    """
    bad = []
    off = f.off_diagonal()
    for a, (s1, d1) in enumerate(f.pairs):
        for b in range(a + 1, f.size):
            s2, d2 = f.pairs[b]
            if (s1 == s2 or d1 == d2) and not off[a, b]:
                bad.append((f.pairs[a], f.pairs[b]))
    return bad


# -- feasible construction----------------------------------------------------------

def feasible_graph(f: InterferenceMatrix, overlays: Optional[Iterable[int]] = None) -> RecoveredGraph:
    """Construct a network and tunnel assignment that realizes ``f``.

    Each interfering pair gets its own link on a line, traversed left to
    right; fragments of one tunnel are chained with a direct link, or with a
    fresh relay node when that link would collide with an existing one; hosts
    get a private router that is wired to the first and last fragment of each
    of their tunnels.
    """
    overlays = sorted(f.overlays if overlays is None else overlays)
    if structural_violations(f):
        raise ValueError("matrix is not realizable: tunnels sharing an endpoint must interfere")
    gf = build_interference_graph(f)
    ie = sorted(gf.edges)
    counter = [max(overlays, default=0)]

    def fresh() -> int:
        counter[0] += 1
        return counter[0]

    line = [fresh() for _ in range(len(ie) + 1)]
    edges = {tuple(sorted((line[t - 1], line[t]))) for t in range(1, len(ie) + 1)}
    fragments: Dict[int, List[int]] = {}
    for t, (a, b) in enumerate(ie, start=1):
        fragments.setdefault(a, []).append(t)
        fragments.setdefault(b, []).append(t)

    # chain each tunnel's fragments along the line
    middle: Dict[int, List[int]] = {}
    for tunnel in sorted(fragments):
        ts = fragments[tunnel]
        nodes = [line[ts[0] - 1], line[ts[0]]]
        for prev, nxt in zip(ts, ts[1:]):
            if nxt != prev + 1:
                a, b = line[prev], line[nxt - 1]
                if tuple(sorted((a, b))) in edges:
                    r = fresh()
                    edges.update({tuple(sorted((a, r))), tuple(sorted((r, b)))})
                    nodes.extend([r, b])
                else:
                    edges.add(tuple(sorted((a, b))))
                    nodes.append(b)
            nodes.append(line[nxt])
        middle[tunnel] = nodes

    # hosts, their routers, and tunnel completion
    parent = {o: fresh() for o in overlays}
    edges.update(tuple(sorted((o, p))) for o, p in parent.items())
    routes = {}
    for idx, (s, d) in enumerate(f.pairs):
        ps, pd = parent[s], parent[d]
        core = middle.get(idx, [])
        path = [s, ps, *core, pd, d]
        for a, b in zip(path[1:-2], path[2:-1]):
            edges.add(tuple(sorted((a, b))))
        routes[(s, d)] = tuple(path)

    nodes = set(overlays) | {n for e in edges for n in e}
    g = NetworkGraph(frozenset(overlays), frozenset(nodes - set(overlays)), frozenset(edges))
    return RecoveredGraph(g, routes, {"line_edges": len(ie)})


def upper_bound(f: InterferenceMatrix, overlays: Optional[Iterable[int]] = None) -> int:
    """Links used by the line construction of :func:`feasible_graph` in the worst case."""
    n_over = len(f.overlays if overlays is None else list(overlays))
    e_f = len(build_interference_graph(f).edges)
    L = f.size
    return e_f + 2 * L * e_f + n_over + 2 * L


# -- edge clique cover ------------------------------------------------------------

@dataclass(frozen=True)
class CliqueCover:
    """Cliques covering every edge of an interference graph.

    ``lower`` is a certified lower bound on the intersection number;
    ``exact`` means ``size == lower``, i.e. the cover is provably minimum.
    """

    cliques: Tuple[frozenset, ...]
    exact: bool
    lower: int

    @property
    def size(self) -> int:
        return len(self.cliques)

    def is_valid_for(self, gf: InterferenceGraph) -> bool:
        if not all(gf.is_clique(q) for q in self.cliques):
            return False
        return all(any(a in q and b in q for q in self.cliques) for a, b in gf.edges)

    def to_json(self) -> str:
        return json.dumps({
            "cliques": [sorted(q) for q in self.cliques],
            "size": self.size,
            "exact": self.exact,
        }, sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> "CliqueCover":
        d = json.loads(text)
        cliques = tuple(frozenset(q) for q in d["cliques"])
        if d.get("size", len(cliques)) != len(cliques):
            raise ValueError("size field disagrees with clique list")
        exact = bool(d.get("exact", False))
        return cls(cliques, exact, len(cliques) if exact else 0)


def _edge(a: int, b: int) -> Tuple[int, int]:
    return (a, b) if a < b else (b, a)


def _co_coverable(adj, e1, e2) -> bool:
    vs = {e1[0], e1[1], e2[0], e2[1]}
    vs = list(vs)
    return all(vs[j] in adj[vs[i]] for i in range(len(vs)) for j in range(i + 1, len(vs)))


def independent_edge_set(gf: InterferenceGraph, edges: Optional[Sequence[Tuple[int, int]]] = None) -> List[Tuple[int, int]]:
    """Greedy set of edges no two of which fit in a common clique.

    Its size lower-bounds the intersection number. Edges with the fewest
    common neighbours are tried first since they sit in the fewest cliques.
    """
    adj = gf.adjacency
    pool = sorted(gf.edges if edges is None else edges,
                  key=lambda e: (len(adj[e[0]] & adj[e[1]]), e))
    chosen: List[Tuple[int, int]] = []
    for e in pool:
        if not any(_co_coverable(adj, e, c) for c in chosen):
            chosen.append(e)
    return chosen


def _prune_redundant(cliques: List[frozenset]) -> List[frozenset]:
    """Drop cliques whose every edge is also covered by another clique."""
    cliques = list(cliques)
    changed = True
    while changed:
        changed = False
        # larger cliques are tried last so small, dominated ones go first
        for i in sorted(range(len(cliques)), key=lambda i: (len(cliques[i]), sorted(cliques[i]))):
            q = cliques[i]
            others = cliques[:i] + cliques[i + 1:]
            qs = sorted(q)
            if all(any(a in o and b in o for o in others) for x, a in enumerate(qs) for b in qs[x + 1:]):
                cliques.pop(i)
                changed = True
                break
    return cliques


def _greedy_cover(gf: InterferenceGraph) -> List[frozenset]:
    adj = gf.adjacency
    uncovered = set(gf.edges)
    order = sorted(gf.edges, key=lambda e: (len(adj[e[0]] & adj[e[1]]), e))
    cliques = []
    for a, b in order:
        if (a, b) not in uncovered:
            continue
        q = {a, b}
        cand = adj[a] & adj[b]
        while cand:
            v = max(cand, key=lambda v: (sum(_edge(v, u) in uncovered for u in q), -v))
            q.add(v)
            cand = cand & adj[v]
        qs = sorted(q)
        for i, x in enumerate(qs):
            for y in qs[i + 1:]:
                uncovered.discard((x, y))
        cliques.append(frozenset(q))
    return _prune_redundant(cliques)


def _exact_cover(gf: InterferenceGraph, incumbent: List[frozenset], lower: int) -> List[frozenset]:
    """Branch and bound over edge-to-clique assignments.

    Edges are taken in order of decreasing degree sum; the first uncovered
    edge either joins an existing clique (if the union stays a clique) or
    opens a new one. A node is pruned when the cliques so far plus an
    independent set of edges that fit no existing clique reach the incumbent.
    """
    adj = gf.adjacency
    order = sorted(gf.edges, key=lambda e: (-(len(adj[e[0]]) + len(adj[e[1]])), e))
    best = [list(incumbent)]
    cliques: List[set] = []

    def covered(e) -> bool:
        return any(e[0] in q and e[1] in q for q in cliques)

    def fits(e, q) -> bool:
        return all(v in q or q <= adj[v] for v in e)

    def bound(i) -> int:
        stuck = [e for e in order[i:] if not covered(e) and not any(fits(e, q) for q in cliques)]
        return len(independent_edge_set(gf, stuck)) if stuck else 0

    def rec(i: int) -> bool:
        while i < len(order) and covered(order[i]):
            i += 1
        if i == len(order):
            if len(cliques) < len(best[0]):
                best[0] = [frozenset(q) for q in cliques]
            return len(best[0]) <= lower
        if len(cliques) + bound(i) >= len(best[0]):
            return False
        e = order[i]
        for q in cliques:
            if fits(e, q):
                added = {v for v in e if v not in q}
                q |= added
                if rec(i + 1):
                    return True
                q -= added
        if len(cliques) + 1 < len(best[0]):
            cliques.append(set(e))
            if rec(i + 1):
                return True
            cliques.pop()
        return False

    rec(0)
    return best[0]


def min_edge_clique_cover(gf: InterferenceGraph, mode: str = EXACT,
                          max_edges: int = DEFAULT_MAX_EDGES) -> CliqueCover:
    """Edge clique cover of ``gf``.

    ``greedy`` grows a maximal clique around each uncovered edge. ``exact``
    first compares the greedy cover with the independent-edge lower bound;
    when they meet the greedy cover is already certified minimum. Otherwise
    it runs branch and bound, which is refused above ``max_edges`` edges.
    """
    if mode not in (EXACT, GREEDY):
        raise ValueError(f"unknown mode {mode!r}")
    greedy = _greedy_cover(gf)
    lower = len(independent_edge_set(gf))
    if mode == GREEDY or len(greedy) == lower:
        return CliqueCover(tuple(greedy), len(greedy) == lower, lower)
    if len(gf.edges) > max_edges:
        raise BudgetExceeded(
            f"exact cover search needs {len(gf.edges)} edges > budget {max_edges} "
            f"(bounds {lower}..{len(greedy)})")
    cover = _prune_redundant(_exact_cover(gf, greedy, lower))
    return CliqueCover(tuple(cover), True, len(cover))


def lower_bound(f: InterferenceMatrix, mode: str = EXACT, max_edges: int = DEFAULT_MAX_EDGES) -> int:
    """Certified lower bound on the number of links: ``ceil(C / 2)``.

    In greedy mode ``C`` is replaced by the size of an independent edge set,
    which never exceeds the true intersection number.
    """
    gf = build_interference_graph(f)
    if mode == GREEDY:
        return math.ceil(len(independent_edge_set(gf)) / 2)
    return math.ceil(min_edge_clique_cover(gf, EXACT, max_edges).size / 2)


# -- sufficient condition for minimality --------------------------------------------

@dataclass(frozen=True)
class UniqueIntersection:
    holds: bool
    witnesses: Dict[Link, Optional[Tuple[Pair, Pair]]]

    def witness_free_links(self) -> List[Tuple[int, int]]:
        """Undirected links with at least one direction lacking a witness."""
        return sorted({_edge(*link) for link, w in self.witnesses.items() if w is None})


def check_unique_intersection_condition(g: NetworkGraph, tunnels: Optional[TunnelSet] = None) -> UniqueIntersection:
    """Look for a tunnel pair meeting at each directed link and nowhere else.

    All directed links of ``g`` are checked; a link carried by fewer than two
    tunnels has no witness. When every link has one, ``g`` is minimal.
    """
    tunnels = enumerate_tunnels(g) if tunnels is None else tunnels
    m, links = link_incidence([t.path for t in tunnels])
    overlap = gram(m)
    col = {link: j for j, link in enumerate(links)}
    witnesses: Dict[Link, Optional[Tuple[Pair, Pair]]] = {}
    for link in g.directed_links():
        witnesses[link] = None
        j = col.get(link)
        if j is None:
            continue
        users = np.flatnonzero(m[:, j])
        sub = overlap[np.ix_(users, users)] == 1
        np.fill_diagonal(sub, False)
        hit = np.argwhere(np.triu(sub, 1))
        if len(hit):
            a, b = users[hit[0][0]], users[hit[0][1]]
            witnesses[link] = (tunnels[a].pair, tunnels[b].pair)
    return UniqueIntersection(all(w is not None for w in witnesses.values()), witnesses)


# -- constraint checking ------------------------------------------------------------------

@dataclass(frozen=True)
class Violation:
    constraint: str
    detail: str


@dataclass(frozen=True)
class Verification:
    feasible: bool
    violations: Tuple[Violation, ...] = field(default_factory=tuple)

    def by_constraint(self) -> Dict[str, int]:
        out: Dict[str, int] = {}
        for v in self.violations:
            out[v.constraint] = out.get(v.constraint, 0) + 1
        return out


def verify_solution(f: InterferenceMatrix, candidate: RecoveredGraph) -> Verification:
    """Check a candidate network against the integer program's constraint families.

    Violations are tagged ``constraint-1`` to ``constraint-6`` in the order the
    families are added by :func:`topoinfer.ilp.build_ilp_model`.

    Raises:
        IndexMismatch: the candidate does not route exactly the tunnels of ``f``.
    """
    if set(candidate.routes) != set(f.pairs):
        raise IndexMismatch("candidate routes do not match the matrix's tunnel labels")
    g = candidate.graph
    out: List[Violation] = []
    adj = g.adjacency
    for o in sorted(f.overlays):
        deg = len(adj.get(o, ()))
        if deg != 1:
            out.append(Violation("constraint-2", f"overlay {o} has {deg} links"))
    paths = []
    for s, d in f.pairs:
        path = tuple(candidate.routes[(s, d)])
        paths.append(path)
        if not path or path[0] != s or path[-1] != d:
            out.append(Violation("constraint-3", f"tunnel {s}>{d} does not run from {s} to {d}"))
        for a, b in path_links(path):
            if not g.has_edge(a, b):
                out.append(Violation("constraint-1", f"tunnel {s}>{d} uses missing link ({a}, {b})"))
        if len(set(path)) != len(path):
            out.append(Violation("constraint-4", f"tunnel {s}>{d} revisits a node"))
    m, _ = link_incidence(paths)
    shared = gram(m) > 0
    want = f.off_diagonal()
    iu, ju = np.nonzero(np.triu(shared != want, 1))
    for a, b in zip(iu.tolist(), ju.tolist()):
        ka, kb = f.labels[a], f.labels[b]
        if want[a, b]:
            out.append(Violation("constraint-6", f"interfering tunnels {ka} and {kb} share no link"))
        else:
            out.append(Violation("constraint-5", f"non-interfering tunnels {ka} and {kb} share a link"))
    return Verification(not out, tuple(out))


def contract_links(candidate: RecoveredGraph, links: Iterable[Tuple[int, int]]) -> RecoveredGraph:
    """Remove links by merging their endpoints, keeping every tunnel's route.

    The higher-id endpoint of each link is folded into the lower one; routes
    are rewritten through the merged node. A link carried by at most one
    tunnel per direction can be dropped this way without losing any
    interference, provided the merge does not fuse two other links.
    """
    rep: Dict[int, int] = {}

    def find(v: int) -> int:
        while v in rep:
            v = rep[v]
        return v

    g = candidate.graph
    for a, b in links:
        a, b = find(a), find(b)
        if a == b:
            continue
        if g.is_overlay(a) or g.is_overlay(b):
            raise ValueError("cannot contract an access link")
        lo, hi = sorted((a, b))
        rep[hi] = lo
    edges = {tuple(sorted((find(u), find(v)))) for u, v in g.edges}
    edges = {e for e in edges if e[0] != e[1]}
    routes = {}
    for pair, path in candidate.routes.items():
        out: List[int] = []
        for v in path:
            v = find(v)
            if not out or out[-1] != v:
                out.append(v)
        routes[pair] = tuple(out)
    h = NetworkGraph.from_edges(g.overlays, set(g.underlays) - set(rep), edges)
    return RecoveredGraph(h, routes, dict(candidate.diagnostics))
