"""Path-interference matrices.

Two tunnels *interfere* when they traverse a common directed link in the same
direction, i.e. they share a FIFO queue. The binary L x L matrix of pairwise
interference is the only input the recovery algorithms see.

The matrix can be computed exactly from routed tunnels, or estimated the way
an end host would: inject Poisson traffic on a pair of tunnels, record each
packet's delay together with the number of packets in flight on both
tunnels, and fit the cross coefficient of::

    delay_l(t) = inflight_l(t) + alpha * inflight_k(t) + noise
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass, fields
from functools import cached_property
from typing import Dict, Iterable, List, Mapping, Optional, Sequence, Tuple, Union

import numpy as np

from .errors import DegenerateRegressor, IndexMismatch, SimulationHorizonTooShort
from .graph import NetworkGraph, Pair, TunnelSet, enumerate_tunnels, path_links, route_all, shortest_path_route


@dataclass(frozen=True, eq=False)
class InterferenceMatrix:
    """Symmetric 0/1 matrix over tunnels labelled by (source, destination).

    The diagonal is fixed to 1 and ignored by every consumer.
    """

    pairs: Tuple[Pair, ...]
    entries: np.ndarray

    def __post_init__(self):
        a = np.asarray(self.entries, dtype=np.uint8)
        n = len(self.pairs)
        if a.shape != (n, n):
            raise ValueError(f"matrix shape {a.shape} does not match {n} tunnel labels")
        if not np.array_equal(a, a.T):
            raise ValueError("interference matrix must be symmetric")
        if a.size and a.max() > 1:
            raise ValueError("interference matrix must be binary")
        a = a.copy()
        np.fill_diagonal(a, 1)
        a.setflags(write=False)
        object.__setattr__(self, "pairs", tuple(tuple(p) for p in self.pairs))
        object.__setattr__(self, "entries", a)
        if len(set(self.pairs)) != n:
            raise ValueError("duplicate tunnel labels")

    @property
    def size(self) -> int:
        return len(self.pairs)

    @cached_property
    def index(self) -> Dict[Pair, int]:
        return {p: i for i, p in enumerate(self.pairs)}

    @cached_property
    def overlays(self) -> Tuple[int, ...]:
        return tuple(sorted({s for s, _ in self.pairs} | {d for _, d in self.pairs}))

    @cached_property
    def labels(self) -> Tuple[str, ...]:
        return tuple(f"{s}>{d}" for s, d in self.pairs)

    def off_diagonal(self) -> np.ndarray:
        a = self.entries.astype(bool)
        np.fill_diagonal(a, False)
        return a

    def interference_counts(self) -> np.ndarray:
        """Number of other tunnels each tunnel interferes with."""
        return self.off_diagonal().sum(axis=1)

    def value(self, k: Pair, l: Pair) -> int:
        return int(self.entries[self.index[k], self.index[l]])

    def restrict(self, overlays: Iterable[int]) -> "InterferenceMatrix":
        """Keep only tunnels whose both endpoints lie in ``overlays``."""
        keep = set(overlays)
        idx = [i for i, (s, d) in enumerate(self.pairs) if s in keep and d in keep]
        sub = self.entries[np.ix_(idx, idx)]
        return InterferenceMatrix(tuple(self.pairs[i] for i in idx), sub)

    def aligned(self, other: "InterferenceMatrix") -> np.ndarray:
        """``other``'s entries reordered to this matrix's tunnel order."""
        if set(self.pairs) != set(other.pairs):
            raise IndexMismatch("interference matrices cover different tunnels")
        perm = [other.index[p] for p in self.pairs]
        return other.entries[np.ix_(perm, perm)]

    def hamming(self, other: "InterferenceMatrix") -> int:
        """Number of unordered tunnel pairs on which the two matrices disagree."""
        diff = self.entries != self.aligned(other)
        return int(np.triu(diff, 1).sum())

    def __eq__(self, other) -> bool:
        if not isinstance(other, InterferenceMatrix):
            return NotImplemented
        return self.pairs == other.pairs and np.array_equal(self.entries, other.entries)

    def __hash__(self):
        return hash((self.pairs, self.entries.tobytes()))

    def __repr__(self) -> str:
        return f"InterferenceMatrix(L={self.size}, interfering_pairs={int(np.triu(self.off_diagonal(), 1).sum())})"

    # -- CSV ---------------------------------------------------------------

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow([""] + list(self.labels))
        for label, row in zip(self.labels, self.entries):
            w.writerow([label] + [int(v) for v in row])
        return buf.getvalue()

    @classmethod
    def from_csv(cls, text: str) -> "InterferenceMatrix":
        rows = [r for r in csv.reader(io.StringIO(text)) if r]
        if not rows:
            raise ValueError("empty matrix file")
        header = rows[0][1:]
        pairs = [_parse_label(x) for x in header]
        body = rows[1:]
        if len(body) != len(pairs):
            raise ValueError(f"expected {len(pairs)} rows, found {len(body)}")
        entries = np.zeros((len(pairs), len(pairs)), dtype=np.uint8)
        for i, row in enumerate(body):
            if _parse_label(row[0]) != pairs[i]:
                raise ValueError(f"row {i + 1} label {row[0]!r} does not match column order")
            entries[i] = [int(v) for v in row[1:]]
        return cls(tuple(pairs), entries)


def _parse_label(text: str) -> Pair:
    s, _, d = text.strip().partition(">")
    if not _:
        raise ValueError(f"bad tunnel label {text!r}, expected 'src>dst'")
    return (int(s), int(d))


# -- exact matrix ------------------------------------------------------------

def link_incidence(paths: Sequence[Optional[Sequence[int]]]) -> Tuple[np.ndarray, List[Tuple[int, int]]]:
    """Tunnel x directed-link 0/1 incidence matrix and the link order used."""
    link_ids: Dict[Tuple[int, int], int] = {}
    rows, cols = [], []
    for t, path in enumerate(paths):
        if path is None:
            continue
        for link in path_links(path):
            j = link_ids.setdefault(link, len(link_ids))
            rows.append(t)
            cols.append(j)
    m = np.zeros((len(paths), len(link_ids)), dtype=np.int32)
    m[rows, cols] = 1
    return m, list(link_ids)


def gram(m: np.ndarray) -> np.ndarray:
    """``m @ m.T`` for a 0/1 matrix, via float BLAS (exact below 2**24)."""
    mf = m.astype(np.float32)
    return np.rint(mf @ mf.T).astype(np.int32)


def link_overlap(paths: Sequence[Optional[Sequence[int]]]) -> np.ndarray:
    """Number of shared directed links for every tunnel pair."""
    m, _ = link_incidence(paths)
    return gram(m)


def compute_interference_matrix(tunnels: Union[TunnelSet, Mapping[Pair, Optional[Sequence[int]]]]) -> InterferenceMatrix:
    """Exact interference from routed tunnels.

    Accepts a :class:`TunnelSet` or a mapping ``(src, dst) -> path``; a
    ``None`` path (unreachable pair) interferes with nothing.
    """
    if isinstance(tunnels, TunnelSet):
        pairs = tunnels.pairs
        paths = [t.path for t in tunnels]
    else:
        pairs = tuple(tunnels)
        paths = [tunnels[p] for p in pairs]
    overlap = link_overlap(paths)
    return InterferenceMatrix(tuple(pairs), (overlap > 0).astype(np.uint8))


def interference_matrix(g: NetworkGraph, overlays: Optional[Iterable[int]] = None) -> InterferenceMatrix:
    """Ground-truth matrix of ``g`` under shortest-path routing."""
    return compute_interference_matrix(enumerate_tunnels(g, overlays))


def routed_interference(g: NetworkGraph, overlays: Iterable[int]) -> InterferenceMatrix:
    """Like :func:`interference_matrix` but tolerant of unreachable pairs."""
    return compute_interference_matrix(route_all(g, overlays))


# -- interference graph ------------------------------------------------------

@dataclass(frozen=True)
class InterferenceGraph:
    """Tunnels as vertices, interfering pairs as edges (vertices are indices)."""

    num_vertices: int
    edges: frozenset
    labels: Tuple[str, ...] = ()

    @classmethod
    def from_edges(cls, n: int, edges: Iterable[Tuple[int, int]], labels=()) -> "InterferenceGraph":
        es = frozenset((min(a, b), max(a, b)) for a, b in edges if a != b)
        return cls(n, es, tuple(labels))

    @cached_property
    def adjacency(self) -> Tuple[frozenset, ...]:
        adj = [set() for _ in range(self.num_vertices)]
        for a, b in self.edges:
            adj[a].add(b)
            adj[b].add(a)
        return tuple(frozenset(s) for s in adj)

    @property
    def vertices(self) -> range:
        return range(self.num_vertices)

    def has_edge(self, a: int, b: int) -> bool:
        return b in self.adjacency[a]

    def is_clique(self, vertices: Iterable[int]) -> bool:
        vs = list(vertices)
        return all(self.has_edge(a, b) for i, a in enumerate(vs) for b in vs[i + 1:])


def build_interference_graph(f: InterferenceMatrix) -> InterferenceGraph:
    iu, ju = np.nonzero(np.triu(f.off_diagonal(), 1))
    return InterferenceGraph.from_edges(f.size, zip(iu.tolist(), ju.tolist()), f.labels)


# -- traffic simulation --------------------------------------------------------

@dataclass(frozen=True)
class TrafficConfig:
    """Measurement parameters. Time is in units of one packet service time."""

    rate: float = 0.45
    horizon: float = 1e4
    min_samples: int = 1000
    threshold: float = 0.5
    seed: int = 0

    def __post_init__(self):
        if self.rate < 0:
            raise ValueError("rate must be non-negative")
        if self.horizon <= 0:
            raise ValueError("horizon must be positive")

    @classmethod
    def from_mapping(cls, values: Mapping[str, object]) -> "TrafficConfig":
        known = {f.name: f.type for f in fields(cls)}
        kwargs = {}
        for key, raw in values.items():
            if key not in known:
                raise ValueError(f"unknown traffic config key {key!r}")
            kwargs[key] = int(raw) if key in ("min_samples", "seed") else float(raw)
        return cls(**kwargs)


@dataclass(frozen=True, eq=False)
class TrafficTrace:
    """Per-packet samples taken when packets enter ``tunnel``.

    ``h_own`` / ``h_other`` are the packets in flight on ``tunnel`` and on
    ``other`` at each launch instant.
    """

    tunnel: Pair
    other: Pair
    times: np.ndarray
    delays: np.ndarray
    h_own: np.ndarray
    h_other: np.ndarray

    def __len__(self) -> int:
        return len(self.times)


def _fifo_departures(arrivals: np.ndarray) -> np.ndarray:
    # unit service: dep[n] = max(arr[n], dep[n-1]) + 1, unrolled as a running max
    idx = np.arange(len(arrivals), dtype=float)
    return np.maximum.accumulate(arrivals - idx) + idx + 1.0


def _run_queues(paths: Sequence[Sequence[int]], launches: Sequence[np.ndarray]) -> List[np.ndarray]:
    """Push each flow's packets through its links; return delivery times.

    Every directed link is a FIFO queue with deterministic unit service.
    Links are processed once all flows using them have reached them, which
    always terminates for shortest-path routes.
    """
    current = [np.asarray(t, dtype=float).copy() for t in launches]
    users: Dict[Tuple[int, int], List[Tuple[int, int]]] = {}
    for f, path in enumerate(paths):
        for hop, link in enumerate(path_links(path)):
            users.setdefault(link, []).append((f, hop))
    reached = [0] * len(paths)
    pending = dict(users)
    while pending:
        ready = [link for link, us in pending.items() if all(reached[f] == hop for f, hop in us)]
        if not ready:
            raise RuntimeError("routes traverse shared links in conflicting orders")
        for link in ready:
            us = pending.pop(link)
            arr = np.concatenate([current[f] for f, _ in us])
            tag = np.concatenate([np.full(len(current[f]), f) for f, _ in us])
            order = np.lexsort((tag, arr))
            dep = np.empty_like(arr)
            dep[order] = _fifo_departures(arr[order])
            start = 0
            for f, _ in us:
                n = len(current[f])
                current[f] = dep[start:start + n]
                start += n
                reached[f] += 1
    return current


def _in_flight(launch: np.ndarray, delivery: np.ndarray, at: np.ndarray) -> np.ndarray:
    launched = np.searchsorted(launch, at, side="left")
    delivered = np.searchsorted(np.sort(delivery), at, side="right")
    return launched - delivered


def _pair_rng(seed: int, k: Pair, l: Pair) -> np.random.Generator:
    a, b = sorted([k, l])
    return np.random.default_rng(np.random.SeedSequence([seed, *a, *b]))


def _simulate(paths: Tuple[Sequence[int], Sequence[int]], pairs: Tuple[Pair, Pair],
              rates: Tuple[float, float], horizon: float, seed: int) -> Tuple[TrafficTrace, TrafficTrace]:
    rng = _pair_rng(seed, *pairs)
    # draw in canonical pair order so (k, l) and (l, k) see the same traffic
    order = sorted(range(2), key=lambda i: pairs[i])
    launches: List[np.ndarray] = [np.empty(0), np.empty(0)]
    for i in order:
        n = rng.poisson(rates[i] * horizon)
        launches[i] = np.sort(rng.uniform(0.0, horizon, n))
    deliveries = _run_queues(paths, launches)
    traces = []
    for own, oth in ((1, 0), (0, 1)):
        t = launches[own]
        traces.append(TrafficTrace(
            tunnel=pairs[own],
            other=pairs[oth],
            times=t,
            delays=deliveries[own] - t,
            h_own=_in_flight(launches[own], deliveries[own], t),
            h_other=_in_flight(launches[oth], deliveries[oth], t),
        ))
    return traces[0], traces[1]


def simulate_traffic(g: NetworkGraph, pair: Tuple[Pair, Pair], cfg: TrafficConfig = TrafficConfig(),
                     seed: Optional[int] = None, rates: Optional[Tuple[float, float]] = None) -> TrafficTrace:
    """Simulate Poisson traffic on tunnels ``k`` and ``l``; sample tunnel ``l``.

    ``pair`` is ``((src_k, dst_k), (src_l, dst_l))``. Both tunnels get
    ``cfg.rate`` unless ``rates`` overrides them. The returned trace holds one
    sample per packet launched on ``l``.
    """
    k, l = pair
    if k == l:
        raise ValueError("the two tunnels must differ")
    seed = cfg.seed if seed is None else seed
    paths = (shortest_path_route(g, *k).path, shortest_path_route(g, *l).path)
    rates = (cfg.rate, cfg.rate) if rates is None else rates
    on_l, _ = _simulate(paths, (k, l), rates, cfg.horizon, seed)
    if len(on_l) < cfg.min_samples:
        raise SimulationHorizonTooShort(f"{len(on_l)} samples on {l}, need {cfg.min_samples}")
    return on_l


def regress_alpha(trace: TrafficTrace) -> float:
    """Least-squares cross coefficient of the in-flight delay model.

    The own-tunnel coefficient is fixed at 1 and an intercept absorbs the
    mean of the noise term (which includes the fixed transit time), so the
    estimate is ``cov(h_other, delay - h_own) / var(h_other)``.
    """
    x = np.asarray(trace.h_other, dtype=float)
    r = np.asarray(trace.delays, dtype=float) - np.asarray(trace.h_own, dtype=float)
    if len(x) == 0:
        raise DegenerateRegressor("empty trace")
    xc = x - x.mean()
    ss = float(xc @ xc)
    if ss == 0.0:
        raise DegenerateRegressor("in-flight count of the other tunnel is constant")
    return float(xc @ (r - r.mean())) / ss


def infer_interference_matrix(g: NetworkGraph, cfg: TrafficConfig = TrafficConfig(),
                              seed: Optional[int] = None) -> InterferenceMatrix:
    """Estimate the interference matrix by pairwise simulation and regression.

    Entry ``(k, l)`` is 1 when ``max(alpha_kl, alpha_lk) >= cfg.threshold``.
    """
    seed = cfg.seed if seed is None else seed
    tunnels = enumerate_tunnels(g)
    n = len(tunnels)
    out = np.eye(n, dtype=np.uint8)
    for a in range(n):
        for b in range(a + 1, n):
            ta, tb = tunnels[a], tunnels[b]
            on_b, on_a = _simulate((ta.path, tb.path), (ta.pair, tb.pair), (cfg.rate, cfg.rate),
                                   cfg.horizon, seed)
            short = min(len(on_a), len(on_b))
            if short < cfg.min_samples:
                raise SimulationHorizonTooShort(f"{short} samples for pair {ta.label}/{tb.label}")
            alpha = max(regress_alpha(on_b), regress_alpha(on_a))
            if alpha >= cfg.threshold:
                out[a, b] = out[b, a] = 1
    return InterferenceMatrix(tunnels.pairs, out)
