"""Random networks, graph edit distance and the recovery experiment harness.

Random networks follow the usual protocol: an Erdos-Renyi graph ``G(n, p)``
(``p = 2/n`` by default), its largest connected component, hosts attached to
a random 80% of the routers, then reduction to a minimal network.
"""

from __future__ import annotations

import csv
import io
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, fields
from typing import Dict, List, Optional, Sequence, Tuple

import networkx as nx
import numpy as np

from .errors import BudgetExceeded, DegenerateSample, TopologyError
from .graph import NetworkGraph, build_network, reduce_to_minimal
from .interference import interference_matrix
from .recovery import ALGORITHMS
from .topologies import random_minimal_tree, random_ring

EXACT = "exact"
HEURISTIC = "heuristic"
DEFAULT_EXACT_NODES = 12
MAX_RESAMPLES = 50
GENERATORS = ("random", "tree", "ring")


@dataclass(frozen=True)
class ExperimentConfig:
    """Settings for :func:`run_experiment`.

    ``n`` lists the sizes to sweep; for the ``tree`` and ``ring`` generators
    it is the number of overlays instead of the Erdos-Renyi node count.
    """

    n: Tuple[int, ...] = (10,)
    edge_prob: Optional[float] = None
    overlay_fraction: float = 0.8
    trials: int = 100
    seed: int = 0
    recovery: str = "general"
    generator: str = "random"
    exact_nodes: int = DEFAULT_EXACT_NODES
    timing: bool = True

    def __post_init__(self):
        if self.edge_prob is not None and not 0 < self.edge_prob <= 1:
            raise ValueError("edge_prob must be in (0, 1]")
        if not 0 < self.overlay_fraction <= 1:
            raise ValueError("overlay_fraction must be in (0, 1]")
        if self.trials < 1:
            raise ValueError("trials must be positive")
        if self.recovery not in ALGORITHMS:
            raise ValueError(f"unknown recovery {self.recovery!r}")
        if self.generator not in GENERATORS:
            raise ValueError(f"unknown generator {self.generator!r}")

    def prob(self, n: int) -> float:
        return min(1.0, 2.0 / n) if self.edge_prob is None else self.edge_prob

    @classmethod
    def from_text(cls, text: str) -> "ExperimentConfig":
        """Parse ``key = value`` lines; ``#`` starts a comment."""
        known = {f.name: f for f in fields(cls)}
        values: Dict[str, object] = {}
        for lineno, raw in enumerate(text.splitlines(), start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ValueError(f"line {lineno}: expected key = value")
            key, val = (part.strip() for part in line.split("=", 1))
            key = key.replace("-", "_")
            if key not in known:
                raise ValueError(f"line {lineno}: unknown key {key!r}")
            values[key] = _convert(key, val)
        return cls(**values)

    def to_text(self) -> str:
        out = []
        for k, v in asdict(self).items():
            if k == "n":
                v = ",".join(str(x) for x in v)
            out.append(f"{k} = {'' if v is None else v}")
        return "\n".join(out) + "\n"


def _convert(key: str, val: str):
    if key == "n":
        parts = [p for p in val.replace(",", " ").split() if p]
        if len(parts) == 1 and ":" in parts[0]:
            lo, hi, *step = (int(x) for x in parts[0].split(":"))
            return tuple(range(lo, hi + 1, step[0] if step else 1))
        return tuple(int(p) for p in parts)
    if key == "edge_prob":
        return None if val.lower() in ("", "none", "default") else float(val)
    if key == "overlay_fraction":
        return float(val)
    if key in ("trials", "seed", "exact_nodes"):
        return int(val)
    if key == "timing":
        return val.lower() in ("1", "true", "yes", "on")
    return val


# -- random networks -------------------------------------------------------------

def _largest_component(n: int, edges: List[Tuple[int, int]]) -> List[int]:
    g = nx.Graph()
    g.add_nodes_from(range(n))
    g.add_edges_from(edges)
    comps = sorted(nx.connected_components(g), key=lambda c: (-len(c), min(c)))
    return sorted(comps[0])


def _sample(n: int, p: float, fraction: float, rng: np.random.Generator) -> NetworkGraph:
    iu, ju = np.triu_indices(n, 1)
    keep = rng.random(len(iu)) < p
    edges = list(zip(iu[keep].tolist(), ju[keep].tolist()))
    comp = _largest_component(n, edges)
    m = len(comp)
    hosts = sorted(int(h) for h in rng.choice(comp, size=math.ceil(fraction * m), replace=False))
    k = len(hosts)
    label = {r: k + 1 + idx for idx, r in enumerate(comp)}
    inside = set(comp)
    out = [(label[a], label[b]) for a, b in edges if a in inside and b in inside]
    out += [(o, label[h]) for o, h in enumerate(hosts, start=1)]
    return build_network(k, m, out)


def generate_random_network(n: int, cfg: ExperimentConfig = ExperimentConfig(), seed: int = 0) -> NetworkGraph:
    """Random minimal network built by the Erdos-Renyi protocol.

    A sample whose reduced network has fewer than two overlays is redrawn
    from a derived seed.

    Raises:
        DegenerateSample: every resample was degenerate.
    """
    if n < 4:
        raise ValueError("n must be at least 4")
    for attempt in range(MAX_RESAMPLES):
        rng = np.random.default_rng(np.random.SeedSequence([seed, attempt]))
        g = _sample(n, cfg.prob(n), cfg.overlay_fraction, rng)
        if len(g.overlays) < 2:
            continue
        h, _ = reduce_to_minimal(g).relabeled()
        if len(h.overlays) >= 2:
            return h.validate()
    raise DegenerateSample(f"no usable network after {MAX_RESAMPLES} samples (n={n}, seed={seed})")


def generate_network(cfg: ExperimentConfig, n: int, seed: int) -> NetworkGraph:
    if cfg.generator == "tree":
        return random_minimal_tree(n, np.random.default_rng(seed))
    if cfg.generator == "ring":
        return random_ring(n, np.random.default_rng(seed))[0]
    return generate_random_network(n, cfg, seed)


# -- edit distance -------------------------------------------------------------------

def _typed_matrices(g1: NetworkGraph, g2: NetworkGraph):
    """Adjacency matrices padded so both graphs have equal counts per kind.

    Node order: underlays, then overlays. Returns the two matrices and the
    number of underlay slots.
    """
    nu = max(len(g1.underlays), len(g2.underlays))
    no = max(len(g1.overlays), len(g2.overlays))

    def mat(g: NetworkGraph) -> np.ndarray:
        order = sorted(g.underlays) + [None] * (nu - len(g.underlays))
        order += sorted(g.overlays) + [None] * (no - len(g.overlays))
        pos = {v: i for i, v in enumerate(order) if v is not None}
        a = np.zeros((nu + no, nu + no), dtype=np.int8)
        for u, v in g.edges:
            a[pos[u], pos[v]] = a[pos[v], pos[u]] = 1
        return a

    return mat(g1), mat(g2), nu


def mapping_cost(a: np.ndarray, b: np.ndarray, perm: Sequence[int]) -> int:
    """Edge edits needed when node ``i`` of ``a`` is mapped to ``perm[i]`` of ``b``."""
    p = np.asarray(perm)
    return int(np.sum(a != b[np.ix_(p, p)]) // 2)


def _exact(a: np.ndarray, b: np.ndarray, nu: int, incumbent: int) -> int:
    n = len(a)
    kind = [0] * nu + [1] * (n - nu)
    order = sorted(range(n), key=lambda i: (kind[i], -int(a[i].sum()), i))
    best = [incumbent]
    assigned: List[Tuple[int, int]] = []
    used = [False] * n
    in_a = np.zeros(n, dtype=bool)
    in_b = np.zeros(n, dtype=bool)

    def bound() -> int:
        # edges between mapped and unmapped nodes, then among unmapped nodes
        lb = 0
        for u, v in assigned:
            lb += abs(int(a[u, ~in_a].sum()) - int(b[v, ~in_b].sum()))
        ra = int(a[np.ix_(~in_a, ~in_a)].sum()) // 2
        rb = int(b[np.ix_(~in_b, ~in_b)].sum()) // 2
        return lb + abs(ra - rb)

    def rec(depth: int, cost: int):
        if cost >= best[0]:
            return
        if depth == n:
            best[0] = cost
            return
        if cost + bound() >= best[0]:
            return
        u = order[depth]
        for v in range(n):
            if used[v] or kind[v] != kind[u]:
                continue
            extra = sum(int(a[u, x] != b[v, y]) for x, y in assigned)
            used[v] = True
            in_a[u] = in_b[v] = True
            assigned.append((u, v))
            rec(depth + 1, cost + extra)
            assigned.pop()
            in_a[u] = in_b[v] = False
            used[v] = False

    rec(0, 0)
    return best[0]


def _local_search(a: np.ndarray, b: np.ndarray, perm: np.ndarray, nu: int) -> Tuple[int, np.ndarray]:
    """Swap pairs of same-kind images while that lowers the cost."""
    n = len(perm)
    cost = mapping_cost(a, b, perm)
    improved = True
    while improved and cost:
        improved = False
        for lo, hi in ((0, nu), (nu, n)):
            for i in range(lo, hi):
                for j in range(i + 1, hi):
                    perm[i], perm[j] = perm[j], perm[i]
                    c = mapping_cost(a, b, perm)
                    if c < cost:
                        cost, improved = c, True
                    else:
                        perm[i], perm[j] = perm[j], perm[i]
    return cost, perm


def _anchored_start(g1: NetworkGraph, g2: NetworkGraph, a, b, nu: int) -> np.ndarray:
    """Map overlays by label and routers through the overlays they carry."""
    u1, u2 = sorted(g1.underlays), sorted(g2.underlays)
    o1, o2 = sorted(g1.overlays), sorted(g2.overlays)
    pos2 = {v: i for i, v in enumerate(u2)}
    pos2.update({v: nu + i for i, v in enumerate(o2)})
    n = len(a)
    perm = [-1] * n
    taken = set()
    for i, o in enumerate(o1):
        j = pos2.get(o)
        if j is not None and j >= nu:
            perm[nu + i] = j
            taken.add(j)
    for i, u in enumerate(u1):
        for o in g1.neighbors(u):
            if g1.is_overlay(o) and o in g2.overlays:
                hosts = [h for h in g2.neighbors(o) if h in g2.underlays]
                if len(hosts) != 1:
                    continue
                j = pos2[hosts[0]]
                if j not in taken:
                    perm[i] = j
                    taken.add(j)
                    break
    return _fill(perm, a, b, nu, taken)


def _degree_start(a, b, nu: int) -> np.ndarray:
    return _fill([-1] * len(a), a, b, nu, set())


def _fill(perm, a, b, nu, taken) -> np.ndarray:
    """Complete a partial mapping by pairing remaining nodes in degree order."""
    n = len(a)
    da, db = a.sum(axis=1), b.sum(axis=1)
    for lo, hi in ((0, nu), (nu, n)):
        free_a = sorted((i for i in range(lo, hi) if perm[i] < 0), key=lambda i: (-da[i], i))
        free_b = sorted((j for j in range(lo, hi) if j not in taken), key=lambda j: (-db[j], j))
        for i, j in zip(free_a, free_b):
            perm[i] = j
    return np.array(perm)


def _typed_isomorphic(g1: NetworkGraph, g2: NetworkGraph) -> bool:
    if (len(g1.overlays), len(g1.underlays), g1.num_edges) != (len(g2.overlays), len(g2.underlays), g2.num_edges):
        return False
    return nx.is_isomorphic(g1.to_networkx(), g2.to_networkx(),
                            node_match=lambda x, y: x["kind"] == y["kind"])


def edit_distance(g1: NetworkGraph, g2: NetworkGraph, mode: str = EXACT,
                  max_nodes: int = DEFAULT_EXACT_NODES) -> int:
    """Fewest link insertions plus deletions making ``g1`` and ``g2`` isomorphic.

    Overlays map to overlays and routers to routers; the smaller side of each
    kind is padded with isolated nodes (adding nodes is free).

    Args:
        mode: ``exact`` (branch and bound) or ``heuristic`` (greedy mapping
            plus pairwise swaps; an upper bound on the exact value).
        max_nodes: size limit for exact mode.

    Raises:
        BudgetExceeded: exact mode on graphs with more than ``max_nodes`` nodes.
    """
    if mode not in (EXACT, HEURISTIC):
        raise ValueError(f"unknown mode {mode!r}")
    if mode == EXACT and max(len(g1.nodes), len(g2.nodes)) > max_nodes:
        raise BudgetExceeded(f"exact edit distance limited to {max_nodes} nodes per graph")
    if _typed_isomorphic(g1, g2):
        return 0
    a, b, nu = _typed_matrices(g1, g2)
    best = None
    for start in (_anchored_start(g1, g2, a, b, nu), _degree_start(a, b, nu)):
        cost, _ = _local_search(a, b, start.copy(), nu)
        best = cost if best is None else min(best, cost)
    if mode == HEURISTIC:
        return best
    return _exact(a, b, nu, best + 1)


def auto_edit_distance(g1: NetworkGraph, g2: NetworkGraph, max_nodes: int = DEFAULT_EXACT_NODES) -> Tuple[int, str]:
    """Exact distance when both graphs fit the budget, heuristic otherwise."""
    if max(len(g1.nodes), len(g2.nodes)) <= max_nodes:
        return edit_distance(g1, g2, EXACT, max_nodes), EXACT
    return edit_distance(g1, g2, HEURISTIC), HEURISTIC


# -- experiments -----------------------------------------------------------------------

@dataclass(frozen=True)
class TrialRecord:
    n: int
    seed: int
    algorithm: str
    edit_distance: Optional[int]
    f_hamming: Optional[int]
    runtime_ms: float
    distance_mode: str = ""
    error: str = ""

    @property
    def ok(self) -> bool:
        return not self.error


@dataclass
class ExperimentReport:
    config: ExperimentConfig
    records: List[TrialRecord] = field(default_factory=list)

    def aggregates(self) -> Dict[int, Dict[str, float]]:
        """Per-size mean and standard deviation of the edit distance."""
        out = {}
        for n in self.config.n:
            rows = [r for r in self.records if r.n == n]
            vals = np.array([r.edit_distance for r in rows if r.ok], dtype=float)
            out[n] = {
                "trials": len(rows),
                "failed": sum(1 for r in rows if not r.ok),
                "mean": float(vals.mean()) if len(vals) else math.nan,
                "std": float(vals.std()) if len(vals) else math.nan,
            }
        return out

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["n", "seed", "algorithm", "edit_distance", "f_hamming", "runtime_ms"])
        for r in self.records:
            w.writerow([r.n, r.seed, r.algorithm,
                        "NA" if r.edit_distance is None else r.edit_distance,
                        "NA" if r.f_hamming is None else r.f_hamming,
                        f"{r.runtime_ms:.3f}"])
        return buf.getvalue()

    def summary(self) -> str:
        lines = ["n,trials,failed,mean_edit_distance,std_edit_distance"]
        for n, a in self.aggregates().items():
            lines.append(f"{n},{a['trials']},{a['failed']},{a['mean']:.4f},{a['std']:.4f}")
        return "\n".join(lines) + "\n"


def trial_seed(base: int, n: int, trial: int) -> int:
    return int(np.random.SeedSequence([base, n, trial]).generate_state(1)[0])


def run_trial(cfg: ExperimentConfig, n: int, seed: int) -> TrialRecord:
    """Generate, measure, recover and score one network; errors are recorded."""
    algo = ALGORITHMS[cfg.recovery]
    try:
        g = generate_network(cfg, n, seed)
        f = interference_matrix(g)
        t0 = time.perf_counter()
        rec = algo(f)
        elapsed = (time.perf_counter() - t0) * 1000 if cfg.timing else 0.0
        ham = rec.diagnostics.get("f_hamming")
        if ham is None:
            ham = 0  # tree/ring recovery validates an exact match
        dist, mode = auto_edit_distance(rec.graph, g, cfg.exact_nodes)
        return TrialRecord(n, seed, cfg.recovery, dist, int(ham), elapsed, mode)
    except TopologyError as exc:
        return TrialRecord(n, seed, cfg.recovery, None, None, 0.0, "", type(exc).__name__)


def _run_one(args):
    return run_trial(*args)


def run_experiment(cfg: ExperimentConfig, jobs: int = 1) -> ExperimentReport:
    """Run ``cfg.trials`` trials for every size in ``cfg.n``.

    Trial seeds are derived from ``(cfg.seed, n, trial)``, so results do not
    depend on ``jobs``.
    """
    tasks = [(cfg, n, trial_seed(cfg.seed, n, t)) for n in cfg.n for t in range(cfg.trials)]
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            records = list(pool.map(_run_one, tasks, chunksize=4))
    else:
        records = [_run_one(t) for t in tasks]
    return ExperimentReport(cfg, records)
