"""Integer program for the minimum-link topology consistent with a matrix.

Nodes ``1..k`` are the overlays, ``k+1..N`` are candidate routers. The model
uses

* ``t{l}_{i}_{j}``: tunnel ``l`` uses directed link ``i -> j``;
* ``e_{i}_{j}`` (``i < j``): link ``{i, j}`` exists;
* ``u_{l}_{i}``: ordering potential of node ``i`` on tunnel ``l`` (subtour
  elimination);
* ``y_{k}_{l}_{i}_{j}``: interfering tunnels ``k`` and ``l`` both use ``i -> j``.

Models can be written in LP text format for an external solver, read back,
and solver output can be turned into a :class:`RecoveredGraph` for checking.
The in-process solver handles toy instances only.
"""

from __future__ import annotations

import io
import itertools
import re
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, Iterable, List, Mapping, Optional, Sequence, Tuple, Union


from .errors import BudgetTooSmall, Infeasible, TimeBudgetExceeded
from .graph import NetworkGraph, Pair, RecoveredGraph, path_links
from .interference import InterferenceMatrix

EDGE_OR = "edge-or"
OVERLAY_DEGREE = "overlay-degree"
FLOW = "flow"
MTZ = "mtz"
NO_SHARE = "no-share"
MUST_SHARE = "must-share"
TAGS = (EDGE_OR, OVERLAY_DEGREE, FLOW, MTZ, NO_SHARE, MUST_SHARE)

# constraint-name prefixes; LP names may not contain '-'
_PREFIX = {EDGE_OR: "eor", OVERLAY_DEGREE: "deg", FLOW: "flow", MTZ: "mtz",
           NO_SHARE: "nsh", MUST_SHARE: "msh"}
_TAG_OF = {v: k for k, v in _PREFIX.items()}

BINARY = "binary"
CONTINUOUS = "continuous"
INF = float("inf")


@dataclass(frozen=True)
class Variable:
    name: str
    kind: str = BINARY
    lower: float = 0.0
    upper: float = 1.0


@dataclass(frozen=True)
class Constraint:
    name: str
    tag: str
    coeffs: Tuple[Tuple[str, float], ...]
    sense: str  # '<=', '>=' or '='
    rhs: float

    def evaluate(self, values: Mapping[str, float]) -> float:
        return sum(c * values.get(v, 0.0) for v, c in self.coeffs)

    def satisfied(self, values: Mapping[str, float], tol: float = 1e-6) -> bool:
        lhs = self.evaluate(values)
        if self.sense == "<=":
            return lhs <= self.rhs + tol
        if self.sense == ">=":
            return lhs >= self.rhs - tol
        return abs(lhs - self.rhs) <= tol


@dataclass
class IlpModel:
    """Solver-neutral linear model (minimization).

    ``f``, ``overlays`` and ``node_budget`` are kept when the model was built
    from a matrix; a model parsed back from LP text has only the algebra.
    """

    variables: Dict[str, Variable] = field(default_factory=dict)
    constraints: List[Constraint] = field(default_factory=list)
    objective: Dict[str, float] = field(default_factory=dict)
    f: Optional[InterferenceMatrix] = None
    overlays: Tuple[int, ...] = ()
    node_budget: int = 0

    def add_var(self, name: str, kind: str = BINARY, lower: float = 0.0, upper: float = 1.0) -> str:
        self.variables[name] = Variable(name, kind, lower, upper)
        return name

    def add(self, name: str, tag: str, coeffs: Iterable[Tuple[str, float]], sense: str, rhs: float) -> None:
        self.constraints.append(Constraint(name, tag, tuple(coeffs), sense, float(rhs)))

    def count(self, tag: Optional[str] = None) -> int:
        return sum(1 for c in self.constraints if tag is None or c.tag == tag)

    def counts_by_tag(self) -> Dict[str, int]:
        return {t: self.count(t) for t in TAGS}

    def signature(self):
        """Hashable structure used to compare models (e.g. after a round trip)."""
        var = tuple(sorted((v.name, v.kind, v.lower, v.upper) for v in self.variables.values()))
        con = tuple(sorted((c.name, c.sense, c.rhs, tuple(sorted(c.coeffs))) for c in self.constraints))
        obj = tuple(sorted(self.objective.items()))
        return var, con, obj

    def check(self, values: Mapping[str, float], tol: float = 1e-6) -> List[Constraint]:
        """Constraints violated by ``values`` (integrality and bounds included)."""
        bad = []
        for v in self.variables.values():
            x = values.get(v.name, 0.0)
            if x < v.lower - tol or x > v.upper + tol:
                bad.append(Constraint(v.name, "bounds", ((v.name, 1.0),), "=", x))
            elif v.kind == BINARY and min(abs(x), abs(x - 1)) > tol:
                bad.append(Constraint(v.name, "integrality", ((v.name, 1.0),), "=", x))
        bad.extend(c for c in self.constraints if not c.satisfied(values, tol))
        return bad

    def objective_value(self, values: Mapping[str, float]) -> float:
        return sum(c * values.get(v, 0.0) for v, c in self.objective.items())


def tvar(l: int, i: int, j: int) -> str:
    return f"t{l}_{i}_{j}"


def evar(i: int, j: int) -> str:
    i, j = min(i, j), max(i, j)
    return f"e_{i}_{j}"


def uvar(l: int, i: int) -> str:
    return f"u_{l}_{i}"


def yvar(k: int, l: int, i: int, j: int) -> str:
    return f"y_{k}_{l}_{i}_{j}"


def default_node_budget(num_overlays: int) -> int:
    return num_overlays + max(1, num_overlays)


def build_ilp_model(f: InterferenceMatrix, overlays: Optional[Iterable[int]] = None,
                    node_budget: Optional[int] = None) -> IlpModel:
    """Integer program whose optimum is the smallest network realizing ``f``.

    Args:
        f: target interference matrix; overlays must be ``1..k``.
        overlays: defaults to the overlays labelling ``f``.
        node_budget: total number of nodes (overlays plus candidate routers).

    Raises:
        BudgetTooSmall: fewer than ``k + 1`` nodes.
    """
    overlays = tuple(sorted(f.overlays if overlays is None else overlays))
    k = len(overlays)
    if overlays != tuple(range(1, k + 1)):
        raise ValueError("overlays must be numbered 1..k")
    n = default_node_budget(k) if node_budget is None else int(node_budget)
    if n < k + 1:
        raise BudgetTooSmall(f"node budget {n} < {k + 1}")
    nodes = range(1, n + 1)
    arcs = [(i, j) for i in nodes for j in nodes if i != j]
    L = f.size
    model = IlpModel(f=f, overlays=overlays, node_budget=n)

    for l in range(L):
        for i, j in arcs:
            model.add_var(tvar(l, i, j))
    for i, j in itertools.combinations(nodes, 2):
        model.add_var(evar(i, j))
        model.objective[evar(i, j)] = 1.0
    for l in range(L):
        for i in nodes:
            model.add_var(uvar(l, i), CONTINUOUS, 0.0, INF)

    # (1) a link exists iff some tunnel uses it in either direction
    for i, j in itertools.combinations(nodes, 2):
        e = evar(i, j)
        for l in range(L):
            model.add(f"eor_{l}_{i}_{j}", EDGE_OR, [(e, 1), (tvar(l, i, j), -1)], ">=", 0)
            model.add(f"eor_{l}_{j}_{i}", EDGE_OR, [(e, 1), (tvar(l, j, i), -1)], ">=", 0)
        terms = [(e, 1)] + [(tvar(l, a, b), -1) for l in range(L) for a, b in ((i, j), (j, i))]
        model.add(f"eor_{i}_{j}", EDGE_OR, terms, "<=", 0)

    # (2) each overlay hangs off exactly one router
    for i in overlays:
        model.add(f"deg_{i}", OVERLAY_DEGREE, [(evar(i, j), 1) for j in nodes if j > k], "=", 1)
        for j in overlays:
            if j > i:
                model.add(f"deg_{i}_{j}", OVERLAY_DEGREE, [(evar(i, j), 1)], "=", 0)

    # (3) flow conservation with source/destination constants substituted
    for l, (s, d) in enumerate(f.pairs):
        for j in nodes:
            terms = [(tvar(l, i, j), 1) for i in nodes if i != j]
            terms += [(tvar(l, j, i), -1) for i in nodes if i != j]
            model.add(f"flow_{l}_{j}", FLOW, terms, "=", int(j == d) - int(j == s))

    # (4) subtour elimination
    for l in range(L):
        for i, j in arcs:
            model.add(f"mtz_{l}_{i}_{j}", MTZ,
                      [(uvar(l, i), 1), (uvar(l, j), -1), (tvar(l, i, j), n)], "<=", n - 1)

    # (5) non-interfering tunnels never share a directed link
    off = f.off_diagonal()
    for a, b in itertools.combinations(range(L), 2):
        if off[a, b]:
            continue
        for i, j in arcs:
            model.add(f"nsh_{a}_{b}_{i}_{j}", NO_SHARE, [(tvar(a, i, j), 1), (tvar(b, i, j), 1)], "<=", 1)

    # (6) interfering tunnels share at least one directed link
    for a, b in itertools.combinations(range(L), 2):
        if not off[a, b]:
            continue
        ys = []
        for i, j in arcs:
            y = model.add_var(yvar(a, b, i, j))
            ys.append((y, 1))
            ta, tb = tvar(a, i, j), tvar(b, i, j)
            model.add(f"msh_{a}_{b}_{i}_{j}_a", MUST_SHARE, [(y, 1), (ta, -1)], "<=", 0)
            model.add(f"msh_{a}_{b}_{i}_{j}_b", MUST_SHARE, [(y, 1), (tb, -1)], "<=", 0)
            model.add(f"msh_{a}_{b}_{i}_{j}_c", MUST_SHARE, [(y, 1), (ta, -1), (tb, -1)], ">=", -1)
        model.add(f"msh_{a}_{b}", MUST_SHARE, ys, ">=", 1)
    return model


def must_share_groups(model: IlpModel) -> List[Tuple[int, int]]:
    """Tunnel pairs carrying an at-least-one-shared-link constraint."""
    out = []
    for c in model.constraints:
        if c.tag == MUST_SHARE:
            m = re.fullmatch(r"msh_(\d+)_(\d+)", c.name)
            if m:
                out.append((int(m.group(1)), int(m.group(2))))
    return out


# -- LP text format ---------------------------------------------------------------

def _num(x: float) -> str:
    if x == int(x):
        return str(int(x))
    return repr(float(x))


def _expr(coeffs: Sequence[Tuple[str, float]]) -> List[str]:
    toks = []
    for idx, (v, c) in enumerate(coeffs):
        sign = "-" if c < 0 else "+"
        mag = abs(c)
        term = v if mag == 1 else f"{_num(mag)} {v}"
        if idx == 0:
            toks.append(term if sign == "+" else f"- {term}")
        else:
            toks.append(f"{sign} {term}")
    return toks


def _wrap(head: str, toks: Sequence[str], width: int = 200) -> List[str]:
    lines, cur = [], head
    for t in toks:
        if len(cur) + len(t) + 1 > width and cur.strip():
            lines.append(cur)
            cur = "   "
        cur = f"{cur} {t}" if cur else t
    lines.append(cur)
    return lines


def write_lp(model: IlpModel) -> str:
    """Render ``model`` in LP text format."""
    out: List[str] = ["\\ minimum-link topology model"]
    out.append("Minimize")
    obj = list(model.objective.items())
    out.extend(_wrap(" obj:", _expr(obj) if obj else ["0"]))
    if model.constraints:
        out.append("Subject To")
        for c in model.constraints:
            toks = _expr(c.coeffs) + [c.sense, _num(c.rhs)]
            out.extend(_wrap(f" {c.name}:", toks))
    cont = [v for v in model.variables.values() if v.kind == CONTINUOUS]
    if cont:
        out.append("Bounds")
        for v in cont:
            if v.upper == INF:
                out.append(f" {v.name} >= {_num(v.lower)}")
            else:
                out.append(f" {_num(v.lower)} <= {v.name} <= {_num(v.upper)}")
    bins = [v.name for v in model.variables.values() if v.kind == BINARY]
    if bins:
        out.append("Binary")
        out.extend(_wrap("", bins))
    out.append("End")
    return "\n".join(out) + "\n"


def export_lp(model: IlpModel, destination: Union[str, Path, io.TextIOBase]) -> None:
    """Write the LP text of ``model`` to a path or open text stream."""
    text = write_lp(model)
    if hasattr(destination, "write"):
        destination.write(text)
    else:
        Path(destination).write_text(text)


_SECTIONS = {
    "minimize": "obj", "minimum": "obj", "min": "obj",
    "subject to": "st", "such that": "st", "st": "st", "s.t.": "st",
    "bounds": "bounds", "bound": "bounds",
    "binary": "bin", "binaries": "bin", "bin": "bin",
    "general": "gen", "generals": "gen", "gen": "gen",
    "end": "end",
}
_TOKEN = re.compile(r"\s*(<=|>=|=<|=>|<|>|=|[+-]|[A-Za-z_][\w.\[\]]*:|[0-9.]+(?:[eE][+-]?\d+)?|[A-Za-z_][\w.\[\]]*)")
_SENSE = {"<=": "<=", "=<": "<=", "<": "<=", ">=": ">=", "=>": ">=", ">": ">=", "=": "="}


def _tokens(text: str) -> List[str]:
    toks, pos = [], 0
    text = text.rstrip()
    while pos < len(text):
        m = _TOKEN.match(text, pos)
        if not m:
            raise ValueError(f"cannot parse LP text near {text[pos:pos + 30]!r}")
        toks.append(m.group(1))
        pos = m.end()
    return toks


def _is_num(tok: str) -> bool:
    return bool(re.fullmatch(r"[0-9.]+(?:[eE][+-]?\d+)?", tok))


def _linear(toks: List[str], pos: int) -> Tuple[List[Tuple[str, float]], int]:
    """Parse ``[+-] [coef] var ...`` starting at ``pos``; stop at a sense or name."""
    coeffs: List[Tuple[str, float]] = []
    while pos < len(toks) and toks[pos] not in _SENSE and not toks[pos].endswith(":"):
        sign = 1.0
        while toks[pos] in "+-":
            sign *= -1.0 if toks[pos] == "-" else 1.0
            pos += 1
        coef = 1.0
        if _is_num(toks[pos]):
            coef = float(toks[pos])
            pos += 1
            if pos >= len(toks) or toks[pos] in _SENSE or toks[pos] in "+-" or toks[pos].endswith(":"):
                # bare constant (e.g. an empty objective "0")
                continue
        coeffs.append((toks[pos], sign * coef))
        pos += 1
    return coeffs, pos


def parse_lp(text: str) -> IlpModel:
    """Read LP text (as written by :func:`write_lp`) back into a model."""
    sections: Dict[str, List[str]] = {}
    current = None
    for raw in text.splitlines():
        line = raw.split("\\", 1)[0].rstrip()
        if not line.strip():
            continue
        key = line.strip().lower()
        if key in _SECTIONS:
            current = _SECTIONS[key]
            sections.setdefault(current, [])
            continue
        if current is None:
            raise ValueError(f"text outside any section: {line!r}")
        sections[current].append(line)

    model = IlpModel()
    seen: Dict[str, None] = {}

    obj = _tokens(" ".join(sections.get("obj", [])))
    if obj and obj[0].endswith(":"):
        obj = obj[1:]
    coeffs, _ = _linear(obj, 0) if obj else ([], 0)
    for v, c in coeffs:
        model.objective[v] = model.objective.get(v, 0.0) + c
        seen.setdefault(v)

    toks = _tokens(" ".join(sections.get("st", [])))
    pos, auto = 0, 0
    while pos < len(toks):
        name = None
        if toks[pos].endswith(":"):
            name = toks[pos][:-1]
            pos += 1
        coeffs, pos = _linear(toks, pos)
        sense = _SENSE[toks[pos]]
        sign = -1.0 if toks[pos + 1] == "-" else 1.0
        if toks[pos + 1] in "+-":
            pos += 1
        rhs = sign * float(toks[pos + 1])
        pos += 2
        if name is None:
            auto += 1
            name = f"c{auto}"
        prefix = name.split("_", 1)[0]
        model.add(name, _TAG_OF.get(prefix, prefix), coeffs, sense, rhs)
        for v, _ in coeffs:
            seen.setdefault(v)

    bounds: Dict[str, Tuple[float, float]] = {}
    for line in sections.get("bounds", []):
        bt = line.split()
        if len(bt) == 2 and bt[1].lower() == "free":
            bounds[bt[0]] = (-INF, INF)
        elif len(bt) == 5:
            bounds[bt[2]] = (float(bt[0]), float(bt[4]))
        elif len(bt) == 3:
            name, op, val = bt
            lo, hi = bounds.get(name, (0.0, INF))
            if _SENSE[op] == ">=":
                lo = float(val)
            elif _SENSE[op] == "<=":
                hi = float(val)
            else:
                lo = hi = float(val)
            bounds[name] = (lo, hi)
        else:
            raise ValueError(f"cannot parse bound {line!r}")
        seen.setdefault(bt[0] if len(bt) != 5 else bt[2])

    binaries = set(" ".join(sections.get("bin", [])).split())
    for v in binaries:
        seen.setdefault(v)
    for v in seen:
        if v in binaries:
            model.add_var(v, BINARY, 0.0, 1.0)
        else:
            lo, hi = bounds.get(v, (0.0, INF))
            model.add_var(v, CONTINUOUS, lo, hi)
    return model


# -- solutions ---------------------------------------------------------------------

def read_solution(text: str) -> Dict[str, float]:
    """Variable values from a solver solution file.

    Accepts ``name=value`` or ``name value`` lines, and the
    ``index name value ...`` column layout; comment lines are skipped.
    """
    values: Dict[str, float] = {}
    for raw in text.splitlines():
        line = raw.strip()
        if not line or line[0] in "#\\":
            continue
        parts = line.replace("=", " ").split()
        try:
            if len(parts) >= 3 and parts[0].isdigit():
                values[parts[1]] = float(parts[2])
            elif len(parts) == 2:
                values[parts[0]] = float(parts[1])
        except ValueError:
            continue  # status / objective lines
    return values


def write_solution(values: Mapping[str, float]) -> str:
    return "".join(f"{k}={_num(v)}\n" for k, v in values.items() if v)


def assignment_from_solution(model: IlpModel, candidate: RecoveredGraph) -> Dict[str, float]:
    """Variable values encoding a network and its tunnel routes."""
    f = model.f
    if f is None:
        raise ValueError("model was not built from a matrix")
    n = model.node_budget
    values = {name: 0.0 for name in model.variables}
    links: List[set] = []
    for l, pair in enumerate(f.pairs):
        path = candidate.routes[pair]
        used = set(path_links(path))
        links.append(used)
        for i, j in used:
            values[tvar(l, i, j)] = 1.0
            values[evar(i, j)] = 1.0
        for pos, v in enumerate(path):
            values[uvar(l, v)] = float(pos)
        # nodes off the path keep potential 0, which MTZ allows when unused
        for v in range(1, n + 1):
            if v not in path:
                values[uvar(l, v)] = 0.0
    for name in model.variables:
        if name.startswith("y_"):
            a, b, i, j = map(int, name[2:].split("_"))
            values[name] = float((i, j) in links[a] and (i, j) in links[b])
    return values


def recovered_from_solution(f: InterferenceMatrix, values: Mapping[str, float],
                            overlays: Optional[Iterable[int]] = None) -> RecoveredGraph:
    """Turn solver values into a network and tunnel routes.

    Links are the ``e`` variables at 1; each tunnel's route follows its
    ``t`` variables from the source. Malformed routes are kept as far as they
    can be followed so that :func:`verify_solution` can report them.
    """
    overlays = sorted(f.overlays if overlays is None else overlays)
    edges = set()
    arcs: Dict[int, Dict[int, List[int]]] = {}
    for name, v in values.items():
        if v < 0.5:
            continue
        if name.startswith("e_"):
            i, j = map(int, name[2:].split("_"))
            edges.add((i, j))
        m = re.fullmatch(r"t(\d+)_(\d+)_(\d+)", name)
        if m:
            l, i, j = map(int, m.groups())
            arcs.setdefault(l, {}).setdefault(i, []).append(j)
    routes = {}
    for l, (s, d) in enumerate(f.pairs):
        nxt = arcs.get(l, {})
        path = [s]
        while path[-1] != d and nxt.get(path[-1]):
            step = min(nxt[path[-1]])
            if step in path:
                path.append(step)
                break
            path.append(step)
        routes[(s, d)] = tuple(path)
    nodes = set(overlays) | {v for e in edges for v in e}
    for path in routes.values():
        nodes.update(path)
    g = NetworkGraph(frozenset(overlays), frozenset(nodes - set(overlays)), frozenset(edges))
    return RecoveredGraph(g, routes)


# -- exact search at toy scale -------------------------------------------------------

@dataclass(frozen=True)
class SolverLimits:
    max_nodes: int = 8
    max_tunnels: int = 12
    time_budget: float = 60.0


class _Search:
    """Depth-first search over parents, then tunnel routes.

    Routers are interchangeable, so an unused router is only ever introduced
    as the lowest-id one still unused. Routes are simple paths through routers
    (which makes the ordering constraints hold automatically); the link
    count of the partial network bounds the search against the incumbent.
    """

    def __init__(self, f: InterferenceMatrix, overlays: Sequence[int], routers: Sequence[int],
                 deadline: float):
        self.f = f
        self.overlays = list(overlays)
        self.routers = list(routers)
        self.off = f.off_diagonal()
        self.deadline = deadline
        self.parent: Dict[int, int] = {}
        self.edges: Dict[Tuple[int, int], int] = {}   # link -> reference count
        self.users: Dict[Tuple[int, int], List[int]] = {}
        self.routes: List[Tuple[int, ...]] = []
        self.best: Optional[Tuple[int, Dict[Pair, Tuple[int, ...]], frozenset]] = None
        self.steps = 0

    def _cost(self) -> int:
        return len(self.edges)

    def _tick(self):
        self.steps += 1
        if self.steps % 512 == 0 and time.monotonic() > self.deadline:
            raise TimeBudgetExceeded("exact search ran out of time", best=self._incumbent())

    def _incumbent(self) -> Optional[RecoveredGraph]:
        if self.best is None:
            return None
        _, routes, edges = self.best
        return _materialize(self.overlays, edges, routes)

    def _use(self, l: int, link) -> bool:
        """Attach ``link`` to tunnel ``l``; False on a no-share conflict."""
        for k in self.users.get(link, ()):
            if not self.off[k, l]:
                return False
        self.users.setdefault(link, []).append(l)
        e = (min(link), max(link))
        self.edges[e] = self.edges.get(e, 0) + 1
        return True

    def _unuse(self, link):
        self.users[link].pop()
        if not self.users[link]:
            del self.users[link]
        e = (min(link), max(link))
        self.edges[e] -= 1
        if not self.edges[e]:
            del self.edges[e]

    def run(self):
        self._parents(0)
        return self.best

    def _parents(self, idx: int):
        if idx == len(self.overlays):
            self._route(0)
            return
        o = self.overlays[idx]
        used = sorted(set(self.parent.values()))
        choices = used + [r for r in self.routers if r not in used][:1]
        for r in choices:
            self.parent[o] = r
            e = (min(o, r), max(o, r))
            self.edges[e] = 1
            if self.best is None or self._cost() < self.best[0]:
                self._parents(idx + 1)
            del self.edges[e]
            del self.parent[o]

    def _route(self, l: int):
        self._tick()
        if self.best is not None and self._cost() >= self.best[0]:
            return
        if l == self.f.size:
            routes = {pair: self.routes[i] for i, pair in enumerate(self.f.pairs)}
            self.best = (self._cost(), routes, frozenset(self.edges))
            return
        s, d = self.f.pairs[l]
        ps, pd = self.parent[s], self.parent[d]
        first, last = (s, ps), (pd, d)
        if not self._use(l, first):
            return
        if self._use(l, last):
            self._extend(l, [s, ps], pd, d)
            self._unuse(last)
        self._unuse(first)

    def _extend(self, l: int, path: List[int], target: int, dst: int):
        here = path[-1]
        if here == target:
            full = tuple(path + [dst])
            if self._shares_with_earlier(l, full):
                self.routes.append(full)
                self._route(l + 1)
                self.routes.pop()
            return
        used = self._used_set()
        fresh = [r for r in self.routers if r not in used][:1]
        # existing links first: they cost nothing
        order = sorted(r for r in self.routers if r not in path and r in used)
        order.sort(key=lambda r: ((min(here, r), max(here, r)) not in self.edges, r))
        for r in order + [r for r in fresh if r not in path]:
            link = (here, r)
            new_edge = (min(link), max(link)) not in self.edges
            if self.best is not None and self._cost() + new_edge >= self.best[0]:
                continue
            if not self._use(l, link):
                continue
            path.append(r)
            self._extend(l, path, target, dst)
            path.pop()
            self._unuse(link)

    def _used_set(self) -> set:
        used = set(self.parent.values())
        for a, b in self.edges:
            used.update((a, b))
        return used

    def _shares_with_earlier(self, l: int, path: Tuple[int, ...]) -> bool:
        mine = set(path_links(path))
        for k in range(l):
            if self.off[k, l] and not mine & set(path_links(self.routes[k])):
                return False
        return True


def _materialize(overlays, edges, routes) -> RecoveredGraph:
    nodes = {v for e in edges for v in e}
    g = NetworkGraph(frozenset(overlays), frozenset(nodes - set(overlays)), frozenset(edges))
    return RecoveredGraph(g, dict(routes))


def solve_exact_small(model: IlpModel, limits: SolverLimits = SolverLimits()) -> RecoveredGraph:
    """Provably optimal network for a toy-sized model.

    Raises:
        ValueError: the model exceeds ``limits`` or was not built from a matrix.
        Infeasible: no network within the node budget realizes the matrix.
        TimeBudgetExceeded: carries the best network found so far.
    """
    f = model.f
    if f is None:
        raise ValueError("model was not built from a matrix")
    if model.node_budget > limits.max_nodes or f.size > limits.max_tunnels:
        raise ValueError(
            f"instance too large for exact search (nodes {model.node_budget} > {limits.max_nodes} "
            f"or tunnels {f.size} > {limits.max_tunnels})")
    k = len(model.overlays)
    routers = list(range(k + 1, model.node_budget + 1))
    search = _Search(f, model.overlays, routers, time.monotonic() + limits.time_budget)
    best = search.run()
    if best is None:
        raise Infeasible("no network within the node budget realizes the matrix")
    cost, routes, edges = best
    rg = _materialize(model.overlays, edges, routes)
    return RecoveredGraph(rg.graph, rg.routes, {"optimum": cost, "search_steps": search.steps})
