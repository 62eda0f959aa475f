"""Environment graphs and the standby-node set computations.

A graph is undirected, weighted by integer block lengths, and carries
per-node annotations (task endpoint capability, service orientation,
parking).  Every query takes a ``removed`` set: the nodes currently
reserved as standby nodes, which are cut out of the graph together with
their edges.
"""
from __future__ import annotations

import heapq
import math
from dataclasses import dataclass, field
from functools import lru_cache
from pathlib import Path
from typing import Iterable

PLAIN = "plain"
TASK = "task"
PARKING = "parking"

LOAD = "load"
UNLOAD = "unload"

ENV_HEADER = "sbda-env 1"

UNREACHABLE = math.inf


class GraphError(ValueError):
    pass


class DisconnectedGraphError(GraphError):
    pass


@dataclass(frozen=True)
class NodeRecord:
    id: int
    coord: tuple[int, int]
    kind: str = PLAIN
    capability: frozenset[str] = frozenset()
    service_orientation: int | None = None

    def __post_init__(self):
        if self.kind not in (PLAIN, TASK, PARKING):
            raise GraphError(f"node {self.id}: unknown kind {self.kind!r}")
        is_task = self.kind == TASK
        if is_task != bool(self.capability):
            raise GraphError(f"node {self.id}: capability must be set iff kind is task")
        if is_task != (self.service_orientation is not None):
            raise GraphError(f"node {self.id}: service orientation must be set iff kind is task")
        if not self.capability <= {LOAD, UNLOAD}:
            raise GraphError(f"node {self.id}: bad capability {set(self.capability)}")


@dataclass(frozen=True)
class EdgeRecord:
    u: int
    v: int
    length: int

    def __post_init__(self):
        if self.u == self.v:
            raise GraphError(f"self loop on {self.u}")
        if self.length < 1:
            raise GraphError(f"edge ({self.u},{self.v}) has length {self.length}")

    @property
    def key(self) -> tuple[int, int]:
        return (self.u, self.v) if self.u < self.v else (self.v, self.u)


@dataclass(eq=False)
class EnvGraph:
    """Immutable environment graph.  Hashes by identity so it can key caches."""

    nodes: dict[int, NodeRecord]
    edges: list[EdgeRecord]
    name: str = ""
    adj: dict[int, dict[int, int]] = field(init=False, repr=False)

    def __post_init__(self):
        self.adj = {v: {} for v in self.nodes}
        for e in self.edges:
            if e.u not in self.nodes or e.v not in self.nodes:
                raise GraphError(f"edge ({e.u},{e.v}) references an unknown node")
            if e.v in self.adj[e.u]:
                raise GraphError(f"duplicate edge ({e.u},{e.v})")
            self.adj[e.u][e.v] = e.length
            self.adj[e.v][e.u] = e.length
        if self.nodes and not is_connected(self.adj, frozenset()):
            raise DisconnectedGraphError("environment graph is not connected")
        for rec in self.nodes.values():
            if rec.kind != PLAIN and len(self.adj[rec.id]) != 1 and len(self.nodes) > 1:
                raise GraphError(f"endpoint {rec.id} is not a dead-end")
        self.task_endpoints = frozenset(v for v, r in self.nodes.items() if r.kind == TASK)
        self.parking_nodes = tuple(sorted(v for v, r in self.nodes.items() if r.kind == PARKING))
        self.endpoints = self.task_endpoints | frozenset(self.parking_nodes)
        self.pickup_nodes = tuple(sorted(v for v in self.task_endpoints if LOAD in self.nodes[v].capability))
        self.delivery_nodes = tuple(sorted(v for v in self.task_endpoints if UNLOAD in self.nodes[v].capability))

    def __len__(self):
        return len(self.nodes)

    def neighbors(self, v: int, removed: frozenset = frozenset()) -> list[int]:
        return [w for w in self.adj[v] if w not in removed]

    def length(self, u: int, v: int) -> int:
        return self.adj[u][v]

    def coord(self, v: int) -> tuple[int, int]:
        return self.nodes[v].coord

    def service_orientation(self, v: int) -> int:
        o = self.nodes[v].service_orientation
        if o is None:
            raise GraphError(f"node {v} is not a task endpoint")
        return o

    def manhattan(self, u: int, v: int) -> int:
        (x1, y1), (x2, y2) = self.nodes[u].coord, self.nodes[v].coord
        return abs(x1 - x2) + abs(y1 - y2)


def from_edges(edges: Iterable[tuple[int, int, int]], coords: dict | None = None, **annotations) -> EnvGraph:
    """Build a graph from ``(u, v, length)`` triples.

    ``annotations`` maps node id to keyword arguments for NodeRecord, e.g.
    ``{3: dict(kind=TASK, capability=frozenset({LOAD}), service_orientation=0)}``
    passed as ``nodes=...``.
    """
    edges = list(edges)
    ids = sorted({u for u, _, _ in edges} | {v for _, v, _ in edges} | set(coords or {}))
    extra = annotations.get("nodes", {})
    nodes = {}
    for v in ids:
        kw = dict(extra.get(v, {}))
        coord = (coords or {}).get(v, (v, 0))
        nodes[v] = NodeRecord(v, tuple(coord), **kw)
    return EnvGraph(nodes, [EdgeRecord(u, v, l) for u, v, l in edges], name=annotations.get("name", ""))


# -- connectivity -----------------------------------------------------------

def is_connected(adj: dict[int, dict[int, int]], removed: frozenset) -> bool:
    alive = [v for v in adj if v not in removed]
    if not alive:
        return True
    seen = {alive[0]}
    stack = [alive[0]]
    while stack:
        u = stack.pop()
        for w in adj[u]:
            if w not in seen and w not in removed:
                seen.add(w)
                stack.append(w)
    return len(seen) == len(alive)


def _articulation_points(adj, removed: frozenset) -> frozenset:
    # iterative Tarjan low-link DFS
    alive = sorted(v for v in adj if v not in removed)
    if not alive:
        return frozenset()
    disc: dict[int, int] = {}
    low: dict[int, int] = {}
    aps = set()
    root = alive[0]
    disc[root] = low[root] = 0
    counter = 1
    root_children = 0
    stack = [(root, -1, iter(adj[root]))]
    while stack:
        u, parent, it = stack[-1]
        advanced = False
        for w in it:
            if w in removed:
                continue
            if w not in disc:
                disc[w] = low[w] = counter
                counter += 1
                if u == root:
                    root_children += 1
                stack.append((w, u, iter(adj[w])))
                advanced = True
                break
            if w != parent:
                low[u] = min(low[u], disc[w])
        if advanced:
            continue
        stack.pop()
        if stack:
            p = stack[-1][0]
            low[p] = min(low[p], low[u])
            if p != root and low[u] >= disc[p]:
                aps.add(p)
    if len(disc) != len(alive):
        raise DisconnectedGraphError(f"graph minus {sorted(removed)} is disconnected")
    if root_children > 1:
        aps.add(root)
    return frozenset(aps)


@lru_cache(maxsize=4096)
def articulation_points(g: EnvGraph, removed: frozenset = frozenset()) -> frozenset:
    """Articulation points of ``g`` with ``removed`` deleted, in O(|V|+|E|)."""
    return _articulation_points(g.adj, frozenset(removed))


@lru_cache(maxsize=4096)
def potential_standby_nodes(g: EnvGraph, removed: frozenset = frozenset()) -> frozenset:
    """Nodes of ``g - removed`` that are neither articulation points, endpoints
    nor dead-ends there.  Removing any one of them keeps the graph connected."""
    removed = frozenset(removed)
    aps = articulation_points(g, removed)
    out = set()
    for v in g.nodes:
        if v in removed or v in aps or v in g.endpoints:
            continue
        if sum(1 for w in g.adj[v] if w not in removed) >= 2:
            out.add(v)
    return frozenset(out)


@lru_cache(maxsize=4096)
def cut_off_closure(g: EnvGraph, removed: frozenset) -> frozenset:
    """``removed`` plus every node stranded outside the main component.

    Releasing standby nodes in a different order than they were taken can
    leave a node whose neighbours are all still reserved.  Such a node is
    unreachable, so treating it as removed restores connectivity without
    changing which moves are possible.  The main component is the one
    holding the endpoints (their attachment nodes are never standby nodes),
    or the largest one when the graph has no endpoints.
    """
    removed = frozenset(removed)
    if is_connected(g.adj, removed):
        return removed
    alive = [v for v in g.nodes if v not in removed]
    comps, seen = [], set()
    for s in sorted(alive):
        if s in seen:
            continue
        comp, stack = {s}, [s]
        seen.add(s)
        while stack:
            u = stack.pop()
            for w in g.adj[u]:
                if w not in seen and w not in removed:
                    seen.add(w)
                    comp.add(w)
                    stack.append(w)
        comps.append(comp)
    anchor = [c for c in comps if c & g.endpoints]
    main = max(anchor or comps, key=len)
    return frozenset(v for v in g.nodes if v not in main)


# -- distances --------------------------------------------------------------

@lru_cache(maxsize=8192)
def distances_from(g: EnvGraph, removed: frozenset, source: int) -> dict[int, int]:
    """Single-source Dijkstra over ``g - removed``; unreachable nodes are absent."""
    if source in removed:
        return {}
    dist = {source: 0}
    heap = [(0, source)]
    while heap:
        d, u = heapq.heappop(heap)
        if d > dist[u]:
            continue
        for w, l in g.adj[u].items():
            if w in removed:
                continue
            nd = d + l
            if nd < dist.get(w, UNREACHABLE):
                dist[w] = nd
                heapq.heappush(heap, (nd, w))
    return dist


def shortest_distance(g: EnvGraph, removed: frozenset, u: int, v: int) -> float:
    """Shortest path length between ``u`` and ``v`` avoiding ``removed``.

    Returns ``UNREACHABLE`` (``math.inf``) when no path exists.
    """
    if u == v and u not in removed:
        return 0
    a, b = (u, v) if u <= v else (v, u)
    return distances_from(g, frozenset(removed), a).get(b, UNREACHABLE)


def associated_standby_nodes(g: EnvGraph, removed: frozenset, v_tsk: int, alpha: float) -> frozenset:
    """Potential standby nodes of ``g`` within distance ``alpha`` of ``v_tsk``,
    intersected with those of ``g - removed``.

    Distances are measured on the full graph, so with a non-empty ``removed``
    this is the time-t restriction of the static association.
    """
    static = _static_association(g, v_tsk, alpha)
    removed = frozenset(removed)
    if not removed:
        return static
    return static & potential_standby_nodes(g, removed)


@lru_cache(maxsize=1024)
def _static_association(g: EnvGraph, v_tsk: int, alpha: float) -> frozenset:
    dist = distances_from(g, frozenset(), v_tsk)
    return frozenset(v for v in potential_standby_nodes(g) if dist.get(v, UNREACHABLE) <= alpha)


def free_standby_nodes(g: EnvGraph, removed: frozenset, alpha: float) -> frozenset:
    """Potential standby nodes of ``g - removed`` not associated with any task endpoint."""
    psn = potential_standby_nodes(g, frozenset(removed))
    taken = set()
    for v in g.task_endpoints:
        taken |= _static_association(g, v, alpha)
    return psn - taken


# -- environment files -------------------------------------------------------

def load_env(path: str | Path) -> EnvGraph:
    path = Path(path)
    return parse_env(path.read_text(), name=path.stem)


def parse_env(text: str, name: str = "") -> EnvGraph:
    lines = [ln.split("#", 1)[0].strip() for ln in text.splitlines()]
    lines = [ln for ln in lines if ln]
    if not lines or lines[0] != ENV_HEADER:
        raise GraphError(f"missing header {ENV_HEADER!r}")
    nodes: dict[int, NodeRecord] = {}
    edges = []
    for ln in lines[1:]:
        parts = ln.split()
        tag = parts[0]
        if tag == "NAME":
            name = parts[1]
        elif tag == "N":
            nid, x, y, kind = int(parts[1]), int(parts[2]), int(parts[3]), parts[4]
            cap: frozenset = frozenset()
            orient = None
            if kind == TASK:
                if len(parts) != 7:
                    raise GraphError(f"task node line needs capability and orientation: {ln!r}")
                cap = frozenset(parts[5].split(","))
                orient = int(parts[6])
            elif len(parts) != 5:
                raise GraphError(f"malformed node line: {ln!r}")
            if nid in nodes:
                raise GraphError(f"duplicate node {nid}")
            nodes[nid] = NodeRecord(nid, (x, y), kind, cap, orient)
        elif tag == "E":
            if len(parts) != 4:
                raise GraphError(f"malformed edge line: {ln!r}")
            edges.append(EdgeRecord(int(parts[1]), int(parts[2]), int(parts[3])))
        else:
            raise GraphError(f"unknown record {tag!r}")
    return EnvGraph(nodes, edges, name=name)


def format_env(g: EnvGraph) -> str:
    out = [ENV_HEADER]
    if g.name:
        out.append(f"NAME {g.name}")
    for v in sorted(g.nodes):
        r = g.nodes[v]
        line = f"N {v} {r.coord[0]} {r.coord[1]} {r.kind}"
        if r.kind == TASK:
            line += f" {','.join(sorted(r.capability))} {r.service_orientation}"
        out.append(line)
    for e in sorted(g.edges, key=lambda e: e.key):
        out.append(f"E {e.key[0]} {e.key[1]} {e.length}")
    return "\n".join(out) + "\n"


def builtin_env(name: str) -> EnvGraph:
    """Load one of the shipped replicas (``env1`` or ``env2``)."""
    path = Path(__file__).parent / "data" / f"{name}.map"
    if not path.exists():
        raise FileNotFoundError(f"no built-in environment {name!r}")
    return _load_cached(str(path.resolve()), path.stat().st_mtime_ns)


@lru_cache(maxsize=32)
def _load_cached(path: str, mtime_ns: int) -> EnvGraph:
    # one graph object per file version, so the per-graph caches are shared
    return load_env(path)


def resolve_env(spec: str | Path) -> EnvGraph:
    """A file path, or the name of a shipped replica (``env1``, ``env2.map``)."""
    p = Path(spec)
    if p.is_file():
        return _load_cached(str(p.resolve()), p.stat().st_mtime_ns)
    return builtin_env(p.stem)
