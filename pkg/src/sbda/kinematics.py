"""Agent kinematics and space-time A* over a reservation table.

Actions happen only at nodes except ``move``.  An agent may travel an edge
forwards or backwards, so a move needs the orientation to be parallel to the
edge; anything else costs rotations of ``D`` degrees first.

The planner searches over safe intervals: a state is (node, orientation,
maximal free interval of that node), and the stored cost is the earliest
arrival into that interval.  Waiting inside a safe interval is always
allowed, which makes this equivalent to a tick-by-tick time-expanded search
while only expanding a handful of states per node.
"""
from __future__ import annotations

import heapq
import math
from functools import lru_cache
from dataclasses import dataclass, field
from typing import Callable, Sequence

from .graph import EnvGraph, shortest_distance

MOVE, ROTATE, WAIT, LOAD, UNLOAD = "move", "rotate", "wait", "load", "unload"
KINDS = (MOVE, ROTATE, WAIT, LOAD, UNLOAD)

FOREVER = math.inf


@dataclass(frozen=True)
class Timing:
    """Action durations in ticks (defaults are the experiment values)."""

    D: int = 90
    move_per_length: int = 10
    rotate_per_step: int = 20
    load: int = 20
    unload: int = 20


DEFAULT_TIMING = Timing()


def duration(kind: str, argument=None, timing: Timing = DEFAULT_TIMING) -> int:
    if kind == MOVE:
        if argument is None or argument <= 0:
            raise ValueError(f"move needs a positive length, got {argument}")
        return timing.move_per_length * argument
    if kind == ROTATE:
        if argument is None or argument % timing.D != 0:
            raise ValueError(f"rotation must be a multiple of {timing.D}, got {argument}")
        return timing.rotate_per_step * (abs(argument) // timing.D)
    if kind == WAIT:
        if argument is None or argument < 0:
            raise ValueError(f"wait needs a non-negative tick count, got {argument}")
        return argument
    if kind == LOAD:
        return timing.load
    if kind == UNLOAD:
        return timing.unload
    raise ValueError(f"unknown action {kind!r}")


def rotation_between(a: int, b: int) -> int:
    """Smallest absolute rotation in degrees turning orientation a into b."""
    d = (b - a) % 360
    return min(d, 360 - d)


def heuristic(l_ma: int, theta: int, timing: Timing = DEFAULT_TIMING) -> int:
    """Admissible lower bound: Manhattan travel plus the unavoidable turn."""
    return timing.move_per_length * l_ma + timing.rotate_per_step * (theta // timing.D)


def edge_direction(g: EnvGraph, u: int, v: int, D: int = 90) -> int:
    """Heading of travel u -> v, 0 = north (+y), clockwise, snapped to D."""
    (x1, y1), (x2, y2) = g.coord(u), g.coord(v)
    deg = math.degrees(math.atan2(x2 - x1, y2 - y1)) % 360
    return int(round(deg / D) * D) % 360


@lru_cache(maxsize=64)
def _move_table(g: EnvGraph, D: int) -> dict[int, list[tuple[int, int, int, int, tuple]]]:
    """Per node: (neighbour, length, heading, reverse heading, edge resource)."""
    out = {}
    for u, nbrs in g.adj.items():
        row = []
        for v, length in nbrs.items():
            hd = edge_direction(g, u, v, D)
            row.append((v, length, hd, (hd + 180) % 360, ("e", u, v) if u < v else ("e", v, u)))
        out[u] = row
    return out


@dataclass(frozen=True)
class AgentPose:
    node: int
    orientation: int
    tick: int

    def __post_init__(self):
        if not 0 <= self.orientation < 360:
            raise ValueError(f"orientation out of range: {self.orientation}")


@dataclass(frozen=True)
class ActionStep:
    kind: str
    start: int
    end: int
    node: int
    orientation: int
    to_node: int | None = None
    to_orientation: int | None = None
    task: int | None = None

    @property
    def final_node(self) -> int:
        return self.to_node if self.kind == MOVE else self.node

    @property
    def final_orientation(self) -> int:
        return self.to_orientation if self.kind == ROTATE else self.orientation

    def to_line(self, agent: int) -> str:
        to_node = self.to_node if self.to_node is not None else "-"
        to_o = self.to_orientation if self.to_orientation is not None else "-"
        task = self.task if self.task is not None else "-"
        return f"STEP {agent} {self.kind} {self.start} {self.end} {self.node} {to_node} {self.orientation} {to_o} {task}"

    @classmethod
    def from_fields(cls, fields: Sequence[str]) -> tuple[int, "ActionStep"]:
        agent, kind, start, end, node, to_node, o, to_o, task = fields

        def opt(s):
            return None if s == "-" else int(s)

        return int(agent), cls(kind, int(start), int(end), int(node), int(o), opt(to_node), opt(to_o), opt(task))


@dataclass
class Plan:
    agent: int
    origin: AgentPose
    steps: list[ActionStep] = field(default_factory=list)

    @property
    def start(self) -> int:
        return self.origin.tick

    @property
    def end(self) -> int:
        return self.steps[-1].end if self.steps else self.origin.tick

    @property
    def cost(self) -> int:
        return self.end - self.start

    @property
    def terminal(self) -> AgentPose:
        if not self.steps:
            return self.origin
        last = self.steps[-1]
        return AgentPose(last.final_node, last.final_orientation, last.end)

    def extend(self, other: "Plan") -> "Plan":
        if other.origin != self.terminal:
            raise ValueError("plans are not contiguous")
        return Plan(self.agent, self.origin, self.steps + other.steps)

    def append(self, kind: str, duration_: int, task: int | None = None) -> None:
        """Append a node-local action (wait/load/unload) at the terminal pose."""
        t = self.terminal
        self.steps.append(ActionStep(kind, t.tick, t.tick + duration_, t.node, t.orientation, task=task))


def check_plan(g: EnvGraph, plan: Plan, timing: Timing = DEFAULT_TIMING) -> None:
    """Raise ValueError if the plan violates kinematics or time contiguity."""
    pose = plan.origin
    for s in plan.steps:
        if s.start != pose.tick or s.node != pose.node or s.orientation != pose.orientation:
            raise ValueError(f"step {s} does not continue from {pose}")
        if s.kind == MOVE:
            if s.to_node not in g.adj[s.node]:
                raise ValueError(f"no edge {s.node}-{s.to_node}")
            d = edge_direction(g, s.node, s.to_node, timing.D)
            if s.orientation not in (d, (d + 180) % 360):
                raise ValueError(f"orientation {s.orientation} not aligned with edge heading {d}")
            expected = duration(MOVE, g.length(s.node, s.to_node), timing)
        elif s.kind == ROTATE:
            delta = rotation_between(s.orientation, s.to_orientation)
            expected = duration(ROTATE, delta, timing)
        elif s.kind == WAIT:
            expected = s.end - s.start
        else:
            expected = duration(s.kind, timing=timing)
        if s.end - s.start != expected:
            raise ValueError(f"step {s} has duration {s.end - s.start}, expected {expected}")
        pose = AgentPose(s.final_node, s.final_orientation, s.end)


# -- interval helpers --------------------------------------------------------

Busy = Callable[[tuple], Sequence[tuple[float, float]]]


def safe_intervals(busy: Sequence[tuple[float, float]], lo: int = 0) -> list[tuple[int, float]]:
    """Maximal integer intervals [a, b] with a >= lo that avoid every busy
    closed interval.  ``busy`` must be sorted by start."""
    out = []
    t = lo
    for s, e in busy:
        if e < t:
            continue
        if s > t:
            out.append((t, s - 1))
        if e == FOREVER:
            return out
        t = max(t, int(e) + 1)
    out.append((t, FOREVER))
    return out


def earliest_free_window(busy: Sequence[tuple[float, float]], t: int, length: int) -> float:
    """Earliest start >= t such that [start, start + length] avoids all busy intervals."""
    for s, e in busy:
        if e < t:
            continue
        if s > t + length:
            break
        if e == FOREVER:
            return FOREVER
        t = int(e) + 1
    return t


def space_time_astar(
    g: EnvGraph,
    removed: frozenset,
    busy: Busy,
    start: AgentPose,
    goal: int,
    goal_orientation: int | None = None,
    earliest_goal_arrival: int | None = None,
    goal_hold: int | None = None,
    agent: int = 0,
    blocked: frozenset = frozenset(),
    horizon: int | None = None,
    timing: Timing = DEFAULT_TIMING,
) -> Plan | None:
    """Minimum-time plan from ``start`` to ``goal`` that respects reservations.

    ``busy(resource)`` returns the sorted closed intervals other agents hold on
    a resource, ``("n", v)`` for nodes and ``("e", u, v)`` (u < v) for edges.
    With ``goal_hold=None`` the goal must stay free forever after arrival
    (the agent parks there); otherwise for ``goal_hold`` ticks.  Nodes in
    ``removed`` or ``blocked`` are never entered except the goal itself.
    Returns None when no plan exists before the search horizon.
    """
    D = timing.D
    t0 = start.tick
    if horizon is None:
        base = shortest_distance(g, removed - {start.node, goal}, start.node, goal)
        if base == math.inf:
            return None
        horizon = max(10 * timing.move_per_length * int(base), 1000)
    t_max = t0 + horizon + max(0, (earliest_goal_arrival or t0) - t0)

    gx, gy = g.coord(goal)
    nodes = g.nodes
    per_len = timing.move_per_length
    per_rot = timing.rotate_per_step

    def h(v, o):
        x, y = nodes[v].coord
        turn = 0
        if goal_orientation is not None:
            d = (goal_orientation - o) % 360
            turn = per_rot * (min(d, 360 - d) // D)
        return per_len * (abs(x - gx) + abs(y - gy)) + turn

    node_iv_cache: dict[int, list] = {}

    def intervals(v):
        iv = node_iv_cache.get(v)
        if iv is None:
            iv = node_iv_cache[v] = safe_intervals(busy(("n", v)), t0)
        return iv

    start_iv = next((iv for iv in intervals(start.node) if iv[0] <= t0 <= iv[1]), None)
    if start_iv is None:
        return None

    def goal_ok(v, o, t, iv):
        if v != goal or (goal_orientation is not None and o != goal_orientation):
            return None
        tf = max(t, earliest_goal_arrival) if earliest_goal_arrival is not None else t
        if goal_hold is None:
            return tf if iv[1] == FOREVER else None
        return tf if tf + goal_hold <= iv[1] else None

    counter = 0
    # heap entries: (f, steps, node, orientation, seq, g, record)
    # record = (key, parent_record, actions) ; actions appended on reconstruction
    best: dict[tuple, int] = {}
    heap = []

    def push(v, o, iv, t, nsteps, parent, actions):
        nonlocal counter
        if t > t_max:
            return
        key = (v, o, iv[0])
        if best.get(key, FOREVER) <= t:
            return
        best[key] = t
        counter += 1
        rec = (key, parent, actions)
        heapq.heappush(heap, (t + h(v, o), nsteps, v, o, counter, t, iv, rec, False))
        tf = goal_ok(v, o, t, iv)
        if tf is not None and tf <= t_max:
            counter += 1
            fin = (key, rec, [(WAIT, t, tf, v, o, None, None)] if tf > t else [])
            heapq.heappush(heap, (tf, nsteps + (tf > t), v, o, counter, tf, iv, fin, True))

    moves = _move_table(g, D)
    push(start.node, start.orientation, start_iv, t0, 0, None, [])
    while heap:
        f, nsteps, u, o, _, t, iv, rec, final = heapq.heappop(heap)
        if final:
            return _reconstruct(agent, start, rec)
        if best.get(rec[0]) != t:
            continue
        # rotations stay inside the current safe interval
        for d in (D, -D):
            t2 = t + timing.rotate_per_step
            if t2 <= iv[1]:
                o2 = (o + d) % 360
                push(u, o2, iv, t2, nsteps + 1, rec, [(ROTATE, t, t2, u, o, None, o2)])
        for v, length, heading, back, res in moves[u]:
            if o != heading and o != back:
                continue
            if v != goal and (v in removed or v in blocked):
                continue
            dur = per_len * length
            ebusy = busy(res)
            for a, b in intervals(v):
                if b < t + dur:
                    continue
                dep = earliest_free_window(ebusy, max(t, a - dur), dur)
                if dep > iv[1] or dep == FOREVER:
                    break
                arr = dep + dur
                if arr > b:
                    continue
                acts = []
                if dep > t:
                    acts.append((WAIT, t, dep, u, o, None, None))
                acts.append((MOVE, dep, arr, u, o, v, None))
                push(v, o, (a, b), arr, nsteps + len(acts), rec, acts)
    return None


def _reconstruct(agent: int, start: AgentPose, rec) -> Plan:
    chunks = []
    while rec is not None:
        chunks.append(rec[2])
        rec = rec[1]
    steps = []
    for acts in reversed(chunks):
        for kind, s, e, node, o, to_node, to_o in acts:
            steps.append(ActionStep(kind, s, e, node, o, to_node, to_o))
    return Plan(agent, start, steps)
