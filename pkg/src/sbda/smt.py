"""Status management token: the single shared state agents plan against.

The token holds the reservation table (node and edge occupancy intervals),
the task execution status table, the standby-node status table and the pool
of unassigned tasks.  All access goes through a handle obtained with
``acquire``; acquisition is exclusive and FIFO ordered.
"""
from __future__ import annotations

import heapq
import itertools
import threading
from bisect import insort
from collections import defaultdict
from dataclasses import dataclass, field

from .graph import EnvGraph, associated_standby_nodes, cut_off_closure, potential_standby_nodes
from .kinematics import FOREVER, MOVE, Plan


class TokenError(RuntimeError):
    pass


class ConflictError(TokenError):
    def __init__(self, entry: "RtEntry", other: "RtEntry"):
        super().__init__(f"reservation {entry} clashes with {other}")
        self.entry = entry
        self.other = other


@dataclass(frozen=True, order=True)
class RtEntry:
    resource: tuple
    start: int
    end: float
    agent: int

    def __post_init__(self):
        if self.start > self.end:
            raise ValueError(f"empty interval [{self.start}, {self.end}]")

    def overlaps(self, s, e) -> bool:
        return self.start <= e and s <= self.end


@dataclass(frozen=True, order=True)
class TestEntry:
    task: int
    node: int
    agent: int


@dataclass
class SstState:
    initial_psn: frozenset
    associations: dict[int, frozenset]
    reservations: dict[int, int] = field(default_factory=dict)  # node -> agent
    crowded: set[int] = field(default_factory=set)
    g: EnvGraph | None = field(default=None, repr=False)

    def held_by(self, agent: int) -> int | None:
        for v, a in self.reservations.items():
            if a == agent:
                return v
        return None

    @property
    def removed(self) -> frozenset:
        return cut_off_closure(self.g, frozenset(self.reservations))

    def removed_except(self, *keep: int) -> frozenset:
        """Removal set with ``keep`` put back, closed over stranded nodes."""
        return cut_off_closure(self.g, frozenset(self.reservations) - set(keep))


def plan_entries(plan: Plan, hold_terminal: bool = True) -> list[RtEntry]:
    """Occupancy intervals covering the plan from its start.

    Node intervals run from arrival (or plan start) until departure, edge
    intervals over each traversal.  The terminal node is held open-ended.
    """
    agent = plan.agent
    out = []
    node = plan.origin.node
    since = plan.origin.tick
    for s in plan.steps:
        if s.kind != MOVE:
            continue
        out.append(RtEntry(("n", node), since, s.start, agent))
        a, b = (s.node, s.to_node) if s.node < s.to_node else (s.to_node, s.node)
        out.append(RtEntry(("e", a, b), s.start, s.end, agent))
        node, since = s.to_node, s.end
    out.append(RtEntry(("n", node), since, FOREVER if hold_terminal else plan.end, agent))
    return out


class StatusToken:
    def __init__(self, g: EnvGraph, alpha: float = 0, tasks=(), clock: int = 0):
        self.g = g
        self.alpha = alpha
        self.clock = clock
        self.rt: dict[tuple, list[RtEntry]] = defaultdict(list)
        self.by_agent: dict[int, list[RtEntry]] = defaultdict(list)
        self._expiry: list = []
        self._seq = itertools.count()
        self.termini: dict[int, int] = {}
        self.test: set[TestEntry] = set()
        self.pool = {t.id: t for t in tasks}
        psn = potential_standby_nodes(g)
        self.sst = SstState(
            initial_psn=psn,
            associations={v: associated_standby_nodes(g, frozenset(), v, alpha) for v in sorted(g.task_endpoints)},
            g=g,
        )
        self._cond = threading.Condition()
        self._holder: int | None = None
        self._next_ticket = 0
        self._serving = 0
        self.acquire_log: list[tuple[int, int]] = []

    # -- exclusive access ----------------------------------------------------

    def acquire(self, agent: int, now: int | None = None) -> "TokenHandle":
        with self._cond:
            if self._holder == agent:
                raise TokenError(f"agent {agent} already holds the token")
            ticket = self._next_ticket
            self._next_ticket += 1
            while self._serving != ticket or self._holder is not None:
                self._cond.wait()
            self._holder = agent
        if now is not None:
            if now < self.clock:
                raise TokenError(f"clock cannot go back from {self.clock} to {now}")
            self.clock = now
        self.acquire_log.append((agent, self.clock))
        self._sweep()
        return TokenHandle(self, agent)

    def _release(self, handle: "TokenHandle") -> None:
        with self._cond:
            if self._holder != handle.agent or handle.token is not self:
                raise TokenError("release by a non-holder")
            self._holder = None
            self._serving += 1
            self._cond.notify_all()

    def _sweep(self) -> None:
        tc = self.clock
        heap = self._expiry
        while heap and heap[0][0] < tc:
            _, _, e = heapq.heappop(heap)
            self._discard(e)

    def _discard(self, e: RtEntry) -> None:
        lst = self.rt.get(e.resource)
        if lst is None:
            return
        try:
            lst.remove(e)
        except ValueError:
            return
        if not lst:
            del self.rt[e.resource]

    def _insert(self, e: RtEntry) -> None:
        insort(self.rt[e.resource], e)
        self.by_agent[e.agent].append(e)
        if e.end != FOREVER:
            heapq.heappush(self._expiry, (e.end, next(self._seq), e))

    # -- debug snapshot --------------------------------------------------------

    def dump(self) -> str:
        lines = [f"CLOCK {self.clock}"]
        for res in sorted(self.rt):
            for e in sorted(self.rt[res]):
                r = " ".join(str(x) for x in res)
                lines.append(f"RT {r} {e.start} {e.end} {e.agent}")
        for t in sorted(self.test):
            lines.append(f"TEST {t.task} {t.node} {t.agent}")
        lines.append("PSN " + " ".join(str(v) for v in sorted(self.sst.initial_psn)))
        for v, s in sorted(self.sst.associations.items()):
            lines.append(f"ASSOC {v} " + " ".join(str(x) for x in sorted(s)))
        for v, a in sorted(self.sst.reservations.items()):
            lines.append(f"STANDBY {v} {a}")
        lines.append("CL " + " ".join(str(a) for a in sorted(self.sst.crowded)))
        lines.append("POOL " + " ".join(str(t) for t in sorted(self.pool)))
        return "\n".join(lines) + "\n"


class TokenHandle:
    """Exclusive view of the token.  Use as a context manager."""

    def __init__(self, token: StatusToken, agent: int):
        self.token = token
        self.agent = agent
        self._live = True

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.release()

    def release(self) -> None:
        if self._live:
            self._live = False
            self.token._release(self)

    def _check(self):
        if not self._live:
            raise TokenError("handle used after release")

    @property
    def now(self) -> int:
        return self.token.clock

    @property
    def sst(self) -> SstState:
        return self.token.sst

    @property
    def pool(self) -> dict:
        return self.token.pool

    # -- reservation table -------------------------------------------------------

    def busy(self, resource: tuple, exclude: int | None = None) -> list[tuple[int, float]]:
        """Sorted intervals held on ``resource`` by agents other than ``exclude``."""
        entries = self.token.rt.get(resource)
        if not entries:
            return []
        return [(e.start, e.end) for e in entries if e.agent != exclude]

    def busy_view(self, agent: int):
        return lambda res: self.busy(res, agent)

    def reserve_plan(self, agent: int, plan: Plan) -> None:
        """Replace the agent's reservations with ``plan``'s occupancy."""
        self._check()
        rt = self.token.rt
        new = plan_entries(plan)
        for e in new:
            for other in rt.get(e.resource, ()):
                if other.agent != agent and other.overlaps(e.start, e.end):
                    raise ConflictError(e, other)
        tok = self.token
        for e in tok.by_agent.pop(agent, ()):
            tok._discard(e)
        for e in new:
            tok._insert(e)
        self.token.termini[agent] = plan.terminal.node

    def last_pass_time(self, v: int, agent: int | None = None) -> float:
        """Latest end of another agent's interval on ``v``; the clock if none."""
        latest = self.now
        for e in self.token.rt.get(("n", v), ()):
            if e.agent != agent and e.end > latest:
                latest = e.end
        return latest

    def is_open(self, v: int, agent: int | None = None) -> bool:
        """True unless ``v`` ends another agent's plan or is someone's standby node."""
        for a, node in self.token.termini.items():
            if node == v and a != agent:
                return False
        holder = self.token.sst.reservations.get(v)
        return holder is None or holder == agent

    def terminus_of(self, agent: int) -> int | None:
        return self.token.termini.get(agent)

    # -- task execution status table ------------------------------------------

    def test_add(self, task, agent: int) -> None:
        self._check()
        self.token.test.add(TestEntry(task.id, task.load_node, agent))
        self.token.test.add(TestEntry(task.id, task.unload_node, agent))

    def test_remove_on_arrival(self, agent: int, node: int) -> TestEntry:
        self._check()
        for e in sorted(self.token.test):
            if e.agent == agent and e.node == node:
                self.token.test.remove(e)
                return e
        raise TokenError(f"no TEST entry for agent {agent} at node {node}")

    def test_count(self, node: int, exclude: int | None = None) -> int:
        return sum(1 for e in self.token.test if e.node == node and e.agent != exclude)

    def executing_tasks(self) -> set[int]:
        return {e.task for e in self.token.test}

    def test_nodes(self, exclude: int | None = None) -> set[int]:
        return {e.node for e in self.token.test if e.agent != exclude}

    # -- standby-node status table ---------------------------------------------

    def reserve_standby(self, v: int, agent: int) -> None:
        self._check()
        sst = self.token.sst
        if v in sst.reservations:
            raise TokenError(f"standby node {v} already held by agent {sst.reservations[v]}")
        if sst.held_by(agent) is not None:
            raise TokenError(f"agent {agent} already holds standby node {sst.held_by(agent)}")
        if v not in potential_standby_nodes(self.token.g, sst.removed):
            raise TokenError(f"node {v} is not a potential standby node of the current graph")
        sst.reservations[v] = agent

    def release_standby(self, v: int, agent: int) -> None:
        self._check()
        sst = self.token.sst
        if sst.reservations.get(v) != agent:
            raise TokenError(f"agent {agent} does not hold standby node {v}")
        del sst.reservations[v]

    def crowded_list_add(self, agent: int) -> None:
        self.token.sst.crowded.add(agent)

    def crowded_list_remove(self, agent: int) -> None:
        self.token.sst.crowded.discard(agent)
