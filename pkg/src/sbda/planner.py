"""Standby-based deadlock avoidance: task selection and destination decision.

Agents act only at decision points (arrival at a plan's terminal node,
completion of a load/unload, or a poll while standing still), always while
holding the token.  ``SbdaPlanner.act`` runs the whole pipeline for one
agent and returns the committed plan, if any, and when to wake it next.
"""
from __future__ import annotations

import time
from dataclasses import dataclass, field

from .graph import (
    EnvGraph,
    distances_from,
    free_standby_nodes,
    potential_standby_nodes,
    shortest_distance,
)
from .kinematics import (
    DEFAULT_TIMING,
    LOAD,
    UNLOAD,
    AgentPose,
    Plan,
    Timing,
    duration,
    space_time_astar,
)
from .smt import TokenHandle

TO_LOAD = "to-load"
TO_UNLOAD = "to-unload"

POLL_INTERVAL = 10


@dataclass(frozen=True)
class Task:
    id: int
    load: tuple[int, int]  # (node, orientation)
    unload: tuple[int, int]
    material: str

    def __post_init__(self):
        if self.load[0] == self.unload[0]:
            raise ValueError(f"task {self.id}: load and unload node coincide")

    @property
    def load_node(self) -> int:
        return self.load[0]

    @property
    def unload_node(self) -> int:
        return self.unload[0]


@dataclass
class SbdaParams:
    alpha: float = 8
    delta: int = 100
    beta: float = 20
    # Cond. 1 items (1)-(3) and Cond. 2 as a whole; False disables the check
    cond1: tuple[bool, bool, bool] = (True, True, True)
    cond2: bool = True
    poll: int = POLL_INTERVAL

    def __post_init__(self):
        self.cond1 = tuple(bool(c) for c in self.cond1)
        if len(self.cond1) != 3:
            raise ValueError("cond1 needs three flags")
        if self.alpha < 0 or self.delta < 0:
            raise ValueError("alpha and delta must be non-negative")
        if not self.beta > self.alpha:
            raise ValueError(f"beta ({self.beta}) must exceed alpha ({self.alpha})")
        if self.poll < 1:
            raise ValueError("poll interval must be positive")


@dataclass
class AgentState:
    id: int
    park: int
    pose: AgentPose
    task: Task | None = None
    phase: str | None = None
    busy: str | None = None  # LOAD/UNLOAD while that action runs
    carried: str | None = None
    plan: Plan | None = None
    selected_at: int | None = None

    def target(self) -> int:
        if self.task is None:
            return self.park
        return self.task.load_node if self.phase == TO_LOAD else self.task.unload_node

    def target_orientation(self) -> int | None:
        if self.task is None:
            return None
        return self.task.load[1] if self.phase == TO_LOAD else self.task.unload[1]


@dataclass
class Act:
    plan: Plan | None
    wake: int | None
    events: list = field(default_factory=list)


@dataclass
class Decision:
    node: int
    reason: str  # direct | stay | standby | free-standby | park
    crowded: bool = False
    conds: dict = field(default_factory=dict)


class BasePlanner:
    """Shared plumbing: timing, CPU accounting, decision log, service plans."""

    name = "base"

    def __init__(self, g: EnvGraph, timing: Timing = DEFAULT_TIMING, poll: int = POLL_INTERVAL, log: list | None = None):
        self.g = g
        self.timing = timing
        self.poll = poll
        self.log = log
        self.cpu = 0.0

    def _log(self, tick, agent, op, **kw):
        if self.log is not None:
            self.log.append((tick, agent, op, kw))

    def assign(self, agent: AgentState, task: Task, h: TokenHandle) -> None:
        del h.pool[task.id]
        h.test_add(task, agent.id)
        agent.task = task
        agent.phase = TO_LOAD
        agent.selected_at = h.now

    def service_plan(self, agent: AgentState, h: TokenHandle, kind: str) -> Plan:
        p = agent.pose
        if p.node != agent.target() or p.orientation != agent.target_orientation():
            raise AssertionError(f"agent {agent.id} cannot {kind} at {p}")
        plan = Plan(agent.id, AgentPose(p.node, p.orientation, h.now))
        plan.append(kind, duration(kind, timing=self.timing), task=agent.task.id)
        return plan

    def finish_service(self, agent: AgentState, events: list) -> None:
        kind, agent.busy = agent.busy, None
        if kind == LOAD:
            agent.carried = agent.task.material
            agent.phase = TO_UNLOAD
            events.append(("loaded", agent.task.id))
        else:
            events.append(("delivered", agent.task.id))
            agent.task = agent.phase = agent.carried = None
            agent.selected_at = None

    def astar(self, agent: AgentState, h: TokenHandle, start: AgentPose, goal: int, goal_orientation=None,
              removed=frozenset(), goal_hold=None) -> Plan | None:
        blocked = self.g.endpoints - {start.node, goal}
        return space_time_astar(
            self.g, removed, h.busy_view(agent.id), start, goal,
            goal_orientation=goal_orientation, goal_hold=goal_hold,
            agent=agent.id, blocked=blocked, timing=self.timing,
        )

    def act(self, agent: AgentState, h: TokenHandle) -> Act:
        t = time.perf_counter()
        try:
            return self._act(agent, h)
        finally:
            self.cpu += time.perf_counter() - t

    def _act(self, agent, h) -> Act:
        raise NotImplementedError


class SbdaPlanner(BasePlanner):
    name = "sbda"

    def __init__(self, g: EnvGraph, params: SbdaParams | None = None, timing: Timing = DEFAULT_TIMING,
                 log: list | None = None):
        params = params or SbdaParams()
        super().__init__(g, timing, params.poll, log)
        self.params = params

    # -- task selection ----------------------------------------------------------

    def select_task(self, agent: AgentState, h: TokenHandle) -> Task | None:
        """Closest eligible task by load-node distance in G_t, or None."""
        p = self.params
        g = self.g
        sst = h.sst
        v_c = agent.pose.node
        now = h.now
        c1, c2, c3 = p.cond1
        if c1 and v_c == agent.park and sst.crowded:
            self._log(now, agent.id, "select", v_c=v_c, chosen=None, why="crowded")
            return None
        removed = sst.removed
        psn_t = potential_standby_nodes(g, removed)
        load_ok: dict[int, bool] = {}
        unload_ok: dict[int, bool] = {}

        def s_t(v):
            return sst.associations.get(v, frozenset()) & psn_t

        dist = distances_from(g, sst.removed_except(v_c), v_c)
        best = None
        for tid in sorted(h.pool):
            task = h.pool[tid]
            ld, ul = task.load_node, task.unload_node
            if c2:
                ok = load_ok.get(ld)
                if ok is None:
                    ok = h.is_open(ld, agent.id) or any(
                        h.last_pass_time(v, agent.id) - now <= p.delta for v in s_t(ld)
                    )
                    load_ok[ld] = ok
                if not ok:
                    continue
            if c3:
                ok = unload_ok.get(ul)
                if ok is None:
                    ok = len(s_t(ul)) + 1 > h.test_count(ul, exclude=agent.id)
                    unload_ok[ul] = ok
                if not ok:
                    continue
            d = dist.get(ld, float("inf"))
            if best is None or d < best[0]:
                best = (d, task)
        chosen = best[1] if best else None
        self._log(now, agent.id, "select", v_c=v_c, chosen=chosen.id if chosen else None,
                  load_ok=load_ok, unload_ok=unload_ok)
        return chosen

    # -- destination --------------------------------------------------------------

    def decide_dest(self, agent: AgentState, v_d: int, v_c: int, h: TokenHandle) -> Decision:
        """Where to head next for ultimate destination ``v_d``.

        Removes the agent from the crowded list immediately; standby
        reservations and re-listing are applied by ``apply_decision`` once a
        plan to the chosen node exists.
        """
        p = self.params
        g = self.g
        i = agent.id
        now = h.now
        sst = h.sst
        h.crowded_list_remove(i)
        s_vd = sst.associations.get(v_d, frozenset())
        conds = {}
        if p.cond2:
            conds["near"] = shortest_distance(g, frozenset(), v_c, v_d) <= p.beta
            conds["no_queue"] = not any(a != i for v, a in sst.reservations.items() if v in s_vd)
            conds["park"] = v_d == agent.park
            direct = any(conds.values())
        else:
            direct = True
        conds["open"] = h.is_open(v_d, i)
        if direct and conds["open"]:
            return self._decided(now, i, v_d, v_c, Decision(v_d, "direct", conds=conds))
        if v_c in s_vd:
            return self._decided(now, i, v_d, v_c, Decision(v_c, "stay", conds=conds))
        removed_star = sst.removed_except(v_c)
        candidates = [v for v in potential_standby_nodes(g, removed_star)
                      if h.last_pass_time(v, i) - now <= p.delta]
        near = [v for v in candidates if v in s_vd]
        if near:
            v = min(near, key=lambda v: (h.last_pass_time(v, i) - now, v))
            return self._decided(now, i, v_d, v_c, Decision(v, "standby", conds=conds))
        free = free_standby_nodes(g, removed_star, p.alpha)
        far = [v for v in candidates if v in free]
        if far:
            dist = distances_from(g, removed_star, v_d)
            v = min(far, key=lambda v: (dist.get(v, float("inf")), v))
            return self._decided(now, i, v_d, v_c, Decision(v, "free-standby", crowded=True, conds=conds))
        return self._decided(now, i, v_d, v_c, Decision(agent.park, "park", conds=conds))

    def _decided(self, now, i, v_d, v_c, dec: Decision) -> Decision:
        self._log(now, i, "dest", v_d=v_d, v_c=v_c, chosen=dec.node, reason=dec.reason, conds=dec.conds)
        return dec

    def apply_decision(self, agent: AgentState, h: TokenHandle, dec: Decision) -> None:
        held = h.sst.held_by(agent.id)
        if dec.node != held:
            if held is not None:
                h.release_standby(held, agent.id)
            if dec.reason in ("standby", "free-standby"):
                h.reserve_standby(dec.node, agent.id)
        if dec.crowded:
            h.crowded_list_add(agent.id)

    # -- agent pipeline ------------------------------------------------------------

    def _start_service(self, agent: AgentState, h: TokenHandle, events: list) -> Act:
        h.test_remove_on_arrival(agent.id, agent.pose.node)
        kind = LOAD if agent.phase == TO_LOAD else UNLOAD
        plan = self.service_plan(agent, h, kind)
        agent.busy = kind
        h.reserve_plan(agent.id, plan)
        return Act(plan, plan.end, events)

    def _act(self, agent: AgentState, h: TokenHandle) -> Act:
        now = h.now
        events = []
        if agent.busy is not None:
            self.finish_service(agent, events)
        elif agent.task is not None and agent.pose.node == agent.target():
            return self._start_service(agent, h, events)

        v_c = agent.pose.node
        if agent.task is None:
            if h.pool:
                task = self.select_task(agent, h)
                if task is not None:
                    self.assign(agent, task, h)
                    events.append(("selected", task.id))
            if agent.task is None and v_c == agent.park:
                return Act(None, now + self.poll if h.pool else None, events)
            if agent.task is not None and v_c == agent.target():
                # the new load node is where the last delivery ended
                return self._start_service(agent, h, events)

        v_d = agent.target()
        dec = self.decide_dest(agent, v_d, v_c, h)
        if dec.node == v_c:
            self.apply_decision(agent, h, dec)
            return Act(None, now + self.poll, events)
        goal_o = agent.target_orientation() if dec.node == v_d else None
        removed = h.sst.removed_except(v_c, dec.node)
        plan = self.astar(agent, h, AgentPose(v_c, agent.pose.orientation, now), dec.node, goal_o, removed)
        if plan is None:
            self._log(now, agent.id, "plan-failed", goal=dec.node)
            return Act(None, now + self.poll, events)
        self.apply_decision(agent, h, dec)
        h.reserve_plan(agent.id, plan)
        return Act(plan, plan.end, events)
