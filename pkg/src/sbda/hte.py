"""Holding-task-endpoints baseline.

An agent only takes a task whose load and unload nodes are both free of
every executing task, plans straight to the load node and on to the unload
node in one go, and returns to its parking node when nothing qualifies.
Both endpoints of a task stay held in the task execution status table
until unloading completes, so at most |V_tsk|/2 tasks run at once when
every task has distinct load and unload nodes.
"""
from __future__ import annotations

from .graph import distances_from
from .kinematics import LOAD, UNLOAD, AgentPose, Plan, duration
from .planner import Act, AgentState, BasePlanner, Task
from .smt import TokenHandle


class HtePlanner(BasePlanner):
    name = "hte"
    release_load_early = False

    def __init__(self, *args, **kw):
        super().__init__(*args, **kw)
        # agent -> (held endpoints, pool size) of its last empty selection
        self._nothing_for: dict[int, tuple[frozenset, int]] = {}

    def held_endpoints(self, agent: AgentState, h: TokenHandle) -> set[int]:
        held = h.test_nodes(exclude=agent.id)
        held.update(v for a, v in h.token.termini.items() if a != agent.id and v in self.g.task_endpoints)
        return held

    def select_task(self, agent: AgentState, h: TokenHandle) -> Task | None:
        held = frozenset(self.held_endpoints(agent, h))
        if self._nothing_for.get(agent.id) == (held, len(h.pool)):
            # pool only shrinks, so the same size means the same pool: still nothing
            self._log(h.now, agent.id, "select", v_c=agent.pose.node, chosen=None)
            return None
        dist = distances_from(self.g, frozenset(), agent.pose.node)
        best = None
        for tid in sorted(h.pool):
            task = h.pool[tid]
            if task.load_node in held or task.unload_node in held:
                continue
            d = dist[task.load_node]
            if best is None or d < best[0]:
                best = (d, task)
        chosen = best[1] if best else None
        if chosen is None:
            self._nothing_for[agent.id] = (held, len(h.pool))
        self._log(h.now, agent.id, "select", v_c=agent.pose.node, chosen=chosen.id if chosen else None)
        return chosen

    def plan_task(self, agent: AgentState, h: TokenHandle, task: Task) -> Plan | None:
        """Path to the load node, the load itself, then the path to the unload node."""
        start = AgentPose(agent.pose.node, agent.pose.orientation, h.now)
        t_ld = duration(LOAD, timing=self.timing)
        leg1 = self.astar(agent, h, start, task.load_node, task.load[1], goal_hold=t_ld)
        if leg1 is None:
            return None
        leg1.append(LOAD, t_ld, task=task.id)
        leg2 = self.astar(agent, h, leg1.terminal, task.unload_node, task.unload[1])
        if leg2 is None:
            return None
        return leg1.extend(leg2)

    def _act(self, agent: AgentState, h: TokenHandle) -> Act:
        now = h.now
        events = []
        if agent.busy == LOAD:
            # mid-plan: loading finished, the rest of the plan continues
            if self.release_load_early:
                h.test_remove_on_arrival(agent.id, agent.task.load_node)
            self.finish_service(agent, events)
            return Act(None, agent.plan.end, events)
        if agent.busy == UNLOAD:
            if not self.release_load_early:
                h.test_remove_on_arrival(agent.id, agent.task.load_node)
            h.test_remove_on_arrival(agent.id, agent.task.unload_node)
            self.finish_service(agent, events)
        elif agent.task is not None and agent.pose.node == agent.task.unload_node:
            plan = self.service_plan(agent, h, UNLOAD)
            agent.busy = UNLOAD
            h.reserve_plan(agent.id, plan)
            return Act(plan, plan.end, events)

        v_c = agent.pose.node
        if h.pool:
            task = self.select_task(agent, h)
            if task is not None:
                self.assign(agent, task, h)
                plan = self.plan_task(agent, h, task)
                if plan is not None:
                    h.reserve_plan(agent.id, plan)
                    agent.busy = LOAD
                    events.append(("selected", task.id))
                    load_end = next(s.end for s in plan.steps if s.kind == LOAD)
                    return Act(plan, load_end, events)
                # give the task back and retry later
                h.test_remove_on_arrival(agent.id, task.load_node)
                h.test_remove_on_arrival(agent.id, task.unload_node)
                h.pool[task.id] = task
                agent.task = agent.phase = agent.selected_at = None
                self._log(now, agent.id, "plan-failed", task=task.id)
                return Act(None, now + self.poll, events)
        if v_c == agent.park:
            return Act(None, now + self.poll if h.pool else None, events)
        plan = self.astar(agent, h, AgentPose(v_c, agent.pose.orientation, now), agent.park)
        if plan is None:
            return Act(None, now + self.poll, events)
        h.reserve_plan(agent.id, plan)
        return Act(plan, plan.end, events)
