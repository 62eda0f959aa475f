"""Trial driver: scenario generation, the discrete-time loop and metrics.

Time advances in integer ticks but the loop jumps straight to the next tick
at which some agent has a decision to make; nothing else can change in
between.  Within a tick agents act in ascending id order, each under an
exclusive token acquisition.
"""
from __future__ import annotations

import heapq
import random
from dataclasses import dataclass, field

from .graph import EnvGraph, resolve_env
from .hte import HtePlanner
from .kinematics import DEFAULT_TIMING, AgentPose, Timing
from .planner import AgentState, SbdaParams, SbdaPlanner, Task
from .smt import StatusToken
from .trace import EventTrace

SBDA = "sbda"
HTE = "hte"
TICK_CAP = 10**6


class NonTermination(RuntimeError):
    pass


@dataclass
class Scenario:
    env: str
    agents: int
    tasks: int = 100
    seed: int = 0
    method: str = SBDA
    params: SbdaParams = field(default_factory=SbdaParams)
    trials: int = 1
    tick_cap: int = TICK_CAP

    def validate(self, g: EnvGraph) -> None:
        if self.method not in (SBDA, HTE):
            raise ValueError(f"unknown method {self.method!r}")
        if self.agents < 1:
            raise ValueError("need at least one agent")
        if self.agents > len(g.parking_nodes):
            raise ValueError(f"{self.agents} agents but only {len(g.parking_nodes)} parking nodes")
        if self.tasks < 0:
            raise ValueError("task count must be non-negative")


@dataclass
class TrialMetrics:
    makespan: int
    runtime: float
    operational_times: list[int]
    completed: bool
    end_tick: int
    trace: EventTrace | None = None
    decisions: list | None = None
    max_concurrent_tasks: int = 0
    max_standby: int = 0
    standby_used: frozenset = frozenset()

    @property
    def mean_operational_time(self) -> float:
        ot = self.operational_times
        return sum(ot) / len(ot) if ot else 0.0


def generate_tasks(g: EnvGraph, n: int, seed: int) -> list[Task]:
    """``n`` tasks with load/unload drawn uniformly from capable endpoints."""
    pickups, deliveries = g.pickup_nodes, g.delivery_nodes
    if n and (not pickups or not deliveries):
        raise ValueError("environment lacks pickup or delivery endpoints")
    if n and len(pickups) == 1 and set(deliveries) <= set(pickups):
        raise ValueError("no pickup/delivery pair with distinct nodes")
    rng = random.Random(seed)
    tasks = []
    for j in range(n):
        ld = rng.choice(pickups)
        ul = rng.choice([d for d in deliveries if d != ld])
        tasks.append(Task(j, (ld, g.service_orientation(ld)), (ul, g.service_orientation(ul)), f"m{j}"))
    return tasks


def initial_parks(g: EnvGraph, m: int, seed: int) -> list[int]:
    rng = random.Random(seed * 7919 + 17)
    return rng.sample(list(g.parking_nodes), m)


def make_planner(method: str, g: EnvGraph, params: SbdaParams, timing: Timing, log):
    if method == SBDA:
        return SbdaPlanner(g, params, timing, log=log)
    if method == HTE:
        return HtePlanner(g, timing, params.poll, log=log)
    raise ValueError(f"unknown method {method!r}")


def run_trial(scenario: Scenario, g: EnvGraph | None = None, *, tasks: list[Task] | None = None,
              parks: list[int] | None = None, timing: Timing = DEFAULT_TIMING,
              record_trace: bool = True, log_decisions: bool = False, raise_on_cap: bool = False) -> TrialMetrics:
    g = g or resolve_env(scenario.env)
    scenario.validate(g)
    if tasks is None:
        tasks = generate_tasks(g, scenario.tasks, scenario.seed)
    if parks is None:
        parks = initial_parks(g, scenario.agents, scenario.seed)
    log = [] if log_decisions else None
    planner = make_planner(scenario.method, g, scenario.params, timing, log)
    token = StatusToken(g, alpha=scenario.params.alpha, tasks=tasks)
    agents = [AgentState(i, p, AgentPose(p, 0, 0)) for i, p in enumerate(parks)]
    trace = EventTrace(env=g.name) if record_trace else None
    if trace is not None:
        trace.agents = {a.id: (a.park, 0) for a in agents}
        trace.tasks = {t.id: (t.load[0], t.load[1], t.unload[0], t.unload[1], t.material) for t in tasks}

    selected_at: dict[int, int] = {}
    op_times = []
    makespan = 0
    max_conc = 0
    max_standby = 0
    standby_used: set[int] = set()
    heap = [(0, a.id) for a in agents]
    heapq.heapify(heap)
    now = 0
    completed = True
    while heap:
        now, i = heapq.heappop(heap)
        if now > scenario.tick_cap:
            completed = False
            break
        agent = agents[i]
        if agent.plan is not None and now >= agent.plan.end:
            term = agent.plan.terminal
            agent.pose = AgentPose(term.node, term.orientation, now)
        else:
            agent.pose = AgentPose(agent.pose.node, agent.pose.orientation, now)
        with token.acquire(i, now) as h:
            act = planner.act(agent, h)
            conc = len(h.executing_tasks())
            if conc > max_conc:
                max_conc = conc
            if h.sst.reservations:
                standby_used.update(h.sst.reservations)
                max_standby = max(max_standby, len(h.sst.reservations))
        for kind, tid in act.events:
            if trace is not None:
                trace.events.append((now, i, kind, tid))
            if kind == "selected":
                selected_at[tid] = now
            elif kind == "delivered":
                op_times.append(now - selected_at[tid])
                makespan = max(makespan, now)
        if act.plan is not None:
            agent.plan = act.plan
            if trace is not None:
                trace.add_plan(act.plan)
        if act.wake is not None:
            heapq.heappush(heap, (max(act.wake, now + 1), i))

    if completed:
        completed = (
            not token.pool
            and not token.test
            and len(op_times) == len(tasks)
            and all(a.pose.node == a.park and a.task is None for a in agents)
        )
    if not completed and raise_on_cap:
        raise NonTermination(f"{scenario} did not complete by tick {now}")
    return TrialMetrics(
        makespan=makespan,
        runtime=planner.cpu,
        operational_times=op_times,
        completed=completed,
        end_tick=now,
        trace=trace,
        decisions=log,
        max_concurrent_tasks=max_conc,
        max_standby=max_standby,
        standby_used=frozenset(standby_used),
    )


SCENARIO_HEADER = "sbda-scenario 1"


def parse_scenario(text: str) -> Scenario:
    """Read a scenario file: a version line, then ``key value`` lines.

    Keys: env, method, agents, tasks, seed, trials, alpha, beta, delta,
    cond1 (three 0/1 flags), cond2 (0/1), poll, tick_cap.  ``#`` starts a
    comment.
    """
    lines = [ln.split("#", 1)[0].strip() for ln in text.splitlines()]
    lines = [ln for ln in lines if ln]
    if not lines or lines[0] != SCENARIO_HEADER:
        raise ValueError(f"scenario must start with {SCENARIO_HEADER!r}")
    kv: dict[str, str] = {}
    for ln in lines[1:]:
        key, _, value = ln.partition(" ")
        if key in kv:
            raise ValueError(f"duplicate scenario key {key!r}")
        kv[key] = value.strip()
    if "env" not in kv or "agents" not in kv:
        raise ValueError("scenario needs at least 'env' and 'agents'")
    params = {}
    for key, conv in (("alpha", float), ("beta", float), ("delta", int), ("poll", int)):
        if key in kv:
            params[key] = conv(kv.pop(key))
    if "cond1" in kv:
        flags = kv.pop("cond1").split()
        if len(flags) != 3 or any(f not in ("0", "1") for f in flags):
            raise ValueError("cond1 takes three 0/1 flags")
        params["cond1"] = tuple(f == "1" for f in flags)
    if "cond2" in kv:
        params["cond2"] = kv.pop("cond2") == "1"
    sc = Scenario(
        env=kv.pop("env"),
        agents=int(kv.pop("agents")),
        tasks=int(kv.pop("tasks", 100)),
        seed=int(kv.pop("seed", 0)),
        method=kv.pop("method", SBDA),
        params=SbdaParams(**params),
        trials=int(kv.pop("trials", 1)),
        tick_cap=int(kv.pop("tick_cap", TICK_CAP)),
    )
    if kv:
        raise ValueError(f"unknown scenario keys: {sorted(kv)}")
    return sc


def format_scenario(sc: Scenario) -> str:
    p = sc.params
    return "\n".join([
        SCENARIO_HEADER,
        f"env {sc.env}",
        f"method {sc.method}",
        f"agents {sc.agents}",
        f"tasks {sc.tasks}",
        f"seed {sc.seed}",
        f"trials {sc.trials}",
        f"alpha {p.alpha:g}",
        f"beta {p.beta:g}",
        f"delta {p.delta}",
        "cond1 " + " ".join("1" if c else "0" for c in p.cond1),
        f"cond2 {int(p.cond2)}",
        f"poll {p.poll}",
        f"tick_cap {sc.tick_cap}",
    ]) + "\n"
