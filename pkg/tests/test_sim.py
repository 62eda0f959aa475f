import heapq
import math
from collections import Counter

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import grid_env
from sbda.graph import LOAD, UNLOAD
from sbda.kinematics import MOVE, ROTATE, WAIT, ActionStep
from sbda.planner import SbdaParams
from sbda.sim import HTE, SBDA, Scenario, format_scenario, generate_tasks, initial_parks, parse_scenario, run_trial
from sbda.trace import EventTrace, validate_trace
from test_planner import SWAP_ROWS, task


@pytest.fixture(scope="module")
def swap_env():
    return grid_env(SWAP_ROWS, "swap")


def test_generated_tasks_respect_capabilities(env1, env2):
    for g in (env1, env2):
        tasks = generate_tasks(g, 200, seed=5)
        assert [t.id for t in tasks] == list(range(200))
        for t in tasks:
            assert LOAD in g.nodes[t.load_node].capability
            assert UNLOAD in g.nodes[t.unload_node].capability
            assert t.load_node != t.unload_node
            assert t.load[1] == g.service_orientation(t.load_node)
        assert generate_tasks(g, 200, seed=5) == tasks
        assert generate_tasks(g, 200, seed=6) != tasks


def test_env2_task_endpoints_are_uniform(env2):
    n = 6000
    tasks = generate_tasks(env2, n, seed=11)
    assert len(env2.pickup_nodes) == 2 and len(env2.delivery_nodes) == 6
    for nodes, picked, critical in ((env2.pickup_nodes, [t.load_node for t in tasks], 10.83),
                                    (env2.delivery_nodes, [t.unload_node for t in tasks], 20.52)):
        counts = Counter(picked)
        assert set(counts) == set(nodes)
        expected = n / len(nodes)
        chi2 = sum((counts[v] - expected) ** 2 / expected for v in nodes)
        assert chi2 < critical  # p = 0.001


def test_initial_parks(env1):
    parks = initial_parks(env1, 30, seed=4)
    assert len(set(parks)) == 30
    assert set(parks) <= set(env1.parking_nodes)
    assert initial_parks(env1, 30, seed=4) == parks


def test_scenario_validation(env1):
    with pytest.raises(ValueError):
        Scenario("env1", 37).validate(env1)
    with pytest.raises(ValueError):
        Scenario("env1", 0).validate(env1)
    with pytest.raises(ValueError):
        Scenario("env1", 2, method="cbs").validate(env1)


@pytest.mark.parametrize("method", [SBDA, HTE])
def test_single_task_schedule(swap_env, method):
    # park 10 -> bay 0: forward 1, turn, 1, turn, 2, turn, 2, turn, 2 = 160 ticks,
    # load 20, bay 0 -> bay 1: back 2, turn, 4, turn, 2 = 120 ticks, unload 20
    m = run_trial(Scenario("swap", 1, method=method), swap_env, tasks=[task(0, 0, 1)], parks=[10])
    assert m.completed
    assert m.makespan == 320
    assert m.operational_times == [320]
    assert validate_trace(m.trace, swap_env) == []


def fastest_leg(g, src, o, dst, o_dst):
    """Dijkstra over (node, orientation) with the action durations; returns (ticks, final orientation)."""
    from sbda.kinematics import edge_direction

    dist = {(src, o): 0}
    heap = [(0, src, o)]
    while heap:
        t, u, h = heapq.heappop(heap)
        if t > dist[(u, h)]:
            continue
        if u == dst and (o_dst is None or h == o_dst):
            return t, h
        nxt = [((u, (h + 90) % 360), 20), ((u, (h - 90) % 360), 20)]
        for v, length in g.adj[u].items():
            d = edge_direction(g, u, v)
            if h in (d, (d + 180) % 360) and (v == dst or v not in g.endpoints):
                nxt.append(((v, h), 10 * length))
        for key, c in nxt:
            if t + c < dist.get(key, math.inf):
                dist[key] = t + c
                heapq.heappush(heap, (t + c, *key))
    raise AssertionError("unreachable")


@pytest.mark.parametrize("method", [SBDA, HTE])
def test_single_agent_makespan_is_sum_of_legs(env1, method):
    tasks = generate_tasks(env1, 8, seed=2)
    park = env1.parking_nodes[3]
    m = run_trial(Scenario("env1", 1, method=method), env1, tasks=tasks, parks=[park])
    # one agent does the tasks in nearest-load order; replay that order
    order = [tid for _, _, kind, tid in sorted(m.trace.events) if kind == "selected"]
    node, o, total = park, 0, 0
    for tid in order:
        t = tasks[tid]
        dt, o = fastest_leg(env1, node, o, t.load_node, t.load[1])
        total += dt + 20
        dt, o = fastest_leg(env1, t.load_node, o, t.unload_node, t.unload[1])
        total += dt + 20
        node = t.unload_node
    assert sorted(order) == list(range(8))
    assert m.makespan == total


@pytest.mark.parametrize("method", [SBDA, HTE])
def test_trials_are_deterministic(env1, method):
    sc = Scenario("env1", 8, 25, seed=9, method=method)
    a, b = run_trial(sc, env1), run_trial(sc, env1)
    assert a.makespan == b.makespan
    assert a.trace.to_text() == b.trace.to_text()


@settings(max_examples=12, deadline=None)
@given(st.sampled_from(["env1", "env2"]), st.integers(1, 30), st.integers(0, 10**6), st.sampled_from([SBDA, HTE]),
       st.sampled_from([0, 4, 8, 12]))
def test_random_trials_complete_without_conflicts(env_name, agents, seed, method, alpha):
    from sbda.graph import builtin_env

    g = builtin_env(env_name)
    m = run_trial(Scenario(env_name, agents, 20, seed, method, SbdaParams(alpha=alpha)), g)
    assert m.completed
    assert len(m.operational_times) == 20
    assert validate_trace(m.trace, g) == []
    delivered = [tid for _, _, kind, tid in m.trace.events if kind == "delivered"]
    assert sorted(delivered) == list(range(20))


# -- validator ------------------------------------------------------------------

def line_trace():
    """Agents 0 and 1 parked at the two ends of a three-node corridor 0-1-2 (unit edges, west-east)."""
    from sbda.graph import from_edges
    from sbda.graph import NodeRecord, EnvGraph, EdgeRecord

    g = EnvGraph({0: NodeRecord(0, (0, 0)), 1: NodeRecord(1, (1, 0)), 2: NodeRecord(2, (2, 0))},
                 [EdgeRecord(0, 1, 1), EdgeRecord(1, 2, 1)])
    tr = EventTrace(env="line", agents={0: (0, 90), 1: (2, 90)})
    return g, tr


def test_validator_accepts_a_clean_trace():
    g, tr = line_trace()
    tr.steps += [(0, ActionStep(MOVE, 0, 10, 0, 90, 1)), (0, ActionStep(MOVE, 10, 20, 1, 90, 0))]
    assert validate_trace(tr, g) == []


def test_validator_flags_head_on_swap():
    g, tr = line_trace()
    tr.agents[1] = (1, 90)
    tr.steps += [(0, ActionStep(MOVE, 0, 10, 0, 90, 1)), (1, ActionStep(MOVE, 0, 10, 1, 90, 0))]
    kinds = {v.kind for v in validate_trace(tr, g, require_complete=False)}
    assert "edge-conflict" in kinds


def test_validator_flags_shared_node():
    g, tr = line_trace()
    tr.steps += [(0, ActionStep(MOVE, 0, 10, 0, 90, 1)), (1, ActionStep(MOVE, 5, 15, 2, 90, 1))]
    kinds = {v.kind for v in validate_trace(tr, g, require_complete=False)}
    assert "node-conflict" in kinds


def test_validator_flags_kinematic_errors():
    g, tr = line_trace()
    tr.steps += [(0, ActionStep(MOVE, 0, 5, 0, 90, 1))]
    assert {v.kind for v in validate_trace(tr, g, require_complete=False)} == {"kinematics"}
    g, tr = line_trace()
    tr.agents[0] = (0, 0)
    tr.steps += [(0, ActionStep(MOVE, 0, 10, 0, 0, 1))]
    assert "kinematics" in {v.kind for v in validate_trace(tr, g, require_complete=False)}
    g, tr = line_trace()
    tr.steps += [(0, ActionStep(ROTATE, 3, 23, 1, 90, None, 0))]
    assert {v.kind for v in validate_trace(tr, g, require_complete=False)} == {"discontinuity"}


def mutate(trace_text: str, fn) -> EventTrace:
    tr = EventTrace.from_text(trace_text)
    fn(tr)
    return tr


def test_validator_catches_mutations_of_real_traces(env1):
    m = run_trial(Scenario("env1", 6, 15, seed=4), env1)
    text = m.trace.to_text()
    assert validate_trace(EventTrace.from_text(text), env1) == []

    def drop_last_unload(tr):
        k = max(i for i, (_, s) in enumerate(tr.steps) if s.kind == UNLOAD)
        del tr.steps[k]

    def wrong_orientation(tr):
        k = next(i for i, (_, s) in enumerate(tr.steps) if s.kind == LOAD)
        tr.tasks[tr.steps[k][1].task] = (lambda t: (t[0], (t[1] + 90) % 360) + t[2:])(tr.tasks[tr.steps[k][1].task])

    def stretch_wait(tr):
        # lengthen one agent's first wait-free move so it lands late: breaks time contiguity
        a, s = next((a, s) for a, s in tr.steps if s.kind == MOVE)
        tr.steps.remove((a, s))
        tr.steps.append((a, ActionStep(MOVE, s.start, s.end + 7, s.node, s.orientation, s.to_node)))

    def unload_twice(tr):
        a, s = next((a, s) for a, s in tr.steps if s.kind == UNLOAD)
        tr.steps.append((a, ActionStep(UNLOAD, s.end, s.end + 20, s.node, s.orientation, task=s.task)))

    for fn, kind in ((drop_last_unload, "incomplete"), (wrong_orientation, "service-pose"),
                     (stretch_wait, "kinematics"), (unload_twice, "task")):
        found = {v.kind for v in validate_trace(mutate(text, fn), env1)}
        assert kind in found, (fn.__name__, found)


def test_validator_catches_teleporting_agent(env1):
    m = run_trial(Scenario("env1", 6, 15, seed=4), env1)
    tr = EventTrace.from_text(m.trace.to_text())
    # move agent 1's whole history onto agent 0: two bodies now share one timeline
    tr.steps = [(0 if a == 1 else a, s) for a, s in tr.steps]
    assert validate_trace(tr, env1) != []


def test_trace_text_round_trip(swap_env):
    m = run_trial(Scenario("swap", 2, 4), swap_env, tasks=[task(0, 0, 1), task(1, 1, 0), task(2, 0, 1), task(3, 1, 0)],
                  parks=[10, 11])
    text = m.trace.to_text()
    assert EventTrace.from_text(text).to_text() == text
    with pytest.raises(ValueError):
        EventTrace.from_text("nonsense\n")
    with pytest.raises(ValueError):
        EventTrace.from_text(text.replace("STEP", "STPE", 1))


# -- scenario files ---------------------------------------------------------------

def test_scenario_round_trip():
    sc = Scenario("env2", 10, 50, 7, HTE, SbdaParams(alpha=4, beta=9, delta=50, cond1=(True, False, True), cond2=False),
                  trials=3)
    back = parse_scenario(format_scenario(sc))
    assert back == sc


@pytest.mark.parametrize("text", [
    "env env1\nagents 2\n",
    "sbda-scenario 1\nagents 2\n",
    "sbda-scenario 1\nenv env1\nagents 2\ncolour red\n",
    "sbda-scenario 1\nenv env1\nagents 2\nagents 3\n",
    "sbda-scenario 1\nenv env1\nagents 2\ncond1 1 1\n",
    "sbda-scenario 1\nenv env1\nagents 2\nalpha 30\n",
])
def test_bad_scenarios_are_rejected(text):
    with pytest.raises(ValueError):
        parse_scenario(text)


def test_scenario_comments_and_defaults():
    sc = parse_scenario("# demo\nsbda-scenario 1\nenv env1  # shipped\nagents 4\n")
    assert (sc.env, sc.agents, sc.tasks, sc.method, sc.params) == ("env1", 4, 100, SBDA, SbdaParams())
