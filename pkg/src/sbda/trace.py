"""Event traces and the post-hoc conflict validator.

The validator never looks at a reservation table.  It rebuilds every
agent's occupancy from the recorded action steps alone: an agent sits on a
node from arrival to departure (idle gaps included), occupies an edge for
the whole traversal, and stays on its last node forever.  Two agents on the
same node or edge at a common tick is a conflict.
"""
from __future__ import annotations

from collections import defaultdict
from dataclasses import dataclass, field
from pathlib import Path

from .graph import EnvGraph
from .kinematics import LOAD, MOVE, ROTATE, UNLOAD, WAIT, ActionStep, Timing, DEFAULT_TIMING, duration, edge_direction, rotation_between

TRACE_HEADER = "sbda-trace 1"
INF = float("inf")


@dataclass
class EventTrace:
    env: str
    agents: dict[int, tuple[int, int]] = field(default_factory=dict)  # id -> (park, orientation)
    tasks: dict[int, tuple] = field(default_factory=dict)  # id -> (ld, o_ld, ul, o_ul, material)
    steps: list[tuple[int, ActionStep]] = field(default_factory=list)
    events: list[tuple[int, int, str, int]] = field(default_factory=list)  # (tick, agent, kind, task)

    def add_plan(self, plan) -> None:
        for s in plan.steps:
            self.steps.append((plan.agent, s))

    def ordered_steps(self):
        return sorted(self.steps, key=lambda x: (x[1].start, x[0], x[1].end))

    def to_text(self) -> str:
        out = [TRACE_HEADER, f"ENV {self.env}"]
        for a, (park, o) in sorted(self.agents.items()):
            out.append(f"AGENT {a} {park} {o}")
        for t, (ld, old, ul, oul, mat) in sorted(self.tasks.items()):
            out.append(f"TASK {t} {ld} {old} {ul} {oul} {mat}")
        for a, s in self.ordered_steps():
            out.append(s.to_line(a))
        for tick, a, kind, task in sorted(self.events, key=lambda e: (e[0], e[1])):
            out.append(f"EVENT {tick} {a} {kind} {task}")
        return "\n".join(out) + "\n"

    def save(self, path: str | Path) -> None:
        Path(path).write_text(self.to_text())

    @classmethod
    def from_text(cls, text: str) -> "EventTrace":
        lines = [ln.strip() for ln in text.splitlines() if ln.strip()]
        if not lines or lines[0] != TRACE_HEADER:
            raise ValueError(f"missing header {TRACE_HEADER!r}")
        tr = cls(env="")
        for ln in lines[1:]:
            parts = ln.split()
            tag = parts[0]
            if tag == "ENV":
                tr.env = parts[1]
            elif tag == "AGENT":
                tr.agents[int(parts[1])] = (int(parts[2]), int(parts[3]))
            elif tag == "TASK":
                tr.tasks[int(parts[1])] = (int(parts[2]), int(parts[3]), int(parts[4]), int(parts[5]), parts[6])
            elif tag == "STEP":
                tr.steps.append(ActionStep.from_fields(parts[1:]))
            elif tag == "EVENT":
                tr.events.append((int(parts[1]), int(parts[2]), parts[3], int(parts[4])))
            else:
                raise ValueError(f"unknown trace record {tag!r}")
        return tr

    @classmethod
    def load(cls, path: str | Path) -> "EventTrace":
        return cls.from_text(Path(path).read_text())


@dataclass(frozen=True)
class Violation:
    kind: str
    tick: float
    agents: tuple
    detail: str

    def __str__(self):
        return f"{self.kind} at t={self.tick} agents={list(self.agents)}: {self.detail}"


def _occupancy(trace: EventTrace, g: EnvGraph, timing: Timing, problems: list):
    """Per-resource (start, end, agent) intervals rebuilt from the steps."""
    occ = defaultdict(list)
    per_agent = defaultdict(list)
    for a, s in trace.steps:
        per_agent[a].append(s)
    final = {}
    for a, (park, o0) in sorted(trace.agents.items()):
        node, orient, tick, since = park, o0, 0, 0
        for s in sorted(per_agent.get(a, []), key=lambda s: (s.start, s.end)):
            if s.start < tick or s.node != node or s.orientation != orient:
                problems.append(Violation("discontinuity", s.start, (a,), f"step {s} does not follow {node}/{orient}@{tick}"))
                break
            if s.kind == MOVE:
                if s.to_node not in g.adj.get(s.node, {}):
                    problems.append(Violation("kinematics", s.start, (a,), f"no edge {s.node}-{s.to_node}"))
                    break
                heading = edge_direction(g, s.node, s.to_node, timing.D)
                if orient not in (heading, (heading + 180) % 360):
                    problems.append(Violation("kinematics", s.start, (a,), f"orientation {orient} off edge heading {heading}"))
                want = duration(MOVE, g.length(s.node, s.to_node), timing)
            elif s.kind == ROTATE:
                want = duration(ROTATE, rotation_between(s.orientation, s.to_orientation), timing)
            elif s.kind == WAIT:
                want = s.end - s.start
            elif s.kind in (LOAD, UNLOAD):
                want = duration(s.kind, timing=timing)
            else:
                problems.append(Violation("kinematics", s.start, (a,), f"unknown action {s.kind}"))
                break
            if s.end - s.start != want:
                problems.append(Violation("kinematics", s.start, (a,), f"{s.kind} lasted {s.end - s.start}, expected {want}"))
            if s.kind == MOVE:
                occ[("n", node)].append((since, s.start, a))
                u, v = sorted((s.node, s.to_node))
                occ[("e", u, v)].append((s.start, s.end, a))
                node, since = s.to_node, s.end
            orient = s.final_orientation
            tick = s.end
        occ[("n", node)].append((since, INF, a))
        final[a] = node
    return occ, final


def _first_overlap(intervals):
    """First pair of intervals from different agents sharing a tick."""
    intervals = sorted(intervals)
    # the two latest-ending intervals seen so far, from distinct agents
    top = []
    for s, e, a in intervals:
        for te, ta in top:
            if ta != a and s <= te:
                return s, (ta, a)
        top.append((e, a))
        top.sort(reverse=True)
        seen, keep = set(), []
        for te, ta in top:
            if ta not in seen:
                seen.add(ta)
                keep.append((te, ta))
            if len(keep) == 2:
                break
        top = keep
    return None


def validate_trace(trace: EventTrace, g: EnvGraph, timing: Timing = DEFAULT_TIMING,
                   require_complete: bool = True) -> list[Violation]:
    """All violations found, ordered by tick; an empty list means the trace is valid."""
    problems: list[Violation] = []
    occ, final = _occupancy(trace, g, timing, problems)
    for res, ivs in occ.items():
        hit = _first_overlap(ivs)
        if hit:
            what = "node" if res[0] == "n" else "edge"
            problems.append(Violation(f"{what}-conflict", hit[0], tuple(sorted(hit[1])), f"on {what} {res[1:]}"))

    loads, unloads = {}, {}
    carrying = defaultdict(list)
    for a, s in trace.ordered_steps():
        if s.kind not in (LOAD, UNLOAD):
            continue
        spec = trace.tasks.get(s.task)
        if spec is None:
            problems.append(Violation("task", s.start, (a,), f"unknown task {s.task}"))
            continue
        ld, old, ul, oul, _ = spec
        node, orient = (ld, old) if s.kind == LOAD else (ul, oul)
        if s.node != node or s.orientation != orient:
            problems.append(Violation("service-pose", s.start, (a,),
                                      f"{s.kind} of task {s.task} at {s.node}/{s.orientation}, expected {node}/{orient}"))
        book = loads if s.kind == LOAD else unloads
        if s.task in book:
            problems.append(Violation("task", s.start, (a,), f"task {s.task} {s.kind}ed twice"))
        book[s.task] = (a, s)
        if s.kind == LOAD:
            if carrying[a]:
                problems.append(Violation("carry", s.start, (a,), f"loads task {s.task} while carrying {carrying[a]}"))
            carrying[a].append(s.task)
        else:
            if s.task not in loads or loads[s.task][0] != a or loads[s.task][1].end > s.start:
                problems.append(Violation("precedence", s.start, (a,), f"unload of task {s.task} without a prior load by this agent"))
            if s.task in carrying[a]:
                carrying[a].remove(s.task)

    if require_complete:
        for t in sorted(trace.tasks):
            if t not in unloads:
                problems.append(Violation("incomplete", INF, (), f"task {t} never delivered"))
        for a, (park, _) in sorted(trace.agents.items()):
            if final.get(a) != park:
                problems.append(Violation("not-parked", INF, (a,), f"agent ends at {final.get(a)}, park is {park}"))
    problems.sort(key=lambda v: (v.tick, v.kind))
    return problems
