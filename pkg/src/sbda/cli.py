"""Command-line entry point: ``sbda run|experiment|validate|inspect-env``.

Exit codes: 0 success, 1 validation failure (conflicts, incomplete trials),
2 usage error.  Output goes to ``--out``, else ``$SBDA_OUTPUT_DIR``, else
``./results``.
"""
from __future__ import annotations

import argparse
import csv
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

from .experiments import CSV_HEADER, PRESETS, aggregate, output_dir, run_experiment, write_csv, write_plot_data
from .graph import (
    GraphError,
    articulation_points,
    associated_standby_nodes,
    free_standby_nodes,
    potential_standby_nodes,
    resolve_env,
)
from .kinematics import DEFAULT_TIMING
from .planner import SbdaParams
from .sim import HTE, SBDA, Scenario, parse_scenario, run_trial
from .trace import EventTrace, validate_trace

OK, FAILED, USAGE = 0, 1, 2

RUN_EXTRA = ["completed", "standby_nodes"]


class UsageError(Exception):
    pass


def _ints(text: str) -> list[int]:
    out = []
    for part in text.split(","):
        if "-" in part:
            a, b = part.split("-", 1)
            out.extend(range(int(a), int(b) + 1))
        elif part:
            out.append(int(part))
    return out


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="sbda", description="Standby-based deadlock avoidance simulator")
    sub = p.add_subparsers(dest="cmd", required=True)

    r = sub.add_parser("run", help="run trials of one scenario")
    r.add_argument("--scenario", help="scenario file; explicit flags override its values")
    r.add_argument("--env", help="environment file or shipped name (env1, env2)")
    r.add_argument("--method", choices=[SBDA, HTE])
    r.add_argument("--alpha", type=float)
    r.add_argument("--beta", type=float)
    r.add_argument("--delta", type=int)
    r.add_argument("--agents", type=int)
    r.add_argument("--tasks", type=int)
    r.add_argument("--seeds", type=int, help="number of seeds")
    r.add_argument("--first-seed", type=int)
    r.add_argument("--no-cond1", type=int, action="append", choices=[1, 2, 3], default=[],
                   help="disable one item of the task selection condition (repeatable)")
    r.add_argument("--no-cond2", action="store_true", help="disable the side-entry condition")
    r.add_argument("--traces", action="store_true", help="also write one trace file per seed")
    r.add_argument("--jobs", type=int, default=1, help="parallel worker processes")
    r.add_argument("--out", help="output directory")

    e = sub.add_parser("experiment", help="run a preset experiment")
    e.add_argument("preset", choices=sorted(PRESETS))
    e.add_argument("--seeds", type=int)
    e.add_argument("--agents", type=_ints, help="agent counts, e.g. 2-10 or 2,4,8")
    e.add_argument("--envs", help="comma-separated environments")
    e.add_argument("--jobs", type=int, default=1)
    e.add_argument("--out")

    v = sub.add_parser("validate", help="check trace files for conflicts")
    v.add_argument("paths", nargs="+", help="trace files or directories of *.trace files")
    v.add_argument("--env", help="environment override (default: the trace's ENV record)")
    v.add_argument("--partial", action="store_true", help="do not require completion and parking")

    i = sub.add_parser("inspect-env", help="print the standby-node structure of an environment")
    i.add_argument("env")
    i.add_argument("--alpha", type=float, default=8)
    return p


def _scenario_from_args(a) -> Scenario:
    try:
        base = parse_scenario(Path(a.scenario).read_text()) if a.scenario else None
    except (OSError, ValueError) as exc:
        raise UsageError(f"{a.scenario}: {exc}") from exc
    if base is None and (a.env is None or a.agents is None):
        raise UsageError("run needs --env and --agents (or --scenario)")
    bp = base.params if base else SbdaParams()
    cond1 = list(bp.cond1)
    for item in a.no_cond1:
        cond1[item - 1] = False
    try:
        params = SbdaParams(
            alpha=a.alpha if a.alpha is not None else bp.alpha,
            beta=a.beta if a.beta is not None else bp.beta,
            delta=a.delta if a.delta is not None else bp.delta,
            cond1=tuple(cond1),
            cond2=False if a.no_cond2 else bp.cond2,
            poll=bp.poll,
        )
    except ValueError as exc:
        raise UsageError(str(exc)) from exc
    return Scenario(
        env=a.env or base.env,
        agents=a.agents if a.agents is not None else base.agents,
        tasks=a.tasks if a.tasks is not None else (base.tasks if base else 100),
        seed=a.first_seed if a.first_seed is not None else (base.seed if base else 0),
        method=a.method or (base.method if base else SBDA),
        params=params,
        trials=a.seeds if a.seeds is not None else (base.trials if base else 1),
        tick_cap=base.tick_cap if base else Scenario("", 1).tick_cap,
    )


def _run_seed(job):
    sc, seed, keep_trace = job
    g = resolve_env(sc.env)
    trial = Scenario(sc.env, sc.agents, sc.tasks, seed, sc.method, sc.params, 1, sc.tick_cap)
    m = run_trial(trial, g)
    problems = [str(p) for p in validate_trace(m.trace, g, DEFAULT_TIMING, require_complete=m.completed)]
    if not m.completed:
        problems.insert(0, f"did not complete by tick {m.end_tick}")
    alpha = f"{sc.params.alpha:g}" if sc.method == SBDA else ""
    row = [g.name, sc.method, alpha, sc.agents, seed, m.makespan, f"{m.runtime:.6f}",
           f"{m.mean_operational_time:.3f}", int(m.completed), " ".join(str(v) for v in sorted(m.standby_used))]
    return seed, row, problems, m.trace.to_text() if keep_trace else None


def cmd_run(a) -> int:
    sc = _scenario_from_args(a)
    try:
        g = resolve_env(sc.env)
        sc.validate(g)
    except (FileNotFoundError, GraphError, ValueError) as exc:
        raise UsageError(str(exc)) from exc
    out = Path(a.out) if a.out else output_dir()
    out.mkdir(parents=True, exist_ok=True)
    work = [(sc, sc.seed + k, a.traces) for k in range(sc.trials)]
    if a.jobs > 1 and len(work) > 1:
        with ProcessPoolExecutor(max_workers=a.jobs) as pool:
            results = list(pool.map(_run_seed, work))
    else:
        results = [_run_seed(w) for w in work]
    status = OK
    rows = []
    for seed, row, problems, trace_text in results:
        for msg in problems:
            print(f"seed {seed}: {msg}", file=sys.stderr)
            status = FAILED
        if trace_text is not None:
            (out / f"{g.name}-{sc.method}-M{sc.agents}-s{seed}.trace").write_text(trace_text)
        rows.append(row)
    path = out / f"run-{g.name}-{sc.method}-M{sc.agents}.csv"
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(CSV_HEADER + RUN_EXTRA)
        w.writerows(rows)
    mean = sum(r[5] for r in rows) / len(rows) if rows else 0
    print(f"{len(rows)} trial(s), mean makespan {mean:.1f}, results in {path}")
    return status


def cmd_experiment(a) -> int:
    envs = tuple(x for x in a.envs.split(",") if x) if a.envs else None
    rows = run_experiment(a.preset, jobs=a.jobs, seeds=a.seeds, agent_counts=a.agents, envs=envs)
    out = Path(a.out) if a.out else output_dir()
    path = write_csv(rows, out / f"{a.preset}.csv")
    write_plot_data(aggregate(rows), out, a.preset)
    for s in aggregate(rows):
        alpha = "" if s.alpha == "" else f" a={s.alpha:g}"
        print(f"{s.env} {s.method}{alpha} M={s.M}: makespan {s.makespan:.1f} (+-{s.makespan_sem:.1f})")
    print(f"{len(rows)} rows written to {path}")
    return OK


def _trace_files(paths: list[str]) -> list[Path]:
    files = []
    for p in map(Path, paths):
        if p.is_dir():
            files.extend(sorted(p.glob("*.trace")))
        elif p.is_file():
            files.append(p)
        else:
            raise UsageError(f"no such trace file or directory: {p}")
    if not files:
        raise UsageError("no trace files found")
    return files


def cmd_validate(a) -> int:
    status = OK
    bad = 0
    files = _trace_files(a.paths)
    for f in files:
        try:
            tr = EventTrace.load(f)
            g = resolve_env(a.env or tr.env)
        except (ValueError, FileNotFoundError, GraphError) as exc:
            raise UsageError(f"{f}: {exc}") from exc
        problems = validate_trace(tr, g, require_complete=not a.partial)
        if problems:
            bad += 1
            status = FAILED
            for pr in problems:
                print(f"{f}: {pr}")
        else:
            print(f"{f}: ok")
    if len(files) > 1:
        print(f"{len(files) - bad}/{len(files)} traces valid")
    return status


def cmd_inspect_env(a) -> int:
    try:
        g = resolve_env(a.env)
    except (FileNotFoundError, GraphError) as exc:
        raise UsageError(str(exc)) from exc
    if a.alpha < 0:
        raise UsageError("alpha must be non-negative")
    psn = potential_standby_nodes(g)
    print(f"environment {g.name}: |V|={len(g.nodes)} |E|={len(g.edges)}")
    print(f"task endpoints ({len(g.task_endpoints)}): {sorted(g.task_endpoints)}")
    print(f"  pickup: {list(g.pickup_nodes)}  delivery: {list(g.delivery_nodes)}")
    print(f"parking nodes ({len(g.parking_nodes)}): {list(g.parking_nodes)}")
    print(f"articulation points: {len(articulation_points(g))}")
    print(f"potential standby nodes ({len(psn)}): {sorted(psn)}")
    for v in sorted(g.task_endpoints):
        s = associated_standby_nodes(g, frozenset(), v, a.alpha)
        print(f"s({v}) at alpha={a.alpha:g}: {sorted(s)}")
    free = free_standby_nodes(g, frozenset(), a.alpha)
    print(f"free standby nodes ({len(free)}): {sorted(free)}")
    return OK


COMMANDS = {"run": cmd_run, "experiment": cmd_experiment, "validate": cmd_validate, "inspect-env": cmd_inspect_env}


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return USAGE if exc.code else OK
    try:
        return COMMANDS[args.cmd](args)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return USAGE


if __name__ == "__main__":
    sys.exit(main())
