"""Experiment presets, parallel trial execution and CSV aggregation."""
from __future__ import annotations

import csv
import io
import math
import os
import statistics
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path

from .graph import resolve_env
from .planner import SbdaParams
from .sim import HTE, SBDA, Scenario, run_trial

CSV_HEADER = ["env", "method", "alpha", "M", "seed", "makespan", "runtime_s", "mean_operational_time"]
AGENT_COUNTS = tuple(range(2, 31, 2))
SEEDS = 50


@dataclass(frozen=True)
class Variant:
    """One plotted curve: a method label plus its planner settings."""

    label: str
    method: str
    params: SbdaParams = field(default_factory=SbdaParams)

    @property
    def alpha(self):
        return self.params.alpha if self.method == SBDA else ""


def sbda(alpha: float = 8, **kw) -> Variant:
    p = SbdaParams(alpha=alpha, **kw)
    return Variant("sbda", SBDA, p)


def hte() -> Variant:
    return Variant("hte", HTE, SbdaParams())


def without_cond1(item: int, alpha: float = 8) -> Variant:
    flags = [True, True, True]
    flags[item - 1] = False
    return Variant(f"sbda-no-cond1-{item}", SBDA, SbdaParams(alpha=alpha, cond1=tuple(flags)))


def without_cond2(alpha: float = 8) -> Variant:
    return Variant("sbda-no-cond2", SBDA, SbdaParams(alpha=alpha, cond2=False))


@dataclass(frozen=True)
class Experiment:
    name: str
    envs: tuple[str, ...]
    variants: tuple[Variant, ...]
    agent_counts: tuple[int, ...] = AGENT_COUNTS
    seeds: int = SEEDS
    tasks: int = 100

    def cells(self):
        for env in self.envs:
            for v in self.variants:
                for m in self.agent_counts:
                    for seed in range(self.seeds):
                        yield env, v, m, seed


PRESETS = {
    "exp1": Experiment("exp1", ("env1", "env2"), (hte(),) + tuple(sbda(a) for a in (0, 4, 8, 12))),
    "exp2-ablation": Experiment("exp2-ablation", ("env1", "env2"),
                                (sbda(8), without_cond1(1), without_cond1(2), without_cond1(3))),
    "appendix-ablation": Experiment("appendix-ablation", ("env1", "env2"), (sbda(8), without_cond2())),
}


@dataclass(frozen=True)
class Row:
    env: str
    method: str
    alpha: object
    M: int
    seed: int
    makespan: int
    runtime_s: float
    mean_operational_time: float
    completed: bool = True
    max_standby: int = 0
    max_concurrent_tasks: int = 0

    def key(self):
        return (self.env, self.method, str(self.alpha), self.M, self.seed)

    def csv_fields(self) -> list:
        return [self.env, self.method, self.alpha, self.M, self.seed, self.makespan,
                f"{self.runtime_s:.6f}", f"{self.mean_operational_time:.3f}"]


def run_cell(env: str, variant: Variant, agents: int, seed: int, tasks: int = 100) -> Row:
    g = resolve_env(env)
    sc = Scenario(env=env, agents=agents, tasks=tasks, seed=seed, method=variant.method, params=variant.params)
    m = run_trial(sc, g, record_trace=False)
    return Row(env=g.name or env, method=variant.label, alpha=variant.alpha, M=agents, seed=seed,
               makespan=m.makespan, runtime_s=m.runtime, mean_operational_time=m.mean_operational_time,
               completed=m.completed, max_standby=m.max_standby, max_concurrent_tasks=m.max_concurrent_tasks)


def _run_cell_args(args) -> Row:
    return run_cell(*args)


def run_cells(cells, jobs: int = 1, tasks: int = 100) -> list[Row]:
    """Run (env, variant, M, seed) cells, in worker processes when ``jobs > 1``."""
    work = [(env, v, m, seed, tasks) for env, v, m, seed in cells]
    if jobs <= 1 or len(work) <= 1:
        rows = [_run_cell_args(w) for w in work]
    else:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            rows = list(pool.map(_run_cell_args, work, chunksize=max(1, len(work) // (8 * jobs))))
    return sorted(rows, key=Row.key)


def run_experiment(preset: str | Experiment, jobs: int = 1, seeds: int | None = None,
                   agent_counts: tuple[int, ...] | None = None, envs: tuple[str, ...] | None = None) -> list[Row]:
    exp = PRESETS[preset] if isinstance(preset, str) else preset
    if seeds is not None:
        exp = replace(exp, seeds=seeds)
    if agent_counts is not None:
        exp = replace(exp, agent_counts=tuple(agent_counts))
    if envs is not None:
        exp = replace(exp, envs=tuple(envs))
    rows = run_cells(exp.cells(), jobs=jobs, tasks=exp.tasks)
    bad = [r for r in rows if not r.completed]
    if bad:
        r = bad[0]
        raise RuntimeError(f"trial did not complete: env={r.env} method={r.method} M={r.M} seed={r.seed}")
    return rows


@dataclass(frozen=True)
class Summary:
    env: str
    method: str
    alpha: object
    M: int
    n: int
    makespan: float
    makespan_sem: float
    runtime_s: float
    operational_time: float


def aggregate(rows: list[Row]) -> list[Summary]:
    groups: dict[tuple, list[Row]] = {}
    for r in rows:
        groups.setdefault((r.env, r.method, str(r.alpha), r.M), []).append(r)
    out = []
    for (env, method, alpha, m), rs in sorted(groups.items()):
        ms = [r.makespan for r in rs]
        sem = statistics.stdev(ms) / math.sqrt(len(ms)) if len(ms) > 1 else 0.0
        out.append(Summary(env, method, rs[0].alpha, m, len(rs), statistics.fmean(ms), sem,
                           statistics.fmean(r.runtime_s for r in rs),
                           statistics.fmean(r.mean_operational_time for r in rs)))
    return out


def rows_to_csv(rows: list[Row]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_HEADER)
    for r in sorted(rows, key=Row.key):
        w.writerow(r.csv_fields())
    return buf.getvalue()


def write_csv(rows: list[Row], path: str | Path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(rows_to_csv(rows))
    return path


def read_csv(path: str | Path) -> list[Row]:
    rows = []
    with open(path, newline="") as fh:
        for rec in csv.DictReader(fh):
            alpha = rec["alpha"]
            rows.append(Row(rec["env"], rec["method"], float(alpha) if alpha else "", int(rec["M"]), int(rec["seed"]),
                            int(rec["makespan"]), float(rec["runtime_s"]), float(rec["mean_operational_time"])))
    return rows


def write_plot_data(summaries: list[Summary], outdir: str | Path, stem: str) -> list[Path]:
    """One whitespace table per (env, quantity) with a column per curve, plus a gnuplot script."""
    outdir = Path(outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    written = []
    curves = sorted({(s.method, str(s.alpha)) for s in summaries})
    label = {c: c[0] if c[1] == "" else f"{c[0]}(a={c[1]})" for c in curves}
    for env in sorted({s.env for s in summaries}):
        by = {(s.method, str(s.alpha), s.M): s for s in summaries if s.env == env}
        ms = sorted({k[2] for k in by})
        for qty in ("makespan", "runtime_s", "operational_time"):
            path = outdir / f"{stem}-{env}-{qty}.dat"
            lines = ["# M " + " ".join(label[c] for c in curves)]
            for m in ms:
                vals = []
                for c in curves:
                    s = by.get((c[0], c[1], m))
                    vals.append("nan" if s is None else f"{getattr(s, qty):.6g}")
                lines.append(f"{m} " + " ".join(vals))
            path.write_text("\n".join(lines) + "\n")
            written.append(path)
            script = outdir / f"{stem}-{env}-{qty}.gp"
            plots = ", ".join(f"'{path.name}' using 1:{i + 2} with linespoints title '{label[c]}'"
                              for i, c in enumerate(curves))
            script.write_text(f"set xlabel 'M'\nset ylabel '{qty}'\nset key outside\nplot {plots}\n")
            written.append(script)
    return written


def output_dir(default: str | os.PathLike = "results") -> Path:
    return Path(os.environ.get("SBDA_OUTPUT_DIR", default))
