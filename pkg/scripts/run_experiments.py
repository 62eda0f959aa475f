"""Run experiment presets end to end and write CSV plus plot tables.

    python scripts/run_experiments.py                     # every preset, 50 seeds
    python scripts/run_experiments.py exp1 --seeds 5 --jobs 4
"""
import argparse
import time
from pathlib import Path

from sbda.experiments import PRESETS, aggregate, output_dir, run_experiment, write_csv, write_plot_data


def main():
    ap = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("presets", nargs="*", default=sorted(PRESETS), choices=sorted(PRESETS))
    ap.add_argument("--seeds", type=int)
    ap.add_argument("--jobs", type=int, default=1)
    ap.add_argument("--out", default=None, help="output directory (default: $SBDA_OUTPUT_DIR or ./results)")
    a = ap.parse_args()
    out = Path(a.out) if a.out else output_dir()
    out.mkdir(parents=True, exist_ok=True)
    for name in a.presets:
        t0 = time.perf_counter()
        rows = run_experiment(name, jobs=a.jobs, seeds=a.seeds)
        path = write_csv(rows, out / f"{name}.csv")
        write_plot_data(aggregate(rows), out, name)
        print(f"{name}: {len(rows)} trials in {time.perf_counter() - t0:.0f}s -> {path}")


if __name__ == "__main__":
    main()
