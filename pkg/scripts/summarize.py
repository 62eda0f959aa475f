"""Print per-(env, method, alpha) makespan tables from experiment CSV files.

    python scripts/summarize.py results/exp1.csv results/appendix-ablation.csv
"""
import argparse
from collections import defaultdict

from sbda.experiments import aggregate, read_csv


def main():
    ap = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("csv", nargs="+")
    ap.add_argument("--quantity", choices=("makespan", "runtime_s", "operational_time"), default="makespan")
    a = ap.parse_args()
    rows = [r for path in a.csv for r in read_csv(path)]
    table = defaultdict(dict)
    for s in aggregate(rows):
        table[(s.env, s.method, str(s.alpha))][s.M] = getattr(s, a.quantity)
    ms = sorted({m for cols in table.values() for m in cols})
    print("env   curve" + " " * 18 + "".join(f"{m:>9}" for m in ms))
    for (env, method, alpha), cols in sorted(table.items()):
        label = f"{method}" + (f" a={alpha}" if alpha else "")
        fmt = "9.3f" if a.quantity == "runtime_s" else "9.0f"
        cells = "".join(format(cols[m], fmt) if m in cols else " " * 9 for m in ms)
        print(f"{env:5} {label:22}{cells}")


if __name__ == "__main__":
    main()
