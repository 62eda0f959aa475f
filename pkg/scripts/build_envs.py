"""Regenerate src/sbda/data/env1.map and env2.map from parametric ASCII layouts.

Both layouts share one skeleton: task bays along the top reached through
short spokes, two parallel main corridors joined by cross links, a second
row of bays below, and a comb of parking bays along the bottom.  Each spoke
passes through a small 3x3 loop (the "lobby") that gives agents somewhere
to wait near a bay without blocking the corridors.

    python3 scripts/build_envs.py            # write both maps
    python3 scripts/build_envs.py --show     # print the drawings only
"""
from __future__ import annotations

import argparse
from pathlib import Path

from sbda.envbuild import from_ascii
from sbda.graph import format_env

DATA = Path(__file__).resolve().parent.parent / "src" / "sbda" / "data"


class Canvas:
    def __init__(self, width: int, height: int):
        self.g = [["#"] * width for _ in range(height)]

    def put(self, c: int, r: int, ch: str = ".") -> None:
        self.g[r][c] = ch

    def _open(self, c: int, r: int) -> None:
        if self.g[r][c] == "#":
            self.g[r][c] = "."

    def h(self, r: int, c0: int, c1: int) -> None:
        for c in range(min(c0, c1), max(c0, c1) + 1):
            self._open(c, r)

    def v(self, c: int, r0: int, r1: int) -> None:
        for r in range(min(r0, r1), max(r0, r1) + 1):
            self._open(c, r)

    def box(self, c0: int, r0: int, c1: int, r1: int) -> None:
        self.h(r0, c0, c1)
        self.h(r1, c0, c1)
        self.v(c0, r0, r1)
        self.v(c1, r0, r1)

    def rows(self) -> list[str]:
        return ["".join(r) for r in self.g]


def layout(tops: list[tuple[int, str]], lows: list[tuple[int, str]], width: int,
           spoke: int = 2, loop: int = 2, cross: int = 6) -> list[str]:
    c = Canvas(width, 80)
    r_loop = spoke + 2
    r_main = r_loop + loop + 2
    for x, ch in tops:
        c.put(x, 1, ch)
        c.v(x, 2, r_main)
        c.box(x - 1, r_loop, x + 1, r_loop + loop)
    r_main2 = r_main + 5
    c.h(r_main, 2, width - 3)
    c.h(r_main2, 2, width - 3)
    for k in range(cross):
        c.v(2 + round(k * (width - 5) / (cross - 1)), r_main, r_main2)
    r_low = r_main2 + 2
    for x, ch in lows:
        c.v(x, r_main2, r_low + loop + spoke)
        c.box(x - 1, r_low, x + 1, r_low + loop)
        c.put(x, r_low + loop + spoke + 1, ch)
    r_park = r_low + loop + spoke + 4
    c.v(2, r_main2, r_park)
    c.v(width - 3, r_main2, r_park)
    c.h(r_park, 2, width - 3)
    g = c.g
    for x in range(3, width - 3, 2):
        above = r_park - 1
        if g[above][x] == g[above - 1][x] == g[above][x - 1] == g[above][x + 1] == "#":
            c.put(x, above, "P")
        if x != width - 3:
            c.put(x, r_park + 1, "P")
    return c.rows()[: r_park + 3]


def env1_rows() -> list[str]:
    """Six load/unload bays, three on top and three below."""
    return layout([(6, "T"), (21, "T"), (36, "T")], [(8, "T"), (21, "T"), (34, "T")], width=43)


def env2_rows() -> list[str]:
    """Two pickup bays in the top centre and six delivery bays."""
    return layout([(6, "U"), (20, "L"), (34, "L"), (48, "U")],
                  [(9, "U"), (21, "U"), (33, "U"), (45, "U")], width=55)


LAYOUTS = {"env1": env1_rows, "env2": env2_rows}


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--show", action="store_true")
    ap.add_argument("--out", type=Path, default=DATA)
    a = ap.parse_args()
    for name, build in LAYOUTS.items():
        rows = build()
        if a.show:
            print(f"{name}:\n" + "\n".join(rows) + "\n")
            continue
        g = from_ascii(rows, name)
        a.out.mkdir(parents=True, exist_ok=True)
        header = "".join(f"# {r}\n" for r in rows)
        (a.out / f"{name}.map").write_text(header + format_env(g))
        print(f"{name}: {len(g.nodes)} nodes, {len(g.edges)} edges, "
              f"{len(g.task_endpoints)} task endpoints, {len(g.parking_nodes)} parking nodes")


if __name__ == "__main__":
    main()
