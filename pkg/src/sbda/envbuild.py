"""Build environment graphs from ASCII drawings.

Open cells are ``.`` (corridor), ``T`` (load+unload endpoint), ``L``
(load-only), ``U`` (unload-only) and ``P`` (parking); anything else is
solid.  Cells are one block apart.  Graph nodes sit on endpoints,
junctions, corners and corridor ends; straight corridor runs between them
collapse into single edges whose length is the run length in blocks.
Endpoints face away from their only neighbour, so an agent drives into the
bay head-first.
"""
from __future__ import annotations

from .graph import LOAD, PARKING, PLAIN, TASK, UNLOAD, EdgeRecord, EnvGraph, NodeRecord

CAPS = {"T": frozenset({LOAD, UNLOAD}), "L": frozenset({LOAD}), "U": frozenset({UNLOAD})}
OPEN = set(".TLUP")
DIRS = {(0, -1): 0, (1, 0): 90, (0, 1): 180, (-1, 0): 270}  # (dcol, drow) -> heading


def from_ascii(rows: list[str], name: str = "") -> EnvGraph:
    width = max(len(r) for r in rows)
    grid = [r.ljust(width) for r in rows]

    def is_open(c, r):
        return 0 <= r < len(grid) and 0 <= c < width and grid[r][c] in OPEN

    def nbrs(c, r):
        return [(dc, dr) for (dc, dr) in DIRS if is_open(c + dc, r + dr)]

    node_at = {}
    for r, row in enumerate(grid):
        for c, ch in enumerate(row):
            if ch not in OPEN:
                continue
            n = nbrs(c, r)
            straight = len(n) == 2 and n[0][0] == -n[1][0] and n[0][1] == -n[1][1]
            if ch != "." or not straight:
                node_at[(c, r)] = len(node_at)

    nodes = {}
    for (c, r), nid in node_at.items():
        ch = grid[r][c]
        if ch in CAPS:
            n = nbrs(c, r)
            if len(n) != 1:
                raise ValueError(f"endpoint at column {c}, row {r} must have exactly one open neighbour")
            (dc, dr), = n
            facing = DIRS[(-dc, -dr)]
            nodes[nid] = NodeRecord(nid, (c, -r), TASK, CAPS[ch], facing)
        else:
            nodes[nid] = NodeRecord(nid, (c, -r), PARKING if ch == "P" else PLAIN)

    edges = {}
    for (c, r), nid in node_at.items():
        for dc, dr in nbrs(c, r):
            x, y, length = c + dc, r + dr, 1
            while (x, y) not in node_at:
                x, y, length = x + dc, y + dr, length + 1
            other = node_at[(x, y)]
            key = (min(nid, other), max(nid, other))
            edges[key] = EdgeRecord(key[0], key[1], length)
    return EnvGraph(nodes, list(edges.values()), name=name)


def render(g: EnvGraph, marks: dict[int, str] | None = None) -> str:
    """Draw node ids' marks back onto a character grid (debugging aid)."""
    marks = marks or {}
    xs = [c[0] for c in (n.coord for n in g.nodes.values())]
    ys = [-c[1] for c in (n.coord for n in g.nodes.values())]
    w, h = max(xs) + 1, max(ys) + 1
    grid = [[" "] * w for _ in range(h)]
    for e in g.edges:
        (x1, y1), (x2, y2) = g.coord(e.u), g.coord(e.v)
        r1, r2 = -y1, -y2
        for c in range(min(x1, x2), max(x1, x2) + 1):
            for r in range(min(r1, r2), max(r1, r2) + 1):
                grid[r][c] = "."
    for v, n in g.nodes.items():
        ch = {TASK: "T", PARKING: "P"}.get(n.kind, "o")
        if n.kind == TASK and n.capability == frozenset({LOAD}):
            ch = "L"
        elif n.kind == TASK and n.capability == frozenset({UNLOAD}):
            ch = "U"
        grid[-n.coord[1]][n.coord[0]] = marks.get(v, ch)
    return "\n".join("".join(r).rstrip() for r in grid)
