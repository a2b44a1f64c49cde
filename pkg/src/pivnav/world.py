"""Deterministic grid navigation world: occupancy maps, poses, kinematic steps.

Cells are unit squares indexed (col, row); a pose adds a quantized heading
h in [0, H) meaning an angle of h * (360/H) degrees, counterclockwise from
the +col axis. Forward/backward motion snaps the heading to the nearest of
the 8 lattice directions so the reachable state space stays finite.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import IntEnum
from pathlib import Path

import numpy as np


class Action(IntEnum):
    FORWARD = 0
    BACKWARD = 1
    TURN_LEFT = 2
    TURN_RIGHT = 3
    STAY = 4


ACTION_INVERSE = {
    Action.FORWARD: Action.BACKWARD,
    Action.BACKWARD: Action.FORWARD,
    Action.TURN_LEFT: Action.TURN_RIGHT,
    Action.TURN_RIGHT: Action.TURN_LEFT,
    Action.STAY: Action.STAY,
}

# (dcol, drow) for the 8 lattice directions at 45-degree spacing
DIR8 = [(1, 0), (1, 1), (0, 1), (-1, 1), (-1, 0), (-1, -1), (0, -1), (1, -1)]


@dataclass(frozen=True)
class Pose:
    col: int
    row: int
    heading: int

    @property
    def cell(self) -> tuple[int, int]:
        return (self.col, self.row)


def heading_angle(heading: int, n_headings: int) -> float:
    return heading * 2.0 * math.pi / n_headings


def lattice_direction(heading: int, n_headings: int) -> tuple[int, int]:
    """Nearest 8-neighborhood direction for a quantized heading (ties round up)."""
    deg = heading * 360.0 / n_headings
    return DIR8[int(math.floor(deg / 45.0 + 0.5)) % 8]


class WorldMap:
    """Immutable occupancy grid with per-wall-cell texture ids.

    Built from a plain-text grid: '#' is a wall, '.' free space, and letters
    are walls carrying a texture id (a..z -> 1..26, A..Z -> 27..52; '#' is
    id 0). The border must be entirely walls and the free region must be
    connected.
    """

    def __init__(self, occupancy: np.ndarray, texture: np.ndarray, n_headings: int, name: str = "custom"):
        self.occupancy = occupancy.astype(bool)
        self.texture = texture.astype(np.int32)
        self.height, self.width = occupancy.shape
        self.n_headings = int(n_headings)
        self.name = name
        if self.n_headings < 2:
            raise ValueError("need at least 2 headings")
        self._validate()
        self.free_cells = [
            (c, r) for r in range(self.height) for c in range(self.width) if not self.occupancy[r, c]
        ]
        self.occupancy.setflags(write=False)
        self.texture.setflags(write=False)

    @classmethod
    def from_text(cls, text: str, n_headings: int, name: str = "custom") -> "WorldMap":
        rows = [line for line in text.strip("\n").splitlines() if line.strip()]
        if not rows:
            raise ValueError("empty map text")
        width = len(rows[0])
        if any(len(r) != width for r in rows):
            raise ValueError("map rows have unequal lengths")
        occ = np.zeros((len(rows), width), dtype=bool)
        tex = np.zeros((len(rows), width), dtype=np.int32)
        for r, line in enumerate(rows):
            for c, ch in enumerate(line):
                if ch == ".":
                    continue
                occ[r, c] = True
                if ch == "#":
                    tex[r, c] = 0
                elif "a" <= ch <= "z":
                    tex[r, c] = ord(ch) - ord("a") + 1
                elif "A" <= ch <= "Z":
                    tex[r, c] = ord(ch) - ord("A") + 27
                else:
                    raise ValueError(f"unknown map character {ch!r} at row {r}, col {c}")
        return cls(occ, tex, n_headings, name=name)

    @classmethod
    def from_file(cls, path, n_headings: int) -> "WorldMap":
        p = Path(path)
        return cls.from_text(p.read_text(), n_headings, name=p.stem)

    def _validate(self):
        occ = self.occupancy
        if not (occ[0, :].all() and occ[-1, :].all() and occ[:, 0].all() and occ[:, -1].all()):
            raise ValueError("map border must be entirely walls")
        free = np.argwhere(~occ)
        if len(free) == 0:
            raise ValueError("map has no free cells")
        # flood fill from the first free cell; all free cells must be reachable
        seen = np.zeros_like(occ)
        stack = [tuple(free[0])]
        seen[free[0][0], free[0][1]] = True
        while stack:
            r, c = stack.pop()
            for dr, dc in ((1, 0), (-1, 0), (0, 1), (0, -1)):
                rr, cc = r + dr, c + dc
                if not occ[rr, cc] and not seen[rr, cc]:
                    seen[rr, cc] = True
                    stack.append((rr, cc))
        if seen.sum() != len(free):
            raise ValueError("free region is not connected")

    def is_free(self, col: int, row: int) -> bool:
        return 0 <= col < self.width and 0 <= row < self.height and not self.occupancy[row, col]

    def check_pose(self, pose: Pose):
        if not self.is_free(pose.col, pose.row):
            raise ValueError(f"pose cell {pose.cell} is not free")
        if not 0 <= pose.heading < self.n_headings:
            raise ValueError(f"heading {pose.heading} out of range [0, {self.n_headings})")


def step(world: WorldMap, pose: Pose, action: Action) -> tuple[Pose, bool]:
    """Apply one action. Returns (new pose, collided).

    Turns never collide; a blocked translation leaves the position unchanged
    and reports collided=True.
    """
    world.check_pose(pose)
    h = world.n_headings
    if action == Action.STAY:
        return pose, False
    if action == Action.TURN_LEFT:
        return Pose(pose.col, pose.row, (pose.heading + 1) % h), False
    if action == Action.TURN_RIGHT:
        return Pose(pose.col, pose.row, (pose.heading - 1) % h), False
    dc, dr = lattice_direction(pose.heading, h)
    if action == Action.BACKWARD:
        dc, dr = -dc, -dr
    col, row = pose.col + dc, pose.row + dr
    if not world.is_free(col, row):
        return pose, True
    return Pose(col, row, pose.heading), False


def replay(world: WorldMap, start: Pose, actions) -> tuple[list[Pose], int]:
    """Run an action sequence; returns the visited poses and collision count."""
    poses = [start]
    collisions = 0
    pose = start
    for a in actions:
        pose, hit = step(world, pose, Action(a))
        collisions += int(hit)
        poses.append(pose)
    return poses, collisions


# every wall cell carries a distinct texture so no two poses render alike
NAVWORLD_MINI_TEXT = """
ABCDEFGH
Q..a..bW
R......X
S.c..d.Y
T......Z
Ue..f..y
V......z
IJKLMNOP
"""

OFFICEWORLD_MINI_TEXT = """
ABCDEFGHIJKL
h.....a....M
g.....b..q.N
f..r..c....O
e.....d....P
d...stu..vwQ
c..........R
b.x..yz..m.S
a....WX....T
Z..n....p..U
Y..........V
XWVUTSRQPONM
"""


def load_preset(name: str) -> WorldMap:
    if name == "navworld-mini":
        return WorldMap.from_text(NAVWORLD_MINI_TEXT, n_headings=12, name=name)
    if name == "officeworld-mini":
        return WorldMap.from_text(OFFICEWORLD_MINI_TEXT, n_headings=4, name=name)
    raise ValueError(f"unknown world preset {name!r}")
