"""First-person rendering of world poses via 2.5D raycasting.

One ray is cast per image column across the perspective's field of view; the
perpendicular distance to the nearest wall sets the wall-slice height, placed
around a horizon line shifted by the perspective's pitch and split by its
camera height. Colors come from the wall texture id, shaded by distance, with
a per-channel gamma applied last. Rendering is a pure function of
(map, pose, perspective, frame width).

The inner loop runs in a compiled extension when available; a pure-Python
twin with identical arithmetic is selected at import time otherwise (or when
PIVNAV_PURE_PY is set).
"""

from __future__ import annotations

import math
import os
from dataclasses import dataclass

import numpy as np

from .world import Pose, WorldMap, heading_angle

if os.environ.get("PIVNAV_PURE_PY"):
    from . import _raycast_py as _kernel

    COMPILED = False
else:
    try:
        from . import _raycast_cy as _kernel  # type: ignore[attr-defined]

        COMPILED = True
    except ImportError:
        from . import _raycast_py as _kernel

        COMPILED = False

DEFAULT_FRAME_WIDTH = 32

WALL_SCALE_FRAC = 0.9  # apparent wall height = frac * width / distance
SHADE_K = 0.18
SIDE_FACTOR = 0.85  # darkens walls hit on a row-boundary face
FLOOR_RGB = (0.30, 0.27, 0.24)
CEIL_RGB = (0.10, 0.12, 0.16)

# texture id 0 is the plain '#' wall; letters cycle through the saturated set
_BASE_COLORS = [
    (0.85, 0.20, 0.20),
    (0.20, 0.80, 0.25),
    (0.20, 0.35, 0.90),
    (0.90, 0.80, 0.20),
    (0.85, 0.30, 0.85),
    (0.25, 0.85, 0.85),
    (0.95, 0.60, 0.20),
    (0.55, 0.35, 0.20),
    (0.45, 0.85, 0.45),
    (0.80, 0.45, 0.65),
    (0.35, 0.65, 0.95),
    (0.70, 0.70, 0.30),
]


def texture_palette() -> np.ndarray:
    """53 texture ids: plain gray plus base colors cycled at four brightnesses."""
    pal = np.zeros((53, 3))
    pal[0] = (0.55, 0.55, 0.55)
    brightness = (1.0, 0.6, 0.82, 0.45)
    for i in range(1, 53):
        base = _BASE_COLORS[(i - 1) % len(_BASE_COLORS)]
        pal[i] = tuple(c * brightness[((i - 1) // len(_BASE_COLORS)) % 4] for c in base)
    return pal


_PALETTE = texture_palette()


@dataclass(frozen=True)
class PerspectiveSpec:
    """One camera: id, mount height (fraction of wall height), pitch shift in
    pixels, horizontal field of view, and a per-channel display gamma."""

    id: int
    camera_height: float
    pitch_offset: int
    fov_degrees: float
    palette_gamma: tuple[float, float, float] = (1.0, 1.0, 1.0)

    def __post_init__(self):
        if not 0.0 < self.camera_height < 1.0:
            raise ValueError(f"camera_height must be in (0, 1), got {self.camera_height}")
        if not 30.0 < self.fov_degrees < 120.0:
            raise ValueError(f"fov must be in (30, 120) degrees, got {self.fov_degrees}")
        if any(g <= 0 for g in self.palette_gamma):
            raise ValueError("palette_gamma entries must be positive")


@dataclass
class Frame:
    pixels: np.ndarray  # [3, W, W], values in [0, 1]
    perspective_id: int
    pose: Pose


def default_perspectives() -> list[PerspectiveSpec]:
    """Shipped cameras: p0 is the low robot view, p1..p3 body-mounted views of
    increasing height with varied pitch and color response."""
    return [
        PerspectiveSpec(0, camera_height=0.25, pitch_offset=0, fov_degrees=60.0),
        PerspectiveSpec(1, camera_height=0.50, pitch_offset=2, fov_degrees=80.0, palette_gamma=(1.0, 1.15, 0.85)),
        PerspectiveSpec(2, camera_height=0.70, pitch_offset=0, fov_degrees=90.0, palette_gamma=(0.85, 1.0, 1.25)),
        PerspectiveSpec(3, camera_height=0.90, pitch_offset=-3, fov_degrees=75.0, palette_gamma=(1.25, 0.9, 1.0)),
    ]


def _ray_tables(world: WorldMap, pose: Pose, persp: PerspectiveSpec, width: int):
    base = heading_angle(pose.heading, world.n_headings)
    fov = math.radians(persp.fov_degrees)
    cols = np.arange(width)
    offs = fov * (0.5 - (cols + 0.5) / width)
    angles = base + offs
    return np.cos(angles), np.sin(angles), np.cos(offs)


def _run_kernel(world: WorldMap, pose: Pose, persp: PerspectiveSpec, width: int):
    world.check_pose(pose)
    dir_x, dir_y, cos_off = _ray_tables(world, pose, persp, width)
    occ = np.ascontiguousarray(world.occupancy, dtype=np.uint8)
    tex = np.ascontiguousarray(world.texture, dtype=np.int32)
    pixels = np.empty((3, width, width))
    dist = np.empty(width)
    height = np.empty(width)
    tex_out = np.empty(width, dtype=np.int32)
    side = np.empty(width, dtype=np.int32)
    g = persp.palette_gamma
    _kernel.render_kernel(
        occ,
        tex,
        pose.col + 0.5,
        pose.row + 0.5,
        dir_x,
        dir_y,
        cos_off,
        _PALETTE,
        persp.camera_height,
        width / 2.0 + persp.pitch_offset,
        1.0 / g[0],
        1.0 / g[1],
        1.0 / g[2],
        WALL_SCALE_FRAC * width,
        SHADE_K,
        SIDE_FACTOR,
        *FLOOR_RGB,
        *CEIL_RGB,
        pixels,
        dist,
        height,
        tex_out,
        side,
    )
    return pixels, dist, height, tex_out, side


def render(world: WorldMap, pose: Pose, persp: PerspectiveSpec, width: int = DEFAULT_FRAME_WIDTH) -> Frame:
    pixels, _, _, _, _ = _run_kernel(world, pose, persp, width)
    return Frame(pixels=pixels, perspective_id=persp.id, pose=pose)


def render_columns(world: WorldMap, pose: Pose, persp: PerspectiveSpec, width: int = DEFAULT_FRAME_WIDTH) -> dict:
    """Debug view of the per-column geometry (distance, wall height, texture,
    hit side) alongside the painted pixels."""
    pixels, dist, height, tex_out, side = _run_kernel(world, pose, persp, width)
    return {"pixels": pixels, "dist": dist, "height": height, "tex": tex_out, "side": side}
