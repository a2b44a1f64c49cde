"""Demonstration datasets: generation, augmentation, and binary persistence.

A demonstration stores temporally-aligned frames from every perspective at
each timestep (all rendered at the identical pose), the ground-truth poses
(kept for verification, never shown to learners), and optional action labels.
Pixels are float32; the on-disk layout is documented in docs/dataset_format.md.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from .expert import dijkstra_expert, random_pose
from .raycast import DEFAULT_FRAME_WIDTH, PerspectiveSpec, default_perspectives, render
from .world import ACTION_INVERSE, Action, Pose, WorldMap, load_preset, replay

MAGIC = b"PVD1"
SOURCES = ["expert", "random_walk", "augmented-reverse", "augmented-stay"]


class DatasetError(ValueError):
    """Raised when stored data fails a structural or consistency check."""


@dataclass
class Demonstration:
    frames: np.ndarray  # [T, N, 3, W, W] float32, time-major / perspective-minor
    poses: list[Pose]
    actions: Optional[np.ndarray]  # [T-1] int32 or None
    source: str = "expert"

    @property
    def length(self) -> int:
        return self.frames.shape[0]

    @property
    def n_perspectives(self) -> int:
        return self.frames.shape[1]

    def __post_init__(self):
        if self.frames.ndim != 5 or self.frames.shape[2] != 3:
            raise DatasetError(f"frames must be [T, N, 3, W, W], got {self.frames.shape}")
        if len(self.poses) != self.length:
            raise DatasetError("poses length does not match frame count")
        if self.actions is not None and len(self.actions) != self.length - 1:
            raise DatasetError("need exactly T-1 action labels")
        if self.source not in SOURCES:
            raise DatasetError(f"unknown source {self.source!r}")


@dataclass
class DatasetManifest:
    demo_count: int
    length: int
    n_perspectives: int
    frame_width: int
    world: str
    seed: int
    perspectives: list[PerspectiveSpec]
    augment_reverse: bool = False
    augment_stay_fraction: float = 0.0

    def lines(self) -> list[str]:
        out = [
            f"demo_count={self.demo_count}",
            f"length={self.length}",
            f"n_perspectives={self.n_perspectives}",
            f"frame_width={self.frame_width}",
            f"world={self.world}",
            f"seed={self.seed}",
            f"augment_reverse={int(self.augment_reverse)}",
            f"augment_stay_fraction={self.augment_stay_fraction!r}",
        ]
        for i, p in enumerate(self.perspectives):
            vals = [p.camera_height, p.pitch_offset, p.fov_degrees, *p.palette_gamma]
            out.append(f"perspective.{i}=" + ",".join(repr(float(v)) for v in vals))
        return out

    @classmethod
    def parse(cls, text: str) -> "DatasetManifest":
        kv: dict[str, str] = {}
        for line in text.splitlines():
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            if "=" not in line:
                raise DatasetError(f"bad manifest line: {line!r}")
            k, v = line.split("=", 1)
            kv[k.strip()] = v.strip()
        try:
            n_persp = int(kv["n_perspectives"])
            persps = []
            for i in range(n_persp):
                vals = [float(x) for x in kv[f"perspective.{i}"].split(",")]
                persps.append(
                    PerspectiveSpec(i, vals[0], int(vals[1]), vals[2], (vals[3], vals[4], vals[5]))
                )
            return cls(
                demo_count=int(kv["demo_count"]),
                length=int(kv["length"]),
                n_perspectives=n_persp,
                frame_width=int(kv["frame_width"]),
                world=kv["world"],
                seed=int(kv["seed"]),
                perspectives=persps,
                augment_reverse=bool(int(kv["augment_reverse"])),
                augment_stay_fraction=float(kv["augment_stay_fraction"]),
            )
        except KeyError as exc:
            raise DatasetError(f"manifest missing key {exc}") from exc


@dataclass
class Dataset:
    manifest: DatasetManifest
    demos: list[Demonstration] = field(default_factory=list)

    def world(self) -> WorldMap:
        return load_preset(self.manifest.world)


def demo_seed(master: int, index: int) -> np.random.Generator:
    """Per-demo generator derived from the master seed; order-independent."""
    return np.random.default_rng(np.random.SeedSequence((master, index)))


def render_pose_row(world, pose, perspectives, width) -> np.ndarray:
    row = np.empty((len(perspectives), 3, width, width), dtype=np.float32)
    for n, persp in enumerate(perspectives):
        row[n] = render(world, pose, persp, width).pixels.astype(np.float32)
    return row


def generate_expert_demos(
    world: WorldMap,
    count: int,
    length: int,
    rng_seed: int,
    perspectives: Optional[list[PerspectiveSpec]] = None,
    width: int = DEFAULT_FRAME_WIDTH,
) -> list[Demonstration]:
    """Shortest-path demonstrations between random start/goal locations.

    Each demo is padded with Stay to exactly ``length`` observations and
    renders every perspective at every step.
    """
    if length < 2:
        raise ValueError("demo length must be >= 2")
    perspectives = perspectives if perspectives is not None else default_perspectives()
    demos = []
    for d in range(count):
        rng = demo_seed(rng_seed, d)
        while True:
            start = random_pose(world, rng)
            goal_cell = world.free_cells[rng.integers(len(world.free_cells))]
            actions = dijkstra_expert(world, start, goal_cell)
            if len(actions) <= length - 1:
                break
        actions = list(actions) + [Action.STAY] * (length - 1 - len(actions))
        poses, collisions = replay(world, start, actions)
        assert collisions == 0
        frames = np.stack([render_pose_row(world, p, perspectives, width) for p in poses])
        demos.append(
            Demonstration(
                frames=frames,
                poses=poses,
                actions=np.asarray(actions, dtype=np.int32),
                source="expert",
            )
        )
    return demos


def augment_reverse(demo: Demonstration) -> Demonstration:
    """Time-reversed copy with each action replaced by its inverse.

    Only valid for collision-free demos (expert paths); a blocked transition
    has no inverse.
    """
    if demo.actions is None:
        raise DatasetError("cannot reverse an unlabeled demo")
    inv = np.asarray(
        [int(ACTION_INVERSE[Action(int(a))]) for a in demo.actions[::-1]], dtype=np.int32
    )
    return Demonstration(
        frames=demo.frames[::-1].copy(),
        poses=list(reversed(demo.poses)),
        actions=inv,
        source="augmented-reverse",
    )


def augment_stay(
    demos: list[Demonstration], count: int, length: int, rng: np.random.Generator
) -> list[Demonstration]:
    """Stay-in-place demos built by repeating randomly sampled observations."""
    if not demos:
        raise DatasetError("cannot sample stay demos from an empty dataset")
    out = []
    for _ in range(count):
        demo = demos[rng.integers(len(demos))]
        t = int(rng.integers(demo.length))
        frames = np.repeat(demo.frames[t : t + 1], length, axis=0)
        out.append(
            Demonstration(
                frames=frames,
                poses=[demo.poses[t]] * length,
                actions=np.full(length - 1, int(Action.STAY), dtype=np.int32),
                source="augmented-stay",
            )
        )
    return out


def build_dataset(
    world_name: str,
    count: int,
    length: int,
    seed: int,
    perspectives: Optional[list[PerspectiveSpec]] = None,
    width: int = DEFAULT_FRAME_WIDTH,
    reverse: bool = True,
    stay_fraction: float = 0.1,
) -> Dataset:
    """Expert demos plus the default augmentations (time reversal doubles the
    set; stay demos add the given fraction)."""
    world = load_preset(world_name)
    perspectives = perspectives if perspectives is not None else default_perspectives()
    demos = generate_expert_demos(world, count, length, seed, perspectives, width)
    if reverse:
        demos = demos + [augment_reverse(d) for d in demos]
    n_stay = int(round(stay_fraction * count))
    if n_stay:
        demos = demos + augment_stay(demos, n_stay, length, np.random.default_rng(np.random.SeedSequence((seed, 1 << 20))))
    manifest = DatasetManifest(
        demo_count=len(demos),
        length=length,
        n_perspectives=len(perspectives),
        frame_width=width,
        world=world_name,
        seed=seed,
        perspectives=perspectives,
        augment_reverse=reverse,
        augment_stay_fraction=stay_fraction,
    )
    return Dataset(manifest=manifest, demos=demos)


# ---------------------------------------------------------------------------
# persistence (layout spelled out in docs/dataset_format.md)


def _demo_bytes(demo: Demonstration) -> bytes:
    t, n, _, w, _ = demo.frames.shape
    has_actions = demo.actions is not None
    head = MAGIC + struct.pack(
        "<6I", t, n, 3, w, int(has_actions), SOURCES.index(demo.source)
    )
    pose_arr = np.asarray([(p.col, p.row, p.heading) for p in demo.poses], dtype="<i4")
    parts = [head, pose_arr.tobytes()]
    if has_actions:
        parts.append(np.asarray(demo.actions, dtype="<i4").tobytes())
    parts.append(np.ascontiguousarray(demo.frames, dtype="<f4").tobytes())
    return b"".join(parts)


def _demo_from_bytes(buf: bytes, path: str) -> Demonstration:
    if len(buf) < 28 or buf[:4] != MAGIC:
        raise DatasetError(f"{path}: bad magic or truncated header")
    t, n, c, w, has_actions, source_id = struct.unpack("<6I", buf[4:28])
    if c != 3 or source_id >= len(SOURCES):
        raise DatasetError(f"{path}: invalid header fields")
    off = 28
    need = t * 3 * 4
    if len(buf) < off + need:
        raise DatasetError(f"{path}: truncated pose block")
    poses_arr = np.frombuffer(buf, dtype="<i4", count=t * 3, offset=off).reshape(t, 3)
    off += need
    actions = None
    if has_actions:
        need = (t - 1) * 4
        if len(buf) < off + need:
            raise DatasetError(f"{path}: truncated action block")
        actions = np.frombuffer(buf, dtype="<i4", count=t - 1, offset=off).copy()
        off += need
    need = t * n * 3 * w * w * 4
    if len(buf) != off + need:
        raise DatasetError(f"{path}: pixel block size mismatch (have {len(buf) - off}, want {need})")
    frames = np.frombuffer(buf, dtype="<f4", offset=off).reshape(t, n, 3, w, w).copy()
    poses = [Pose(int(a), int(b), int(h)) for a, b, h in poses_arr]
    return Demonstration(frames=frames, poses=poses, actions=actions, source=SOURCES[source_id])


def save(dataset: Dataset, path) -> Path:
    root = Path(path)
    (root / "demos").mkdir(parents=True, exist_ok=True)
    (root / "manifest.txt").write_text("\n".join(dataset.manifest.lines()) + "\n")
    for i, demo in enumerate(dataset.demos):
        (root / "demos" / f"{i:04d}.bin").write_bytes(_demo_bytes(demo))
    return root


def load(path) -> Dataset:
    root = Path(path)
    mpath = root / "manifest.txt"
    if not mpath.exists():
        raise DatasetError(f"{root}: missing manifest.txt")
    manifest = DatasetManifest.parse(mpath.read_text())
    demos = []
    for i in range(manifest.demo_count):
        fpath = root / "demos" / f"{i:04d}.bin"
        if not fpath.exists():
            raise DatasetError(f"{fpath}: listed in manifest but missing on disk")
        demo = _demo_from_bytes(fpath.read_bytes(), str(fpath))
        if demo.length != manifest.length:
            raise DatasetError(f"{fpath}: length {demo.length} != manifest length {manifest.length}")
        if demo.n_perspectives != manifest.n_perspectives:
            raise DatasetError(
                f"{fpath}: {demo.n_perspectives} perspectives != manifest {manifest.n_perspectives}"
            )
        if demo.frames.shape[3] != manifest.frame_width:
            raise DatasetError(
                f"{fpath}: frame width {demo.frames.shape[3]} != manifest {manifest.frame_width}"
            )
        demos.append(demo)
    return Dataset(manifest=manifest, demos=demos)
