"""Checkpoint persistence: a manifest.txt plus one flat float64 parameter blob."""

from __future__ import annotations

import hashlib
from pathlib import Path

import numpy as np


class CheckpointError(ValueError):
    pass


def save_checkpoint(path, kind: str, meta: dict, params: np.ndarray) -> Path:
    root = Path(path)
    root.mkdir(parents=True, exist_ok=True)
    lines = [f"kind={kind}", f"n_params={params.size}"]
    for k, v in meta.items():
        if "=" in str(k) or "\n" in str(v):
            raise CheckpointError(f"illegal manifest entry {k!r}")
        lines.append(f"{k}={v}")
    (root / "manifest.txt").write_text("\n".join(lines) + "\n")
    (root / "params.bin").write_bytes(np.ascontiguousarray(params, dtype="<f8").tobytes())
    return root


def load_checkpoint(path, expect_kind: str | None = None) -> tuple[str, dict, np.ndarray]:
    root = Path(path)
    mpath = root / "manifest.txt"
    bpath = root / "params.bin"
    if not mpath.exists() or not bpath.exists():
        raise CheckpointError(f"{root}: not a checkpoint (need manifest.txt and params.bin)")
    meta: dict[str, str] = {}
    for line in mpath.read_text().splitlines():
        line = line.strip()
        if not line:
            continue
        k, v = line.split("=", 1)
        meta[k] = v
    kind = meta.pop("kind", "")
    n = int(meta.pop("n_params"))
    params = np.frombuffer(bpath.read_bytes(), dtype="<f8").copy()
    if params.size != n:
        raise CheckpointError(f"{root}: blob holds {params.size} params, manifest says {n}")
    if expect_kind is not None and kind != expect_kind:
        raise CheckpointError(f"{root}: checkpoint kind {kind!r}, expected {expect_kind!r}")
    return kind, meta, params


def checkpoint_hash(path) -> str:
    root = Path(path)
    h = hashlib.sha256()
    h.update((root / "manifest.txt").read_bytes())
    h.update((root / "params.bin").read_bytes())
    return h.hexdigest()[:16]
