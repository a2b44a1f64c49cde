"""Portable-pixmap output for frames and image grids."""

from __future__ import annotations

from pathlib import Path

import numpy as np


def to_uint8(pixels: np.ndarray) -> np.ndarray:
    """[3, H, W] floats in [0, 1] -> [H, W, 3] uint8."""
    arr = np.clip(np.asarray(pixels, dtype=np.float64), 0.0, 1.0)
    return (arr.transpose(1, 2, 0) * 255.0 + 0.5).astype(np.uint8)


def write_ppm(path, pixels: np.ndarray) -> Path:
    rgb = to_uint8(pixels)
    h, w, _ = rgb.shape
    out = Path(path)
    out.parent.mkdir(parents=True, exist_ok=True)
    with open(out, "wb") as fh:
        fh.write(f"P6\n{w} {h}\n255\n".encode())
        fh.write(rgb.tobytes())
    return out


def tile_grid(frames: list[list[np.ndarray]], pad: int = 2) -> np.ndarray:
    """Tile rows of [3, H, W] frames into one [3, H', W'] image."""
    if not frames or not frames[0]:
        raise ValueError("empty grid")
    h, w = frames[0][0].shape[1:]
    rows, cols = len(frames), max(len(r) for r in frames)
    canvas = np.ones((3, rows * (h + pad) - pad, cols * (w + pad) - pad))
    for r, row in enumerate(frames):
        for c, img in enumerate(row):
            y, x = r * (h + pad), c * (w + pad)
            canvas[:, y : y + h, x : x + w] = np.clip(img, 0.0, 1.0)
    return canvas
