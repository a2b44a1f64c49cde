"""Benchmark the compiled raycast kernel against the pure-Python twin.

Usage: python3 benchmarks/bench_render.py [--frames N] [--width W]
"""

from __future__ import annotations

import argparse
import time

import numpy as np

import pivnav.raycast as rc
from pivnav import _raycast_py
from pivnav.raycast import default_perspectives, render
from pivnav.world import Pose, load_preset

try:
    from pivnav import _raycast_cy
except ImportError:
    _raycast_cy = None


def bench(kernel, world, poses, persps, width, n_frames) -> float:
    prev = rc._kernel
    rc._kernel = kernel
    try:
        t0 = time.perf_counter()
        for i in range(n_frames):
            render(world, poses[i % len(poses)], persps[i % len(persps)], width)
        return (time.perf_counter() - t0) / n_frames
    finally:
        rc._kernel = prev


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--frames", type=int, default=500)
    ap.add_argument("--width", type=int, default=32)
    args = ap.parse_args()

    world = load_preset("navworld-mini")
    rng = np.random.default_rng(0)
    poses = [
        Pose(*world.free_cells[rng.integers(len(world.free_cells))], int(rng.integers(world.n_headings)))
        for _ in range(64)
    ]
    persps = default_perspectives()

    t_py = bench(_raycast_py, world, poses, persps, args.width, max(50, args.frames // 10))
    print(f"pure python : {t_py * 1e3:8.3f} ms/frame  ({1 / t_py:7.0f} fps)")
    if _raycast_cy is None:
        print("compiled    : not built (pip install -e . with Cython available)")
        return
    t_cy = bench(_raycast_cy, world, poses, persps, args.width, args.frames)
    print(f"compiled    : {t_cy * 1e3:8.3f} ms/frame  ({1 / t_cy:7.0f} fps)")
    print(f"speedup     : {t_py / t_cy:8.1f}x")

    # sanity: identical output bit-for-bit
    rc._kernel = _raycast_py
    a = render(world, poses[0], persps[1], args.width).pixels
    rc._kernel = _raycast_cy
    b = render(world, poses[0], persps[1], args.width).pixels
    print(f"bit-identical outputs: {np.array_equal(a, b)}")


if __name__ == "__main__":
    main()
