"""Success-rate evaluation: sample tasks, run MPC episodes, fill table cells."""

from __future__ import annotations

from typing import Callable, Optional, Sequence

import numpy as np

from .expert import sample_task
from .fdn import FdnModel, encode_batch
from .planner import DynamicsModel, EpisodeResult, UpnPolicy, execution_budget, mpc_execute
from .raycast import PerspectiveSpec, render
from .world import WorldMap


def evaluate_cell(
    world: WorldMap,
    dynamics: DynamicsModel,
    encoder: Callable[[np.ndarray], np.ndarray],
    distance: int,
    episodes: int,
    seed: int,
    robot_persp: PerspectiveSpec,
    goal_persps: Sequence[PerspectiveSpec],
    width: int,
    heading_match: bool = False,
) -> tuple[int, list[tuple[int, int, EpisodeResult]]]:
    """Run one table cell: `episodes` tasks at exact expert distance.

    The goal image is rendered from one of goal_persps (sampled per episode);
    execution observes the robot perspective only.
    """
    rows = []
    successes = 0
    for e in range(episodes):
        rng = np.random.default_rng(np.random.SeedSequence((seed, e)))
        start, goal_pose, _ = sample_task(world, distance, rng)
        persp = goal_persps[int(rng.integers(len(goal_persps)))]
        goal_frame = render(world, goal_pose, persp, width)
        result = mpc_execute(
            world,
            dynamics,
            fdn=None,
            start=start,
            goal_frame=goal_frame,
            goal_pose=goal_pose,
            budget=execution_budget(distance),
            robot_persp=robot_persp,
            seed=int(np.random.SeedSequence((seed, e, 1)).generate_state(1)[0]),
            width=width,
            encoder=encoder,
            heading_match=heading_match,
        )
        successes += int(result.success)
        rows.append((e, distance, result))
    return successes, rows


def fdn_encoder(fdn: FdnModel) -> Callable[[np.ndarray], np.ndarray]:
    return lambda pixels: encode_batch(fdn, pixels)


def upn_encoder(policy: UpnPolicy) -> Callable[[np.ndarray], np.ndarray]:
    return lambda pixels: policy.encode(pixels)
