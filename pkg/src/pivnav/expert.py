"""Shortest-path expert over the (cell, heading) lattice and task sampling."""

from __future__ import annotations

import heapq

import numpy as np

from .world import Action, Pose, WorldMap, step

# tie-break rank for equally short paths: Forward < TurnLeft < TurnRight < Backward
_SEARCH_ORDER = [Action.FORWARD, Action.TURN_LEFT, Action.TURN_RIGHT, Action.BACKWARD]
_RANK_TO_ACTION = {rank: a for rank, a in enumerate(_SEARCH_ORDER)}


def dijkstra_expert(world: WorldMap, start: Pose, goal_cell: tuple[int, int]) -> list[Action]:
    """Shortest action sequence from start to any pose in goal_cell.

    Unit-cost search over (col, row, heading); Stay is excluded. Among
    equally short sequences the lexicographically smallest one under the
    order Forward < TurnLeft < TurnRight < Backward is returned.
    """
    world.check_pose(start)
    gc, gr = goal_cell
    if not world.is_free(gc, gr):
        raise ValueError(f"goal cell {goal_cell} is not free")
    if start.cell == (gc, gr):
        return []

    # heap entries carry the rank-encoded path so ties resolve lexicographically
    heap: list[tuple[int, tuple[int, ...], tuple[int, int, int]]] = [(0, (), (start.col, start.row, start.heading))]
    done = set()
    while heap:
        dist, path, state = heapq.heappop(heap)
        if state in done:
            continue
        done.add(state)
        col, row, heading = state
        if (col, row) == (gc, gr):
            return [_RANK_TO_ACTION[r] for r in path]
        pose = Pose(col, row, heading)
        for rank, action in enumerate(_SEARCH_ORDER):
            nxt, collided = step(world, pose, action)
            if collided:
                continue
            key = (nxt.col, nxt.row, nxt.heading)
            if key not in done:
                heapq.heappush(heap, (dist + 1, path + (rank,), key))
    raise ValueError(f"goal cell {goal_cell} unreachable from {start}")


def random_pose(world: WorldMap, rng: np.random.Generator) -> Pose:
    col, row = world.free_cells[rng.integers(len(world.free_cells))]
    return Pose(col, row, int(rng.integers(world.n_headings)))


def sample_task(
    world: WorldMap,
    min_steps: int,
    rng: np.random.Generator,
    max_trials: int = 20000,
) -> tuple[Pose, Pose, list[Action]]:
    """Rejection-sample a (start, goal) pair whose expert path length is exactly
    min_steps. Returns (start pose, goal pose, expert actions); the goal pose
    is the expert's terminal pose."""
    if min_steps < 0:
        raise ValueError("min_steps must be >= 0")
    for _ in range(max_trials):
        start = random_pose(world, rng)
        goal_cell = world.free_cells[rng.integers(len(world.free_cells))]
        actions = dijkstra_expert(world, start, goal_cell)
        if len(actions) != min_steps:
            continue
        pose = start
        for a in actions:
            pose, _ = step(world, pose, a)
        return start, pose, actions
    raise ValueError(f"no task with expert distance {min_steps} found in {max_trials} trials")
