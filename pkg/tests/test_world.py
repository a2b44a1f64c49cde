import numpy as np
import pytest

from pivnav.world import (
    ACTION_INVERSE,
    Action,
    Pose,
    WorldMap,
    lattice_direction,
    load_preset,
    replay,
    step,
)

OPEN_5x5_H4 = WorldMap.from_text(
    """
#####
#...#
#...#
#...#
#####
""",
    n_headings=4,
)


class TestStep:
    def test_stay_is_identity(self):
        pose = Pose(2, 2, 1)
        out, hit = step(OPEN_5x5_H4, pose, Action.STAY)
        assert out == pose and not hit

    def test_axis_aligned_forward(self):
        out, hit = step(OPEN_5x5_H4, Pose(2, 2, 0), Action.FORWARD)
        assert out == Pose(3, 2, 0) and not hit

    def test_forward_into_wall_blocks(self):
        out, hit = step(OPEN_5x5_H4, Pose(3, 2, 0), Action.FORWARD)
        assert out == Pose(3, 2, 0) and hit

    def test_turns_never_collide(self):
        out, hit = step(OPEN_5x5_H4, Pose(1, 1, 0), Action.TURN_LEFT)
        assert out == Pose(1, 1, 1) and not hit
        out, hit = step(OPEN_5x5_H4, Pose(1, 1, 0), Action.TURN_RIGHT)
        assert out == Pose(1, 1, 3) and not hit

    def test_invalid_pose_rejected(self):
        with pytest.raises(ValueError):
            step(OPEN_5x5_H4, Pose(0, 0, 0), Action.STAY)
        with pytest.raises(ValueError):
            step(OPEN_5x5_H4, Pose(1, 1, 7), Action.STAY)

    def test_turn_left_then_right_is_identity(self):
        world = load_preset("navworld-mini")
        for col, row in world.free_cells:
            for h in range(world.n_headings):
                pose = Pose(col, row, h)
                mid, _ = step(world, pose, Action.TURN_LEFT)
                back, _ = step(world, mid, Action.TURN_RIGHT)
                assert back == pose

    def test_forward_then_backward_returns_for_axis_aligned(self):
        out1, hit1 = step(OPEN_5x5_H4, Pose(1, 2, 0), Action.FORWARD)
        assert not hit1
        out2, hit2 = step(OPEN_5x5_H4, out1, Action.BACKWARD)
        assert not hit2 and out2 == Pose(1, 2, 0)

    def test_fuzz_stays_in_free_cells(self):
        world = load_preset("navworld-mini")
        rng = np.random.default_rng(0)
        pose = Pose(*world.free_cells[0], 0)
        for _ in range(10_000):
            action = Action(int(rng.integers(5)))
            pose, _ = step(world, pose, action)
            assert world.is_free(pose.col, pose.row)
            assert 0 <= pose.heading < world.n_headings


class TestLatticeDirection:
    def test_h4_axis_aligned(self):
        assert lattice_direction(0, 4) == (1, 0)
        assert lattice_direction(1, 4) == (0, 1)
        assert lattice_direction(2, 4) == (-1, 0)
        assert lattice_direction(3, 4) == (0, -1)

    def test_h12_snaps_to_nearest_diagonal(self):
        # 30 degrees is closer to the 45-degree diagonal than to the axis
        assert lattice_direction(0, 12) == (1, 0)
        assert lattice_direction(1, 12) == (1, 1)
        assert lattice_direction(2, 12) == (1, 1)
        assert lattice_direction(3, 12) == (0, 1)
        assert lattice_direction(6, 12) == (-1, 0)
        assert lattice_direction(11, 12) == (1, -1)


class TestWorldMap:
    def test_presets(self):
        nav = load_preset("navworld-mini")
        assert (nav.width, nav.height, nav.n_headings) == (8, 8, 12)
        office = load_preset("officeworld-mini")
        assert (office.width, office.height, office.n_headings) == (12, 12, 4)
        with pytest.raises(ValueError):
            load_preset("atlantis")

    def test_border_must_be_walls(self):
        with pytest.raises(ValueError, match="border"):
            WorldMap.from_text("###\n#..\n###", n_headings=4)

    def test_free_region_must_be_connected(self):
        with pytest.raises(ValueError, match="connected"):
            WorldMap.from_text("#####\n#.#.#\n#####", n_headings=4)

    def test_unknown_character_rejected(self):
        with pytest.raises(ValueError, match="unknown map character"):
            WorldMap.from_text("###\n#?#\n###".replace("?", "X"), n_headings=4)

    def test_ragged_rows_rejected(self):
        with pytest.raises(ValueError, match="unequal"):
            WorldMap.from_text("####\n#.#\n####", n_headings=4)

    def test_texture_ids_from_letters(self):
        world = WorldMap.from_text("####\n#.a#\n####", n_headings=4)
        assert world.texture[1, 2] == 1
        assert world.texture[0, 0] == 0

    def test_from_file(self, tmp_path):
        path = tmp_path / "tiny.map"
        path.write_text("####\n#..#\n####\n")
        world = WorldMap.from_file(path, n_headings=4)
        assert world.name == "tiny"
        assert len(world.free_cells) == 2

    def test_occupancy_is_immutable(self):
        world = load_preset("navworld-mini")
        with pytest.raises(ValueError):
            world.occupancy[0, 0] = False


class TestReplay:
    def test_replay_counts_collisions(self):
        poses, hits = replay(OPEN_5x5_H4, Pose(3, 2, 0), [Action.FORWARD, Action.FORWARD])
        assert hits == 2
        assert poses[-1] == Pose(3, 2, 0)

    def test_inverse_map(self):
        assert ACTION_INVERSE[Action.FORWARD] == Action.BACKWARD
        assert ACTION_INVERSE[Action.TURN_LEFT] == Action.TURN_RIGHT
        assert ACTION_INVERSE[Action.STAY] == Action.STAY
