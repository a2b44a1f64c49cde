import hashlib

import numpy as np
import pytest

import pivnav.data as data
from pivnav.data import (
    Dataset,
    DatasetError,
    Demonstration,
    augment_reverse,
    augment_stay,
    build_dataset,
    generate_expert_demos,
)
from pivnav.raycast import default_perspectives, render
from pivnav.world import Action, Pose, load_preset, replay


@pytest.fixture(scope="module")
def tiny_dataset():
    return build_dataset("navworld-mini", count=6, length=5, seed=11, width=16)


@pytest.fixture(scope="module")
def world():
    return load_preset("navworld-mini")


class TestGeneration:
    def test_minimal_demo(self, world):
        demos = generate_expert_demos(world, count=1, length=2, rng_seed=0, width=16)
        demo = demos[0]
        assert demo.frames.shape == (2, 4, 3, 16, 16)
        assert len(demo.actions) == 1

    def test_length_below_two_rejected(self, world):
        with pytest.raises(ValueError):
            generate_expert_demos(world, count=1, length=1, rng_seed=0)

    def test_replay_reproduces_poses(self, world):
        demos = generate_expert_demos(world, count=10, length=6, rng_seed=3, width=16)
        for demo in demos:
            poses, collisions = replay(world, demo.poses[0], [Action(int(a)) for a in demo.actions])
            assert collisions == 0
            assert poses == demo.poses

    def test_temporal_alignment(self, world):
        # all perspectives at index t must re-render identically from poses[t]
        demos = generate_expert_demos(world, count=2, length=4, rng_seed=5, width=16)
        persps = default_perspectives()
        for demo in demos:
            for t in [0, demo.length - 1]:
                for n, persp in enumerate(persps):
                    expected = render(world, demo.poses[t], persp, 16).pixels.astype(np.float32)
                    assert np.array_equal(demo.frames[t, n], expected)

    def test_generation_reproducible(self, world):
        a = generate_expert_demos(world, count=3, length=4, rng_seed=9, width=16)
        b = generate_expert_demos(world, count=3, length=4, rng_seed=9, width=16)
        for da, db in zip(a, b):
            assert np.array_equal(da.frames, db.frames)
            assert da.poses == db.poses
            assert np.array_equal(da.actions, db.actions)


class TestAugmentation:
    def test_reverse_is_involution(self, world):
        demo = generate_expert_demos(world, count=1, length=5, rng_seed=1, width=16)[0]
        back = augment_reverse(augment_reverse(demo))
        assert np.array_equal(back.frames, demo.frames)
        assert back.poses == demo.poses
        assert np.array_equal(back.actions, demo.actions)

    def test_reverse_action_mapping(self):
        frames = np.zeros((3, 1, 3, 4, 4), dtype=np.float32)
        poses = [Pose(1, 1, 0), Pose(2, 1, 0), Pose(2, 1, 1)]
        demo = Demonstration(
            frames=frames,
            poses=poses,
            actions=np.asarray([Action.FORWARD, Action.TURN_LEFT], dtype=np.int32),
        )
        rev = augment_reverse(demo)
        assert list(rev.actions) == [Action.TURN_RIGHT, Action.BACKWARD]
        assert rev.source == "augmented-reverse"

    def test_reverse_requires_labels(self):
        demo = Demonstration(
            frames=np.zeros((2, 1, 3, 4, 4), dtype=np.float32),
            poses=[Pose(1, 1, 0), Pose(1, 1, 0)],
            actions=None,
        )
        with pytest.raises(DatasetError):
            augment_reverse(demo)

    def test_reversed_demo_passes_replay(self, world):
        demos = generate_expert_demos(world, count=5, length=6, rng_seed=2, width=16)
        for demo in demos:
            rev = augment_reverse(demo)
            poses, collisions = replay(world, rev.poses[0], [Action(int(a)) for a in rev.actions])
            assert collisions == 0
            assert poses == rev.poses

    def test_stay_demos_repeat_one_observation(self, world):
        demos = generate_expert_demos(world, count=2, length=4, rng_seed=4, width=16)
        stays = augment_stay(demos, count=3, length=4, rng=np.random.default_rng(0))
        assert len(stays) == 3
        for s in stays:
            assert np.all(s.frames == s.frames[0])
            assert all(a == Action.STAY for a in s.actions)
            assert s.source == "augmented-stay"

    def test_stay_from_empty_dataset_rejected(self):
        with pytest.raises(DatasetError):
            augment_stay([], count=1, length=4, rng=np.random.default_rng(0))


class TestPersistence:
    def test_round_trip_lossless(self, tiny_dataset, tmp_path):
        data.save(tiny_dataset, tmp_path / "ds")
        loaded = data.load(tmp_path / "ds")
        assert loaded.manifest == tiny_dataset.manifest
        assert len(loaded.demos) == len(tiny_dataset.demos)
        for a, b in zip(loaded.demos, tiny_dataset.demos):
            assert np.array_equal(a.frames, b.frames)
            assert a.poses == b.poses
            assert np.array_equal(a.actions, b.actions)
            assert a.source == b.source

    def test_truncated_blob_detected(self, tiny_dataset, tmp_path):
        root = data.save(tiny_dataset, tmp_path / "ds")
        blob = root / "demos" / "0000.bin"
        blob.write_bytes(blob.read_bytes()[:100])
        with pytest.raises(DatasetError, match="truncated|mismatch"):
            data.load(root)

    def test_manifest_mismatch_detected(self, tiny_dataset, tmp_path):
        root = data.save(tiny_dataset, tmp_path / "ds")
        mpath = root / "manifest.txt"
        mpath.write_text(mpath.read_text().replace("frame_width=16", "frame_width=32"))
        with pytest.raises(DatasetError, match="frame width"):
            data.load(root)

    def test_missing_demo_detected(self, tiny_dataset, tmp_path):
        root = data.save(tiny_dataset, tmp_path / "ds")
        (root / "demos" / "0001.bin").unlink()
        with pytest.raises(DatasetError, match="missing"):
            data.load(root)

    def test_bad_magic_detected(self, tiny_dataset, tmp_path):
        root = data.save(tiny_dataset, tmp_path / "ds")
        blob = root / "demos" / "0000.bin"
        raw = bytearray(blob.read_bytes())
        raw[:4] = b"XXXX"
        blob.write_bytes(bytes(raw))
        with pytest.raises(DatasetError, match="magic"):
            data.load(root)

    def test_dataset_bytes_reproducible(self, tmp_path):
        def digest(seed_dir):
            ds = build_dataset("navworld-mini", count=3, length=4, seed=21, width=16)
            root = data.save(ds, tmp_path / seed_dir)
            h = hashlib.sha256()
            h.update((root / "manifest.txt").read_bytes())
            for f in sorted((root / "demos").iterdir()):
                h.update(f.read_bytes())
            return h.hexdigest()

        assert digest("a") == digest("b")


class TestBuildDataset:
    def test_augmentation_bookkeeping(self, tiny_dataset):
        # 6 expert + 6 reversed + round(0.1 * 6) stay demos
        assert tiny_dataset.manifest.demo_count == 13
        sources = [d.source for d in tiny_dataset.demos]
        assert sources.count("expert") == 6
        assert sources.count("augmented-reverse") == 6
        assert sources.count("augmented-stay") == 1
        assert tiny_dataset.manifest.augment_reverse
        assert tiny_dataset.manifest.augment_stay_fraction == 0.1

    def test_padding_with_stay(self, world):
        # distance-0 tasks exist, so some demos must end in Stay padding
        demos = generate_expert_demos(world, count=20, length=4, rng_seed=8, width=16)
        assert any(demo.actions[-1] == Action.STAY for demo in demos)
