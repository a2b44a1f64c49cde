import numpy as np
import pytest

import pivnav.autodiff as ad
from pivnav.autodiff import Tensor
from pivnav.data import build_dataset
from pivnav.fdn import (
    FdnConfig,
    FdnModel,
    StateTable,
    cycle_loss,
    encode_batch,
    encode_perspective,
    encode_state,
    eval_generation,
    eval_pairwise_preference,
    eval_retrieval,
    split_demos,
    total_loss,
    train_fdn,
    triplet_loss,
)

TINY = FdnConfig(frame_width=4, d=4, d_p=3, hidden=(8, 6), seed=1)


@pytest.fixture(scope="module")
def tiny_model():
    return FdnModel(TINY)


@pytest.fixture(scope="module")
def tiny_dataset():
    return build_dataset("navworld-mini", count=8, length=5, seed=5, width=16)


def random_frames(rng, n, width=4):
    return rng.uniform(0.0, 1.0, size=(n, 3, width, width))


class TestEncoders:
    def test_identical_frames_identical_features(self, tiny_model):
        frame = random_frames(np.random.default_rng(0), 1)[0]
        a = encode_state(tiny_model, frame)
        b = encode_state(tiny_model, frame.copy())
        assert np.array_equal(a.values, b.values)
        assert a.kind == "state"

    def test_perspective_kind(self, tiny_model):
        frame = random_frames(np.random.default_rng(1), 1)[0]
        g = encode_perspective(tiny_model, frame)
        assert g.kind == "perspective"
        assert g.values.shape == (3,)

    def test_shape_mismatch_rejected(self, tiny_model):
        with pytest.raises(ad.ShapeError):
            encode_state(tiny_model, np.zeros((3, 8, 8)))

    def test_batch_encode_matches_single(self, tiny_model):
        frames = random_frames(np.random.default_rng(2), 5)
        batch = encode_batch(tiny_model, frames)
        for i in range(5):
            assert np.allclose(batch[i], encode_state(tiny_model, frames[i]).values)


class _OracleFdn:
    """Lookup-table FDN over a 2-state, 2-perspective toy world: encoding is
    exact and reconstruction returns the ground-truth cross image."""

    def __init__(self, images):
        self.images = images  # [2, 2, D] state x perspective

    def _match(self, x, axis):
        out = []
        for row in x.data:
            hits = [
                (s, p)
                for s in range(2)
                for p in range(2)
                if np.array_equal(row, self.images[s, p])
            ]
            out.append(float(hits[0][axis]))
        return Tensor(np.asarray(out).reshape(-1, 1))

    def encode_state_t(self, x):
        return self._match(x, 0)

    def encode_persp_t(self, x):
        return self._match(x, 1)

    def reconstruct_t(self, f, g):
        rows = [self.images[int(s[0]), int(p[0])] for s, p in zip(f.data, g.data)]
        return Tensor(np.asarray(rows))


@pytest.fixture(scope="module")
def oracle_world():
    rng = np.random.default_rng(3)
    images = rng.uniform(0, 1, size=(2, 2, 12))
    return _OracleFdn(images), images


class TestCycleLoss:
    def test_symmetric_under_role_swap(self, tiny_model):
        rng = np.random.default_rng(4)
        ip, jq, iq, jp = (random_frames(rng, 2) for _ in range(4))
        a = cycle_loss(tiny_model, ip, jq, iq, jp)
        b = cycle_loss(tiny_model, jq, ip, jp, iq)
        assert a.item() == b.item()

    def test_degenerate_indices_reduce_to_self_reconstruction(self, tiny_model):
        frame = random_frames(np.random.default_rng(5), 3)
        loss = cycle_loss(tiny_model, frame, frame, frame, frame)
        x = Tensor(frame.reshape(3, -1))
        rec = tiny_model.reconstruct_t(tiny_model.encode_state_t(x), tiny_model.encode_persp_t(x))
        self_term = ad.mean(ad.abs_(ad.sub(x, rec))).item()
        assert loss.item() == pytest.approx(2 * self_term, rel=1e-12)

    def test_nonnegative(self, tiny_model):
        rng = np.random.default_rng(6)
        loss = cycle_loss(
            tiny_model,
            random_frames(rng, 4),
            random_frames(rng, 4),
            random_frames(rng, 4),
            random_frames(rng, 4),
        )
        assert loss.item() >= 0.0

    def test_perfect_oracle_gives_zero(self, oracle_world):
        model, images = oracle_world
        ip = images[0, 0][None, :]
        jq = images[1, 1][None, :]
        iq = images[0, 1][None, :]
        jp = images[1, 0][None, :]
        assert cycle_loss(model, ip, jq, iq, jp).item() == 0.0

    def test_gradients_match_finite_differences(self):
        model = FdnModel(TINY)
        rng = np.random.default_rng(7)
        ip, jq, iq, jp = (random_frames(rng, 2) for _ in range(4))
        report = ad.grad_check(
            lambda *_: cycle_loss(model, ip, jq, iq, jp),
            model.parameters("cycle"),
            eps=1e-4,
            tolerance=1e-4,
        )
        assert report.passed, repr(report)


class TestTotalLoss:
    def test_single_pair_equals_cycle_loss(self, tiny_model):
        rng = np.random.default_rng(8)
        ip, jq, iq, jp = (random_frames(rng, 1) for _ in range(4))
        batch = {"ip": ip, "jq": jq, "iq": iq, "jp": jp}
        assert total_loss(tiny_model, batch).item() == cycle_loss(tiny_model, ip, jq, iq, jp).item()

    def test_empty_batch_rejected(self, tiny_model):
        empty = np.zeros((0, 3, 4, 4))
        with pytest.raises(ValueError, match="empty"):
            total_loss(tiny_model, {"ip": empty, "jq": empty, "iq": empty, "jp": empty})


class _IdentityEncoder:
    """Feature extractor stub: features are the (flattened) inputs."""

    def encode_state_t(self, x):
        return x


class TestTripletLoss:
    def test_clamped_to_zero(self):
        model = _IdentityEncoder()
        anchor = np.zeros((1, 4))
        positive = np.zeros((1, 4))  # positive distance 0
        negative = np.ones((1, 4))  # negative distance 2 > alpha
        loss = triplet_loss(model, anchor, positive, negative, alpha=0.2)
        assert loss.item() == 0.0

    def test_equal_distances_give_alpha(self):
        model = _IdentityEncoder()
        anchor = np.zeros((1, 4))
        other = np.ones((1, 4))
        loss = triplet_loss(model, anchor, other, other.copy(), alpha=0.2)
        assert loss.item() == pytest.approx(0.2, abs=1e-6)

    def test_negative_margin_rejected(self):
        with pytest.raises(ValueError):
            triplet_loss(_IdentityEncoder(), np.zeros((1, 2)), np.zeros((1, 2)), np.zeros((1, 2)), alpha=-1.0)

    def test_nonnegative_always(self, tiny_model):
        rng = np.random.default_rng(9)
        for _ in range(10):
            loss = triplet_loss(
                tiny_model,
                random_frames(rng, 3),
                random_frames(rng, 3),
                random_frames(rng, 3),
                alpha=0.2,
            )
            assert loss.item() >= 0.0


SMOKE = FdnConfig(
    frame_width=16,
    d=8,
    d_p=4,
    hidden=(64, 32),
    batch=8,
    steps=150,
    seed=2,
    holdout_fraction=0.25,
)


class TestTraining:
    def test_loss_decreases(self, tiny_dataset):
        result = train_fdn(tiny_dataset, SMOKE)
        assert np.mean(result.losses[:20]) > np.mean(result.losses[-20:])

    def test_fixed_seed_bit_identical(self, tiny_dataset):
        a = train_fdn(tiny_dataset, SMOKE)
        b = train_fdn(tiny_dataset, SMOKE)
        assert a.losses[-1] == b.losses[-1]
        assert np.array_equal(a.model.state_net.to_vector(), b.model.state_net.to_vector())

    def test_loss_combos_run(self, tiny_dataset):
        for combo in ("cycle+triplet", "triplet"):
            cfg = FdnConfig(
                frame_width=16, d=8, d_p=4, hidden=(32, 16), batch=4, steps=5, seed=3, loss_combo=combo
            )
            result = train_fdn(tiny_dataset, cfg)
            assert len(result.losses) == 5

    def test_triplet_only_trains_state_net_only(self, tiny_dataset):
        cfg = FdnConfig(frame_width=16, d=8, d_p=4, hidden=(32, 16), batch=4, steps=5, seed=3, loss_combo="triplet")
        result = train_fdn(tiny_dataset, cfg)
        init = FdnModel(cfg, np.random.default_rng(np.random.SeedSequence((cfg.seed, 0xF1))))
        assert not np.array_equal(result.model.state_net.to_vector(), init.state_net.to_vector())
        assert np.array_equal(result.model.persp_net.to_vector(), init.persp_net.to_vector())
        assert np.array_equal(result.model.recon_net.to_vector(), init.recon_net.to_vector())

    def test_checkpoint_round_trip(self, tiny_dataset, tmp_path):
        result = train_fdn(tiny_dataset, SMOKE.__class__(**{**SMOKE.__dict__, "steps": 5}), out_dir=tmp_path)
        loaded, meta = FdnModel.load(tmp_path / "fdn")
        assert np.array_equal(loaded.state_net.to_vector(), result.model.state_net.to_vector())
        assert loaded.config.d == 8
        assert "holdout_demos" in meta

    def test_frame_width_mismatch_rejected(self, tiny_dataset):
        with pytest.raises(ValueError, match="wide"):
            train_fdn(tiny_dataset, FdnConfig(frame_width=32, steps=1))


class TestEvaluation:
    def test_split_is_deterministic_and_disjoint(self, tiny_dataset):
        t1, h1 = split_demos(tiny_dataset, 0.25, seed=7)
        t2, h2 = split_demos(tiny_dataset, 0.25, seed=7)
        assert (t1, h1) == (t2, h2)
        assert not set(t1) & set(h1)
        assert len(t1) + len(h1) == len(tiny_dataset.demos)

    def test_random_init_preference_near_chance(self, tiny_dataset):
        model = FdnModel(FdnConfig(frame_width=16, d=8, d_p=4, hidden=(32, 16), seed=11))
        table = StateTable(tiny_dataset)
        pref = eval_pairwise_preference(model, table, np.random.default_rng(0), n_samples=200)
        assert 0.15 < pref < 0.85

    def test_retrieval_reports_both_spaces(self, tiny_dataset):
        model = FdnModel(FdnConfig(frame_width=16, d=8, d_p=4, hidden=(32, 16), seed=12))
        table = StateTable(tiny_dataset, [0, 1])
        report = eval_retrieval(model, table)
        assert 0.0 <= report["feature_top1"] <= 1.0
        assert 0.0 <= report["pixel_top1"] <= 1.0
        assert report["gallery_size"] > 0

    def test_generation_oracle_perfect_is_zero(self, oracle_world):
        model, images = oracle_world

        class _Table:
            n_perspectives = 2

            def __len__(self):
                return 2

            def gather(self, states, persps):
                return np.asarray([images[int(s), int(p)] for s, p in zip(states, persps)])

        report = eval_generation(model, _Table(), np.random.default_rng(0), n_samples=16)
        assert report["swap_mse"] == 0.0
        assert report["baseline_mse"] > 0.0
