"""Inverse dynamics model: classify the action behind consecutive state features.

Training data comes from robot random walks (uniform actions, episode ends on
collision or after 30 steps); each transition is rendered from the robot
camera and encoded with a frozen feature extractor. The trained classifier
then labels demonstrations recorded from other perspectives, relying on the
extractor's perspective invariance to bridge the gap.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from . import autodiff as ad
from .autodiff import Tensor
from .ckpt import load_checkpoint, save_checkpoint
from .data import Demonstration
from .expert import random_pose
from .fdn import FdnModel, encode_batch
from .nn import Mlp, pack_params, unpack_params
from .optim import Adam
from .raycast import DEFAULT_FRAME_WIDTH, PerspectiveSpec, render
from .world import Action, Pose, WorldMap, step

N_ACTIONS = 5


@dataclass
class TransitionRecord:
    f_t: np.ndarray
    f_t1: np.ndarray
    action: int
    episode: int
    step_index: int
    pose_t: Pose  # simulator ground truth, kept for verification only
    pose_t1: Pose


@dataclass
class IdmConfig:
    hidden: tuple[int, ...] = (128, 64)
    lr: float = 0.0035
    batch: int = 32
    steps: int = 1500
    seed: int = 0
    holdout_fraction: float = 0.1
    episodes: int = 200
    episode_cap: int = 30  # max transitions per random-walk episode


class IdmModel:
    """MLP over concat(f_t, f_t1) -> 5 action logits.

    Inputs are standardized with training-set statistics (stored alongside the
    weights); raw feature scale depends on the upstream extractor and is not
    assumed.
    """

    def __init__(self, d: int, config: IdmConfig, rng: Optional[np.random.Generator] = None):
        self.d = d
        self.config = config
        rng = rng if rng is not None else np.random.default_rng(config.seed)
        self.net = Mlp([2 * d, *config.hidden, N_ACTIONS], rng)
        self.mu = np.zeros(2 * d)
        self.sigma = np.ones(2 * d)

    def normalize(self, x: np.ndarray) -> np.ndarray:
        return (x - self.mu) / self.sigma

    def logits(self, f_t: np.ndarray, f_t1: np.ndarray) -> np.ndarray:
        x = Tensor(self.normalize(np.concatenate([f_t, f_t1], axis=1)))
        return self.net(x).data

    def predict(self, f_t: np.ndarray, f_t1: np.ndarray) -> np.ndarray:
        """Argmax actions; ties resolve to the lowest action index."""
        return self.logits(f_t, f_t1).argmax(axis=1).astype(np.int32)

    def save(self, path, extra_meta: Optional[dict] = None) -> Path:
        meta = {
            "d": self.d,
            "hidden": ",".join(str(h) for h in self.config.hidden),
            "seed": self.config.seed,
        }
        if extra_meta:
            meta.update(extra_meta)
        blob = np.concatenate([pack_params([self.net]), self.mu, self.sigma])
        return save_checkpoint(path, "idm", meta, blob)

    @classmethod
    def load(cls, path) -> tuple["IdmModel", dict]:
        _, meta, params = load_checkpoint(path, expect_kind="idm")
        config = IdmConfig(hidden=tuple(int(h) for h in meta["hidden"].split(",")), seed=int(meta["seed"]))
        model = cls(int(meta["d"]), config)
        n_stats = 2 * model.d
        unpack_params([model.net], params[: -2 * n_stats])
        model.mu = params[-2 * n_stats : -n_stats].copy()
        model.sigma = params[-n_stats:].copy()
        return model, meta


def collect_robot_episodes(
    world: WorldMap,
    fdn: FdnModel,
    episode_count: int,
    seed: int,
    robot_persp: PerspectiveSpec,
    width: int = DEFAULT_FRAME_WIDTH,
    episode_cap: int = 30,
) -> list[TransitionRecord]:
    """Uniform random walks from random starts, one episode per seed stream.

    An episode ends when a move collides (the blocked transition is dropped,
    so feature equality uniquely identifies Stay) or after episode_cap steps.
    """
    records: list[TransitionRecord] = []
    if fdn.config.frame_width != width:
        raise ValueError(f"fdn expects width {fdn.config.frame_width}, got {width}")
    for e in range(episode_count):
        rng = np.random.default_rng(np.random.SeedSequence((seed, e)))
        pose = random_pose(world, rng)
        feat = encode_batch(fdn, render(world, pose, robot_persp, width).pixels.astype(np.float32))[0]
        for step_i in range(episode_cap):
            action = Action(int(rng.integers(N_ACTIONS)))
            nxt, collided = step(world, pose, action)
            if collided:
                break
            feat1 = encode_batch(fdn, render(world, nxt, robot_persp, width).pixels.astype(np.float32))[0]
            records.append(
                TransitionRecord(
                    f_t=feat,
                    f_t1=feat1,
                    action=int(action),
                    episode=e,
                    step_index=step_i,
                    pose_t=pose,
                    pose_t1=nxt,
                )
            )
            pose, feat = nxt, feat1
    return records


@dataclass
class IdmReport:
    overall_accuracy: float
    per_class_accuracy: dict[int, float]
    stay_accuracy: float
    n_train: int
    n_heldout: int
    losses: list[float] = field(default_factory=list)


def train_idm(records: Sequence[TransitionRecord], config: IdmConfig) -> tuple[IdmModel, IdmReport]:
    if not records:
        raise ValueError("no transitions to train on")
    X_t = np.asarray([r.f_t for r in records])
    X_t1 = np.asarray([r.f_t1 for r in records])
    y = np.asarray([r.action for r in records], dtype=np.intp)
    if len(np.unique(y)) < 2:
        raise ValueError("transition dataset covers a single action class")

    rng = np.random.default_rng(np.random.SeedSequence((config.seed, 0x1D)))
    order = rng.permutation(len(records))
    n_hold = max(1, int(round(config.holdout_fraction * len(records))))
    hold, train = order[:n_hold], order[n_hold:]

    d = X_t.shape[1]
    model = IdmModel(d, config, np.random.default_rng(np.random.SeedSequence((config.seed, 0x1E))))
    params = model.net.parameters()
    opt = Adam(params, lr=config.lr)
    X = np.concatenate([X_t, X_t1], axis=1)
    model.mu = X[train].mean(axis=0)
    model.sigma = np.maximum(X[train].std(axis=0), 1e-6)
    Xn = model.normalize(X)
    losses = []
    for _ in range(config.steps):
        idx = train[rng.integers(len(train), size=config.batch)]
        with ad.Tape():
            logits = model.net(Tensor(Xn[idx]))
            loss = ad.cross_entropy(logits, y[idx])
            grads = ad.backward(loss, wrt=params)
        opt.step(grads)
        losses.append(loss.item())

    pred = model.predict(X_t[hold], X_t1[hold])
    truth = y[hold]
    per_class = {}
    for a in range(N_ACTIONS):
        sel = truth == a
        per_class[a] = float((pred[sel] == a).mean()) if sel.any() else float("nan")
    stay_sel = truth == int(Action.STAY)
    report = IdmReport(
        overall_accuracy=float((pred == truth).mean()),
        per_class_accuracy=per_class,
        stay_accuracy=float((pred[stay_sel] == int(Action.STAY)).mean()) if stay_sel.any() else float("nan"),
        n_train=len(train),
        n_heldout=len(hold),
        losses=losses,
    )
    return model, report


def label_demo(
    idm: IdmModel, fdn: FdnModel, demo: Demonstration, perspective: int
) -> tuple[Demonstration, Optional[float]]:
    """Predict actions for consecutive frame pairs seen from one perspective.

    Returns a copy of the demo with predicted actions attached, plus the
    disagreement rate against existing labels when the demo has any.
    """
    if not 0 <= perspective < demo.n_perspectives:
        raise ValueError(f"demo has no perspective {perspective}")
    feats = encode_batch(fdn, demo.frames[:, perspective])
    labels = idm.predict(feats[:-1], feats[1:])
    disagreement = None
    if demo.actions is not None:
        disagreement = float((labels != np.asarray(demo.actions)).mean())
    labeled = Demonstration(
        frames=demo.frames,
        poses=demo.poses,
        actions=labels.astype(np.int32),
        source=demo.source,
    )
    return labeled, disagreement


def labeling_report(
    idm: IdmModel, fdn: FdnModel, demos: Sequence[Demonstration], perspectives: Sequence[int]
) -> dict[int, float]:
    """Ground-truth agreement rate of IDM labels per source perspective.

    Comparing the robot perspective to the human ones quantifies the
    feature-transfer gap instead of assuming it away.
    """
    out = {}
    for p in perspectives:
        agree = total = 0
        for demo in demos:
            if demo.actions is None:
                continue
            _, dis = label_demo(idm, fdn, demo, p)
            agree += (1.0 - dis) * (demo.length - 1)
            total += demo.length - 1
        out[p] = agree / total if total else float("nan")
    return out
