"""Feature disentanglement: split images into state and perspective features.

Three networks trained jointly from temporally-aligned multi-perspective data:
a state encoder F (image -> f, what the agent sees of the world), a
perspective encoder P (image -> g, which camera produced it), and a
reconstructor R (f + g -> image). The cycle loss swaps features across two
sampled images and penalizes the reconstruction of the corresponding cross
images, which is what forces the split: R can only regenerate I_i^q from
(F(I_i^p), P(I_j^q)) if F carries no perspective information and P no state
information.

A margin-based triplet loss on F alone is provided as a baseline, alone or
combined with the cycle loss.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from . import autodiff as ad
from .autodiff import Tensor
from .ckpt import load_checkpoint, save_checkpoint
from .data import Dataset
from .nn import Mlp, pack_params, unpack_params
from .optim import Adam

LOSS_COMBOS = ("cycle", "cycle+triplet", "triplet")


@dataclass
class FdnConfig:
    frame_width: int = 32
    d: int = 64
    d_p: int = 16
    hidden: tuple[int, ...] = (512, 256)
    norm: str = "l1"  # reconstruction norm: mean |e| ("l1") or mean e^2 ("l2")
    loss_combo: str = "cycle"
    triplet_alpha: float = 0.2
    lr: float = 0.0035
    batch: int = 32
    steps: int = 3000
    seed: int = 0
    exclude_robot_perspective: bool = False
    holdout_fraction: float = 0.1
    checkpoint_every: int = 0

    def __post_init__(self):
        if self.loss_combo not in LOSS_COMBOS:
            raise ValueError(f"loss_combo must be one of {LOSS_COMBOS}")
        if self.norm not in ("l1", "l2"):
            raise ValueError("norm must be 'l1' or 'l2'")


@dataclass
class FeatureVec:
    values: np.ndarray
    kind: str  # "state" or "perspective"

    def __post_init__(self):
        if self.kind not in ("state", "perspective"):
            raise ValueError(f"bad feature kind {self.kind!r}")
        if not np.all(np.isfinite(self.values)):
            raise ValueError("feature vector has non-finite entries")


class FdnModel:
    """Parameter container for (F, P, R) with tensor-level forward methods."""

    def __init__(self, config: FdnConfig, rng: Optional[np.random.Generator] = None):
        self.config = config
        rng = rng if rng is not None else np.random.default_rng(config.seed)
        d_pix = 3 * config.frame_width * config.frame_width
        hid = list(config.hidden)
        self.state_net = Mlp([d_pix, *hid, config.d], rng)
        self.persp_net = Mlp([d_pix, *hid, config.d_p], rng)
        self.recon_net = Mlp([config.d + config.d_p, *reversed(hid), d_pix], rng)

    # tensor-level forwards (batched [B, 3*W*W] inputs)
    def encode_state_t(self, x: Tensor) -> Tensor:
        return self.state_net(x)

    def encode_persp_t(self, x: Tensor) -> Tensor:
        return self.persp_net(x)

    def reconstruct_t(self, f: Tensor, g: Tensor) -> Tensor:
        return self.recon_net(ad.concat([f, g], axis=1))

    def parameters(self, combo: Optional[str] = None) -> list[Tensor]:
        combo = combo if combo is not None else self.config.loss_combo
        if combo == "triplet":  # baseline trains the state encoder only
            return self.state_net.parameters()
        return (
            self.state_net.parameters()
            + self.persp_net.parameters()
            + self.recon_net.parameters()
        )

    def save(self, path, extra_meta: Optional[dict] = None) -> Path:
        c = self.config
        meta = {
            "frame_width": c.frame_width,
            "d": c.d,
            "d_p": c.d_p,
            "hidden": ",".join(str(h) for h in c.hidden),
            "norm": c.norm,
            "loss_combo": c.loss_combo,
            "seed": c.seed,
        }
        if extra_meta:
            meta.update(extra_meta)
        nets = [self.state_net, self.persp_net, self.recon_net]
        return save_checkpoint(path, "fdn", meta, pack_params(nets))

    @classmethod
    def load(cls, path) -> tuple["FdnModel", dict]:
        _, meta, params = load_checkpoint(path, expect_kind="fdn")
        config = FdnConfig(
            frame_width=int(meta["frame_width"]),
            d=int(meta["d"]),
            d_p=int(meta["d_p"]),
            hidden=tuple(int(h) for h in meta["hidden"].split(",")),
            norm=meta["norm"],
            loss_combo=meta["loss_combo"],
            seed=int(meta["seed"]),
        )
        model = cls(config)
        unpack_params([model.state_net, model.persp_net, model.recon_net], params)
        return model, meta


def flatten_frames(frames) -> np.ndarray:
    arr = np.asarray(frames, dtype=np.float64)
    if arr.ndim == 3:  # single [3, W, W]
        return arr.reshape(1, -1)
    return arr.reshape(arr.shape[0], -1)


def encode_state(model: FdnModel, frame) -> FeatureVec:
    """State feature of one frame (deterministic pure function)."""
    x = flatten_frames(getattr(frame, "pixels", frame))
    _check_width(model, x)
    return FeatureVec(model.encode_state_t(Tensor(x)).data[0].copy(), "state")


def encode_perspective(model: FdnModel, frame) -> FeatureVec:
    x = flatten_frames(getattr(frame, "pixels", frame))
    _check_width(model, x)
    return FeatureVec(model.encode_persp_t(Tensor(x)).data[0].copy(), "perspective")


def encode_batch(model: FdnModel, frames: np.ndarray, chunk: int = 512) -> np.ndarray:
    """State features for [M, ...] frames, computed off-tape in chunks."""
    x = flatten_frames(frames)
    out = np.empty((x.shape[0], model.config.d))
    for lo in range(0, x.shape[0], chunk):
        out[lo : lo + chunk] = model.encode_state_t(Tensor(x[lo : lo + chunk])).data
    return out


def _check_width(model: FdnModel, x: np.ndarray):
    d_pix = 3 * model.config.frame_width**2
    if x.shape[1] != d_pix:
        raise ad.ShapeError(f"frame has {x.shape[1]} values, model expects {d_pix}")


def _recon_norm(target: Tensor, rec: Tensor, norm: str) -> Tensor:
    err = ad.sub(target, rec)
    if norm == "l2":
        return ad.mean(ad.mul(err, err))
    return ad.mean(ad.abs_(err))


def cycle_loss(model, frame_ip, frame_jq, frame_iq, frame_jp, norm: str = "l1") -> Tensor:
    """Cross-reconstruction loss for two (state, perspective) samples.

    frame_ip and frame_jq are the inputs; frame_iq and frame_jp are the
    aligned cross targets. Accepts [B, ...] batches; the result averages over
    the batch. Symmetric under swapping the (i,p) and (j,q) roles.
    """
    ip, jq = _pair_tensors(frame_ip, frame_jq)
    iq, jp = _pair_tensors(frame_iq, frame_jp)
    rec_iq = model.reconstruct_t(model.encode_state_t(ip), model.encode_persp_t(jq))
    rec_jp = model.reconstruct_t(model.encode_state_t(jq), model.encode_persp_t(ip))
    return ad.add(_recon_norm(iq, rec_iq, norm), _recon_norm(jp, rec_jp, norm))


def _pair_tensors(a, b) -> tuple[Tensor, Tensor]:
    ta = a if isinstance(a, Tensor) else Tensor(flatten_frames(a))
    tb = b if isinstance(b, Tensor) else Tensor(flatten_frames(b))
    if ta.shape != tb.shape:
        raise ad.ShapeError(f"paired frames differ in shape: {ta.shape} vs {tb.shape}")
    return ta, tb


def total_loss(model, batch: dict, norm: str = "l1") -> Tensor:
    """Mean cycle loss over a sampled minibatch of index pairs."""
    ip = batch["ip"]
    if len(ip) == 0:
        raise ValueError("empty minibatch")
    return cycle_loss(model, ip, batch["jq"], batch["iq"], batch["jp"], norm=norm)


def row_distance(a: Tensor, b: Tensor) -> Tensor:
    diff = ad.sub(a, b)
    return ad.sqrt(ad.add(ad.sum_axis(ad.mul(diff, diff), 1, keepdims=False), 1e-12))


def triplet_loss(model, frame_ip, frame_iq, frame_jp, alpha: float = 0.2) -> Tensor:
    """Margin hinge on state features: pull (i,p)-(i,q) together, push
    (i,p)-(j,p) apart. Requires i != j and p != q in the sampled triple."""
    if alpha < 0:
        raise ValueError("triplet margin must be >= 0")
    anchor = model.encode_state_t(_pair_tensors(frame_ip, frame_ip)[0])
    positive = model.encode_state_t(_pair_tensors(frame_iq, frame_iq)[0])
    negative = model.encode_state_t(_pair_tensors(frame_jp, frame_jp)[0])
    hinge = ad.relu(ad.add(ad.sub(row_distance(anchor, positive), row_distance(anchor, negative)), alpha))
    return ad.mean(hinge)


# ---------------------------------------------------------------------------
# dataset access


class StateTable:
    """Flat index over (demo, t) states with per-perspective frame access."""

    def __init__(self, dataset: Dataset, demo_indices: Optional[Sequence[int]] = None):
        self.dataset = dataset
        demo_indices = range(len(dataset.demos)) if demo_indices is None else demo_indices
        self.entries: list[tuple[int, int]] = []
        self.pose_keys: list[tuple[int, int, int]] = []
        for di in demo_indices:
            demo = dataset.demos[di]
            for t in range(demo.length):
                self.entries.append((di, t))
                p = demo.poses[t]
                self.pose_keys.append((p.col, p.row, p.heading))
        self.n_perspectives = dataset.manifest.n_perspectives

    def __len__(self):
        return len(self.entries)

    def frame(self, state_idx: int, persp_idx: int) -> np.ndarray:
        di, t = self.entries[state_idx]
        return self.dataset.demos[di].frames[t, persp_idx]

    def gather(self, state_idx, persp_idx) -> np.ndarray:
        """[B, 3*W*W] float64 batch of frames."""
        out = [self.frame(int(s), int(p)).reshape(-1) for s, p in zip(state_idx, persp_idx)]
        return np.asarray(out, dtype=np.float64)

    def distinct_pose_states(self) -> list[int]:
        seen: dict[tuple[int, int, int], int] = {}
        for idx, key in enumerate(self.pose_keys):
            seen.setdefault(key, idx)
        return sorted(seen.values())


def split_demos(dataset: Dataset, holdout_fraction: float, seed: int) -> tuple[list[int], list[int]]:
    """Deterministic train/held-out split at whole-demo granularity."""
    n = len(dataset.demos)
    order = np.random.default_rng(np.random.SeedSequence((seed, 0xD5))).permutation(n)
    n_hold = max(1, int(round(holdout_fraction * n))) if holdout_fraction > 0 else 0
    held = sorted(int(i) for i in order[:n_hold])
    train = sorted(int(i) for i in order[n_hold:])
    return train, held


# ---------------------------------------------------------------------------
# training


def _sample_pair_batch(table: StateTable, persp_pool, batch: int, rng) -> dict:
    n = len(table)
    i = rng.integers(n, size=batch)
    j = rng.integers(n, size=batch)
    p = np.asarray(persp_pool)[rng.integers(len(persp_pool), size=batch)]
    q = np.asarray(persp_pool)[rng.integers(len(persp_pool), size=batch)]
    return {
        "ip": table.gather(i, p),
        "jq": table.gather(j, q),
        "iq": table.gather(i, q),
        "jp": table.gather(j, p),
    }


def _sample_triplet_batch(table: StateTable, persp_pool, batch: int, rng) -> dict:
    n = len(table)
    pool = np.asarray(persp_pool)
    i = np.empty(batch, dtype=np.intp)
    j = np.empty(batch, dtype=np.intp)
    p = np.empty(batch, dtype=np.intp)
    q = np.empty(batch, dtype=np.intp)
    for b in range(batch):
        ii = int(rng.integers(n))
        jj = int(rng.integers(n))
        while table.pose_keys[jj] == table.pose_keys[ii]:  # i != j must differ in state
            jj = int(rng.integers(n))
        pp, qq = rng.choice(len(pool), size=2, replace=False)
        i[b], j[b], p[b], q[b] = ii, jj, pool[pp], pool[qq]
    return {"ip": table.gather(i, p), "iq": table.gather(i, q), "jp": table.gather(j, p)}


@dataclass
class FdnTrainResult:
    model: FdnModel
    losses: list[float] = field(default_factory=list)
    train_demos: list[int] = field(default_factory=list)
    heldout_demos: list[int] = field(default_factory=list)


def train_fdn(dataset: Dataset, config: FdnConfig, out_dir=None) -> FdnTrainResult:
    if dataset.manifest.frame_width != config.frame_width:
        raise ValueError(
            f"dataset frames are {dataset.manifest.frame_width} wide, config expects {config.frame_width}"
        )
    train_idx, held_idx = split_demos(dataset, config.holdout_fraction, config.seed)
    table = StateTable(dataset, train_idx)
    persp_pool = list(range(dataset.manifest.n_perspectives))
    if config.exclude_robot_perspective:
        persp_pool = persp_pool[1:]

    rng = np.random.default_rng(np.random.SeedSequence((config.seed, 0xF0)))
    model = FdnModel(config, np.random.default_rng(np.random.SeedSequence((config.seed, 0xF1))))
    params = model.parameters()
    opt = Adam(params, lr=config.lr)
    result = FdnTrainResult(model=model, train_demos=train_idx, heldout_demos=held_idx)

    for step_i in range(config.steps):
        try:
            with ad.Tape():
                if config.loss_combo == "cycle":
                    loss = total_loss(model, _sample_pair_batch(table, persp_pool, config.batch, rng), config.norm)
                elif config.loss_combo == "triplet":
                    tb = _sample_triplet_batch(table, persp_pool, config.batch, rng)
                    loss = triplet_loss(model, tb["ip"], tb["iq"], tb["jp"], config.triplet_alpha)
                else:  # cycle+triplet
                    loss = total_loss(model, _sample_pair_batch(table, persp_pool, config.batch, rng), config.norm)
                    tb = _sample_triplet_batch(table, persp_pool, config.batch, rng)
                    loss = ad.add(loss, triplet_loss(model, tb["ip"], tb["iq"], tb["jp"], config.triplet_alpha))
                grads = ad.backward(loss, wrt=params)
        except ad.NumericsError as exc:
            raise RuntimeError(f"training aborted at step {step_i}: {exc}") from exc
        opt.step(grads)
        result.losses.append(loss.item())
        if out_dir and config.checkpoint_every and (step_i + 1) % config.checkpoint_every == 0:
            model.save(Path(out_dir) / f"fdn_step{step_i + 1:06d}", _split_meta(result))
    if out_dir:
        model.save(Path(out_dir) / "fdn", _split_meta(result))
    return result


def _split_meta(result: FdnTrainResult) -> dict:
    return {
        "train_demos": ",".join(map(str, result.train_demos)),
        "holdout_demos": ",".join(map(str, result.heldout_demos)),
    }


# ---------------------------------------------------------------------------
# evaluation


def eval_pairwise_preference(model: FdnModel, table: StateTable, rng, n_samples: int = 500) -> float:
    """Fraction of (i, j, p, q) draws where the same-state cross-perspective
    feature distance beats the different-state same-perspective distance."""
    n = len(table)
    persps = range(table.n_perspectives)
    wins = 0
    for _ in range(n_samples):
        i = int(rng.integers(n))
        j = int(rng.integers(n))
        while table.pose_keys[j] == table.pose_keys[i]:
            j = int(rng.integers(n))
        p, q = rng.choice(len(list(persps)), size=2, replace=False)
        fa = encode_batch(model, table.gather([i], [p]))[0]
        fb = encode_batch(model, table.gather([i], [q]))[0]
        fc = encode_batch(model, table.gather([j], [p]))[0]
        if np.linalg.norm(fa - fb) < np.linalg.norm(fa - fc):
            wins += 1
    return wins / n_samples


def eval_retrieval(model: FdnModel, table: StateTable) -> dict:
    """Cross-perspective same-state top-1 retrieval accuracy in feature space,
    with a raw-pixel-space baseline under the identical protocol."""
    gallery = table.distinct_pose_states()
    n_persp = table.n_perspectives
    feats = []
    pixels = []
    for p in range(n_persp):
        frames = table.gather(gallery, [p] * len(gallery))
        feats.append(encode_batch(model, frames))
        pixels.append(frames)
    f_hits = f_total = 0
    px_hits = 0
    for p in range(n_persp):
        for q in range(n_persp):
            if p == q:
                continue
            f_hits += _top1_hits(feats[p], feats[q])
            px_hits += _top1_hits(pixels[p], pixels[q])
            f_total += len(gallery)
    return {
        "feature_top1": f_hits / f_total,
        "pixel_top1": px_hits / f_total,
        "gallery_size": len(gallery),
    }


def _top1_hits(queries: np.ndarray, gallery: np.ndarray) -> int:
    d2 = ((queries[:, None, :] - gallery[None, :, :]) ** 2).sum(axis=2)
    return int((d2.argmin(axis=1) == np.arange(len(queries))).sum())


def eval_generation(model: FdnModel, table: StateTable, rng, n_samples: int = 256) -> dict:
    """Perspective-swap reconstruction MSE against a per-perspective
    mean-image baseline on held-out states."""
    n = len(table)
    n_persp = table.n_perspectives
    mean_imgs = []
    for p in range(n_persp):
        frames = table.gather(range(n), [p] * n)
        mean_imgs.append(frames.mean(axis=0))
    swap_se = base_se = 0.0
    for _ in range(n_samples):
        i = int(rng.integers(n))
        j = int(rng.integers(n))
        p, q = rng.choice(n_persp, size=2, replace=False)
        ip = Tensor(table.gather([i], [p]))
        jq = Tensor(table.gather([j], [q]))
        target = table.gather([i], [q])[0]
        rec = model.reconstruct_t(model.encode_state_t(ip), model.encode_persp_t(jq)).data[0]
        swap_se += float(((rec - target) ** 2).mean())
        base_se += float(((mean_imgs[q] - target) ** 2).mean())
    return {
        "swap_mse": swap_se / n_samples,
        "baseline_mse": base_se / n_samples,
        "ratio": (swap_se / n_samples) / max(base_se / n_samples, 1e-12),
        "samples": n_samples,
    }


def generation_grid(model: FdnModel, table: StateTable, rng, rows: int = 6) -> list[list[np.ndarray]]:
    """Rows of (state source, perspective source, target, prediction) images."""
    w = model.config.frame_width
    n = len(table)
    grid = []
    for _ in range(rows):
        i = int(rng.integers(n))
        j = int(rng.integers(n))
        p, q = rng.choice(table.n_perspectives, size=2, replace=False)
        ip = table.gather([i], [p])
        jq = table.gather([j], [q])
        target = table.gather([i], [q])
        rec = model.reconstruct_t(
            model.encode_state_t(Tensor(ip)), model.encode_persp_t(Tensor(jq))
        ).data
        grid.append([arr.reshape(3, w, w) for arr in (ip[0], jq[0], target[0], rec[0])])
    return grid
