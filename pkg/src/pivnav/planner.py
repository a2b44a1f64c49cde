"""Model-based imitation: plan in feature space by gradient descent, learn the
dynamics model so those plans imitate expert actions, execute MPC-style.

Planning relaxes the discrete action sequence to per-step logits: each step's
action embedding is the softmax-weighted mix of a learned embedding table, fed
to a residual recurrent cell that predicts the next state feature. The plan
loss is the Huber distance between the final predicted feature and the goal
feature; a few steps of plain gradient descent on the logits produce the plan.
Training runs that inner descent on the tape and backpropagates a
cross-entropy between the resulting logits and the expert actions into the
model parameters (and, for the jointly-trained baseline, an image encoder).
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
from .fdn import FdnModel, encode_batch
from .nn import Mlp, pack_params, unpack_params
from .optim import Adam
from .raycast import DEFAULT_FRAME_WIDTH, PerspectiveSpec, render
from .world import Action, Pose, WorldMap, step

N_ACTIONS = 5


@dataclass
class PlannerConfig:
    d: int = 64
    action_embed: int = 16
    cell_hidden: int = 128
    h_train: int = 10  # max imitation segment length
    h_max: int = 20  # execution horizon cap
    inner_steps: int = 10
    inner_lr: float = 0.5
    plan_restarts: int = 1  # independent inner-descent initializations at execution
    huber_delta: float = 1.0
    plan_all_steps: bool = False  # Huber on every predicted feature, not just the last
    first_order: bool = False  # truncate gradients through the inner descent
    init_sigma: float = 0.1
    lr: float = 0.0035
    batch: int = 32
    steps: int = 4000
    seed: int = 0
    label_perspective: int = 1  # demo perspective the labeler reads
    train_perspectives: str = "human"  # start/goal encodings seen in training
    eval_every: int = 200
    holdout_fraction: float = 0.1
    goal_heading_match: bool = False


class DynamicsModel:
    """Residual recurrent cell over state features plus an action embedding table."""

    def __init__(self, config: PlannerConfig, rng: Optional[np.random.Generator] = None):
        self.config = config
        rng = rng if rng is not None else np.random.default_rng(config.seed)
        d, e = config.d, config.action_embed
        self.embed = ad.param(rng.uniform(-0.5, 0.5, size=(N_ACTIONS, e)))
        self.cell = Mlp([d + e, config.cell_hidden, d], rng)

    def step_t(self, f: Tensor, action_probs: Tensor) -> Tensor:
        emb = ad.matmul(action_probs, self.embed)
        return ad.add(f, self.cell(ad.concat([f, emb], axis=1)))

    def parameters(self) -> list[Tensor]:
        return [self.embed] + self.cell.parameters()

    def save(self, path, extra_meta: Optional[dict] = None) -> Path:
        c = self.config
        meta = {
            "d": c.d,
            "action_embed": c.action_embed,
            "cell_hidden": c.cell_hidden,
            "h_max": c.h_max,
            "inner_steps": c.inner_steps,
            "inner_lr": repr(c.inner_lr),
            "plan_restarts": c.plan_restarts,
            "huber_delta": repr(c.huber_delta),
            "init_sigma": repr(c.init_sigma),
            "seed": c.seed,
        }
        if extra_meta:
            meta.update(extra_meta)
        blob = np.concatenate([self.embed.data.reshape(-1), pack_params([self.cell])])
        return save_checkpoint(path, "policy", meta, blob)

    @classmethod
    def load(cls, path) -> tuple["DynamicsModel", dict]:
        _, meta, params = load_checkpoint(path, expect_kind="policy")
        config = PlannerConfig(
            d=int(meta["d"]),
            action_embed=int(meta["action_embed"]),
            cell_hidden=int(meta["cell_hidden"]),
            h_max=int(meta["h_max"]),
            inner_steps=int(meta["inner_steps"]),
            inner_lr=float(meta["inner_lr"]),
            plan_restarts=int(meta.get("plan_restarts", 1)),
            huber_delta=float(meta["huber_delta"]),
            init_sigma=float(meta["init_sigma"]),
            seed=int(meta["seed"]),
        )
        model = cls(config)
        n_emb = model.embed.data.size
        model.embed.data[...] = params[:n_emb].reshape(model.embed.data.shape)
        unpack_params([model.cell], params[n_emb:])
        return model, meta


def rollout_batch(model: DynamicsModel, f0: Tensor, logit_steps: Sequence[Tensor]) -> list[Tensor]:
    """Apply the cell once per action step; k logit tensors give k predictions."""
    if len(logit_steps) < 1:
        raise ValueError("rollout needs at least one action step")
    if len(logit_steps) > model.config.h_max:
        raise ValueError(f"horizon {len(logit_steps)} exceeds h_max {model.config.h_max}")
    feats = []
    f = f0
    for lt in logit_steps:
        f = model.step_t(f, ad.softmax(lt, axis=1))
        feats.append(f)
    return feats


def rollout(model: DynamicsModel, f0, logits) -> list[Tensor]:
    """Single-instance rollout from a [h, 5] logits tensor (differentiable)."""
    logits = logits if isinstance(logits, Tensor) else Tensor(logits)
    h = logits.shape[0]
    f = f0 if isinstance(f0, Tensor) else Tensor(np.asarray(f0, dtype=np.float64).reshape(1, -1))
    steps = [ad.narrow(logits, 0, t, 1) for t in range(h)]
    return rollout_batch(model, f, steps)


def _huber_rows(pred: Tensor, target: Tensor, delta: float) -> Tensor:
    """Per-row mean Huber, [B, d] -> [B]; rows stay independent so batched
    planning behaves identically to planning each row alone."""
    e = ad.sub(pred, target)
    c = ad.clip_const(e, -delta, delta)
    hub = ad.add(ad.mul(ad.mul(c, c), 0.5), ad.mul(ad.sub(ad.abs_(e), ad.abs_(c)), delta))
    return ad.mul(ad.sum_axis(hub, 1, keepdims=False), 1.0 / pred.shape[1])


def _plan_objective(model, feats: list[Tensor], f_goal: Tensor, delta: float, all_steps: bool) -> Tensor:
    """Summed over batch rows, mean over feature dims (and steps if enabled)."""
    if all_steps:
        total = _huber_rows(feats[0], f_goal, delta)
        for f in feats[1:]:
            total = ad.add(total, _huber_rows(f, f_goal, delta))
        return ad.mul(ad.sum_all(total), 1.0 / len(feats))
    return ad.sum_all(_huber_rows(feats[-1], f_goal, delta))


def plan_steps(
    model: DynamicsModel,
    f0: Tensor,
    f_goal: Tensor,
    h: int,
    rng: np.random.Generator,
    inner_steps: Optional[int] = None,
    inner_lr: Optional[float] = None,
    record_higher_order: bool = False,
    first_order: Optional[bool] = None,
) -> tuple[list[Tensor], list[float]]:
    """Inner-loop descent on per-step logits; batched over rows of f0/f_goal.

    Returns the optimized logit tensors (graph-connected when recording) and
    the pre-update plan-loss trace.
    """
    cfg = model.config
    inner_steps = cfg.inner_steps if inner_steps is None else inner_steps
    inner_lr = cfg.inner_lr if inner_lr is None else inner_lr
    first_order = cfg.first_order if first_order is None else first_order
    if h < 1:
        raise ValueError("plan horizon must be >= 1")
    batch = f0.shape[0]
    logit_steps = [ad.param(rng.normal(0.0, cfg.init_sigma, size=(batch, N_ACTIONS))) for _ in range(h)]
    trace: list[float] = []
    for it in range(inner_steps):
        if first_order and record_higher_order:
            # MAML-style truncation: evaluate the plan gradient at a detached
            # copy of the logits so the recursive (Hessian) chain is cut while
            # the model-parameter dependence of each inner gradient survives.
            roll_in = [ad.param(lt.data.copy()) for lt in logit_steps]
        else:
            roll_in = logit_steps
        feats = rollout_batch(model, f0, roll_in)
        loss = _plan_objective(model, feats, f_goal, cfg.huber_delta, cfg.plan_all_steps)
        if not np.isfinite(loss.data):
            raise ad.NumericsError(f"non-finite plan loss at inner step {it}")
        trace.append(loss.item())
        grads = ad.backward(loss, wrt=roll_in, higher_order=record_higher_order)
        new_steps = []
        for lt, key in zip(logit_steps, roll_in):
            g = grads[key]
            if g is None:
                g = Tensor(np.zeros_like(lt.data))
            elif not record_higher_order:
                g = Tensor(g.data)
            new_steps.append(ad.sub(lt, ad.mul(g, inner_lr)))
        logit_steps = new_steps
    return logit_steps, trace


@dataclass
class ActionPlan:
    logits: np.ndarray  # [h, 5] final logits
    inner_steps: int
    trace: list[float] = field(default_factory=list)

    @property
    def discrete(self) -> list[Action]:
        """Per-step argmax; ties resolve to the lowest action index."""
        return [Action(int(i)) for i in self.logits.argmax(axis=1)]


def plan(
    model: DynamicsModel,
    f0,
    f_goal,
    h: int,
    rng: np.random.Generator,
    inner_steps: Optional[int] = None,
    inner_lr: Optional[float] = None,
    restarts: Optional[int] = None,
) -> ActionPlan:
    """Optimize one action sequence toward a goal feature (execution path).

    With multiple restarts the descents run batched from independent random
    initializations and the lowest-plan-loss restart wins. The recorded trace
    is the per-restart mean of the pre-update plan loss.
    """
    cfg = model.config
    restarts = cfg.plan_restarts if restarts is None else restarts
    if restarts < 1:
        raise ValueError("need at least one restart")
    f0_row = np.asarray(f0, dtype=np.float64).reshape(1, -1)
    fg_row = np.asarray(f_goal, dtype=np.float64).reshape(1, -1)
    f0_t = Tensor(np.repeat(f0_row, restarts, axis=0))
    fg_t = Tensor(np.repeat(fg_row, restarts, axis=0))
    with ad.Tape():
        steps, trace = plan_steps(model, f0_t, fg_t, h, rng, inner_steps, inner_lr)
        finals = rollout_batch(model, f0_t, steps)[-1]
        delta = cfg.huber_delta
        e = np.clip(finals.data - fg_t.data, -delta, delta)
        full = np.abs(finals.data - fg_t.data)
        row_loss = (0.5 * e * e + delta * (full - np.abs(e))).mean(axis=1)
        best = int(row_loss.argmin())
        logits = np.stack([s.data[best] for s in steps], axis=0)
    return ActionPlan(logits=logits, inner_steps=len(trace), trace=[t / restarts for t in trace])


def discrete_plan_loss(model: DynamicsModel, f0, f_goal, actions: Sequence[int]) -> float:
    """Plan loss of a fixed discrete action sequence (one-hot logits)."""
    f0_t = Tensor(np.asarray(f0, dtype=np.float64).reshape(1, -1))
    fg_t = Tensor(np.asarray(f_goal, dtype=np.float64).reshape(1, -1))
    onehot = [Tensor(_one_hot(a)) for a in actions]
    feats = rollout_batch(model, f0_t, onehot)
    return _plan_objective(model, feats, fg_t, model.config.huber_delta, model.config.plan_all_steps).item()


def _one_hot(action: int, scale: float = 1e3) -> np.ndarray:
    # large logit gap so the softmax mix is effectively the pure action
    row = np.zeros((1, N_ACTIONS))
    row[0, int(action)] = scale
    return row


def enumerate_best_plan(model: DynamicsModel, f0, f_goal, h: int) -> tuple[list[int], float]:
    """Brute-force oracle: evaluate all 5^h discrete plans in one batched rollout."""
    from itertools import product

    if model.config.plan_all_steps:  # rare flag: fall back to per-sequence scoring
        best, best_loss = None, np.inf
        for seq in product(range(N_ACTIONS), repeat=h):
            loss = discrete_plan_loss(model, f0, f_goal, list(seq))
            if loss < best_loss:
                best, best_loss = list(seq), loss
        return best, best_loss

    seqs = np.asarray(list(product(range(N_ACTIONS), repeat=h)), dtype=np.intp)
    n = len(seqs)
    f0_t = Tensor(np.repeat(np.asarray(f0, dtype=np.float64).reshape(1, -1), n, axis=0))
    fg = np.asarray(f_goal, dtype=np.float64).reshape(1, -1)
    onehots = []
    for t in range(h):
        rows = np.zeros((n, N_ACTIONS))
        rows[np.arange(n), seqs[:, t]] = 1e3
        onehots.append(Tensor(rows))
    final = rollout_batch(model, f0_t, onehots)[-1].data
    delta = model.config.huber_delta
    e = np.clip(final - fg, -delta, delta)
    full = np.abs(final - fg)
    losses = (0.5 * e * e + delta * (full - np.abs(e))).mean(axis=1)
    best = int(losses.argmin())
    return list(seqs[best]), float(losses[best])


# ---------------------------------------------------------------------------
# imitation training


@dataclass
class Segment:
    f0: np.ndarray
    f_goal: np.ndarray
    actions: np.ndarray  # [k]


def imitation_step(
    model: DynamicsModel,
    segments: Sequence[Segment],
    rng: np.random.Generator,
    extra_params: Sequence[Tensor] = (),
    encode=None,
):
    """One outer step: plan through the recorded inner loop, score the logits
    against expert actions, and differentiate into the model parameters.

    ``encode`` (pixels -> feature Tensor, on-tape) switches on joint encoder
    training; without it segments carry precomputed features.
    """
    if not segments:
        raise ValueError("empty segment batch")
    k = len(segments[0].actions)
    if any(len(s.actions) != k for s in segments):
        raise ValueError("segments in one batch must share the horizon")
    if k < 1:
        raise ValueError("segments need at least one action")
    params = list(model.parameters()) + list(extra_params)
    with ad.Tape():
        if encode is not None:
            f0 = encode(Tensor(np.stack([s.f0 for s in segments])))
            fg = encode(Tensor(np.stack([s.f_goal for s in segments])))
        else:
            f0 = Tensor(np.stack([s.f0 for s in segments]))
            fg = Tensor(np.stack([s.f_goal for s in segments]))
        logit_steps, _ = plan_steps(model, f0, fg, k, rng, record_higher_order=True)
        all_logits = ad.concat(list(logit_steps), axis=0)  # step-major [k*B, 5]
        labels = np.concatenate([[s.actions[t] for s in segments] for t in range(k)])
        loss = ad.cross_entropy(all_logits, labels)
        grads = ad.backward(loss, wrt=params)
    return loss.item(), grads


@dataclass
class PolicyTrainResult:
    model: DynamicsModel
    losses: list[float] = field(default_factory=list)
    heldout: list[tuple[int, float]] = field(default_factory=list)
    encoder: Optional[Mlp] = None
    upn: Optional["UpnPolicy"] = None


def _segment_pool(
    dataset: Dataset,
    features: np.ndarray,  # [n_demos, T, N, d]
    labels: list[np.ndarray],
    demo_indices: Sequence[int],
    persp_pool: Sequence[int],
    k: int,
    batch: int,
    rng: np.random.Generator,
) -> list[Segment]:
    T = dataset.manifest.length
    segs = []
    for _ in range(batch):
        di = demo_indices[int(rng.integers(len(demo_indices)))]
        i = int(rng.integers(T - k))
        p = int(persp_pool[int(rng.integers(len(persp_pool)))])
        q = int(persp_pool[int(rng.integers(len(persp_pool)))])
        segs.append(
            Segment(
                f0=features[di, i, p],
                f_goal=features[di, i + k, q],
                actions=np.asarray(labels[di][i : i + k], dtype=np.intp),
            )
        )
    return segs


def _persp_pool(mode: str, n_persp: int) -> list[int]:
    if mode == "human":
        return list(range(1, n_persp))
    if mode == "robot":
        return [0]
    if mode == "all":
        return list(range(n_persp))
    raise ValueError(f"unknown perspective mode {mode!r}")


def train_policy(
    dataset: Dataset,
    fdn: FdnModel,
    config: PlannerConfig,
    labels: Optional[list[np.ndarray]] = None,
    out_dir=None,
) -> PolicyTrainResult:
    """Adam-train the dynamics model through the unrolled planner.

    ``labels`` override the per-demo action labels (e.g. from the inverse
    dynamics model); demos' own labels are used otherwise. The feature
    extractor stays frozen: demo frames are encoded once up front.
    """
    if any(d.length < 2 for d in dataset.demos):
        raise ValueError("demos must contain at least 2 observations")
    if labels is None:
        if any(d.actions is None for d in dataset.demos):
            raise ValueError("dataset has unlabeled demos and no labels were given")
        labels = [np.asarray(d.actions) for d in dataset.demos]
    n_demos = len(dataset.demos)
    T = dataset.manifest.length
    n_persp = dataset.manifest.n_perspectives

    feats = np.empty((n_demos, T, n_persp, config.d))
    for di, demo in enumerate(dataset.demos):
        flat = demo.frames.reshape(T * n_persp, -1)
        feats[di] = encode_batch(fdn, flat).reshape(T, n_persp, config.d)

    rng = np.random.default_rng(np.random.SeedSequence((config.seed, 0x50)))
    split_rng = np.random.default_rng(np.random.SeedSequence((config.seed, 0x51)))
    order = split_rng.permutation(n_demos)
    n_hold = max(1, int(round(config.holdout_fraction * n_demos)))
    held_demos, train_demos = list(order[:n_hold]), list(order[n_hold:])

    model = DynamicsModel(config, np.random.default_rng(np.random.SeedSequence((config.seed, 0x52))))
    opt = Adam(model.parameters(), lr=config.lr)
    persp_pool = _persp_pool(config.train_perspectives, n_persp)
    result = PolicyTrainResult(model=model)

    for step_i in range(config.steps):
        k = int(rng.integers(1, min(config.h_train, T - 1) + 1))
        segs = _segment_pool(dataset, feats, labels, train_demos, persp_pool, k, config.batch, rng)
        try:
            loss, grads = imitation_step(model, segs, rng)
        except ad.NumericsError as exc:
            raise RuntimeError(f"policy training aborted at step {step_i}: {exc}") from exc
        opt.step(grads)
        result.losses.append(loss)
        if config.eval_every and (step_i + 1) % config.eval_every == 0:
            hk = int(rng.integers(1, min(config.h_train, T - 1) + 1))
            hsegs = _segment_pool(dataset, feats, labels, held_demos, persp_pool, hk, config.batch, rng)
            hloss, _ = imitation_step(model, hsegs, rng)
            result.heldout.append((step_i + 1, hloss))
    if out_dir:
        model.save(Path(out_dir) / "policy")
    return result


# ---------------------------------------------------------------------------
# execution


@dataclass
class EpisodeResult:
    success: bool
    steps: int
    final_cell_distance: float
    collisions: int
    actions: list[Action] = field(default_factory=list)


def execution_budget(expert_distance: int) -> int:
    """Allowed steps: the optimal length plus a little slack."""
    return expert_distance + max(3, (expert_distance + 1) // 2)


def mpc_execute(
    world: WorldMap,
    model: DynamicsModel,
    fdn: FdnModel,
    start: Pose,
    goal_frame,
    goal_pose: Pose,
    budget: int,
    robot_persp: PerspectiveSpec,
    seed: int = 0,
    width: int = DEFAULT_FRAME_WIDTH,
    encoder=None,
    heading_match: bool = False,
) -> EpisodeResult:
    """Replan every step and execute only the first action.

    The policy sees only the rendered robot frame and the goal frame;
    goal_pose is used purely for termination/success checks. ``encoder``
    overrides the feature extractor (jointly-trained baselines).
    """
    enc = encoder if encoder is not None else (lambda px: encode_batch(fdn, px))
    goal_pixels = np.asarray(getattr(goal_frame, "pixels", goal_frame), dtype=np.float64).reshape(1, -1)
    f_goal = np.asarray(enc(goal_pixels))[0]

    def reached(p: Pose) -> bool:
        if p.cell != goal_pose.cell:
            return False
        return p.heading == goal_pose.heading if heading_match else True

    pose = start
    actions: list[Action] = []
    collisions = 0
    steps_taken = 0
    while not reached(pose) and steps_taken < budget:
        frame = render(world, pose, robot_persp, width)
        f0 = np.asarray(enc(frame.pixels.reshape(1, -1)))[0]
        h = min(model.config.h_max, budget - steps_taken)
        rng = np.random.default_rng(np.random.SeedSequence((seed, steps_taken)))
        p = plan(model, f0, f_goal, h, rng)
        action = p.discrete[0]
        pose, hit = step(world, pose, action)
        actions.append(action)
        collisions += int(hit)
        steps_taken += 1
    dist = float(np.hypot(pose.col - goal_pose.col, pose.row - goal_pose.row))
    return EpisodeResult(
        success=reached(pose),
        steps=steps_taken,
        final_cell_distance=dist,
        collisions=collisions,
        actions=actions,
    )


# ---------------------------------------------------------------------------
# jointly-trained baselines (no feature disentanglement)


class UpnPolicy:
    """Image encoder trained jointly with the dynamics model via imitation."""

    def __init__(self, config: PlannerConfig, frame_width: int, hidden=(512, 256), rng=None):
        rng = rng if rng is not None else np.random.default_rng(config.seed)
        self.config = config
        self.frame_width = frame_width
        self.hidden = tuple(hidden)
        self.encoder = Mlp([3 * frame_width * frame_width, *hidden, config.d], rng)
        self.dynamics = DynamicsModel(config, rng)

    def encode(self, pixels: np.ndarray, chunk: int = 512) -> np.ndarray:
        x = np.asarray(pixels, dtype=np.float64).reshape(len(pixels), -1)
        out = np.empty((len(x), self.config.d))
        for lo in range(0, len(x), chunk):
            out[lo : lo + chunk] = self.encoder(Tensor(x[lo : lo + chunk])).data
        return out

    def parameters(self) -> list[Tensor]:
        return self.encoder.parameters() + self.dynamics.parameters()

    def save(self, path, extra_meta: Optional[dict] = None) -> Path:
        meta = {
            "frame_width": self.frame_width,
            "hidden": ",".join(str(h) for h in self.hidden),
            "d": self.config.d,
            "action_embed": self.config.action_embed,
            "cell_hidden": self.config.cell_hidden,
            "h_max": self.config.h_max,
            "inner_steps": self.config.inner_steps,
            "inner_lr": repr(self.config.inner_lr),
            "plan_restarts": self.config.plan_restarts,
            "huber_delta": repr(self.config.huber_delta),
            "init_sigma": repr(self.config.init_sigma),
            "seed": self.config.seed,
        }
        if extra_meta:
            meta.update(extra_meta)
        blob = np.concatenate(
            [pack_params([self.encoder]), self.dynamics.embed.data.reshape(-1), pack_params([self.dynamics.cell])]
        )
        return save_checkpoint(path, "upn", meta, blob)

    @classmethod
    def load(cls, path) -> tuple["UpnPolicy", dict]:
        _, meta, params = load_checkpoint(path, expect_kind="upn")
        config = PlannerConfig(
            d=int(meta["d"]),
            action_embed=int(meta["action_embed"]),
            cell_hidden=int(meta["cell_hidden"]),
            h_max=int(meta["h_max"]),
            inner_steps=int(meta["inner_steps"]),
            inner_lr=float(meta["inner_lr"]),
            plan_restarts=int(meta.get("plan_restarts", 1)),
            huber_delta=float(meta["huber_delta"]),
            init_sigma=float(meta["init_sigma"]),
            seed=int(meta["seed"]),
        )
        model = cls(config, int(meta["frame_width"]), tuple(int(h) for h in meta["hidden"].split(",")))
        n_enc = model.encoder.n_params
        unpack_params([model.encoder], params[:n_enc])
        n_emb = model.dynamics.embed.data.size
        model.dynamics.embed.data[...] = params[n_enc : n_enc + n_emb].reshape(model.dynamics.embed.data.shape)
        unpack_params([model.dynamics.cell], params[n_enc + n_emb :])
        return model, meta


def train_upn(
    dataset: Dataset,
    config: PlannerConfig,
    frame_width: int,
    perspective_mode: str,
    labels: Optional[list[np.ndarray]] = None,
    out_dir=None,
    encoder_hidden=(512, 256),
) -> PolicyTrainResult:
    """Joint imitation training of (encoder, dynamics) with no disentanglement.

    perspective_mode "robot" trains start/goal pairs from the robot camera
    (the no-shift oracle); "human" samples one human camera per segment,
    leaving the robot camera unseen until test time.
    """
    if labels is None:
        if any(d.actions is None for d in dataset.demos):
            raise ValueError("dataset has unlabeled demos and no labels were given")
        labels = [np.asarray(d.actions) for d in dataset.demos]
    n_demos = len(dataset.demos)
    T = dataset.manifest.length
    n_persp = dataset.manifest.n_perspectives
    persp_pool = _persp_pool(perspective_mode, n_persp)

    rng = np.random.default_rng(np.random.SeedSequence((config.seed, 0x60)))
    model = UpnPolicy(config, frame_width, encoder_hidden, np.random.default_rng(np.random.SeedSequence((config.seed, 0x61))))
    opt = Adam(model.parameters(), lr=config.lr)
    result = PolicyTrainResult(model=model.dynamics, encoder=model.encoder)

    def encode_t(x: Tensor) -> Tensor:
        return model.encoder(x)

    for step_i in range(config.steps):
        k = int(rng.integers(1, min(config.h_train, T - 1) + 1))
        segs = []
        for _ in range(config.batch):
            di = int(rng.integers(n_demos))
            i = int(rng.integers(T - k))
            p = int(persp_pool[int(rng.integers(len(persp_pool)))])
            segs.append(
                Segment(
                    f0=dataset.demos[di].frames[i, p].reshape(-1).astype(np.float64),
                    f_goal=dataset.demos[di].frames[i + k, p].reshape(-1).astype(np.float64),
                    actions=np.asarray(labels[di][i : i + k], dtype=np.intp),
                )
            )
        try:
            loss, grads = imitation_step(
                model.dynamics, segs, rng, extra_params=model.encoder.parameters(), encode=encode_t
            )
        except ad.NumericsError as exc:
            raise RuntimeError(f"UPN training aborted at step {step_i}: {exc}") from exc
        opt.step(grads)
        result.losses.append(loss)
    if out_dir:
        model.save(Path(out_dir) / ("upn" if perspective_mode == "robot" else "upn_persp"))
    result.upn = model
    return result
