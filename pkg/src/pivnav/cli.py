"""Command-line driver: gen-data, train, eval, render-gallery, grad-check.

A run directory collects everything one experiment produces:

    <run>/config.txt          resolved configuration (verbatim echo)
    <run>/dataset/            demonstrations (manifest + blobs)
    <run>/checkpoints/<name>/ trained parameters (manifest + blob)
    <run>/results/*.csv       tables, episode logs, loss curves
    <run>/gallery/*.ppm       image grids and trajectory strips
    <run>/hashes.txt          checkpoint hashes per completed stage

The default run root is ./runs, overridable with PIVNAV_OUT_ROOT.
"""

from __future__ import annotations

import argparse
import hashlib
import os
import sys
from dataclasses import fields
from pathlib import Path

import numpy as np

from . import autodiff as ad
from . import data as datamod
from .autodiff import Tensor
from .ckpt import checkpoint_hash
from .config import ConfigError, ExperimentConfig, load_config, write_resolved
from .evaluate import evaluate_cell, fdn_encoder, upn_encoder
from .fdn import (
    FdnConfig,
    FdnModel,
    StateTable,
    cycle_loss,
    eval_generation,
    eval_retrieval,
    generation_grid,
    train_fdn,
)
from .idm import IdmConfig, IdmModel, collect_robot_episodes, label_demo, train_idm
from .images import tile_grid, write_ppm
from .planner import (
    DynamicsModel,
    PlannerConfig,
    Segment,
    UpnPolicy,
    imitation_step,
    mpc_execute,
    plan_steps,
    train_policy,
    train_upn,
    execution_budget,
)
from .raycast import default_perspectives, render
from .results import (
    ResultsTable,
    check_baseline_trend,
    check_demo_trend,
    check_distance_trend,
    check_loss_trend,
    write_episodes,
    write_table,
)
from .world import load_preset

STAGES = ("fdn", "idm", "policy", "upn", "upn-persp")
SWEEPS = ("distance", "demos", "loss", "baselines")


class CliError(RuntimeError):
    pass


# ---------------------------------------------------------------------------
# run-directory layout helpers


def dataset_dir(run: Path) -> Path:
    return run / "dataset"


def ckpt_dir(run: Path, name: str) -> Path:
    return run / "checkpoints" / name


def _loss_suffix(cfg: ExperimentConfig) -> str:
    return "" if cfg.fdn_loss == "cycle" else "-" + cfg.fdn_loss.replace("+", "-")


def fdn_ckpt_name(cfg: ExperimentConfig) -> str:
    return "fdn" + _loss_suffix(cfg)


def policy_ckpt_name(cfg: ExperimentConfig) -> str:
    name = "policy" + _loss_suffix(cfg)
    if cfg.policy_demo_subset:
        name += f"-n{cfg.policy_demo_subset}"
    return name


def require(path: Path, hint: str) -> Path:
    if not path.exists():
        raise CliError(f"missing prerequisite: {path} ({hint})")
    return path


def record_hash(run: Path, name: str, value: str):
    with open(run / "hashes.txt", "a") as fh:
        fh.write(f"{name}={value}\n")


def write_loss_csv(path: Path, losses, extra_header: str = "") -> Path:
    path.parent.mkdir(parents=True, exist_ok=True)
    lines = ["step,loss" + extra_header]
    for i, item in enumerate(losses):
        if isinstance(item, tuple):
            lines.append(",".join(str(x) for x in item))
        else:
            lines.append(f"{i},{item:.6f}")
    path.write_text("\n".join(lines) + "\n")
    return path


def dataset_sha256(root: Path) -> str:
    h = hashlib.sha256()
    h.update((root / "manifest.txt").read_bytes())
    for f in sorted((root / "demos").iterdir()):
        h.update(f.read_bytes())
    return h.hexdigest()[:16]


# ---------------------------------------------------------------------------
# commands


def cmd_gen_data(cfg: ExperimentConfig, run: Path) -> int:
    ds = datamod.build_dataset(
        cfg.world,
        cfg.demos,
        cfg.demo_length,
        cfg.dataset_seed,
        width=cfg.frame_width,
        reverse=cfg.augment_reverse,
        stay_fraction=cfg.augment_stay_fraction,
    )
    root = datamod.save(ds, dataset_dir(run))
    digest = dataset_sha256(root)
    record_hash(run, "dataset", digest)
    print(f"dataset: {ds.manifest.demo_count} demos x {ds.manifest.length} steps, "
          f"{ds.manifest.n_perspectives} perspectives, width {ds.manifest.frame_width}")
    print(f"world: {ds.manifest.world}  seed: {ds.manifest.seed}")
    print(f"sha256: {digest}")
    return 0


def _load_dataset(cfg: ExperimentConfig, run: Path) -> datamod.Dataset:
    require(dataset_dir(run) / "manifest.txt", "run `pivnav gen-data` first")
    return datamod.load(dataset_dir(run))


def _fdn_config(cfg: ExperimentConfig) -> FdnConfig:
    return FdnConfig(
        frame_width=cfg.frame_width,
        d=cfg.fdn_d,
        d_p=cfg.fdn_dp,
        hidden=cfg.fdn_hidden,
        norm=cfg.fdn_norm,
        loss_combo=cfg.fdn_loss,
        triplet_alpha=cfg.fdn_alpha,
        lr=cfg.fdn_lr,
        batch=cfg.fdn_batch,
        steps=cfg.fdn_steps,
        seed=cfg.fdn_seed,
        exclude_robot_perspective=cfg.fdn_exclude_robot,
        holdout_fraction=cfg.fdn_holdout,
    )


def _planner_config(cfg: ExperimentConfig) -> PlannerConfig:
    return PlannerConfig(
        d=cfg.fdn_d,
        action_embed=cfg.action_embed,
        cell_hidden=cfg.cell_hidden,
        h_train=cfg.h_train,
        h_max=cfg.h_max,
        inner_steps=cfg.inner_steps,
        inner_lr=cfg.inner_lr,
        plan_restarts=cfg.plan_restarts,
        huber_delta=cfg.huber_delta,
        plan_all_steps=cfg.plan_all_steps,
        first_order=cfg.first_order,
        lr=cfg.policy_lr,
        batch=cfg.policy_batch,
        steps=cfg.policy_steps,
        seed=cfg.policy_seed,
        label_perspective=cfg.label_perspective,
        train_perspectives=cfg.train_perspectives,
        goal_heading_match=cfg.heading_match,
    )


def _idm_labels(cfg: ExperimentConfig, run: Path, dataset: datamod.Dataset, fdn: FdnModel):
    idm, _ = IdmModel.load(require(ckpt_dir(run, "idm"), "train --stage idm first"))
    labels = []
    disagreements = []
    for i, demo in enumerate(dataset.demos):
        labeled, dis = label_demo(idm, fdn, demo, cfg.label_perspective)
        labels.append(np.asarray(labeled.actions))
        disagreements.append((i, -1.0 if dis is None else dis))
    write_loss_csv(run / "results" / "label_disagreement.csv", disagreements)
    return labels


def _demo_subset(dataset: datamod.Dataset, cfg: ExperimentConfig) -> datamod.Dataset:
    """First-N expert demos plus their reversed partners and a matching share
    of stay demos; mirrors what generating count=N with the same seed yields."""
    n = cfg.policy_demo_subset
    if not n or n >= cfg.demos:
        return dataset
    keep = list(range(n))
    if cfg.augment_reverse:
        keep += [cfg.demos + i for i in range(n)]
    n_stay_all = int(round(cfg.augment_stay_fraction * cfg.demos))
    n_stay = int(round(cfg.augment_stay_fraction * n))
    base = (2 if cfg.augment_reverse else 1) * cfg.demos
    keep += [base + i for i in range(min(n_stay, n_stay_all))]
    demos = [dataset.demos[i] for i in keep]
    manifest = datamod.DatasetManifest(
        demo_count=len(demos),
        length=dataset.manifest.length,
        n_perspectives=dataset.manifest.n_perspectives,
        frame_width=dataset.manifest.frame_width,
        world=dataset.manifest.world,
        seed=dataset.manifest.seed,
        perspectives=dataset.manifest.perspectives,
        augment_reverse=dataset.manifest.augment_reverse,
        augment_stay_fraction=dataset.manifest.augment_stay_fraction,
    )
    return datamod.Dataset(manifest=manifest, demos=demos)


def cmd_train(cfg: ExperimentConfig, run: Path, stage: str) -> int:
    dataset = _load_dataset(cfg, run)
    results_dir = run / "results"

    if stage == "fdn":
        result = train_fdn(dataset, _fdn_config(cfg))
        dst = ckpt_dir(run, fdn_ckpt_name(cfg))
        result.model.save(
            dst,
            {
                "train_demos": ",".join(map(str, result.train_demos)),
                "holdout_demos": ",".join(map(str, result.heldout_demos)),
            },
        )
        write_loss_csv(results_dir / f"{fdn_ckpt_name(cfg)}_loss.csv", result.losses)
        record_hash(run, fdn_ckpt_name(cfg), checkpoint_hash(dst))
        print(f"fdn[{cfg.fdn_loss}] trained: final loss {result.losses[-1]:.4f} "
              f"({len(result.heldout_demos)} held-out demos)")
        return 0

    if stage == "idm":
        fdn, _ = FdnModel.load(require(ckpt_dir(run, "fdn"), "train --stage fdn first"))
        world = load_preset(cfg.world)
        robot = default_perspectives()[0]
        records = collect_robot_episodes(
            world, fdn, cfg.idm_episodes, cfg.idm_seed, robot, width=cfg.frame_width
        )
        model, report = train_idm(
            records,
            IdmConfig(
                hidden=cfg.idm_hidden,
                lr=cfg.idm_lr,
                batch=cfg.idm_batch,
                steps=cfg.idm_steps,
                seed=cfg.idm_seed,
            ),
        )
        model.save(ckpt_dir(run, "idm"), {"fdn_hash": checkpoint_hash(ckpt_dir(run, "fdn"))})
        write_loss_csv(results_dir / "idm_loss.csv", report.losses)
        record_hash(run, "idm", checkpoint_hash(ckpt_dir(run, "idm")))
        per_class = " ".join(f"a{a}={v:.2f}" for a, v in report.per_class_accuracy.items())
        print(f"idm trained on {report.n_train} transitions: held-out accuracy "
              f"{report.overall_accuracy:.2%} ({per_class}); stay accuracy {report.stay_accuracy:.2%}")
        return 0

    if stage == "policy":
        fdn, _ = FdnModel.load(
            require(ckpt_dir(run, fdn_ckpt_name(cfg)), f"train --stage fdn (fdn_loss={cfg.fdn_loss}) first")
        )
        subset = _demo_subset(dataset, cfg)
        labels = None
        if cfg.label_source == "idm":
            labels = _idm_labels(cfg, run, subset, fdn)
        result = train_policy(subset, fdn, _planner_config(cfg), labels=labels)
        name = policy_ckpt_name(cfg)
        result.model.save(ckpt_dir(run, name), {"fdn": fdn_ckpt_name(cfg), "labels": cfg.label_source})
        write_loss_csv(results_dir / f"{name}_loss.csv", result.losses)
        write_loss_csv(results_dir / f"{name}_heldout.csv", result.heldout)
        record_hash(run, name, checkpoint_hash(ckpt_dir(run, name)))
        print(f"{name} trained on {len(subset.demos)} demos: final loss {result.losses[-1]:.4f}")
        return 0

    if stage in ("upn", "upn-persp"):
        mode = "robot" if stage == "upn" else "human"
        labels = None
        if cfg.label_source == "idm":
            fdn, _ = FdnModel.load(require(ckpt_dir(run, "fdn"), "train --stage fdn first"))
            labels = _idm_labels(cfg, run, dataset, fdn)
        result = train_upn(
            dataset,
            _planner_config(cfg),
            frame_width=cfg.frame_width,
            perspective_mode=mode,
            labels=labels,
            encoder_hidden=cfg.fdn_hidden,
        )
        name = "upn" if stage == "upn" else "upn_persp"
        result.upn.save(ckpt_dir(run, name), {"perspective_mode": mode})
        write_loss_csv(results_dir / f"{name}_loss.csv", result.losses)
        record_hash(run, name, checkpoint_hash(ckpt_dir(run, name)))
        print(f"{name} trained: final loss {result.losses[-1]:.4f}")
        return 0

    raise CliError(f"unknown stage {stage!r}")


def _eval_ours_cell(cfg, run, world, distance, seed, policy_name=None, fdn_name=None):
    fdn, _ = FdnModel.load(require(ckpt_dir(run, fdn_name or fdn_ckpt_name(cfg)), "train fdn"))
    policy, _ = DynamicsModel.load(require(ckpt_dir(run, policy_name or policy_ckpt_name(cfg)), "train policy"))
    persps = default_perspectives()
    return evaluate_cell(
        world,
        policy,
        fdn_encoder(fdn),
        distance,
        cfg.eval_episodes,
        seed,
        robot_persp=persps[0],
        goal_persps=persps[1:],
        width=cfg.frame_width,
        heading_match=cfg.heading_match,
    )


def _eval_upn_cell(cfg, run, world, distance, seed, name):
    policy, _ = UpnPolicy.load(require(ckpt_dir(run, name), f"train --stage {name.replace('_', '-')}"))
    persps = default_perspectives()
    return evaluate_cell(
        world,
        policy.dynamics,
        upn_encoder(policy),
        distance,
        cfg.eval_episodes,
        seed,
        robot_persp=persps[0],
        goal_persps=[persps[0]],  # same-perspective goal: the no-shift setting
        width=cfg.frame_width,
        heading_match=cfg.heading_match,
    )


def cmd_eval(cfg: ExperimentConfig, run: Path, sweep: str, assert_trends: bool) -> int:
    world = load_preset(cfg.world)
    results_dir = run / "results"
    table = ResultsTable(name=sweep)

    if sweep == "distance":
        for ci, dist in enumerate(cfg.eval_distances):
            succ, rows = _eval_ours_cell(cfg, run, world, dist, seed=_cell_seed(cfg, 0, ci))
            table.add("ours", dist, succ, cfg.eval_episodes)
            write_episodes(results_dir / f"episodes-distance-{dist}.csv", rows)
        ok, msg = check_distance_trend(table, "ours", [str(d) for d in cfg.eval_distances])

    elif sweep == "demos":
        for ci, count in enumerate(cfg.eval_demo_counts):
            name = "policy" if count >= cfg.demos else f"policy-n{count}"
            succ, rows = _eval_ours_cell(
                cfg, run, world, cfg.eval_demos_distance, seed=_cell_seed(cfg, 1, ci), policy_name=name
            )
            table.add("ours", count, succ, cfg.eval_episodes)
            write_episodes(results_dir / f"episodes-demos-{count}.csv", rows)
        ok, msg = check_demo_trend(table, "ours", [str(c) for c in cfg.eval_demo_counts])

    elif sweep == "loss":
        combos = [("cycle", "fdn", "policy"), ("cycle+triplet", "fdn-cycle-triplet", "policy-cycle-triplet"),
                  ("triplet", "fdn-triplet", "policy-triplet")]
        for ci, (combo, fname, pname) in enumerate(combos):
            if combo != "cycle" and not ckpt_dir(run, pname).exists():
                continue
            succ, rows = _eval_ours_cell(
                cfg, run, world, cfg.eval_loss_distance, seed=_cell_seed(cfg, 2, ci),
                policy_name=pname, fdn_name=fname,
            )
            table.add(combo.replace("+", "-") if combo != "cycle" else "cycle", cfg.eval_loss_distance, succ, cfg.eval_episodes)
            write_episodes(results_dir / f"episodes-loss-{combo.replace('+', '-')}.csv", rows)
        ok, msg = check_loss_trend(table, cfg.eval_loss_distance)

    elif sweep == "baselines":
        succ, rows = _eval_ours_cell(cfg, run, world, cfg.eval_loss_distance, seed=_cell_seed(cfg, 3, 0))
        table.add("ours", cfg.eval_loss_distance, succ, cfg.eval_episodes)
        write_episodes(results_dir / "episodes-baselines-ours.csv", rows)
        for ci, name in enumerate(("upn", "upn_persp"), start=1):
            succ, rows = _eval_upn_cell(cfg, run, world, cfg.eval_loss_distance, _cell_seed(cfg, 3, ci), name)
            table.add(name.replace("_", "-"), cfg.eval_loss_distance, succ, cfg.eval_episodes)
            write_episodes(results_dir / f"episodes-baselines-{name}.csv", rows)
        ok, msg = check_baseline_trend(table, cfg.eval_loss_distance)

    else:
        raise CliError(f"unknown sweep {sweep!r}")

    path = write_table(table, results_dir / f"{sweep}.csv")
    for line in table.lines():
        print(line)
    print(f"trend: {msg}")
    print(f"written: {path}")
    if assert_trends and not ok:
        return 1
    return 0


def _cell_seed(cfg: ExperimentConfig, sweep_id: int, cell_idx: int) -> int:
    return int(np.random.SeedSequence((cfg.eval_seed, sweep_id, cell_idx)).generate_state(1)[0])


def cmd_render_gallery(cfg: ExperimentConfig, run: Path) -> int:
    dataset = _load_dataset(cfg, run)
    fdn, meta = FdnModel.load(require(ckpt_dir(run, fdn_ckpt_name(cfg)), "train fdn"))
    held = [int(x) for x in meta.get("holdout_demos", "").split(",") if x != ""]
    table = StateTable(dataset, held or None)
    rng = np.random.default_rng(np.random.SeedSequence((cfg.eval_seed, 0xA11)))
    gallery = run / "gallery"

    grid = generation_grid(fdn, table, rng, rows=cfg.gallery_rows)
    write_ppm(gallery / "generations.ppm", tile_grid(grid))
    gen = eval_generation(fdn, table, rng, n_samples=128)
    write_loss_csv(
        gallery / "generation_mse.csv",
        [(0, gen["swap_mse"]), (1, gen["baseline_mse"]), (2, gen["ratio"])],
    )
    print(f"generation grid: {cfg.gallery_rows} rows  swap-mse {gen['swap_mse']:.5f} "
          f"baseline {gen['baseline_mse']:.5f} ratio {gen['ratio']:.3f}")

    policy_path = ckpt_dir(run, policy_ckpt_name(cfg))
    if policy_path.exists():
        policy, _ = DynamicsModel.load(policy_path)
        world = load_preset(cfg.world)
        persps = default_perspectives()
        from .expert import sample_task

        for ep in range(cfg.gallery_episodes):
            ep_rng = np.random.default_rng(np.random.SeedSequence((cfg.eval_seed, 0xE9, ep)))
            start, goal_pose, _ = sample_task(world, cfg.eval_loss_distance, ep_rng)
            goal_frame = render(world, goal_pose, persps[1], cfg.frame_width)
            result = mpc_execute(
                world, policy, fdn, start, goal_frame, goal_pose,
                budget=execution_budget(cfg.eval_loss_distance),
                robot_persp=persps[0], seed=ep, width=cfg.frame_width,
            )
            poses = [start]
            for a in result.actions:
                from .world import step as wstep

                poses.append(wstep(world, poses[-1], a)[0])
            strip = [render(world, p, persps[0], cfg.frame_width).pixels for p in poses]
            strip.append(goal_frame.pixels)
            write_ppm(gallery / f"trajectory-{ep:02d}.ppm", tile_grid([strip]))
        print(f"trajectory strips: {cfg.gallery_episodes} episodes")
    else:
        print("no policy checkpoint; skipped trajectory strips")
    return 0


def cmd_grad_check(cfg: ExperimentConfig) -> int:
    rng = np.random.default_rng(0)
    failures = 0

    # primitive battery
    worst = 0.0
    for _ in range(10):
        x = ad.param(rng.standard_normal((3, 4)))
        w = Tensor(rng.standard_normal((4, 3)))
        report = ad.grad_check(
            lambda p: ad.huber(ad.swish(ad.matmul(p, w)), Tensor(np.zeros((3, 3))), 1.0), [x]
        )
        worst = max(worst, report.max_rel_err)
    ok = worst < 1e-4
    failures += not ok
    print(f"primitive composition: max rel err {worst:.2e} {'PASS' if ok else 'FAIL'}")

    # cycle loss on a tiny model
    model = FdnModel(FdnConfig(frame_width=4, d=4, d_p=3, hidden=(8, 6), seed=1))
    frames = [rng.uniform(0, 1, size=(2, 48)) for _ in range(4)]
    report = ad.grad_check(
        lambda *_: cycle_loss(model, *frames), model.parameters("cycle"), eps=1e-4, tolerance=1e-4
    )
    failures += not report.passed
    print(f"cycle loss: max rel err {report.max_rel_err:.2e} {'PASS' if report.passed else 'FAIL'}")

    # unrolled plan-then-imitate
    pcfg = PlannerConfig(d=4, action_embed=3, cell_hidden=6, h_max=8, inner_steps=2, inner_lr=0.5, seed=3)
    dyn = DynamicsModel(pcfg)
    segs = [Segment(f0=rng.standard_normal(4), f_goal=rng.standard_normal(4), actions=np.array([0, 2]))]
    _, grads = imitation_step(dyn, segs, np.random.default_rng(7))
    f0 = np.stack([s.f0 for s in segs])
    fg = np.stack([s.f_goal for s in segs])
    labels = np.concatenate([[s.actions[t] for s in segs] for t in range(2)])

    def forward() -> float:
        r = np.random.default_rng(7)
        with ad.Tape():
            steps, _ = plan_steps(dyn, Tensor(f0), Tensor(fg), 2, r, record_higher_order=False)
            return ad.cross_entropy(ad.concat(list(steps), axis=0), labels).item()

    worst = 0.0
    for p in dyn.parameters():
        analytic = grads[p].data if grads[p] is not None else np.zeros_like(p.data)
        flat = p.data.reshape(-1)
        af = analytic.reshape(-1)
        for i in range(flat.size):
            orig = flat[i]
            flat[i] = orig + 1e-5
            hi = forward()
            flat[i] = orig - 1e-5
            lo = forward()
            flat[i] = orig
            numeric = (hi - lo) / 2e-5
            worst = max(worst, abs(af[i] - numeric) / max(abs(af[i]), abs(numeric), 1e-6))
    ok = worst < 1e-3
    failures += not ok
    print(f"unrolled plan-then-imitate: max rel err {worst:.2e} {'PASS' if ok else 'FAIL'}")
    return 1 if failures else 0


# ---------------------------------------------------------------------------
# argument plumbing


def _add_config_flags(parser: argparse.ArgumentParser):
    for f in fields(ExperimentConfig):
        parser.add_argument(f"--{f.name.replace('_', '-')}", dest=f"cfg_{f.name}", metavar="V")


def _collect_overrides(args) -> dict:
    out = {}
    for f in fields(ExperimentConfig):
        v = getattr(args, f"cfg_{f.name}", None)
        if v is not None:
            out[f.name] = v
    return out


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="pivnav", description=__doc__,
                                     formatter_class=argparse.RawDescriptionHelpFormatter)
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", help="key=value config file (flags override it)")
        p.add_argument("--out", help="run root (default $PIVNAV_OUT_ROOT or ./runs)")
        _add_config_flags(p)

    common(sub.add_parser("gen-data", help="generate and store the demonstration dataset"))
    p_train = sub.add_parser("train", help="train one pipeline stage")
    p_train.add_argument("--stage", choices=STAGES, required=True)
    common(p_train)
    p_eval = sub.add_parser("eval", help="run a success-rate sweep")
    p_eval.add_argument("--sweep", choices=SWEEPS, required=True)
    p_eval.add_argument("--assert-trends", action="store_true",
                        help="exit nonzero when the expected trend does not hold")
    common(p_eval)
    common(sub.add_parser("render-gallery", help="write generation grids and trajectory strips"))
    common(sub.add_parser("grad-check", help="verify gradients against finite differences"))
    return parser


def resolve_run_dir(args, cfg: ExperimentConfig) -> Path:
    root = args.out or os.environ.get("PIVNAV_OUT_ROOT", "runs")
    return Path(root) / cfg.run_name


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = load_config(args.config, _collect_overrides(args))
        if args.command == "grad-check":
            return cmd_grad_check(cfg)
        run = resolve_run_dir(args, cfg)
        run.mkdir(parents=True, exist_ok=True)
        write_resolved(cfg, run)
        if args.command == "gen-data":
            return cmd_gen_data(cfg, run)
        if args.command == "train":
            return cmd_train(cfg, run, args.stage)
        if args.command == "eval":
            return cmd_eval(cfg, run, args.sweep, args.assert_trends)
        if args.command == "render-gallery":
            return cmd_render_gallery(cfg, run)
        raise CliError(f"unknown command {args.command}")
    except (CliError, ConfigError, ad.NumericsError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
