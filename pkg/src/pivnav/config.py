"""Flat key=value experiment configuration with include support.

Every field has a default; unknown keys are rejected; the resolved config is
echoed verbatim into each run directory so any result can be reproduced from
its artifacts alone. CLI flags override file values, which override defaults.
"""

from __future__ import annotations

from dataclasses import dataclass, fields
from pathlib import Path
from typing import get_args, get_origin


@dataclass
class ExperimentConfig:
    run_name: str = "default"
    world: str = "navworld-mini"
    frame_width: int = 32

    # dataset
    demos: int = 500
    demo_length: int = 20
    dataset_seed: int = 0
    augment_reverse: bool = True
    augment_stay_fraction: float = 0.1

    # feature disentanglement
    fdn_d: int = 64
    fdn_dp: int = 16
    fdn_hidden: tuple[int, ...] = (512, 256)
    fdn_norm: str = "l1"
    fdn_loss: str = "cycle"
    fdn_alpha: float = 0.2
    fdn_lr: float = 0.0035
    fdn_batch: int = 32
    fdn_steps: int = 3000
    fdn_seed: int = 0
    fdn_holdout: float = 0.1
    fdn_exclude_robot: bool = False

    # inverse dynamics model
    idm_hidden: tuple[int, ...] = (128, 64)
    idm_episodes: int = 200
    idm_steps: int = 1500
    idm_lr: float = 0.0035
    idm_batch: int = 32
    idm_seed: int = 0

    # planner / imitation
    action_embed: int = 16
    cell_hidden: int = 128
    h_train: int = 10
    h_max: int = 20
    inner_steps: int = 10
    inner_lr: float = 0.5
    plan_restarts: int = 4
    huber_delta: float = 1.0
    plan_all_steps: bool = False
    first_order: bool = False
    policy_lr: float = 0.0035
    policy_batch: int = 32
    policy_steps: int = 4000
    policy_seed: int = 0
    label_source: str = "idm"  # idm | expert
    label_perspective: int = 1
    train_perspectives: str = "human"
    policy_demo_subset: int = 0  # 0 = all expert demos

    # evaluation
    eval_episodes: int = 100
    eval_seed: int = 0
    eval_distances: tuple[int, ...] = (2, 5, 10)
    eval_demo_counts: tuple[int, ...] = (100, 300, 500)
    eval_demos_distance: int = 10
    eval_loss_distance: int = 4
    heading_match: bool = False

    # gallery
    gallery_rows: int = 6
    gallery_episodes: int = 3


class ConfigError(ValueError):
    pass


def _coerce(name: str, ftype, raw: str):
    raw = raw.strip()
    origin = get_origin(ftype)
    if ftype is bool:
        if raw.lower() in ("1", "true", "yes", "on"):
            return True
        if raw.lower() in ("0", "false", "no", "off"):
            return False
        raise ConfigError(f"{name}: expected a boolean, got {raw!r}")
    if ftype is int:
        return int(raw)
    if ftype is float:
        return float(raw)
    if ftype is str:
        return raw
    if origin is tuple:
        inner = get_args(ftype)[0]
        if raw == "":
            return ()
        return tuple(inner(x) for x in raw.split(","))
    raise ConfigError(f"{name}: unsupported field type {ftype}")


_FIELD_TYPES = {f.name: f.type for f in fields(ExperimentConfig)}
_EVAL_TYPES = {
    "str": str,
    "int": int,
    "float": float,
    "bool": bool,
    "tuple[int, ...]": tuple[int, ...],
    "tuple[float, ...]": tuple[float, ...],
}


def _field_type(name: str):
    t = _FIELD_TYPES[name]
    return _EVAL_TYPES[t] if isinstance(t, str) else t


def parse_config_text(text: str, base_dir: Path, overrides: dict, _depth: int = 0) -> dict:
    if _depth > 10:
        raise ConfigError("include depth exceeds 10 (cycle?)")
    out: dict = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if line.startswith("include "):
            inc = base_dir / line.split(None, 1)[1].strip()
            if not inc.exists():
                raise ConfigError(f"line {lineno}: include file {inc} not found")
            out.update(parse_config_text(inc.read_text(), inc.parent, {}, _depth + 1))
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected key=value, got {line!r}")
        key, value = (part.strip() for part in line.split("=", 1))
        if key not in _FIELD_TYPES:
            raise ConfigError(f"line {lineno}: unknown config key {key!r}")
        out[key] = _coerce(key, _field_type(key), value)
    out.update(overrides)
    return out


def load_config(path=None, overrides: dict | None = None) -> ExperimentConfig:
    """Build a config from defaults, an optional file, and explicit overrides
    (already-typed values keyed by field name, or raw strings to coerce)."""
    values: dict = {}
    if path is not None:
        p = Path(path)
        if not p.exists():
            raise ConfigError(f"config file {p} not found")
        values = parse_config_text(p.read_text(), p.parent, {})
    for key, val in (overrides or {}).items():
        if key not in _FIELD_TYPES:
            raise ConfigError(f"unknown config key {key!r}")
        values[key] = _coerce(key, _field_type(key), val) if isinstance(val, str) else val
    return ExperimentConfig(**values)


def config_lines(cfg: ExperimentConfig) -> list[str]:
    out = []
    for f in fields(ExperimentConfig):
        v = getattr(cfg, f.name)
        if isinstance(v, tuple):
            v = ",".join(str(x) for x in v)
        elif isinstance(v, bool):
            v = int(v)
        out.append(f"{f.name}={v}")
    return out


def write_resolved(cfg: ExperimentConfig, run_dir) -> Path:
    run = Path(run_dir)
    run.mkdir(parents=True, exist_ok=True)
    path = run / "config.txt"
    path.write_text("\n".join(config_lines(cfg)) + "\n")
    return path
