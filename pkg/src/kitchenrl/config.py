"""Run configuration: strict JSON loading, validation, round-tripping."""
from __future__ import annotations

import dataclasses
import json
from dataclasses import dataclass

AUX_MODES = ("none", "load", "ocn", "cobra", "oracle", "oracle_category_only")
ATTENTION_POLICY_MODES = ("full", "average", "none")
ATTENTION_MODEL_MODES = ("on", "off")


class ConfigError(ValueError):
    pass


@dataclass
class Config:
    task: str = "toast_bread"
    aux: str = "load"
    attention_policy: str = "full"
    attention_model: str = "on"
    seed: int = 0
    out_dir: str = "runs/out"

    budget: int = 200_000
    eval_every: int = 25_000
    eval_frames: int = 5_000
    eval_epsilon: float = 0.1
    eval_workers: int = 1
    checkpoint_every: int = 25_000

    anneal_steps: int = 50_000
    warmup: int = 1_000
    train_every: int = 1
    batch_size: int = 50
    lr: float = 1.8e-5
    target_tau: float = 0.00067
    gamma: float = 0.99
    buffer_size: int = 150_000
    sil_buffer_size: int = 50_000
    sil_prob: float = 0.125
    clip_norm: float = 0.076

    k_negatives: int = 20
    tau_model: float = 8.75e-5
    beta_model: float = 1e-3
    pool_cap: int = 85
    beta_kl: float = 26.0
    beta_cobra: float = 0.0032
    tau_ocn: float = 5e-5
    beta_ocn: float = 0.0047

    d_o: int = 64
    d_ego: int = 64
    d_loc: int = 32
    d_k: int = 16
    d_a: int = 32
    hidden: int = 128

    float32: bool = False
    record_wall_time: bool = False

    @property
    def d_kappa(self) -> int:
        return self.d_ego + self.d_loc


_FIELDS = {f.name: f for f in dataclasses.fields(Config)}


def validate(cfg: Config) -> None:
    from .kitchensim import TASKS

    problems = []
    if cfg.task not in TASKS:
        problems.append(f"task: {cfg.task!r} not in {sorted(TASKS)}")
    if cfg.aux not in AUX_MODES:
        problems.append(f"aux: {cfg.aux!r} not in {AUX_MODES}")
    if cfg.attention_policy not in ATTENTION_POLICY_MODES:
        problems.append(
            f"attention_policy: {cfg.attention_policy!r} not in {ATTENTION_POLICY_MODES}")
    if cfg.attention_model not in ATTENTION_MODEL_MODES:
        problems.append(
            f"attention_model: {cfg.attention_model!r} not in {ATTENTION_MODEL_MODES}")
    for name in ("budget", "eval_every", "eval_frames", "anneal_steps",
                 "warmup", "train_every", "batch_size", "buffer_size",
                 "sil_buffer_size", "pool_cap", "k_negatives", "d_o", "d_ego",
                 "d_loc", "d_k", "d_a", "hidden", "eval_workers",
                 "checkpoint_every"):
        if getattr(cfg, name) <= 0:
            problems.append(f"{name}: must be positive")
    for name in ("lr", "target_tau", "clip_norm", "tau_model", "tau_ocn"):
        if getattr(cfg, name) <= 0:
            problems.append(f"{name}: must be positive")
    for name in ("gamma", "eval_epsilon", "sil_prob"):
        v = getattr(cfg, name)
        if not 0.0 <= v <= 1.0:
            problems.append(f"{name}: must be in [0, 1]")
    for name in ("beta_model", "beta_kl", "beta_cobra", "beta_ocn"):
        if getattr(cfg, name) < 0:
            problems.append(f"{name}: must be nonnegative")
    if problems:
        raise ConfigError("; ".join(problems))


def from_dict(data: dict) -> Config:
    unknown = sorted(set(data) - set(_FIELDS))
    if unknown:
        raise ConfigError(f"unknown config keys: {unknown}")
    kwargs = {}
    for key, value in data.items():
        want = _FIELDS[key].type
        if want == "int":
            if isinstance(value, bool) or not isinstance(value, int):
                raise ConfigError(f"{key}: expected int, got {value!r}")
        elif want == "float":
            if isinstance(value, bool) or not isinstance(value, (int, float)):
                raise ConfigError(f"{key}: expected number, got {value!r}")
            value = float(value)
        elif want == "bool":
            if not isinstance(value, bool):
                raise ConfigError(f"{key}: expected bool, got {value!r}")
        elif want == "str":
            if not isinstance(value, str):
                raise ConfigError(f"{key}: expected string, got {value!r}")
        kwargs[key] = value
    cfg = Config(**kwargs)
    validate(cfg)
    return cfg


def to_dict(cfg: Config) -> dict:
    return dataclasses.asdict(cfg)


def load_config(path) -> Config:
    with open(path) as fh:
        try:
            data = json.load(fh)
        except json.JSONDecodeError as e:
            raise ConfigError(f"invalid JSON in {path}: {e}") from e
    if not isinstance(data, dict):
        raise ConfigError("config root must be a JSON object")
    return from_dict(data)


def save_config(cfg: Config, path) -> None:
    with open(path, "w") as fh:
        json.dump(to_dict(cfg), fh, indent=2, sort_keys=True)
        fh.write("\n")
