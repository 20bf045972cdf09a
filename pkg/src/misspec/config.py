"""Experiment configuration: one TOML file drives an entire experiment.

Sections mirror the package's type names ([task], [env_id], [env_ood],
optional [shift], [trainer], [experiment], [landscape], [output]); key names
match the corresponding dataclass fields exactly.  A single global ``seed``
at the top level feeds every dataset and training substream, so rerunning a
command with the same file byte-reproduces its artifacts.
"""

from __future__ import annotations

import sys
from dataclasses import dataclass
from pathlib import Path

import numpy as np

if sys.version_info >= (3, 11):
    import tomllib as _toml
else:
    import tomli as _toml

from .errors import ConfigurationError
from .landscape import PatternThresholds
from .sem import (
    Environment,
    TaskSpec,
    environment_from_dict,
    environment_to_dict,
    task_from_dict,
    task_to_dict,
)
from .trainer import TrainConfig

__all__ = ["ExperimentConfig", "load_experiment_config", "dump_experiment_config"]


@dataclass(frozen=True)
class ExperimentConfig:
    task: TaskSpec
    env_id: Environment
    env_ood: Environment
    trainer: TrainConfig
    thresholds: PatternThresholds = PatternThresholds()
    shift_alpha_far: np.ndarray | None = None
    shift_steps: int = 5
    n_seeds: int = 10
    train_size: int = 2048
    eval_size: int = 4096
    fixed_epoch: int | None = None
    out_dir: str = "out"
    seed: int = 0

    def __post_init__(self):
        self.env_id.check_task(self.task)
        self.env_ood.check_task(self.task)
        if self.shift_alpha_far is not None:
            far = np.atleast_1d(np.asarray(self.shift_alpha_far, dtype=float))
            if far.shape != (self.task.d_spu,):
                raise ConfigurationError(
                    f"shift alpha_far has length {far.shape[0]}, "
                    f"task expects d_spu={self.task.d_spu}"
                )
            object.__setattr__(self, "shift_alpha_far", far)
        if self.n_seeds < 1 or self.train_size < 1 or self.eval_size < 1:
            raise ConfigurationError("n_seeds, train_size, eval_size must be positive")
        if self.seed < 0:
            raise ConfigurationError("seed must be a nonnegative integer")


def _section(data: dict, name: str, required: bool) -> dict:
    if name not in data:
        if required:
            raise ConfigurationError(f"config missing section [{name}]")
        return {}
    value = data[name]
    if not isinstance(value, dict):
        raise ConfigurationError(f"config section [{name}] must be a table")
    return value


def load_experiment_config(path, seed_override: int | None = None) -> ExperimentConfig:
    path = Path(path)
    try:
        with open(path, "rb") as fh:
            data = _toml.load(fh)
    except FileNotFoundError:
        raise ConfigurationError(f"config file not found: {path}") from None
    except _toml.TOMLDecodeError as exc:
        raise ConfigurationError(f"config parse error in {path}: {exc}") from None

    seed = int(data.get("seed", 0))
    if seed_override is not None:
        seed = int(seed_override)

    task = task_from_dict(_section(data, "task", required=True))
    env_id = environment_from_dict(
        {"env_id": "ID", **_section(data, "env_id", required=True)}
    )
    env_ood = environment_from_dict(
        {"env_id": "OOD", **_section(data, "env_ood", required=True)}
    )

    tr = _section(data, "trainer", required=False)
    trainer = TrainConfig(
        n_models=int(tr.get("n_models", 24)),
        diversity_weight=float(tr.get("diversity_weight", 10.0)),
        similarity=str(tr.get("similarity", "raw_dot")),
        learning_rate=float(tr.get("learning_rate", 0.1)),
        epochs=int(tr.get("epochs", 10)),
        batch_size=int(tr.get("batch_size", 64)),
        seed=int(tr.get("seed", seed)) if seed_override is None else seed,
        record_every_epoch=bool(tr.get("record_every_epoch", True)),
    )

    shift = _section(data, "shift", required=False)
    shift_far = shift.get("alpha_far")
    exp = _section(data, "experiment", required=False)
    ls = _section(data, "landscape", required=False)
    thresholds = PatternThresholds(
        eps_x=float(ls.get("eps_x", 0.01)),
        eps_y=float(ls.get("eps_y", 0.01)),
        delta=float(ls.get("delta", 0.05)),
        r_positive=float(ls.get("r_positive", 0.5)),
        r_negative=float(ls.get("r_negative", -0.5)),
        chance=float(ls.get("chance", 0.5)),
    )
    out = _section(data, "output", required=False)

    fixed_epoch = exp.get("fixed_epoch")
    return ExperimentConfig(
        task=task,
        env_id=env_id,
        env_ood=env_ood,
        trainer=trainer,
        thresholds=thresholds,
        shift_alpha_far=None if shift_far is None else np.asarray(shift_far, dtype=float),
        shift_steps=int(shift.get("steps", 5)),
        n_seeds=int(exp.get("n_seeds", 10)),
        train_size=int(exp.get("train_size", 2048)),
        eval_size=int(exp.get("eval_size", 4096)),
        fixed_epoch=None if fixed_epoch is None else int(fixed_epoch),
        out_dir=str(out.get("out_dir", "out")),
        seed=seed,
    )


def _toml_value(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (np.floating, np.integer)):
        v = v.item()
    if isinstance(v, (int, float)):
        return repr(v)
    if isinstance(v, str):
        return '"' + v.replace("\\", "\\\\").replace('"', '\\"') + '"'
    if isinstance(v, (list, tuple, np.ndarray)):
        return "[" + ", ".join(_toml_value(x) for x in v) + "]"
    raise ConfigurationError(f"cannot serialise config value of type {type(v)}")


def dump_experiment_config(cfg: ExperimentConfig) -> str:
    """TOML text that round-trips through load_experiment_config."""
    lines = [f"seed = {cfg.seed}", ""]

    def table(name: str, entries: dict):
        lines.append(f"[{name}]")
        for k, v in entries.items():
            lines.append(f"{k} = {_toml_value(v)}")
        lines.append("")

    table("task", task_to_dict(cfg.task))
    table("env_id", environment_to_dict(cfg.env_id))
    table("env_ood", environment_to_dict(cfg.env_ood))
    if cfg.shift_alpha_far is not None:
        table("shift", {"alpha_far": list(cfg.shift_alpha_far), "steps": cfg.shift_steps})
    table(
        "trainer",
        {
            "n_models": cfg.trainer.n_models,
            "diversity_weight": cfg.trainer.diversity_weight,
            "similarity": cfg.trainer.similarity,
            "learning_rate": cfg.trainer.learning_rate,
            "epochs": cfg.trainer.epochs,
            "batch_size": cfg.trainer.batch_size,
            "seed": cfg.trainer.seed,
            "record_every_epoch": cfg.trainer.record_every_epoch,
        },
    )
    exp = {
        "n_seeds": cfg.n_seeds,
        "train_size": cfg.train_size,
        "eval_size": cfg.eval_size,
    }
    if cfg.fixed_epoch is not None:
        exp["fixed_epoch"] = cfg.fixed_epoch
    table("experiment", exp)
    table(
        "landscape",
        {
            "eps_x": cfg.thresholds.eps_x,
            "eps_y": cfg.thresholds.eps_y,
            "delta": cfg.thresholds.delta,
            "r_positive": cfg.thresholds.r_positive,
            "r_negative": cfg.thresholds.r_negative,
            "chance": cfg.thresholds.chance,
        },
    )
    table("output", {"out_dir": cfg.out_dir})
    return "\n".join(lines)
