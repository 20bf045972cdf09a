"""Structural-equation data generator with paired ID/OOD environments.

The target is a fixed linear function of invariant features plus noise, and
every spurious feature is a noisy copy of the target whose noise amplitude
is environment-specific:

    y     = gamma . x_inv + eps_inv
    x_spu = y * ones + alpha * eps_spu        (elementwise)

with x_inv_j ~ N(0, inv_scale_sq) i.i.d., eps_inv ~ N(0, sigma_inv_sq) and
eps_spu_i ~ N(0, sigma_spu_sq[i]), all independent.  The coefficient vector
gamma is shared by every environment; only the spurious scale vector alpha
changes between environments, which is what makes the spurious coordinates
predictive in-distribution and unreliable under shift.  alpha_i = 0 turns
spurious coordinate i into a noiseless copy of y.

Feature columns are ordered [invariant block | spurious block] everywhere in
this package.  Classification labels are sign(y) with sign(0) := +1; a single
generator therefore serves both the regression analysis and the classifier
training experiments.

Sampling is a pure function of (task, environment, n, seed): a fresh
generator is derived from the seed and the draw order is fixed, so matched
seeds across environments share their underlying noise realisations (common
random numbers).
"""

from __future__ import annotations

import io
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigurationError

__all__ = [
    "TaskSpec",
    "Environment",
    "Dataset",
    "sample_dataset",
    "make_shift_family",
    "task_to_dict",
    "task_from_dict",
    "environment_to_dict",
    "environment_from_dict",
    "dataset_to_csv",
]


def _readonly(a: np.ndarray) -> np.ndarray:
    a = np.array(a, dtype=float, copy=True)
    a.flags.writeable = False
    return a


@dataclass(frozen=True)
class TaskSpec:
    """The data-generating process shared by all environments of one task."""

    d_inv: int
    d_spu: int
    gamma: np.ndarray
    sigma_inv_sq: float
    sigma_spu_sq: np.ndarray
    inv_scale_sq: float = 1.0

    def __post_init__(self):
        object.__setattr__(self, "gamma", _readonly(np.atleast_1d(self.gamma)))
        object.__setattr__(
            self, "sigma_spu_sq", _readonly(np.atleast_1d(self.sigma_spu_sq))
        )
        if self.d_inv < 1:
            raise ConfigurationError("d_inv must be a positive integer")
        if self.d_spu < 0:
            raise ConfigurationError("d_spu must be nonnegative")
        if self.gamma.shape != (self.d_inv,):
            raise ConfigurationError(
                f"gamma has length {self.gamma.shape[0]}, expected d_inv={self.d_inv}"
            )
        if self.sigma_spu_sq.shape != (self.d_spu,):
            raise ConfigurationError(
                f"sigma_spu_sq has length {self.sigma_spu_sq.shape[0]}, "
                f"expected d_spu={self.d_spu}"
            )
        if not np.all(np.isfinite(self.gamma)):
            raise ConfigurationError("gamma entries must be finite")
        if not np.any(self.gamma != 0.0):
            raise ConfigurationError("gamma must have at least one nonzero entry")
        if not (self.sigma_inv_sq > 0.0 and np.isfinite(self.sigma_inv_sq)):
            raise ConfigurationError("sigma_inv_sq must be strictly positive")
        if self.d_spu and not np.all(
            (self.sigma_spu_sq > 0.0) & np.isfinite(self.sigma_spu_sq)
        ):
            raise ConfigurationError("sigma_spu_sq entries must be strictly positive")
        if not (self.inv_scale_sq > 0.0 and np.isfinite(self.inv_scale_sq)):
            raise ConfigurationError("inv_scale_sq must be strictly positive")

    @property
    def d(self) -> int:
        return self.d_inv + self.d_spu


@dataclass(frozen=True)
class Environment:
    """Environment-specific spurious scales alpha, plus a label."""

    alpha: np.ndarray
    env_id: str

    def __post_init__(self):
        object.__setattr__(self, "alpha", _readonly(np.atleast_1d(self.alpha)))
        if not np.all(np.isfinite(self.alpha)):
            raise ConfigurationError("alpha entries must be finite")

    def check_task(self, task: TaskSpec) -> None:
        if self.alpha.shape != (task.d_spu,):
            raise ConfigurationError(
                f"environment '{self.env_id}' has alpha length "
                f"{self.alpha.shape[0]}, task expects d_spu={task.d_spu}"
            )


@dataclass(frozen=True)
class Dataset:
    """A finite sample: features [x_inv | x_spu], regression target y and
    classification label sign(y)."""

    features: np.ndarray
    target: np.ndarray
    label: np.ndarray
    env_id: str
    seed: int
    d_inv: int = field(default=0)

    def __post_init__(self):
        f = np.asarray(self.features, dtype=float)
        t = np.asarray(self.target, dtype=float)
        lab = np.asarray(self.label, dtype=int)
        for name, arr in (("features", f), ("target", t), ("label", lab)):
            arr.flags.writeable = False
            object.__setattr__(self, name, arr)
        if f.ndim != 2 or t.shape != (f.shape[0],) or lab.shape != (f.shape[0],):
            raise ConfigurationError("features/target/label shapes are inconsistent")
        if not np.array_equal(lab, np.where(t >= 0.0, 1, -1)):
            raise ConfigurationError("label must equal sign(target) with sign(0)=+1")

    @property
    def n(self) -> int:
        return self.features.shape[0]

    @property
    def d(self) -> int:
        return self.features.shape[1]

    @property
    def class_index(self) -> np.ndarray:
        """Labels mapped to {0, 1} (class 1 = label +1), for classifiers."""
        return ((self.label + 1) // 2).astype(int)


def sample_dataset(task: TaskSpec, env: Environment, n: int, seed: int) -> Dataset:
    """Draw n i.i.d. rows from the structural equations in environment `env`.

    Deterministic given (task, env, n, seed).  The draw order is fixed as
    (x_inv, eps_inv, eps_spu), so matched seeds across environments share
    every noise realisation and differ only through alpha.
    """
    env.check_task(task)
    if n < 1:
        raise ConfigurationError("n must be at least 1")
    if seed < 0:
        raise ConfigurationError("seed must be a nonnegative integer")
    rng = np.random.default_rng(np.random.SeedSequence(seed))
    x_inv = rng.standard_normal((n, task.d_inv)) * np.sqrt(task.inv_scale_sq)
    eps_inv = rng.standard_normal(n) * np.sqrt(task.sigma_inv_sq)
    eps_spu = rng.standard_normal((n, task.d_spu)) * np.sqrt(task.sigma_spu_sq)
    y = x_inv @ task.gamma + eps_inv
    x_spu = y[:, None] + env.alpha * eps_spu
    features = np.hstack([x_inv, x_spu])
    label = np.where(y >= 0.0, 1, -1)
    return Dataset(
        features=features,
        target=y,
        label=label,
        env_id=env.env_id,
        seed=seed,
        d_inv=task.d_inv,
    )


def make_shift_family(
    task: TaskSpec, alpha_id: np.ndarray, alpha_far: np.ndarray, steps: int
) -> list[Environment]:
    """Linearly interpolated environments alpha(t) = (1-t) alpha_id + t alpha_far
    for t = k/(steps-1), k = 0..steps-1."""
    alpha_id = np.atleast_1d(np.asarray(alpha_id, dtype=float))
    alpha_far = np.atleast_1d(np.asarray(alpha_far, dtype=float))
    if alpha_id.shape != (task.d_spu,) or alpha_far.shape != (task.d_spu,):
        raise ConfigurationError(
            "alpha_id and alpha_far must both have length d_spu="
            f"{task.d_spu}, got {alpha_id.shape[0]} and {alpha_far.shape[0]}"
        )
    if steps < 2:
        raise ConfigurationError("steps must be at least 2")
    family = []
    for k in range(steps):
        t = k / (steps - 1)
        alpha = (1.0 - t) * alpha_id + t * alpha_far
        family.append(Environment(alpha=alpha, env_id=f"shift_t={t:.6g}"))
    return family


# --- serialisation -----------------------------------------------------------

def task_to_dict(task: TaskSpec) -> dict:
    return {
        "d_inv": task.d_inv,
        "d_spu": task.d_spu,
        "gamma": [float(g) for g in task.gamma],
        "sigma_inv_sq": float(task.sigma_inv_sq),
        "sigma_spu_sq": [float(s) for s in task.sigma_spu_sq],
        "inv_scale_sq": float(task.inv_scale_sq),
    }


def task_from_dict(d: dict) -> TaskSpec:
    required = ("d_inv", "d_spu", "gamma", "sigma_inv_sq", "sigma_spu_sq")
    for key in required:
        if key not in d:
            raise ConfigurationError(f"task config missing field '{key}'")
    return TaskSpec(
        d_inv=int(d["d_inv"]),
        d_spu=int(d["d_spu"]),
        gamma=np.asarray(d["gamma"], dtype=float),
        sigma_inv_sq=float(d["sigma_inv_sq"]),
        sigma_spu_sq=np.asarray(d["sigma_spu_sq"], dtype=float),
        inv_scale_sq=float(d.get("inv_scale_sq", 1.0)),
    )


def environment_to_dict(env: Environment) -> dict:
    return {"alpha": [float(a) for a in env.alpha], "env_id": env.env_id}


def environment_from_dict(d: dict) -> Environment:
    if "alpha" not in d:
        raise ConfigurationError("environment config missing field 'alpha'")
    return Environment(
        alpha=np.asarray(d["alpha"], dtype=float),
        env_id=str(d.get("env_id", "env")),
    )


def dataset_to_csv(dataset: Dataset, d_inv: int | None = None) -> str:
    """CSV export with header ``y,label,x_inv_1..,x_spu_1..``."""
    d_inv = dataset.d_inv if d_inv is None else d_inv
    d_spu = dataset.d - d_inv
    header = (
        ["y", "label"]
        + [f"x_inv_{j + 1}" for j in range(d_inv)]
        + [f"x_spu_{j + 1}" for j in range(d_spu)]
    )
    buf = io.StringIO()
    buf.write(",".join(header) + "\n")
    for i in range(dataset.n):
        row = [f"{dataset.target[i]:.17g}", str(int(dataset.label[i]))]
        row += [f"{v:.17g}" for v in dataset.features[i]]
        buf.write(",".join(row) + "\n")
    return buf.getvalue()
