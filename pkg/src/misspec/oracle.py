"""Closed-form population statistics, empirical moments, least squares, risks.

For a feature subset selected by a binary mask the relevant quantities are the
second moments

    M   = E[ x_sel x_sel^T ],     b = E[ x_sel y ],     s_y = E[ y^2 ],

from which the minimum-MSE linear coefficients are beta = M^-1 b and the risk
of any coefficient vector under any evaluation environment is

    risk(beta) = s_y - 2 beta.b + beta.M beta .

Under the generator of :mod:`misspec.sem` every expectation is available in
closed form (Sigma_inv = inv_scale_sq * I):

    s_y                  = gamma . Sigma_inv gamma + sigma_inv_sq
    E[x_inv y]           = Sigma_inv gamma
    E[x_spu_i y]         = s_y
    E[x_inv x_inv^T]     = Sigma_inv
    E[x_inv x_spu_i]     = Sigma_inv gamma          (every spurious column)
    E[x_spu_i x_spu_j]   = s_y + delta_ij alpha_i^2 sigma_spu_sq_i

Only the spurious diagonal depends on the environment, and E[x y] does not
depend on it at all; this structure is what the certificate module exploits.

Everything here is a pure function of immutable inputs, safe for
data-parallel evaluation across masks and environments.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

from .errors import ConfigurationError, SingularMomentError
from .sem import Dataset, Environment, TaskSpec

__all__ = [
    "FeatureMask",
    "MomentSet",
    "RegressionSolution",
    "EigenSystem",
    "population_moments",
    "empirical_moments",
    "solve_regression",
    "risk",
    "eigendecompose",
    "CONDITION_LIMIT",
]

CONDITION_LIMIT = 1e12


def _readonly(a: np.ndarray, dtype=float) -> np.ndarray:
    a = np.array(a, dtype=dtype, copy=True)
    a.flags.writeable = False
    return a


@dataclass(frozen=True)
class FeatureMask:
    """Binary selection over the [invariant | spurious] feature vector."""

    selected: np.ndarray
    d_inv: int
    d_spu: int

    def __post_init__(self):
        sel = np.array(self.selected, dtype=bool, copy=True)
        sel.flags.writeable = False
        object.__setattr__(self, "selected", sel)
        if sel.shape != (self.d_inv + self.d_spu,):
            raise ConfigurationError(
                f"mask has length {sel.shape[0]}, expected "
                f"d_inv + d_spu = {self.d_inv + self.d_spu}"
            )

    @classmethod
    def all_invariant(cls, task: TaskSpec) -> "FeatureMask":
        sel = np.zeros(task.d, dtype=bool)
        sel[: task.d_inv] = True
        return cls(sel, task.d_inv, task.d_spu)

    @classmethod
    def full(cls, task: TaskSpec) -> "FeatureMask":
        return cls(np.ones(task.d, dtype=bool), task.d_inv, task.d_spu)

    @classmethod
    def from_indices(cls, task: TaskSpec, indices) -> "FeatureMask":
        sel = np.zeros(task.d, dtype=bool)
        for i in indices:
            if not 0 <= i < task.d:
                raise ConfigurationError(f"mask index {i} out of range [0, {task.d})")
            sel[i] = True
        return cls(sel, task.d_inv, task.d_spu)

    def with_spurious(self, spu_index: int) -> "FeatureMask":
        """New mask with spurious coordinate `spu_index` (0-based within the
        spurious block) added."""
        if not 0 <= spu_index < self.d_spu:
            raise ConfigurationError(
                f"spurious index {spu_index} out of range [0, {self.d_spu})"
            )
        pos = self.d_inv + spu_index
        if self.selected[pos]:
            raise ConfigurationError(f"spurious coordinate {spu_index} already selected")
        sel = self.selected.copy()
        sel[pos] = True
        return FeatureMask(sel, self.d_inv, self.d_spu)

    @property
    def indices(self) -> np.ndarray:
        return np.flatnonzero(self.selected)

    @property
    def d_hat(self) -> int:
        return int(self.selected.sum())

    @property
    def d_hat_inv(self) -> int:
        return int(self.selected[: self.d_inv].sum())

    @property
    def d_hat_spu(self) -> int:
        return int(self.selected[self.d_inv :].sum())

    def position_of(self, full_index: int) -> int:
        """Position of a selected full-vector index inside the masked vector."""
        if not self.selected[full_index]:
            raise ConfigurationError(f"index {full_index} is not in the mask")
        return int(np.searchsorted(self.indices, full_index))


@dataclass(frozen=True)
class MomentSet:
    """Second moments (M, b, s_y) of the masked features and target."""

    M: np.ndarray
    b: np.ndarray
    s_y: float
    source: str
    mask: FeatureMask | None = None
    env_id: str | None = None
    n_samples: int | None = None
    low_sample: bool = field(default=False)

    def __post_init__(self):
        object.__setattr__(self, "M", _readonly(np.atleast_2d(self.M)))
        object.__setattr__(self, "b", _readonly(np.atleast_1d(self.b)))
        if self.M.shape != (self.b.shape[0], self.b.shape[0]):
            raise ConfigurationError("M and b dimensions are inconsistent")
        if not np.allclose(self.M, self.M.T, atol=1e-12, rtol=0.0):
            raise ConfigurationError("M must be symmetric within 1e-12")
        if not self.s_y > 0.0:
            raise ConfigurationError("s_y must be strictly positive")

    @property
    def dim(self) -> int:
        return self.b.shape[0]

    def to_json_dict(self) -> dict:
        return {
            "M": [[float(v) for v in row] for row in self.M],
            "b": [float(v) for v in self.b],
            "s_y": float(self.s_y),
            "source": self.source,
        }


@dataclass(frozen=True)
class RegressionSolution:
    """Normal-equations coefficients for one (mask, environment) pair."""

    beta: np.ndarray
    fit_env: str
    mask: FeatureMask | None = None

    def __post_init__(self):
        object.__setattr__(self, "beta", _readonly(np.atleast_1d(self.beta)))

    def to_json_dict(self) -> dict:
        return {"beta": [float(v) for v in self.beta], "fit_env": self.fit_env}


@dataclass(frozen=True)
class EigenSystem:
    """Spectral decomposition with descending eigenvalues and a fixed sign
    convention (first nonzero component of each eigenvector positive)."""

    lambdas: np.ndarray
    vectors: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "lambdas", _readonly(self.lambdas))
        object.__setattr__(self, "vectors", _readonly(self.vectors))


def population_moments(task: TaskSpec, env: Environment, mask: FeatureMask) -> MomentSet:
    """Exact moments of the masked features under (task, env)."""
    env.check_task(task)
    if mask.d_inv != task.d_inv or mask.d_spu != task.d_spu:
        raise ConfigurationError("mask dimensions do not match the task")
    if mask.d_hat < 1:
        raise ConfigurationError("mask selects no features")
    d_inv, d_spu = task.d_inv, task.d_spu
    s_y = float(task.inv_scale_sq * task.gamma @ task.gamma + task.sigma_inv_sq)
    cov_inv_y = task.inv_scale_sq * task.gamma

    d = task.d
    M = np.zeros((d, d))
    b = np.zeros(d)
    M[:d_inv, :d_inv] = task.inv_scale_sq * np.eye(d_inv)
    b[:d_inv] = cov_inv_y
    if d_spu:
        M[:d_inv, d_inv:] = np.tile(cov_inv_y[:, None], (1, d_spu))
        M[d_inv:, :d_inv] = M[:d_inv, d_inv:].T
        M[d_inv:, d_inv:] = s_y + np.diag(env.alpha**2 * task.sigma_spu_sq)
        b[d_inv:] = s_y

    idx = mask.indices
    return MomentSet(
        M=M[np.ix_(idx, idx)],
        b=b[idx],
        s_y=s_y,
        source=f"population(env={env.env_id})",
        mask=mask,
        env_id=env.env_id,
    )


def empirical_moments(dataset: Dataset, mask: FeatureMask) -> MomentSet:
    """Plug-in moment estimates M = X'X/n, b = X'y/n, s_y = y'y/n."""
    if dataset.n < 1:
        raise ConfigurationError("dataset is empty")
    if mask.selected.shape[0] != dataset.d:
        raise ConfigurationError(
            f"mask length {mask.selected.shape[0]} does not match "
            f"feature width {dataset.d}"
        )
    if mask.d_hat < 1:
        raise ConfigurationError("mask selects no features")
    X = dataset.features[:, mask.indices]
    y = dataset.target
    n = dataset.n
    M = (X.T @ X) / n
    M = 0.5 * (M + M.T)  # enforce exact symmetry against rounding
    return MomentSet(
        M=M,
        b=(X.T @ y) / n,
        s_y=float(y @ y / n),
        source=f"empirical(n={n}, env={dataset.env_id})",
        mask=mask,
        env_id=dataset.env_id,
        n_samples=n,
        low_sample=n < mask.d_hat,
    )


def solve_regression(moments: MomentSet, condition_limit: float = CONDITION_LIMIT) -> RegressionSolution:
    """beta = M^-1 b via a symmetric positive-definite solve.

    Raises SingularMomentError when cond(M) exceeds `condition_limit`.
    """
    cond = float(np.linalg.cond(moments.M))
    if not np.isfinite(cond) or cond > condition_limit:
        raise SingularMomentError(cond, condition_limit)
    beta = scipy.linalg.solve(moments.M, moments.b, assume_a="pos")
    resid = np.linalg.norm(moments.M @ beta - moments.b)
    scale = max(np.linalg.norm(moments.b), 1e-300)
    if resid > 1e-8 * max(1.0, scale):
        raise SingularMomentError(cond, condition_limit)
    return RegressionSolution(
        beta=beta,
        fit_env=moments.env_id if moments.env_id is not None else "unknown",
        mask=moments.mask,
    )


def risk(beta, eval_moments: MomentSet) -> float:
    """MSE of coefficients `beta` under the evaluation moments:
    s_y - 2 beta.b + beta.M beta.

    `beta` may be a RegressionSolution or a plain coefficient vector, which
    lets tests evaluate arbitrary perturbed coefficients.
    """
    vec = beta.beta if isinstance(beta, RegressionSolution) else np.atleast_1d(
        np.asarray(beta, dtype=float)
    )
    if vec.shape[0] != eval_moments.dim:
        raise ConfigurationError(
            f"beta has length {vec.shape[0]}, moments have dimension "
            f"{eval_moments.dim}"
        )
    value = float(eval_moments.s_y - 2.0 * vec @ eval_moments.b + vec @ eval_moments.M @ vec)
    # the population MSE is nonnegative; clamp away sub-eps rounding noise
    return max(value, 0.0)


def eigendecompose(M: np.ndarray, symmetry_tol: float = 1e-10) -> EigenSystem:
    """Spectral decomposition of a symmetric matrix, descending eigenvalues,
    sign fixed so the first nonzero component of each eigenvector is positive."""
    M = np.atleast_2d(np.asarray(M, dtype=float))
    scale = max(float(np.abs(M).max()), 1.0)
    if not np.allclose(M, M.T, atol=symmetry_tol * scale, rtol=0.0):
        raise ConfigurationError("matrix is not symmetric within tolerance")
    lam, V = np.linalg.eigh(0.5 * (M + M.T))
    order = np.argsort(lam)[::-1]
    lam = lam[order]
    V = V[:, order]
    for j in range(V.shape[1]):
        col = V[:, j]
        nz = np.flatnonzero(np.abs(col) > 1e-12)
        pivot = nz[0] if nz.size else 0
        if col[pivot] < 0:
            V[:, j] = -col
    return EigenSystem(lambdas=lam, vectors=V)
