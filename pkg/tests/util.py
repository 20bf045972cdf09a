"""Shared helpers for the test suite: canonical tasks and Monte Carlo oracles."""

import numpy as np

from misspec import Environment, FeatureMask, TaskSpec, sample_dataset

# The two-feature reference task: one invariant feature with unit coefficient
# and noise, one spurious feature that is nearly a copy of y in-distribution
# (alpha 0.1) and heavily corrupted out-of-distribution (alpha 3).
E0_TASK = TaskSpec(d_inv=1, d_spu=1, gamma=[1.0], sigma_inv_sq=1.0, sigma_spu_sq=[1.0])
E0_ID = Environment(alpha=[0.1], env_id="ID")
E0_OOD = Environment(alpha=[3.0], env_id="OOD")

# Exact population values for E0, derived by hand from the closed-form
# moments (M_ID = [[1,1],[1,2.01]], b = [1,2], s_y = 2) and verified against
# the Monte Carlo oracles below:
#   beta_ID(full)           = [1/101, 100/101]
#   risk_ID(full)           = 1/101
#   risk_ID(invariant-only) = 1
#   transfer risk OOD(full) = 90001/10201    (M_OOD = [[1,1],[1,11]])
E0_BETA_FULL = np.array([1.0 / 101.0, 100.0 / 101.0])
E0_RISK_ID_FULL = 1.0 / 101.0
E0_RISK_INV = 1.0
E0_RISK_OOD_TRANSFER_FULL = 90001.0 / 10201.0
E0_DELTA_ID = E0_RISK_ID_FULL - E0_RISK_INV            # = -100/101
E0_DELTA_OOD_TRANSFER = E0_RISK_OOD_TRANSFER_FULL - E0_RISK_INV  # = 79800/10201

# The misspecified benchmark task: four invariant features at coefficient
# 1/2 each, four spurious near-copies; mild spurious noise ID, strong OOD.
BENCH_TASK = TaskSpec(
    d_inv=4,
    d_spu=4,
    gamma=np.full(4, 0.5),
    sigma_inv_sq=1.0,
    sigma_spu_sq=np.ones(4),
)
BENCH_ID = Environment(alpha=np.full(4, 0.1), env_id="ID")
BENCH_OOD = Environment(alpha=np.full(4, 3.0), env_id="OOD")


def mc_mse(task, env, mask: FeatureMask, beta: np.ndarray, n: int, seed: int) -> float:
    """Monte Carlo MSE of fixed coefficients on a fresh sample."""
    ds = sample_dataset(task, env, n, seed)
    X = ds.features[:, mask.indices]
    resid = ds.target - X @ beta
    return float(np.mean(resid**2))


def mc_moments(task, env, mask: FeatureMask, n: int, seed: int):
    """Monte Carlo estimates of (M, b, s_y) on a fresh sample."""
    ds = sample_dataset(task, env, n, seed)
    X = ds.features[:, mask.indices]
    y = ds.target
    return (X.T @ X) / n, (X.T @ y) / n, float(y @ y / n)


def random_task(rng: np.random.Generator, d_inv=None, d_spu=None):
    """Task + ID/OOD environments from the documented property-test ranges:
    gamma entries in [-2,2] bounded away from 0 by 0.1, variances in
    [0.25, 4], alpha_ID in [0, 0.5], alpha_OOD in [2, 6]."""
    d_inv = int(rng.integers(1, 5)) if d_inv is None else d_inv
    d_spu = int(rng.integers(1, 5)) if d_spu is None else d_spu
    gamma = rng.uniform(0.1, 2.0, d_inv) * rng.choice([-1.0, 1.0], d_inv)
    task = TaskSpec(
        d_inv=d_inv,
        d_spu=d_spu,
        gamma=gamma,
        sigma_inv_sq=float(rng.uniform(0.25, 4.0)),
        sigma_spu_sq=rng.uniform(0.25, 4.0, d_spu),
    )
    env_id = Environment(alpha=rng.uniform(0.0, 0.5, d_spu), env_id="ID")
    env_ood = Environment(alpha=rng.uniform(2.0, 6.0, d_spu), env_id="OOD")
    return task, env_id, env_ood


def shared_eigvec_case(rng: np.random.Generator):
    """A task where the before/after moment matrices of the two environments
    genuinely share eigenvectors, so the spectral decomposition identity is
    exact: both masked coordinates are spurious with unit noise variance and
    a common squared-scale gap c, making M_OOD = M_ID + c I on the mask.
    Returns (task, env_id, env_ood, mask_before, new_index)."""
    a1, a2 = rng.uniform(0.1, 0.8, 2)
    c = float(rng.uniform(1.0, 8.0))
    task = TaskSpec(
        d_inv=1, d_spu=2, gamma=[1.0], sigma_inv_sq=1.0, sigma_spu_sq=[1.0, 1.0]
    )
    env_id = Environment(alpha=[a1, a2], env_id="ID")
    env_ood = Environment(
        alpha=np.sqrt(np.array([a1, a2]) ** 2 + c), env_id="OOD"
    )
    mask_before = FeatureMask.from_indices(task, [1])  # spurious coordinate 0
    return task, env_id, env_ood, mask_before, 1
