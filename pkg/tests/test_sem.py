"""Generator tests: structural equations, determinism, serialisation."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from misspec import ConfigurationError, Dataset, Environment, TaskSpec
from misspec.sem import (
    dataset_to_csv,
    environment_from_dict,
    environment_to_dict,
    make_shift_family,
    sample_dataset,
    task_from_dict,
    task_to_dict,
)

from util import E0_ID, E0_OOD, E0_TASK


def test_alpha_zero_makes_spurious_an_exact_copy():
    task = TaskSpec(d_inv=2, d_spu=1, gamma=[1.0, -0.5], sigma_inv_sq=0.5, sigma_spu_sq=[2.0])
    env = Environment(alpha=[0.0], env_id="copy")
    ds = sample_dataset(task, env, n=5, seed=7)
    np.testing.assert_array_equal(ds.features[:, 2], ds.target)


def test_target_variance_matches_closed_form_monte_carlo():
    # Var(y) = gamma' Sigma gamma + sigma_inv_sq = 2 for E0
    ds = sample_dataset(E0_TASK, E0_ID, n=10**6, seed=11)
    assert np.var(ds.target) == pytest.approx(2.0, rel=0.01)


def test_sampling_is_deterministic():
    a = sample_dataset(E0_TASK, E0_OOD, n=100, seed=3)
    b = sample_dataset(E0_TASK, E0_OOD, n=100, seed=3)
    np.testing.assert_array_equal(a.features, b.features)
    np.testing.assert_array_equal(a.target, b.target)
    np.testing.assert_array_equal(a.label, b.label)


def test_matched_seed_environments_share_noise():
    # identical alphas => bitwise-identical datasets under the same seed
    env_b = Environment(alpha=[0.1], env_id="OOD-matched")
    a = sample_dataset(E0_TASK, E0_ID, n=200, seed=5)
    b = sample_dataset(E0_TASK, env_b, n=200, seed=5)
    np.testing.assert_array_equal(a.features, b.features)


def test_label_is_sign_of_target():
    ds = sample_dataset(E0_TASK, E0_ID, n=1000, seed=1)
    np.testing.assert_array_equal(ds.label, np.where(ds.target >= 0, 1, -1))


@given(
    gamma=st.lists(st.floats(0.1, 2.0), min_size=1, max_size=3),
    alpha=st.floats(0.0, 5.0),
    seed=st.integers(0, 2**31),
)
@settings(max_examples=40, deadline=None)
def test_sampling_properties_hold_for_any_task(gamma, alpha, seed):
    task = TaskSpec(
        d_inv=len(gamma), d_spu=1, gamma=gamma, sigma_inv_sq=0.7, sigma_spu_sq=[1.3]
    )
    env = Environment(alpha=[alpha], env_id="e")
    ds = sample_dataset(task, env, n=16, seed=seed)
    assert ds.features.shape == (16, task.d)
    assert np.all(np.isfinite(ds.features)) and np.all(np.isfinite(ds.target))
    np.testing.assert_array_equal(ds.label, np.where(ds.target >= 0, 1, -1))
    if alpha == 0.0:
        np.testing.assert_array_equal(ds.features[:, task.d_inv], ds.target)
    again = sample_dataset(task, env, n=16, seed=seed)
    np.testing.assert_array_equal(ds.features, again.features)


def test_sign_zero_tie_break_is_positive():
    ds = Dataset(
        features=np.array([[1.0]]), target=np.array([0.0]),
        label=np.array([1]), env_id="e", seed=0, d_inv=1,
    )
    assert ds.label[0] == 1
    with pytest.raises(ConfigurationError):
        Dataset(
            features=np.array([[1.0]]), target=np.array([0.0]),
            label=np.array([-1]), env_id="e", seed=0, d_inv=1,
        )


def test_spurious_target_covariance_converges_to_target_variance():
    # Cov(x_spu_i, y) = Var(y); check within 3 standard errors at n = 10^6
    n = 10**6
    ds = sample_dataset(E0_TASK, E0_OOD, n=n, seed=23)
    prod = ds.features[:, 1] * ds.target
    se = float(np.std(prod) / np.sqrt(n))
    assert abs(float(np.mean(prod)) - 2.0) < 3 * se


def test_dimension_mismatch_is_a_configuration_error():
    env = Environment(alpha=[1.0, 2.0], env_id="bad")
    with pytest.raises(ConfigurationError):
        sample_dataset(E0_TASK, env, n=10, seed=0)


@pytest.mark.parametrize(
    "bad",
    [
        dict(d_inv=1, d_spu=1, gamma=[0.0], sigma_inv_sq=1.0, sigma_spu_sq=[1.0]),
        dict(d_inv=1, d_spu=1, gamma=[1.0], sigma_inv_sq=0.0, sigma_spu_sq=[1.0]),
        dict(d_inv=1, d_spu=1, gamma=[1.0], sigma_inv_sq=1.0, sigma_spu_sq=[-1.0]),
        dict(d_inv=2, d_spu=1, gamma=[1.0], sigma_inv_sq=1.0, sigma_spu_sq=[1.0]),
    ],
)
def test_invalid_tasks_rejected(bad):
    with pytest.raises(ConfigurationError):
        TaskSpec(**bad)


class TestShiftFamily:
    def test_degenerate_interpolation(self):
        fam = make_shift_family(E0_TASK, [1.0], [1.0], steps=3)
        assert len(fam) == 3
        for env in fam:
            np.testing.assert_array_equal(env.alpha, [1.0])

    def test_linear_interpolation(self):
        fam = make_shift_family(E0_TASK, [0.0], [4.0], steps=5)
        np.testing.assert_allclose([e.alpha[0] for e in fam], [0, 1, 2, 3, 4])

    def test_two_steps_are_the_endpoints(self):
        task = TaskSpec(
            d_inv=1, d_spu=2, gamma=[1.0], sigma_inv_sq=1.0, sigma_spu_sq=[1.0, 1.0]
        )
        fam = make_shift_family(task, [0.1, 0.1], [3.0, 5.0], steps=2)
        assert len(fam) == 2
        np.testing.assert_array_equal(fam[0].alpha, [0.1, 0.1])
        np.testing.assert_array_equal(fam[1].alpha, [3.0, 5.0])

    def test_too_few_steps_rejected(self):
        with pytest.raises(ConfigurationError):
            make_shift_family(E0_TASK, [0.0], [1.0], steps=1)

    def test_length_mismatch_rejected(self):
        with pytest.raises(ConfigurationError):
            make_shift_family(E0_TASK, [0.0, 1.0], [1.0], steps=3)


def test_task_dict_roundtrip():
    d = task_to_dict(E0_TASK)
    back = task_from_dict(d)
    assert back == E0_TASK


def test_task_dict_missing_field_names_it():
    d = task_to_dict(E0_TASK)
    del d["d_spu"]
    with pytest.raises(ConfigurationError, match="d_spu"):
        task_from_dict(d)


def test_environment_dict_roundtrip():
    env = environment_from_dict(environment_to_dict(E0_OOD))
    np.testing.assert_array_equal(env.alpha, E0_OOD.alpha)
    assert env.env_id == E0_OOD.env_id


def test_dataset_csv_header_and_values():
    task = TaskSpec(d_inv=2, d_spu=1, gamma=[1.0, 1.0], sigma_inv_sq=1.0, sigma_spu_sq=[1.0])
    env = Environment(alpha=[0.5], env_id="e")
    ds = sample_dataset(task, env, n=3, seed=9)
    text = dataset_to_csv(ds)
    lines = text.strip().split("\n")
    assert lines[0] == "y,label,x_inv_1,x_inv_2,x_spu_1"
    assert len(lines) == 4
    first = lines[1].split(",")
    assert float(first[0]) == pytest.approx(ds.target[0])
    assert int(first[1]) == ds.label[0]
