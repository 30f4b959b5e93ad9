import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from lambda_mdp.errors import DimensionError, InvalidParameterError
from lambda_mdp.mdp_core import (MdpModel, PolicyTable, deterministic_policy, induce,
                                 mix_policies, normalize_model, normalize_policy,
                                 uniform_policy, validate_mdp, validate_policy)
from tests.conftest import make_random
from tests.oracles import p_pi_loop, r_pi_triple_loop


def test_m1_is_valid(m1):
    assert validate_mdp(m1) == []


def test_row_sum_violation_is_reported_with_its_path():
    broken = MdpModel(1, 1, [[[0.9]]], [[[1.0]]], [1.0], 0.5)
    violations = validate_mdp(broken)
    assert [v.path for v in violations] == ["transition[0][0]"]
    assert "row (0,0) sums to 0.9" in violations[0].message


def test_gamma_one_is_rejected(m1):
    violations = validate_mdp(m1.with_gamma(1.0))
    assert any(v.path == "gamma" and "gamma out of (0,1)" in v.message for v in violations)


def test_every_violation_is_listed():
    broken = MdpModel(2, 1, [[[0.5, 0.6]], [[-0.1, 1.1]]], [[[0.0, np.nan]], [[0.0, 0.0]]],
                      [0.5, 0.4], 0.0)
    paths = {v.path for v in validate_mdp(broken)}
    assert {"gamma", "transition[0][0]", "transition[1][0][0]", "transition[1][0][1]",
            "rho0", "reward[0][0][1]"} <= paths


def test_shape_mismatch_is_a_violation():
    model = MdpModel(3, 1, [[[1.0]]], [[[1.0]]], [1.0], 0.5)
    paths = {v.path for v in validate_mdp(model)}
    assert {"transition", "reward", "rho0"} <= paths


def test_policy_rows_are_validated():
    policy = PolicyTable([[0.5, 0.4], [1.0, 0.0]])
    violations = validate_policy(policy, 2, 2)
    assert [v.path for v in violations] == ["probs[0]"]
    assert validate_policy(policy, 3, 2)[0].path == "probs"


def test_induce_m1(m1, single_action):
    dyn = induce(m1, single_action(1))
    np.testing.assert_array_equal(dyn.p_pi, [[1.0]])
    np.testing.assert_array_equal(dyn.r_sa, [[1.0]])
    np.testing.assert_array_equal(dyn.r_pi, [1.0])


def test_induce_m2(m2, single_action):
    dyn = induce(m2, single_action(2))
    np.testing.assert_array_equal(dyn.p_pi, [[0.0, 1.0], [1.0, 0.0]])
    np.testing.assert_array_equal(dyn.r_pi, [1.0, 0.0])


def test_induce_matches_loop_oracle():
    model, _ = make_random(3, 3, 2)
    policy = uniform_policy(3, 2)
    dyn = induce(model, policy)
    np.testing.assert_allclose(dyn.p_pi.sum(axis=1), 1.0, atol=1e-12)
    np.testing.assert_allclose(dyn.p_pi, p_pi_loop(model, policy), atol=1e-12)
    np.testing.assert_allclose(dyn.r_pi, r_pi_triple_loop(model, policy), atol=1e-12)
    np.testing.assert_allclose(dyn.r_pi, (policy.probs * dyn.r_sa).sum(axis=1), atol=1e-12)


@settings(max_examples=50, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), num_states=st.integers(1, 20),
       num_actions=st.integers(1, 5))
def test_induced_kernel_is_row_stochastic(seed, num_states, num_actions):
    model, policy = make_random(seed, num_states, num_actions)
    assert validate_mdp(model) == []
    dyn = induce(model, policy)
    np.testing.assert_allclose(dyn.p_pi.sum(axis=1), 1.0, atol=1e-12)


@settings(max_examples=50, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), alpha=st.floats(0.0, 1.0))
def test_induced_kernel_is_linear_in_the_policy(seed, alpha):
    model, first = make_random(seed, 4, 3)
    _, second = make_random(seed + 1, 4, 3)
    mixed = induce(model, mix_policies(first, second, alpha)).p_pi
    expected = alpha * induce(model, first).p_pi + (1 - alpha) * induce(model, second).p_pi
    np.testing.assert_allclose(mixed, expected, atol=1e-12)


def test_two_level_reward_is_broadcast():
    model = MdpModel.from_arrays([[[0.5, 0.5]], [[1.0, 0.0]]], [[2.0], [3.0]], [1.0, 0.0], 0.9)
    assert model.reward.shape == (2, 1, 2)
    np.testing.assert_array_equal(model.reward[0, 0], [2.0, 2.0])
    np.testing.assert_array_equal(induce(model, uniform_policy(2, 1)).r_pi, [2.0, 3.0])


def test_arrays_are_read_only(m1):
    with pytest.raises(ValueError):
        m1.transition[0, 0, 0] = 0.5


def test_dimension_mismatch_raises(m2):
    with pytest.raises(DimensionError):
        induce(m2, uniform_policy(2, 2))


def test_normalize_is_explicit():
    broken = MdpModel(1, 2, [[[0.9], [2.0]]], [[[1.0], [1.0]]], [3.0], 0.5)
    fixed = normalize_model(broken)
    assert validate_mdp(fixed) == []
    policy = normalize_policy(PolicyTable([[2.0, 2.0]]))
    np.testing.assert_allclose(policy.probs, [[0.5, 0.5]])
    with pytest.raises(InvalidParameterError):
        normalize_policy(PolicyTable([[0.0, 0.0]]))


def test_deterministic_policy():
    policy = deterministic_policy([1, 0], 2)
    np.testing.assert_array_equal(policy.probs, [[0.0, 1.0], [1.0, 0.0]])
