import math

import numpy as np
import pytest

from lambda_mdp.errors import BisectionError, InvalidParameterError
from lambda_mdp.instances import random_policy, rng_stream
from lambda_mdp.lambda_operators import build_lambda_model
from lambda_mdp.mdp_core import (MdpModel, PolicyTable, deterministic_policy, induce, mix_policies,
                                  uniform_policy)
from lambda_mdp.objectives import objective_standard
from lambda_mdp.policy_optimization import (TrustRegionConfig, epsilon_v, exact_gae,
                                            exponentiated_update, kl_divergence, kl_divergences,
                                            optimize, pinsker_chain, surrogate_bound,
                                            trust_region_step, tv_distance)
from lambda_mdp.trajectory_sampler import gae_from_trajectory, sample_trajectories
from lambda_mdp.value_solver import evaluate, evaluate_exact
from tests.conftest import make_random
from tests.oracles import epsilon_v_loop, exhaustive_optimum


def _other_policy(seed, num_states, num_actions):
    return random_policy(rng_stream(seed, 7), num_states, num_actions)


@pytest.mark.parametrize("lam", [0.0, 0.3, 0.7, 0.95, 1.0])
def test_gae_with_exact_values_is_the_advantage(lam):
    model, policy = make_random(1, 6, 3)
    bundle = evaluate(model, policy)
    np.testing.assert_allclose(exact_gae(model, policy, bundle.v, model.gamma, lam), bundle.adv,
                               atol=1e-9)


def test_gae_at_lambda_zero_is_one_step_td():
    model, policy = make_random(2, 5, 2)
    v = np.random.default_rng(0).normal(size=5)
    one_step = (np.einsum("ijk,ijk->ij", model.transition, model.reward)
                + model.gamma * np.einsum("ijk,k->ij", model.transition, v) - v[:, None])
    np.testing.assert_allclose(exact_gae(model, policy, v, model.gamma, 0.0), one_step, atol=1e-14)


@pytest.mark.slow
def test_gae_matches_trajectory_average():
    model, policy = make_random(3, 4, 2, gamma=0.9)
    lam = 0.9
    v = evaluate_exact(induce(model, policy), model.gamma)
    v = v + np.random.default_rng(3).normal(0.0, 0.5, size=4)
    table = exact_gae(model, policy, v, model.gamma, lam)
    expected = float(model.rho0 @ (policy.probs * table).sum(axis=1))
    trajectories = sample_trajectories(model, policy, horizon=200, count=20000, seed=11)
    first = np.array([gae_from_trajectory(traj, v, model.gamma, lam)[0] for traj in trajectories])
    stderr = first.std(ddof=1) / math.sqrt(len(first))
    assert abs(first.mean() - expected) <= 3.0 * stderr + 1e-9


def test_tv_examples():
    p = PolicyTable([[0.7, 0.3]])
    q = PolicyTable([[0.4, 0.6]])
    assert tv_distance(p, q, 0) == pytest.approx(0.3, abs=1e-15)
    assert tv_distance(p, p, 0) == 0.0
    assert tv_distance(deterministic_policy([0], 2), deterministic_policy([1], 2), 0) == 1.0


def test_kl_examples():
    p = PolicyTable([[0.7, 0.3]])
    q = PolicyTable([[0.5, 0.5]])
    assert kl_divergence(p, q, 0) == pytest.approx(0.7 * math.log(1.4) + 0.3 * math.log(0.6),
                                                   abs=1e-15)
    assert kl_divergence(p, q, 0) == pytest.approx(0.08228, abs=1e-5)
    assert kl_divergence(p, p, 0) == 0.0
    assert kl_divergence(deterministic_policy([0], 2), deterministic_policy([1], 2), 0) == math.inf
    assert kl_divergence(deterministic_policy([0], 2), q, 0) == pytest.approx(math.log(2.0))


def test_epsilon_v_on_deterministic_cycle(m2, single_action):
    policy = single_action(2)
    assert epsilon_v(m2, policy, policy) == pytest.approx(0.0, abs=1e-12)


def test_epsilon_v_matches_enumeration():
    model, policy = make_random(4, 5, 3)
    other = _other_policy(4, 5, 3)
    v_prime = evaluate_exact(induce(model, policy), model.gamma)
    assert epsilon_v(model, other, policy) == pytest.approx(epsilon_v_loop(model, other, v_prime),
                                                            abs=1e-12)
    assert epsilon_v(model, policy, policy) > 0.0


def test_epsilon_v_is_homogeneous_in_rewards():
    model, policy = make_random(5, 4, 2)
    other = _other_policy(5, 4, 2)
    scaled = model.with_reward(3.0 * model.reward)
    assert epsilon_v(scaled, other, policy) == pytest.approx(3.0 * epsilon_v(model, other, policy),
                                                             rel=1e-10)


@pytest.mark.parametrize("lam", [0.0, 0.5, 1.0])
def test_identical_policies_give_a_zero_bound(lam):
    model, policy = make_random(6, 5, 3)
    report = surrogate_bound(model, policy, policy, lam)
    assert report.penalty_term == 0.0
    assert report.gae_term == pytest.approx(0.0, abs=1e-10)
    assert report.true_gap == 0.0
    assert report.lower_bound == pytest.approx(0.0, abs=1e-10)


def test_single_action_bound_is_trivial(m1, single_action):
    report = surrogate_bound(m1, single_action(1), single_action(1), 0.5)
    assert report.gae_term == pytest.approx(0.0, abs=1e-12)
    assert report.penalty_term == 0.0
    assert report.true_gap == 0.0
    assert report.epsilon_v == pytest.approx(0.0, abs=1e-12)


@pytest.mark.parametrize("seed", range(20))
@pytest.mark.parametrize("lam", [0.0, 1.0])
def test_bound_holds_at_the_endpoints(seed, lam):
    model, pi_prime = make_random(seed, 6, 3)
    pi = mix_policies(_other_policy(seed, 6, 3), pi_prime, 0.5)
    report = surrogate_bound(model, pi, pi_prime, lam)
    assert report.lower_bound == pytest.approx(report.gae_term - report.penalty_term)
    assert report.true_gap >= report.lower_bound - 1e-8
    assert report.kl_lower_bound <= report.lower_bound + 1e-12


def test_full_lambda_bound_is_tight():
    model, pi_prime = make_random(30, 5, 2)
    pi = _other_policy(30, 5, 2)
    report = surrogate_bound(model, pi, pi_prime, 1.0)
    assert report.penalty_term == 0.0
    assert report.gae_term == pytest.approx(report.true_gap, abs=1e-9)


@pytest.mark.parametrize("seed", range(5))
@pytest.mark.parametrize("lam", [0.3, 0.7, 0.95])
@pytest.mark.parametrize("gamma", [0.5, 0.9])
def test_bound_holds_for_small_steps(seed, lam, gamma):
    model, pi_prime = make_random(seed, 5, 3, gamma=gamma)
    pi = mix_policies(_other_policy(seed, 5, 3), pi_prime, 0.01)
    report = surrogate_bound(model, pi, pi_prime, lam)
    assert report.true_gap >= report.lower_bound - 1e-8


def test_pinsker_chain_identical_policies():
    model, policy = make_random(7, 4, 2)
    chain = pinsker_chain(model, policy, policy, 0.5)
    assert (chain.tv_expect, chain.pointwise_pinsker, chain.jensen) == (0.0, 0.0, 0.0)


def test_pinsker_chain_support_violation(m2):
    model = m2
    two_actions = MdpModel.from_arrays(
        np.repeat(model.transition, 2, axis=1), np.repeat(model.reward, 2, axis=1),
        model.rho0, model.gamma)
    chain = pinsker_chain(two_actions, deterministic_policy([0, 0], 2),
                          deterministic_policy([1, 1], 2), 0.5)
    assert chain.tv_expect == pytest.approx(1.0)
    assert chain.pointwise_pinsker == math.inf
    assert chain.jensen == math.inf
    assert chain.holds()


@pytest.mark.parametrize("seed", range(10))
def test_pinsker_chain_ordering(seed):
    model, pi_prime = make_random(seed, 6, 4)
    pi = _other_policy(seed, 6, 4)
    chain = pinsker_chain(model, pi, pi_prime, 0.7)
    assert chain.tv_expect <= chain.pointwise_pinsker + 1e-12
    assert chain.pointwise_pinsker <= chain.jensen + 1e-12


def test_kl_terms_outside_the_weighted_states_are_ignored():
    # s1 is never visited from s0, so its infinite KL carries zero weight
    transition = np.zeros((2, 2, 2))
    transition[:, :, 0] = 1.0
    model = MdpModel(2, 2, transition, np.zeros((2, 2, 2)), [1.0, 0.0], 0.9)
    pi = PolicyTable([[0.5, 0.5], [1.0, 0.0]])
    pi_prime = PolicyTable([[0.5, 0.5], [0.0, 1.0]])
    chain = pinsker_chain(model, pi, pi_prime, 0.5)
    assert np.isinf(kl_divergences(pi, pi_prime)[1])
    assert (chain.tv_expect, chain.pointwise_pinsker, chain.jensen) == (0.0, 0.0, 0.0)


def test_config_validation():
    with pytest.raises(InvalidParameterError):
        TrustRegionConfig(radius=0.0, lam=0.5)
    with pytest.raises(InvalidParameterError):
        TrustRegionConfig(radius=0.1, lam=1.5)
    with pytest.raises(InvalidParameterError):
        TrustRegionConfig(radius=0.1, lam=0.5, kl_direction="sideways")


def test_single_action_step_is_a_no_op(m1, single_action):
    policy = trust_region_step(m1, single_action(1), TrustRegionConfig(radius=0.01, lam=0.95))
    np.testing.assert_array_equal(policy.probs, [[1.0]])


@pytest.mark.parametrize("direction", ["forward", "reverse"])
def test_flat_advantages_keep_the_policy(direction):
    pi_k = PolicyTable([[0.2, 0.3, 0.5], [0.6, 0.4, 0.0]])
    flat = np.array([[1.0, 1.0, 1.0], [-2.0, -2.0, -2.0]])
    policy, _, mean_kl = exponentiated_update(pi_k, flat, [0.5, 0.5],
                                              TrustRegionConfig(0.01, 0.5, kl_direction=direction))
    np.testing.assert_allclose(policy.probs, pi_k.probs, atol=1e-10)
    assert mean_kl <= 1e-12


def test_huge_radius_is_greedy():
    pi_k = PolicyTable([[0.2, 0.3, 0.5], [0.6, 0.2, 0.2]])
    advantages = np.array([[0.0, 1.0, -1.0], [0.5, -0.5, 2.0]])
    policy, beta, _ = exponentiated_update(pi_k, advantages, [0.5, 0.5],
                                           TrustRegionConfig(radius=1e6, lam=0.5))
    assert beta == pytest.approx(1e-8)
    np.testing.assert_allclose(policy.probs, [[0.0, 1.0, 0.0], [0.0, 0.0, 1.0]], atol=1e-12)


def test_zero_probability_actions_stay_zero():
    pi_k = PolicyTable([[0.5, 0.5, 0.0]])
    policy, _, _ = exponentiated_update(pi_k, [[0.0, 0.0, 10.0]], [1.0],
                                        TrustRegionConfig(radius=0.05, lam=0.5))
    assert policy.probs[0, 2] == 0.0


@pytest.mark.parametrize("direction", ["forward", "reverse"])
def test_update_is_invariant_to_per_state_shifts(direction):
    rng = np.random.default_rng(4)
    pi_k = random_policy(rng_stream(4, 8), 5, 3)
    advantages = rng.normal(size=(5, 3))
    weights = rng.dirichlet(np.ones(5))
    cfg = TrustRegionConfig(radius=0.02, lam=0.5, kl_direction=direction)
    base, _, _ = exponentiated_update(pi_k, advantages, weights, cfg)
    shifted, _, _ = exponentiated_update(pi_k, advantages + rng.normal(size=(5, 1)), weights, cfg)
    np.testing.assert_allclose(shifted.probs, base.probs, atol=1e-10)


@pytest.mark.parametrize("direction", ["forward", "reverse"])
def test_constraint_is_active(direction):
    rng = np.random.default_rng(5)
    pi_k = random_policy(rng_stream(5, 8), 4, 3)
    weights = rng.dirichlet(np.ones(4))
    cfg = TrustRegionConfig(radius=0.03, lam=0.5, kl_direction=direction)
    policy, _, mean_kl = exponentiated_update(pi_k, rng.normal(size=(4, 3)), weights, cfg)
    assert mean_kl <= 0.03
    assert mean_kl >= 0.03 - 1e-9
    if direction == "forward":
        kl = kl_divergences(policy, pi_k)
    else:
        kl = kl_divergences(pi_k, policy)
    assert float(weights @ kl) == pytest.approx(mean_kl, abs=1e-12)


def test_bisection_budget_exhausted():
    pi_k = PolicyTable([[0.5, 0.5]])
    cfg = TrustRegionConfig(radius=0.01, lam=0.5, max_bisection_iters=1)
    with pytest.raises(BisectionError) as info:
        exponentiated_update(pi_k, [[0.0, 1.0]], [1.0], cfg)
    lo, hi = info.value.bracket
    assert 1e-8 <= lo < hi <= 1e8


@pytest.mark.parametrize("seed", range(5))
def test_step_improves_within_the_radius(seed):
    model, pi_k = make_random(seed, 6, 3)
    cfg = TrustRegionConfig(radius=0.01, lam=0.95)
    policy = trust_region_step(model, pi_k, cfg)
    weights = build_lambda_model(model, pi_k, 0.95).d_lambda
    assert float(weights @ kl_divergences(policy, pi_k)) <= 1.05 * 0.01
    assert objective_standard(model, policy)[0] >= objective_standard(model, pi_k)[0] - 1e-9


def test_optimize_single_state(m1, single_action):
    steps = optimize(m1, single_action(1), TrustRegionConfig(radius=0.01, lam=0.5), 5)
    assert len(steps) == 5
    assert all(step.objective == pytest.approx(2.0) for step in steps)


@pytest.mark.parametrize("seed", range(3))
@pytest.mark.parametrize("direction", ["forward", "reverse"])
def test_optimize_is_monotone(seed, direction):
    model, pi_init = make_random(seed, 5, 3)
    cfg = TrustRegionConfig(radius=0.01, lam=0.9, kl_direction=direction)
    steps = optimize(model, pi_init, cfg, 50)
    previous = objective_standard(model, pi_init)[0]
    for step in steps:
        assert step.objective >= previous - 1e-9
        assert step.mean_kl <= 1.05 * 0.01
        previous = step.objective


@pytest.mark.slow
@pytest.mark.parametrize("seed", range(3))
@pytest.mark.parametrize("lam", [0.0, 1.0])
def test_optimize_approaches_the_enumerated_optimum(seed, lam):
    model, _ = make_random(seed, 4, 2, gamma=0.9, reward_low=0.0, reward_high=1.0)
    steps = optimize(model, uniform_policy(4, 2), TrustRegionConfig(radius=0.05, lam=lam), 50)
    best = exhaustive_optimum(model)
    assert steps[-1].objective >= 0.9 * best
    assert steps[-1].objective <= best + 1e-9
