"""
Monte Carlo rollouts of the pi-induced chain s0 ~ rho0, a_t ~ pi(.|s_t),
s_{t+1} ~ P(.|s_t, a_t), r_{t+1} = r(s_{t+1}|s_t, a_t), and the per-trajectory
TD errors, GAE and lambda-returns computed on them.
"""
import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import List, Sequence, Tuple

import numpy as np

from lambda_mdp.errors import InvalidParameterError
from lambda_mdp.instances import SAMPLE_KEY, rng_stream
from lambda_mdp.mdp_core import MdpModel, PolicyTable, check_dimensions, check_lambda
from lambda_mdp.objectives import PhiFunction

logger = logging.getLogger(__name__)

CHUNK_SIZE = 256


@dataclass(frozen=True)
class Trajectory:
    states: np.ndarray
    actions: np.ndarray
    rewards: np.ndarray
    returns_to_go: np.ndarray

    @classmethod
    def from_rollout(cls, states, actions, rewards, gamma: float) -> "Trajectory":
        states = np.asarray(states, dtype=int)
        actions = np.asarray(actions, dtype=int)
        rewards = np.asarray(rewards, dtype=float)
        if not (len(states) == len(actions) + 1 == len(rewards) + 1):
            raise InvalidParameterError(
                f"inconsistent trajectory lengths: {len(states)} states, {len(actions)} actions, "
                f"{len(rewards)} rewards")
        return cls(states, actions, rewards, discounted_returns_to_go(rewards, gamma))

    @property
    def horizon(self) -> int:
        return len(self.rewards)

    def discounted_return(self) -> float:
        return float(self.returns_to_go[0]) if self.horizon else 0.0

    def to_dict(self) -> dict:
        return {"states": self.states.tolist(), "actions": self.actions.tolist(),
                "rewards": self.rewards.tolist()}


def discounted_returns_to_go(rewards: np.ndarray, gamma: float) -> np.ndarray:
    # G_t = r_{t+1} + gamma G_{t+1}, G_{T-1} = r_T
    returns = np.zeros(len(rewards))
    running = 0.0
    for t in range(len(rewards) - 1, -1, -1):
        running = rewards[t] + gamma * running
        returns[t] = running
    return returns


def horizon_for_tolerance(gamma: float, r_max: float, tol: float) -> int:
    """Smallest T with gamma^T r_max / (1 - gamma) <= tol."""
    if tol <= 0:
        raise InvalidParameterError(f"tol must be positive, got {tol!r}")
    if r_max <= 0:
        return 1
    return max(1, math.ceil(math.log(tol * (1.0 - gamma) / r_max) / math.log(gamma)))


def truncation_bound(gamma: float, horizon: int, r_max: float) -> float:
    return gamma ** horizon * r_max / (1.0 - gamma)


def _inverse_cdf(cdf_rows: np.ndarray, u: np.ndarray) -> np.ndarray:
    # zero-width (zero-probability) cells are never selected
    index = (cdf_rows <= u[:, None]).sum(axis=1)
    return np.minimum(index, cdf_rows.shape[1] - 1)


def _sample_chunk(model: MdpModel, policy: PolicyTable, horizon: int, seed: int,
                  indices: Sequence[int]) -> List[Trajectory]:
    # each trajectory reads only its own stream: one uniform for s0, two per step
    uniforms = np.stack([rng_stream(seed, SAMPLE_KEY, i).random(1 + 2 * horizon) for i in indices])
    rho_cdf = np.cumsum(model.rho0)
    pi_cdf = np.cumsum(policy.probs, axis=1)
    p_cdf = np.cumsum(model.transition, axis=2)
    batch = len(indices)
    states = np.zeros((batch, horizon + 1), dtype=int)
    actions = np.zeros((batch, horizon), dtype=int)
    rewards = np.zeros((batch, horizon))
    states[:, 0] = _inverse_cdf(np.broadcast_to(rho_cdf, (batch, len(rho_cdf))), uniforms[:, 0])
    for t in range(horizon):
        s = states[:, t]
        a = _inverse_cdf(pi_cdf[s], uniforms[:, 1 + 2 * t])
        s_next = _inverse_cdf(p_cdf[s, a], uniforms[:, 2 + 2 * t])
        actions[:, t] = a
        states[:, t + 1] = s_next
        rewards[:, t] = model.reward[s, a, s_next]
    return [Trajectory.from_rollout(states[k], actions[k], rewards[k], model.gamma)
            for k in range(batch)]


def sample_trajectories(model: MdpModel, policy: PolicyTable, horizon: int, count: int,
                        seed: int, workers: int = 1) -> List[Trajectory]:
    """``count`` rollouts of length ``horizon``; identical for identical seeds.

    Trajectory i draws from the stream keyed by (seed, i), so the output does not
    depend on ``workers``.
    """
    check_dimensions(model, policy)
    if horizon < 1 or count < 1:
        raise InvalidParameterError(f"horizon and count must be >= 1, got {horizon}, {count}")
    chunks = [range(start, min(start + CHUNK_SIZE, count)) for start in range(0, count, CHUNK_SIZE)]
    if workers <= 1 or len(chunks) == 1:
        parts = [_sample_chunk(model, policy, horizon, seed, chunk) for chunk in chunks]
    else:
        with ThreadPoolExecutor(max_workers=workers) as executor:
            parts = list(executor.map(lambda chunk: _sample_chunk(model, policy, horizon, seed, chunk),
                                      chunks))
    logger.info("sampled %d trajectories of horizon %d", count, horizon)
    return [trajectory for part in parts for trajectory in part]


def monte_carlo_objective(trajectories: Sequence[Trajectory], gamma: float) -> Tuple[float, float]:
    """Mean discounted return and its standard error."""
    if not trajectories:
        raise InvalidParameterError("at least one trajectory is required")
    longest = max(trajectory.horizon for trajectory in trajectories)
    discounts = gamma ** np.arange(longest)
    returns = np.array([trajectory.rewards @ discounts[:trajectory.horizon]
                        for trajectory in trajectories])
    estimate = float(np.mean(returns))
    if len(returns) < 2:
        return estimate, 0.0
    return estimate, float(np.std(returns, ddof=1) / math.sqrt(len(returns)))


def td_errors(traj: Trajectory, phi: PhiFunction, gamma: float) -> np.ndarray:
    values = phi.values
    if traj.states.max(initial=0) >= len(values):
        raise InvalidParameterError("phi is shorter than the trajectory's state space")
    return traj.rewards + gamma * values[traj.states[1:]] - values[traj.states[:-1]]


def gae_from_trajectory(traj: Trajectory, v_estimate, gamma: float, lam: float) -> np.ndarray:
    """gae[t] = delta_t + gamma lambda gae[t+1], no bootstrap beyond the last step."""
    check_lambda(lam)
    deltas = td_errors(traj, PhiFunction(v_estimate), gamma)
    advantages = np.zeros_like(deltas)
    running = 0.0
    for t in range(len(deltas) - 1, -1, -1):
        running = deltas[t] + gamma * lam * running
        advantages[t] = running
    return advantages


def lambda_returns(traj: Trajectory, v_estimate, gamma: float, lam: float) -> np.ndarray:
    """Forward-view lambda-returns G^lambda_t, with G^lambda_T = V(s_T)."""
    check_lambda(lam)
    values = np.asarray(v_estimate, dtype=float)
    returns = np.zeros(traj.horizon)
    running = values[traj.states[-1]]
    for t in range(traj.horizon - 1, -1, -1):
        next_value = values[traj.states[t + 1]]
        running = traj.rewards[t] + gamma * ((1.0 - lam) * next_value + lam * running)
        returns[t] = running
    return returns


def empirical_occupancy(trajectories: Sequence[Trajectory], gamma: float,
                        num_states: int) -> np.ndarray:
    """Visited states weighted by (1-gamma) gamma^t, normalized to a distribution."""
    totals = np.zeros(num_states)
    for trajectory in trajectories:
        steps = np.arange(trajectory.horizon)
        totals += np.bincount(trajectory.states[:-1], weights=(1.0 - gamma) * gamma ** steps,
                              minlength=num_states)
    return totals / totals.sum()
