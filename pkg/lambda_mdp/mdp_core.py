"""
Finite MDP and policy data model.

An MDP is the tuple (S, A, P, r, rho0, gamma) stored as dense arrays:
``transition[s, a, s']`` is P(s'|s,a) and ``reward[s, a, s']`` is r(s'|s,a).
A stationary policy is a row-stochastic table ``probs[s, a]`` = pi(a|s).
"""
import logging
from dataclasses import dataclass
from typing import List, Sequence

import numpy as np

from lambda_mdp.errors import DimensionError, InvalidParameterError

logger = logging.getLogger(__name__)

STOCHASTIC_TOL = 1e-12


def _frozen(values) -> np.ndarray:
    array = np.array(values, dtype=float)
    array.setflags(write=False)
    return array


@dataclass(frozen=True)
class Violation:
    path: str
    message: str

    def __str__(self):
        return f"{self.path}: {self.message}"

    def to_dict(self) -> dict:
        return {"path": self.path, "message": self.message}


@dataclass(frozen=True)
class MdpModel:
    num_states: int
    num_actions: int
    transition: np.ndarray
    reward: np.ndarray
    rho0: np.ndarray
    gamma: float

    def __post_init__(self):
        # arrays are copied and locked; invariants are checked by validate_mdp
        object.__setattr__(self, "num_states", int(self.num_states))
        object.__setattr__(self, "num_actions", int(self.num_actions))
        object.__setattr__(self, "transition", _frozen(self.transition))
        object.__setattr__(self, "reward", _frozen(self.reward))
        object.__setattr__(self, "rho0", _frozen(self.rho0))
        object.__setattr__(self, "gamma", float(self.gamma))

    @classmethod
    def from_arrays(cls, transition, reward, rho0, gamma: float) -> "MdpModel":
        """Build a model taking |S| and |A| from the transition tensor.

        A 2-level ``reward[s][a]`` is broadcast over next states.
        """
        transition = np.asarray(transition, dtype=float)
        if transition.ndim != 3:
            raise DimensionError(f"transition must be 3-dimensional, got shape {transition.shape}")
        reward = np.asarray(reward, dtype=float)
        if reward.ndim == 2:
            reward = np.broadcast_to(reward[:, :, None], transition.shape)
        num_states, num_actions, _ = transition.shape
        return cls(num_states, num_actions, transition, reward, rho0, gamma)

    def with_gamma(self, gamma: float) -> "MdpModel":
        return MdpModel(self.num_states, self.num_actions, self.transition,
                        self.reward, self.rho0, gamma)

    def with_reward(self, reward) -> "MdpModel":
        return MdpModel(self.num_states, self.num_actions, self.transition,
                        reward, self.rho0, self.gamma)

    def to_dict(self) -> dict:
        return {
            "num_states": self.num_states,
            "num_actions": self.num_actions,
            "gamma": self.gamma,
            "rho0": self.rho0.tolist(),
            "transition": self.transition.tolist(),
            "reward": self.reward.tolist(),
        }


@dataclass(frozen=True)
class PolicyTable:
    probs: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "probs", _frozen(self.probs))

    @property
    def num_states(self) -> int:
        return self.probs.shape[0]

    @property
    def num_actions(self) -> int:
        return self.probs.shape[1]

    def to_list(self) -> list:
        return self.probs.tolist()


@dataclass(frozen=True)
class InducedDynamics:
    p_pi: np.ndarray
    r_pi: np.ndarray
    r_sa: np.ndarray

    @property
    def num_states(self) -> int:
        return self.p_pi.shape[0]


def _row_violations(rows: np.ndarray, name: str, row_label) -> List[Violation]:
    violations = []
    for index in np.ndindex(rows.shape[:-1]):
        row = rows[index]
        path = name + "".join(f"[{i}]" for i in index)
        if not np.all(np.isfinite(row)):
            violations.append(Violation(path, "contains non-finite entries"))
            continue
        bad = np.flatnonzero((row < 0.0) | (row > 1.0))
        for k in bad:
            violations.append(Violation(f"{path}[{k}]", f"entry {float(row[k])} outside [0,1]"))
        total = float(row.sum())
        if abs(total - 1.0) > STOCHASTIC_TOL:
            violations.append(Violation(path, f"row {row_label(index)} sums to {total}"))
    return violations


def validate_mdp(model: MdpModel) -> List[Violation]:
    """Every invariant violation of ``model``; an empty list means valid."""
    violations = []
    S, A = model.num_states, model.num_actions
    if S < 1:
        violations.append(Violation("num_states", f"must be positive, got {S}"))
    if A < 1:
        violations.append(Violation("num_actions", f"must be positive, got {A}"))
    if not (0.0 < model.gamma < 1.0):
        violations.append(Violation("gamma", f"gamma out of (0,1): {model.gamma!r}"))

    expected = (S, A, S)
    shapes_ok = True
    if model.transition.shape != expected:
        violations.append(Violation("transition", f"shape {model.transition.shape} does not match "
                                                  f"(num_states, num_actions, num_states) = {expected}"))
        shapes_ok = False
    if model.reward.shape != expected:
        violations.append(Violation("reward", f"shape {model.reward.shape} does not match {expected}"))
        shapes_ok = False
    if model.rho0.shape != (S,):
        violations.append(Violation("rho0", f"shape {model.rho0.shape} does not match ({S},)"))
        shapes_ok = False

    if model.transition.ndim == 3:
        violations += _row_violations(model.transition, "transition",
                                      lambda idx: "(" + ",".join(str(i) for i in idx) + ")")
    if model.rho0.ndim == 1:
        violations += _row_violations(model.rho0, "rho0", lambda idx: "rho0")
    bad_rewards = np.argwhere(~np.isfinite(model.reward))
    for index in bad_rewards[:20]:
        path = "reward" + "".join(f"[{i}]" for i in index)
        violations.append(Violation(path, "reward is not finite"))
    if len(bad_rewards) > 20:
        violations.append(Violation("reward", f"{len(bad_rewards) - 20} more non-finite rewards"))

    if violations:
        logger.debug("model has %d violations (shapes ok: %s)", len(violations), shapes_ok)
    return violations


def validate_policy(policy: PolicyTable, num_states: int, num_actions: int) -> List[Violation]:
    if policy.probs.shape != (num_states, num_actions):
        return [Violation("probs", f"shape {policy.probs.shape} does not match "
                                   f"({num_states}, {num_actions})")]
    return _row_violations(policy.probs, "probs", lambda idx: f"({idx[0]})")


def check_dimensions(model: MdpModel, policy: PolicyTable):
    if policy.probs.shape != (model.num_states, model.num_actions):
        raise DimensionError(f"policy shape {policy.probs.shape} does not match model "
                             f"({model.num_states}, {model.num_actions})")


def check_gamma(gamma: float):
    if not (0.0 < gamma < 1.0):
        raise InvalidParameterError(f"gamma must lie in (0,1), got {gamma!r}")


def check_lambda(lam: float):
    if not (0.0 <= lam <= 1.0):
        raise InvalidParameterError(f"lambda must lie in [0,1], got {lam!r}")


def check_vector(values, num_states: int, name: str = "vector") -> np.ndarray:
    values = np.asarray(values, dtype=float)
    if values.shape != (num_states,):
        raise DimensionError(f"{name} has shape {values.shape}, expected ({num_states},)")
    return values


def induce(model: MdpModel, policy: PolicyTable) -> InducedDynamics:
    """Policy-induced one-step kernel and expected rewards.

    Parameters
    ----------
    model : MdpModel
    policy : PolicyTable

    Returns
    -------
    InducedDynamics
        ``p_pi[s, s'] = sum_a pi(a|s) P(s'|s,a)``,
        ``r_sa[s, a] = sum_s' P(s'|s,a) r(s'|s,a)`` and
        ``r_pi[s] = sum_a pi(a|s) r_sa[s, a]``.
    """
    check_dimensions(model, policy)
    r_sa = np.einsum("ijk,ijk->ij", model.transition, model.reward)
    p_pi = np.einsum("ij,ijk->ik", policy.probs, model.transition)
    r_pi = np.einsum("ij,ij->i", policy.probs, r_sa)
    return InducedDynamics(_frozen(p_pi), _frozen(r_pi), _frozen(r_sa))


def normalize_model(model: MdpModel) -> MdpModel:
    """Rescale transition rows and rho0 to sum to one. Only called on request."""
    transition = np.clip(model.transition, 0.0, None)
    totals = transition.sum(axis=2, keepdims=True)
    if np.any(totals <= 0.0):
        raise InvalidParameterError("cannot normalize a transition row with zero mass")
    rho0 = np.clip(model.rho0, 0.0, None)
    if rho0.sum() <= 0.0:
        raise InvalidParameterError("cannot normalize rho0 with zero mass")
    logger.info("normalizing transition rows (max deviation %.3e)", float(np.abs(totals - 1.0).max()))
    return MdpModel(model.num_states, model.num_actions, transition / totals,
                    model.reward, rho0 / rho0.sum(), model.gamma)


def normalize_policy(policy: PolicyTable) -> PolicyTable:
    probs = np.clip(policy.probs, 0.0, None)
    totals = probs.sum(axis=1, keepdims=True)
    if np.any(totals <= 0.0):
        raise InvalidParameterError("cannot normalize a policy row with zero mass")
    return PolicyTable(probs / totals)


def uniform_policy(num_states: int, num_actions: int) -> PolicyTable:
    return PolicyTable(np.full((num_states, num_actions), 1.0 / num_actions))


def deterministic_policy(actions: Sequence[int], num_actions: int) -> PolicyTable:
    probs = np.zeros((len(actions), num_actions))
    probs[np.arange(len(actions)), list(actions)] = 1.0
    return PolicyTable(probs)


def mix_policies(first: PolicyTable, second: PolicyTable, alpha: float) -> PolicyTable:
    if first.probs.shape != second.probs.shape:
        raise DimensionError("policies to mix have different shapes")
    if not (0.0 <= alpha <= 1.0):
        raise InvalidParameterError(f"mixing weight must lie in [0,1], got {alpha!r}")
    return PolicyTable(alpha * first.probs + (1.0 - alpha) * second.probs)
