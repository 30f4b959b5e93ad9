"""
Seeded random instances.

Every stream is a numpy Generator over Philox, a counter-based bit generator,
keyed by ``SeedSequence([seed, *keys])``. A stream depends only on its key, so
results do not change with the number of workers or their scheduling.
"""
from dataclasses import dataclass
from typing import Optional

import numpy as np

from lambda_mdp.mdp_core import MdpModel, PolicyTable, induce, mix_policies
from lambda_mdp.objectives import PhiFunction
from lambda_mdp.value_solver import evaluate_exact

GAMMAS = (0.5, 0.9, 0.99)
LAMBDAS = (0.0, 0.3, 0.7, 0.95, 1.0)
PHI_KINDS = ("zero", "value", "value+noise", "random")

# keys separating the uses of one user seed
VERIFY_KEY = 1
BOUND_KEY = 2
SAMPLE_KEY = 3


def rng_stream(seed: int, *keys: int) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(np.random.SeedSequence([int(seed), *map(int, keys)])))


def random_mdp(rng: np.random.Generator, num_states: int, num_actions: int,
               gamma: Optional[float] = None, reward_low: float = -1.0,
               reward_high: float = 1.0) -> MdpModel:
    """Flat-Dirichlet transition rows and rho0, uniform rewards, gamma from GAMMAS."""
    transition = rng.dirichlet(np.ones(num_states), size=(num_states, num_actions))
    reward = rng.uniform(reward_low, reward_high, size=(num_states, num_actions, num_states))
    rho0 = rng.dirichlet(np.ones(num_states))
    if gamma is None:
        gamma = float(rng.choice(GAMMAS))
    return MdpModel(num_states, num_actions, transition, reward, rho0, gamma)


def random_policy(rng: np.random.Generator, num_states: int, num_actions: int) -> PolicyTable:
    return PolicyTable(rng.dirichlet(np.ones(num_actions), size=num_states))


@dataclass(frozen=True)
class VerificationInstance:
    index: int
    model: MdpModel
    policy: PolicyTable
    lam: float
    phi_kind: str
    phi: PhiFunction


def make_phi(kind: str, model: MdpModel, policy: PolicyTable,
             rng: np.random.Generator) -> PhiFunction:
    n = model.num_states
    if kind == "zero":
        return PhiFunction.zeros(n)
    if kind == "random":
        return PhiFunction(rng.uniform(-5.0, 5.0, size=n))
    v = evaluate_exact(induce(model, policy), model.gamma)
    if kind == "value":
        return PhiFunction(v)
    if kind == "value+noise":
        return PhiFunction(v + rng.normal(0.0, 0.1, size=n))
    raise ValueError(f"unknown phi kind {kind!r}")


def verification_instance(seed: int, index: int, max_states: int = 20,
                          max_actions: int = 5) -> VerificationInstance:
    rng = rng_stream(seed, VERIFY_KEY, index)
    num_states = int(rng.integers(2, max_states + 1))
    num_actions = int(rng.integers(2, max_actions + 1))
    model = random_mdp(rng, num_states, num_actions)
    policy = random_policy(rng, num_states, num_actions)
    lam = float(rng.choice(LAMBDAS))
    kind = PHI_KINDS[int(rng.integers(len(PHI_KINDS)))]
    return VerificationInstance(index, model, policy, lam, kind, make_phi(kind, model, policy, rng))


@dataclass(frozen=True)
class BoundInstance:
    index: int
    model: MdpModel
    pi: PolicyTable
    pi_prime: PolicyTable
    lam: float
    mix: float


def bound_instance(seed: int, index: int, max_states: int = 10,
                   max_actions: int = 4) -> BoundInstance:
    """A policy pair (pi, pi') where pi moves a random fraction of the way from pi' to a fresh policy."""
    rng = rng_stream(seed, BOUND_KEY, index)
    num_states = int(rng.integers(2, max_states + 1))
    num_actions = int(rng.integers(2, max_actions + 1))
    model = random_mdp(rng, num_states, num_actions)
    pi_prime = random_policy(rng, num_states, num_actions)
    other = random_policy(rng, num_states, num_actions)
    mix = float(rng.uniform())
    pi = mix_policies(other, pi_prime, mix)
    lam = float(rng.choice(LAMBDAS))
    return BoundInstance(index, model, pi, pi_prime, lam, mix)
