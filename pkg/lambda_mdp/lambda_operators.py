"""
lambda-Bellman machinery.

For a policy pi and lambda in [0, 1] the lambda-operator is
``B^lambda v = r^(lambda) + gamma~ P^(lambda) v`` with

    gamma~     = gamma (1 - lambda) / (1 - gamma lambda)
    P^(lambda) = (1 - gamma lambda) (I - gamma lambda P_pi)^{-1} P_pi
    r^(lambda) = (I - gamma lambda P_pi)^{-1} r_pi

and the lambda-discounted state distribution is
``d^lambda = (1 - gamma~) (I - gamma~ P^(lambda)^T)^{-1} rho0``.
All series are evaluated through one LU factorization of I - gamma lambda P_pi.
"""
import logging
from dataclasses import dataclass
from typing import Union

import numpy as np
from scipy import linalg

from lambda_mdp.errors import NumericalError
from lambda_mdp.mdp_core import (MdpModel, PolicyTable, check_gamma, check_lambda,
                                 check_vector, induce)
from lambda_mdp.transition_analysis import (INITIAL_DISTRIBUTION, SINGLE_START,
                                            DiscountedDistribution, discounted_weights,
                                            start_vector)

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class LambdaModel:
    lam: float
    gamma: float
    gamma_tilde: float
    p_lambda: np.ndarray
    r_lambda: np.ndarray
    d_lambda: np.ndarray

    @property
    def num_states(self) -> int:
        return self.p_lambda.shape[0]


def effective_discount(gamma: float, lam: float) -> float:
    check_gamma(gamma)
    check_lambda(lam)
    return gamma * (1.0 - lam) / (1.0 - gamma * lam)


def build_lambda_model(model: MdpModel, policy: PolicyTable, lam: float) -> LambdaModel:
    gamma = model.gamma
    gamma_tilde = effective_discount(gamma, lam)
    dyn = induce(model, policy)
    decay = gamma * lam
    n = model.num_states
    try:
        lu = linalg.lu_factor(np.eye(n) - decay * dyn.p_pi)
        p_lambda = (1.0 - decay) * linalg.lu_solve(lu, dyn.p_pi)
        r_lambda = linalg.lu_solve(lu, dyn.r_pi)
    except (linalg.LinAlgError, ValueError) as e:
        raise NumericalError(f"lambda operator solve failed: {e}") from e
    d_lambda = discounted_weights(p_lambda, gamma_tilde, model.rho0)
    row_error = float(np.abs(p_lambda.sum(axis=1) - 1.0).max())
    if row_error > 1e-10:
        logger.warning("P^(lambda) rows deviate from 1 by %.3e (lambda=%g)", row_error, lam)
    return LambdaModel(float(lam), gamma, gamma_tilde, p_lambda, r_lambda, d_lambda)


def lambda_bellman_apply(lm: LambdaModel, v) -> np.ndarray:
    v = check_vector(v, lm.num_states, "v")
    return lm.r_lambda + lm.gamma_tilde * lm.p_lambda @ v


def lambda_distribution(lm: LambdaModel, start: Union[int, np.ndarray]) -> DiscountedDistribution:
    """d^{s0,lambda} for a start state, or its mixture for a start distribution."""
    vector = start_vector(lm.num_states, start)
    weights = discounted_weights(lm.p_lambda, lm.gamma_tilde, vector)
    if np.ndim(start) == 0:
        return DiscountedDistribution(weights, SINGLE_START, int(start))
    return DiscountedDistribution(weights, INITIAL_DISTRIBUTION)
