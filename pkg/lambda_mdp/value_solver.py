"""Policy evaluation through the Bellman equation, exact and iterative."""
import logging
from dataclasses import dataclass, field
from typing import List, Optional

import numpy as np
from scipy import linalg

from lambda_mdp.errors import ConvergenceError, InvalidParameterError, NumericalError
from lambda_mdp.mdp_core import (InducedDynamics, MdpModel, PolicyTable, check_dimensions,
                                 check_gamma, check_vector, induce)

logger = logging.getLogger(__name__)

BELLMAN_RESIDUAL_TOL = 1e-10


@dataclass(frozen=True)
class ValueBundle:
    v: np.ndarray
    q: np.ndarray
    adv: np.ndarray


@dataclass(frozen=True)
class IterativeResult:
    v: np.ndarray
    iterations: int
    residuals: List[float] = field(default_factory=list)


def bellman_apply(dyn: InducedDynamics, gamma: float, v) -> np.ndarray:
    """B_pi v = r_pi + gamma P_pi v."""
    v = check_vector(v, dyn.num_states, "v")
    return dyn.r_pi + gamma * dyn.p_pi @ v


def evaluate_exact(dyn: InducedDynamics, gamma: float) -> np.ndarray:
    """Solve (I - gamma P_pi) v = r_pi."""
    check_gamma(gamma)
    n = dyn.num_states
    try:
        lu = linalg.lu_factor(np.eye(n) - gamma * dyn.p_pi)
        v = linalg.lu_solve(lu, dyn.r_pi)
    except (linalg.LinAlgError, ValueError) as e:
        raise NumericalError(f"policy evaluation solve failed: {e}") from e
    if not np.all(np.isfinite(v)):
        raise NumericalError("policy evaluation produced non-finite values")
    residual = np.abs(v - bellman_apply(dyn, gamma, v)).max()
    scale = max(1.0, float(np.abs(v).max()))
    if residual > BELLMAN_RESIDUAL_TOL * scale:
        logger.warning("Bellman residual %.3e above %.1e after exact solve", residual,
                       BELLMAN_RESIDUAL_TOL)
    return v


def evaluate_iterative(dyn: InducedDynamics, gamma: float, tol: float = 1e-10,
                       max_iters: int = 100000, v0: Optional[np.ndarray] = None) -> IterativeResult:
    """Repeated application of B_pi from the zero vector.

    Stops at the first iterate with ||v_{k+1} - v_k||_inf <= tol (1 - gamma) / gamma,
    which by the gamma-contraction bounds the distance to V_pi by ``tol``.
    """
    check_gamma(gamma)
    if tol <= 0:
        raise InvalidParameterError(f"tol must be positive, got {tol!r}")
    threshold = tol * (1.0 - gamma) / gamma
    v = np.zeros(dyn.num_states) if v0 is None else check_vector(v0, dyn.num_states, "v0").copy()
    residuals = []
    for k in range(1, max_iters + 1):
        v_next = bellman_apply(dyn, gamma, v)
        step = float(np.abs(v_next - v).max())
        residuals.append(step)
        v = v_next
        if step <= threshold:
            logger.debug("iterative evaluation converged in %d iterations", k)
            return IterativeResult(v, k, residuals)
    raise ConvergenceError("iterative policy evaluation did not converge", last_iterate=v,
                           residual=residuals[-1] if residuals else float("nan"),
                           iterations=max_iters)


def q_and_advantage(model: MdpModel, policy: PolicyTable, v) -> ValueBundle:
    """Q and A for a caller-supplied value vector (exact or perturbed)."""
    check_dimensions(model, policy)
    v = check_vector(v, model.num_states, "v")
    r_sa = np.einsum("ijk,ijk->ij", model.transition, model.reward)
    q = r_sa + model.gamma * np.einsum("ijk,k->ij", model.transition, v)
    return ValueBundle(v.copy(), q, q - v[:, None])


def evaluate(model: MdpModel, policy: PolicyTable) -> ValueBundle:
    dyn = induce(model, policy)
    return q_and_advantage(model, policy, evaluate_exact(dyn, model.gamma))
