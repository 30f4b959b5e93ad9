"""Multi-step transition matrices and normalized discounted state distributions."""
import logging
import math
from dataclasses import dataclass
from typing import Optional, Union

import numpy as np
from scipy import linalg

from lambda_mdp.errors import DimensionError, InvalidParameterError, NumericalError
from lambda_mdp.mdp_core import InducedDynamics, check_gamma

logger = logging.getLogger(__name__)

SINGLE_START = "single-start"
INITIAL_DISTRIBUTION = "initial-distribution"

# solves may return tiny negatives; anything below this is a real failure
CLAMP_TOL = 1e-12


@dataclass(frozen=True)
class DiscountedDistribution:
    weights: np.ndarray
    source: str
    start: Optional[int] = None

    def total(self) -> float:
        return float(self.weights.sum())


def t_step_matrix(dyn: InducedDynamics, t: int) -> np.ndarray:
    """P_pi^t; t = 0 gives the identity (the chain starts where it is)."""
    if int(t) != t or t < 0:
        raise InvalidParameterError(f"t must be a non-negative integer, got {t!r}")
    return np.linalg.matrix_power(dyn.p_pi, int(t))


def start_vector(num_states: int, start: Union[int, np.ndarray]) -> np.ndarray:
    if np.ndim(start) == 0:
        s0 = int(start)
        if not 0 <= s0 < num_states:
            raise InvalidParameterError(f"start state {s0} outside 0..{num_states - 1}")
        vector = np.zeros(num_states)
        vector[s0] = 1.0
        return vector
    vector = np.asarray(start, dtype=float)
    if vector.shape != (num_states,):
        raise DimensionError(f"start distribution has shape {vector.shape}, expected ({num_states},)")
    return vector


def discounted_weights(kernel: np.ndarray, discount: float, start: np.ndarray) -> np.ndarray:
    """(1 - discount) (I - discount K^T)^{-1} start, clamped to the simplex.

    Shared by the ordinary (kernel P_pi, discount gamma) and the lambda
    (kernel P^(lambda), discount gamma~) distributions.
    """
    n = kernel.shape[0]
    system = np.eye(n) - discount * kernel.T
    try:
        lu = linalg.lu_factor(system, check_finite=True)
        weights = (1.0 - discount) * linalg.lu_solve(lu, start)
    except (linalg.LinAlgError, ValueError) as e:
        raise NumericalError(f"discounted distribution solve failed: {e}") from e
    if not np.all(np.isfinite(weights)):
        raise NumericalError("discounted distribution solve produced non-finite weights")
    lowest = weights.min()
    if lowest < -CLAMP_TOL:
        raise NumericalError(f"discounted distribution has negative weight {lowest:.3e}")
    if lowest < 0.0:
        weights = np.clip(weights, 0.0, None)
        weights = weights / weights.sum()
    return weights


def discounted_distribution(dyn: InducedDynamics, gamma: float,
                            start: Union[int, np.ndarray]) -> DiscountedDistribution:
    """Normalized discounted state distribution d_pi^{s0} or d_pi^{rho0}.

    Parameters
    ----------
    dyn : InducedDynamics
    gamma : float
        Discount in (0, 1).
    start : int or array
        A start state index s0 or an initial distribution rho0.

    Returns
    -------
    DiscountedDistribution
    """
    check_gamma(gamma)
    vector = start_vector(dyn.num_states, start)
    weights = discounted_weights(dyn.p_pi, gamma, vector)
    if np.ndim(start) == 0:
        return DiscountedDistribution(weights, SINGLE_START, int(start))
    return DiscountedDistribution(weights, INITIAL_DISTRIBUTION)


def truncation_horizon(discount: float, tol: float) -> int:
    """Smallest T with discount^T / (1 - discount) below ``tol``."""
    if tol <= 0:
        raise InvalidParameterError(f"tolerance must be positive, got {tol!r}")
    if discount <= 0.0:
        return 1
    if discount >= 1.0:
        raise InvalidParameterError(f"discount must be below 1 for truncation, got {discount!r}")
    return max(1, math.ceil(math.log(tol * (1.0 - discount)) / math.log(discount)))
