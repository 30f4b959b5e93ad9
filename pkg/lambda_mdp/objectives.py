"""
The objective J(pi) in its standard, lambda-return and general (phi / TD-error) forms.

    J = <rho0, V_pi>
      = 1/(1-gamma) <d^rho0, r_pi>
      = 1/(1-gamma~) <d^lambda, r^(lambda)>
      = E_rho0[phi] + 1/(1-gamma~) sum_t (gamma lambda)^t <d^lambda, delta^phi_{pi,t}>

where delta^phi_{pi,t}(s) = (P_pi^t u)(s) and u = r_pi + gamma P_pi phi - phi is the
one-step expected TD error of phi.
"""
import logging
from dataclasses import asdict, dataclass
from typing import Tuple

import numpy as np

from lambda_mdp.errors import InvalidParameterError
from lambda_mdp.lambda_operators import LambdaModel, build_lambda_model
from lambda_mdp.mdp_core import (InducedDynamics, MdpModel, PolicyTable, check_lambda,
                                 check_vector, induce)
from lambda_mdp.transition_analysis import discounted_distribution, t_step_matrix
from lambda_mdp.value_solver import evaluate_exact

logger = logging.getLogger(__name__)

DEFAULT_HORIZON_TOL = 1e-12


@dataclass(frozen=True)
class PhiFunction:
    values: np.ndarray

    def __post_init__(self):
        values = np.array(self.values, dtype=float)
        if values.ndim != 1:
            raise InvalidParameterError(f"phi must be a vector, got shape {values.shape}")
        if not np.all(np.isfinite(values)):
            raise InvalidParameterError("phi has non-finite entries")
        values.setflags(write=False)
        object.__setattr__(self, "values", values)

    @classmethod
    def zeros(cls, num_states: int) -> "PhiFunction":
        return cls(np.zeros(num_states))


@dataclass(frozen=True)
class ObjectiveReport:
    j_standard_value_form: float
    j_standard_occupancy_form: float
    j_lambda_form: float
    j_general_form: float
    max_pairwise_gap: float

    def values(self) -> Tuple[float, float, float, float]:
        return (self.j_standard_value_form, self.j_standard_occupancy_form,
                self.j_lambda_form, self.j_general_form)

    def to_dict(self) -> dict:
        return asdict(self)


def objective_standard(model: MdpModel, policy: PolicyTable) -> Tuple[float, float]:
    """(rho0^T v, 1/(1-gamma) <d^rho0, r_pi>)."""
    dyn = induce(model, policy)
    v = evaluate_exact(dyn, model.gamma)
    value_form = float(model.rho0 @ v)
    d = discounted_distribution(dyn, model.gamma, model.rho0)
    occupancy_form = float(d.weights @ dyn.r_pi) / (1.0 - model.gamma)
    if abs(value_form - occupancy_form) > 1e-9 * max(1.0, abs(value_form)):
        logger.warning("standard objective forms disagree: %.12g vs %.12g", value_form,
                       occupancy_form)
    return value_form, occupancy_form


def objective_from_start(model: MdpModel, policy: PolicyTable, s0: int) -> Tuple[float, float]:
    """J(pi|s0) as V_pi(s0) and as 1/(1-gamma) <d^{s0}, r_pi>."""
    dyn = induce(model, policy)
    v = evaluate_exact(dyn, model.gamma)
    d = discounted_distribution(dyn, model.gamma, s0)
    return float(v[s0]), float(d.weights @ dyn.r_pi) / (1.0 - model.gamma)


def one_step_td(dyn: InducedDynamics, gamma: float, phi: PhiFunction) -> np.ndarray:
    """u(s) = R_pi(s) + gamma (P_pi phi)(s) - phi(s)."""
    values = check_vector(phi.values, dyn.num_states, "phi")
    return dyn.r_pi + gamma * dyn.p_pi @ values - values


def expected_td_vector(dyn: InducedDynamics, gamma: float, phi: PhiFunction, t: int) -> np.ndarray:
    """delta^phi_{pi,t}(s) for every start state s: the t-step kernel applied to u."""
    return t_step_matrix(dyn, t) @ one_step_td(dyn, gamma, phi)


def expected_td_term(model: MdpModel, policy: PolicyTable, phi: PhiFunction, t: int,
                     s: int) -> float:
    dyn = induce(model, policy)
    return float(expected_td_vector(dyn, model.gamma, phi, t)[s])


def td_series(dyn: InducedDynamics, gamma: float, lam: float, phi: PhiFunction,
              horizon_tol: float = DEFAULT_HORIZON_TOL) -> Tuple[np.ndarray, int]:
    """sum_t (gamma lambda)^t delta^phi_{pi,t}, truncated once the tail is below horizon_tol.

    Returns the summed vector and the number of terms used. The tail after T terms
    is bounded by (gamma lambda)^T max|u| / (1 - gamma lambda).
    """
    check_lambda(lam)
    if horizon_tol <= 0:
        raise InvalidParameterError(f"horizon_tol must be positive, got {horizon_tol!r}")
    u = one_step_td(dyn, gamma, phi)
    decay = gamma * lam
    scale = float(np.abs(u).max())
    total = u.copy()
    if decay == 0.0 or scale == 0.0:
        return total, 1
    term = u
    weight = 1.0
    terms = 1
    while weight * decay * scale / (1.0 - decay) > horizon_tol:
        term = dyn.p_pi @ term
        weight *= decay
        total += weight * term
        terms += 1
    return total, terms


def td_closed_form(lm: LambdaModel, phi: PhiFunction) -> np.ndarray:
    """R^(lambda) + gamma~ P^(lambda) phi - phi; equals td_series pointwise."""
    values = check_vector(phi.values, lm.num_states, "phi")
    return lm.r_lambda + lm.gamma_tilde * lm.p_lambda @ values - values


def lambda_distribution_residual(lm: LambdaModel, rho0) -> float:
    """||rho0 - d^lambda/(1-gamma~) + gamma~/(1-gamma~) P^(lambda)^T d^lambda||_inf."""
    d = lm.d_lambda
    scale = 1.0 - lm.gamma_tilde
    residual = rho0 - d / scale + lm.gamma_tilde / scale * (lm.p_lambda.T @ d)
    return float(np.abs(residual).max())


def objective_lambda(model: MdpModel, policy: PolicyTable, lam: float) -> float:
    lm = build_lambda_model(model, policy, lam)
    return _objective_lambda(lm)


def _objective_lambda(lm: LambdaModel) -> float:
    return float(lm.d_lambda @ lm.r_lambda) / (1.0 - lm.gamma_tilde)


def objective_general(model: MdpModel, policy: PolicyTable, lam: float, phi: PhiFunction,
                      horizon_tol: float = DEFAULT_HORIZON_TOL) -> float:
    lm = build_lambda_model(model, policy, lam)
    return _objective_general(model, policy, lm, phi, horizon_tol)


def _objective_general(model, policy, lm, phi, horizon_tol):
    dyn = induce(model, policy)
    baseline = float(model.rho0 @ check_vector(phi.values, model.num_states, "phi"))
    u = one_step_td(dyn, model.gamma, phi)
    decay = model.gamma * lm.lam
    # whole series below tolerance (phi = V_pi): nothing to add
    if float(np.abs(u).max()) <= horizon_tol * (1.0 - decay):
        return baseline
    series, terms = td_series(dyn, model.gamma, lm.lam, phi, horizon_tol)
    logger.debug("general objective summed %d TD terms", terms)
    return baseline + float(lm.d_lambda @ series) / (1.0 - lm.gamma_tilde)


def equivalence_report(model: MdpModel, policy: PolicyTable, lam: float,
                       phi: PhiFunction, horizon_tol: float = DEFAULT_HORIZON_TOL) -> ObjectiveReport:
    value_form, occupancy_form = objective_standard(model, policy)
    lm = build_lambda_model(model, policy, lam)
    j_lambda = _objective_lambda(lm)
    j_general = _objective_general(model, policy, lm, phi, horizon_tol)
    values = [value_form, occupancy_form, j_lambda, j_general]
    gap = max(values) - min(values)
    return ObjectiveReport(value_form, occupancy_form, j_lambda, j_general, float(gap))
