"""
Exact tabular GAE, policy divergences, the surrogate lower bound on J(pi) - J(pi')
and the KL trust-region improvement step built on it.

The surrogate bound reads

    J(pi) - J(pi') >= 1/(1-gamma~) E_{s~d^lambda_{pi'}, a~pi}[ A^GAE(s,a) - c D_TV(pi,pi')[s] ]

with c = 2 gamma~ (gamma lambda (|S|-1) + 1) eps_V / ((1-gamma~)(1-gamma lambda)).
"""
import logging
import math
from dataclasses import asdict, dataclass
from typing import List, Optional, Tuple

import numpy as np
from scipy import linalg, optimize as sp_optimize, special

from lambda_mdp.errors import (BisectionError, DimensionError, InvalidParameterError,
                               NumericalError)
from lambda_mdp.lambda_operators import build_lambda_model
from lambda_mdp.mdp_core import (MdpModel, PolicyTable, check_dimensions, check_gamma,
                                 check_lambda, check_vector, induce)
from lambda_mdp.objectives import objective_standard
from lambda_mdp.value_solver import evaluate_exact

logger = logging.getLogger(__name__)

FORWARD = "forward"
REVERSE = "reverse"
KL_DIRECTIONS = (FORWARD, REVERSE)

BETA_LOW = 1e-8
BETA_HIGH = 1e8


@dataclass(frozen=True)
class SurrogateReport:
    gae_term: float
    penalty_term: float
    lower_bound: float
    true_gap: float
    epsilon_v: float
    tv_expect: float
    kl_penalty_term: float
    kl_lower_bound: float

    @property
    def slack(self) -> float:
        """true_gap - lower_bound; negative means the bound is violated."""
        return self.true_gap - self.lower_bound

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass(frozen=True)
class PinskerChain:
    tv_expect: float
    pointwise_pinsker: float
    jensen: float

    def holds(self, tol: float = 1e-12) -> bool:
        if math.isinf(self.pointwise_pinsker):
            return True
        return (self.tv_expect <= self.pointwise_pinsker + tol
                and self.pointwise_pinsker <= self.jensen + tol)

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass(frozen=True)
class TrustRegionConfig:
    radius: float
    lam: float
    max_bisection_iters: int = 200
    bisection_tol: float = 1e-10
    kl_direction: str = FORWARD

    def __post_init__(self):
        if not self.radius > 0:
            raise InvalidParameterError(f"trust-region radius must be positive, got {self.radius!r}")
        check_lambda(self.lam)
        if self.max_bisection_iters < 1:
            raise InvalidParameterError("max_bisection_iters must be at least 1")
        if not self.bisection_tol > 0:
            raise InvalidParameterError(f"bisection_tol must be positive, got {self.bisection_tol!r}")
        if self.kl_direction not in KL_DIRECTIONS:
            raise InvalidParameterError(f"kl_direction must be one of {KL_DIRECTIONS}, "
                                        f"got {self.kl_direction!r}")


@dataclass(frozen=True)
class OptimizationStep:
    policy: PolicyTable
    objective: float
    mean_kl: float

    def to_dict(self) -> dict:
        return {"policy": self.policy.to_list(), "objective": self.objective,
                "mean_kl": self.mean_kl}


def exact_gae(model: MdpModel, old_policy: PolicyTable, v_estimate, gamma: Optional[float] = None,
              lam: float = 1.0) -> np.ndarray:
    """Exact expectation of the GAE(gamma, lambda) estimator for every (s, a).

    Parameters
    ----------
    model : MdpModel
    old_policy : PolicyTable
        Policy followed after the first action.
    v_estimate : array of shape (num_states,)
        Baseline used inside the TD errors.
    gamma : float, optional
        Defaults to ``model.gamma``.
    lam : float
        GAE lambda in [0, 1].

    Returns
    -------
    np.ndarray of shape (num_states, num_actions)
        ``delta_1(s,a) + gamma lambda sum_s' P(s'|s,a) ((I - gamma lambda P_pi)^{-1} u)(s')``
        where ``delta_1`` is the one-step expected TD error of (s, a) and ``u`` the
        expected TD error of ``old_policy``.
    """
    gamma = model.gamma if gamma is None else float(gamma)
    check_gamma(gamma)
    check_lambda(lam)
    dyn = induce(model, old_policy)
    v = check_vector(v_estimate, model.num_states, "v_estimate")
    next_value = np.einsum("ijk,k->ij", model.transition, v)
    first = dyn.r_sa + gamma * next_value - v[:, None]
    decay = gamma * lam
    if decay == 0.0:
        return first
    u = dyn.r_pi + gamma * dyn.p_pi @ v - v
    try:
        tail = linalg.solve(np.eye(model.num_states) - decay * dyn.p_pi, u)
    except (linalg.LinAlgError, ValueError) as e:
        raise NumericalError(f"GAE solve failed: {e}") from e
    return first + decay * np.einsum("ijk,k->ij", model.transition, tail)


def _check_pair(p: PolicyTable, q: PolicyTable):
    if p.probs.shape != q.probs.shape:
        raise DimensionError(f"policy shapes differ: {p.probs.shape} vs {q.probs.shape}")


def tv_distances(p: PolicyTable, q: PolicyTable) -> np.ndarray:
    _check_pair(p, q)
    return 0.5 * np.abs(p.probs - q.probs).sum(axis=1)


def tv_distance(p: PolicyTable, q: PolicyTable, s: int) -> float:
    return float(tv_distances(p, q)[s])


def kl_divergences(p: PolicyTable, q: PolicyTable) -> np.ndarray:
    """KL(p(.|s) || q(.|s)) per state; +inf where p has mass outside q's support."""
    _check_pair(p, q)
    return special.rel_entr(p.probs, q.probs).sum(axis=1)


def kl_divergence(p: PolicyTable, q: PolicyTable, s: int) -> float:
    return float(kl_divergences(p, q)[s])


def epsilon_v(model: MdpModel, pi: PolicyTable, pi_prime: PolicyTable) -> float:
    """max_s E_{a~pi, s'~P}[ |r(s'|s,a) + gamma V_{pi'}(s') - V_{pi'}(s)| ]."""
    check_dimensions(model, pi)
    v_prime = evaluate_exact(induce(model, pi_prime), model.gamma)
    deltas = np.abs(model.reward + model.gamma * v_prime[None, None, :] - v_prime[:, None, None])
    per_state = np.einsum("ij,ijk,ijk->i", pi.probs, model.transition, deltas)
    return float(per_state.max())


def _weighted_mean(weights: np.ndarray, values: np.ndarray) -> float:
    # states outside the support of the weights never contribute, even with infinite values
    mask = weights > 0.0
    selected = values[mask]
    if np.any(np.isinf(selected)):
        return math.inf
    return float(weights[mask] @ selected)


def pinsker_chain(model: MdpModel, pi: PolicyTable, pi_prime: PolicyTable,
                  lam: float) -> PinskerChain:
    """E[D_TV] <= E[sqrt(KL/2)] <= sqrt(E[KL]/2) under s ~ d^lambda_{pi'}."""
    check_dimensions(model, pi)
    weights = build_lambda_model(model, pi_prime, lam).d_lambda
    tv_expect = _weighted_mean(weights, tv_distances(pi, pi_prime))
    kl = kl_divergences(pi, pi_prime)
    pointwise = _weighted_mean(weights, np.sqrt(kl / 2.0))
    mean_kl = _weighted_mean(weights, kl)
    jensen = math.inf if math.isinf(mean_kl) else math.sqrt(mean_kl / 2.0)
    return PinskerChain(tv_expect, pointwise, jensen)


def penalty_coefficient(gamma: float, lam: float, num_states: int, eps: float) -> float:
    gamma_tilde = gamma * (1.0 - lam) / (1.0 - gamma * lam)
    return (2.0 * gamma_tilde * (gamma * lam * (num_states - 1) + 1.0) * eps
            / ((1.0 - gamma_tilde) * (1.0 - gamma * lam)))


def surrogate_bound(model: MdpModel, pi: PolicyTable, pi_prime: PolicyTable,
                    lam: float) -> SurrogateReport:
    """Lower bound on J(pi) - J(pi') next to the exact gap.

    The GAE term uses the baseline V_{pi'} with the continuation after (s, a)
    following pi. ``kl_lower_bound`` replaces E[D_TV] by sqrt(E[KL(pi||pi')]/2).
    """
    check_dimensions(model, pi)
    check_dimensions(model, pi_prime)
    gamma = model.gamma
    lm = build_lambda_model(model, pi_prime, lam)
    weights = lm.d_lambda
    scale = 1.0 - lm.gamma_tilde
    v_prime = evaluate_exact(induce(model, pi_prime), gamma)

    advantages = exact_gae(model, pi, v_prime, gamma, lam)
    gae_term = float(weights @ np.einsum("ij,ij->i", pi.probs, advantages)) / scale

    eps = epsilon_v(model, pi, pi_prime)
    coef = penalty_coefficient(gamma, lam, model.num_states, eps)
    chain = pinsker_chain(model, pi, pi_prime, lam)
    penalty_term = coef * chain.tv_expect / scale
    if coef == 0.0:
        kl_penalty_term = 0.0
    else:
        kl_penalty_term = coef * chain.jensen / scale

    j_pi, _ = objective_standard(model, pi)
    j_prime, _ = objective_standard(model, pi_prime)
    return SurrogateReport(gae_term=gae_term, penalty_term=penalty_term,
                           lower_bound=gae_term - penalty_term, true_gap=j_pi - j_prime,
                           epsilon_v=eps, tv_expect=chain.tv_expect,
                           kl_penalty_term=kl_penalty_term,
                           kl_lower_bound=gae_term - kl_penalty_term)


def _log_probs(probs: np.ndarray) -> np.ndarray:
    return np.log(probs, out=np.full_like(probs, -np.inf), where=probs > 0.0)


def _tilt_forward(pi_k: np.ndarray, advantages: np.ndarray, beta: float) -> np.ndarray:
    # argmax of <pi, A> - beta KL(pi || pi_k): pi_k exp(A / beta), renormalized;
    # centering each row keeps A / beta free of a large common offset
    centered = advantages - advantages.max(axis=1, keepdims=True)
    return special.softmax(_log_probs(pi_k) + centered / beta, axis=1)


def _tilt_reverse(pi_k: np.ndarray, advantages: np.ndarray, beta: float) -> np.ndarray:
    # argmax of <pi, A> - beta KL(pi_k || pi): pi(a) = beta pi_k(a) / (mu - A(a)),
    # mu chosen per state so the row sums to one
    probs = np.zeros_like(pi_k)
    for s in range(pi_k.shape[0]):
        support = pi_k[s] > 0.0
        p = pi_k[s, support]
        a = advantages[s, support]
        top = a.max()
        if np.all(a == top):
            probs[s, support] = p
            continue
        # shift by top so mu > 0 is measured from the largest advantage
        shifted = a - top

        def excess(mu):
            return float(np.sum(beta * p / (mu - shifted)) - 1.0)

        lower = beta * p[np.argmax(a)]
        upper = beta
        if excess(upper) >= 0.0:
            mu = upper
        else:
            mu = sp_optimize.brentq(excess, lower, upper, xtol=1e-14 * beta)
        row = beta * p / (mu - shifted)
        probs[s, support] = row / row.sum()
    return probs


def _mean_kl(policy: np.ndarray, pi_k: np.ndarray, weights: np.ndarray, direction: str) -> float:
    if direction == FORWARD:
        kl = special.rel_entr(policy, pi_k).sum(axis=1)
    else:
        kl = special.rel_entr(pi_k, policy).sum(axis=1)
    return _weighted_mean(weights, kl)


def exponentiated_update(pi_k: PolicyTable, advantages, weights,
                         cfg: TrustRegionConfig) -> Tuple[PolicyTable, float, float]:
    """Maximize E_{s~weights, a~pi}[A] subject to E_{s~weights}[KL] <= radius.

    Returns the policy, the temperature beta at which the KL constraint is
    active and the mean KL of the returned policy. The temperature is bisected
    in log space on [1e-8, 1e8]; when even the smallest temperature stays inside
    the radius the near-greedy policy at beta = 1e-8 is returned.
    """
    probs = pi_k.probs
    advantages = np.asarray(advantages, dtype=float)
    weights = np.asarray(weights, dtype=float)
    if advantages.shape != probs.shape:
        raise DimensionError(f"advantage table has shape {advantages.shape}, "
                             f"expected {probs.shape}")
    check_vector(weights, probs.shape[0], "weights")
    tilt = _tilt_forward if cfg.kl_direction == FORWARD else _tilt_reverse
    delta = cfg.radius

    def candidate(beta):
        policy = tilt(probs, advantages, beta)
        return policy, _mean_kl(policy, probs, weights, cfg.kl_direction)

    policy_lo, kl_lo = candidate(BETA_LOW)
    if kl_lo <= delta:
        logger.debug("KL radius %.3g not reached at beta=%.1e (KL %.3e)", delta, BETA_LOW, kl_lo)
        return PolicyTable(policy_lo), BETA_LOW, kl_lo
    policy_hi, kl_hi = candidate(BETA_HIGH)
    if kl_hi > delta:
        raise BisectionError("KL constraint violated even at the largest temperature",
                             (BETA_LOW, BETA_HIGH), kl_hi - delta, 0)

    lo, hi = BETA_LOW, BETA_HIGH
    threshold = cfg.bisection_tol * max(1.0, delta)
    for iteration in range(1, cfg.max_bisection_iters + 1):
        if delta - kl_hi <= threshold:
            logger.debug("bisection converged in %d iterations (beta=%.6e)", iteration, hi)
            return PolicyTable(policy_hi), hi, kl_hi
        mid = math.sqrt(lo * hi)
        if not lo < mid < hi:
            # adjacent floats: hi is the feasible temperature closest to the boundary
            logger.warning("temperature bracket collapsed at beta=%.17g, KL slack %.3e",
                           hi, delta - kl_hi)
            return PolicyTable(policy_hi), hi, kl_hi
        policy_mid, kl_mid = candidate(mid)
        if kl_mid > delta:
            lo = mid
        else:
            hi, policy_hi, kl_hi = mid, policy_mid, kl_mid
    raise BisectionError("temperature bisection did not converge", (lo, hi), delta - kl_hi,
                         cfg.max_bisection_iters)


def trust_region_step(model: MdpModel, pi_k: PolicyTable, cfg: TrustRegionConfig) -> PolicyTable:
    return _trust_region_step(model, pi_k, cfg)[0]


def _trust_region_step(model, pi_k, cfg):
    check_dimensions(model, pi_k)
    v_k = evaluate_exact(induce(model, pi_k), model.gamma)
    advantages = exact_gae(model, pi_k, v_k, model.gamma, cfg.lam)
    weights = build_lambda_model(model, pi_k, cfg.lam).d_lambda
    policy, beta, mean_kl = exponentiated_update(pi_k, advantages, weights, cfg)
    return policy, beta, mean_kl


def optimize(model: MdpModel, pi_init: PolicyTable, cfg: TrustRegionConfig,
             num_steps: int) -> List[OptimizationStep]:
    """Iterate trust_region_step, recording the exact J and mean KL after each step."""
    if num_steps < 1:
        raise InvalidParameterError(f"num_steps must be at least 1, got {num_steps}")
    policy = pi_init
    j_prev, _ = objective_standard(model, policy)
    steps = []
    for k in range(num_steps):
        policy, beta, mean_kl = _trust_region_step(model, policy, cfg)
        j, _ = objective_standard(model, policy)
        if j < j_prev - 1e-9:
            logger.warning("step %d decreased J from %.12g to %.12g", k, j_prev, j)
        logger.info("step %d: J=%.10g beta=%.3e KL=%.3e", k, j, beta, mean_kl)
        steps.append(OptimizationStep(policy, j, mean_kl))
        j_prev = j
    return steps
