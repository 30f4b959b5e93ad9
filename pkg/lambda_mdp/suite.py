"""
Randomized verification drivers behind the ``verify`` and ``bound-check`` commands.

Each instance is generated from its own keyed stream and checked independently;
rows are gathered from a thread pool and re-sorted by instance index.
"""
import logging
import time
from concurrent.futures import ThreadPoolExecutor, as_completed
from functools import wraps
from typing import Callable, Dict, List, Optional

import numpy as np
import pandas as pd

from lambda_mdp.instances import (BoundInstance, VerificationInstance, bound_instance,
                                  verification_instance)
from lambda_mdp.io_utils import write_counterexample
from lambda_mdp.lambda_operators import build_lambda_model, lambda_bellman_apply
from lambda_mdp.mdp_core import InducedDynamics, induce
from lambda_mdp.objectives import (equivalence_report, lambda_distribution_residual,
                                   td_closed_form, td_series)
from lambda_mdp.policy_optimization import pinsker_chain, surrogate_bound
from lambda_mdp.transition_analysis import discounted_distribution, t_step_matrix
from lambda_mdp.value_solver import bellman_apply, evaluate_exact

logger = logging.getLogger(__name__)

VALUE_PHI_TOL = 1e-9
BELLMAN_TOL = 1e-10
CHAPMAN_KOLMOGOROV_TOL = 1e-12
CHAPMAN_KOLMOGOROV_STEPS = 10
DISTRIBUTION_SUM_TOL = 1e-10
REDUCTION_TOL = 1e-12
LAMBDA_RESIDUAL_TOL = 1e-10
IDENTITY_TOL = 1e-8
BOUND_TOL = 1e-8
PINSKER_TOL = 1e-12

Row = Dict[str, object]


def timed(func):
    """Decorator logging the wall time of a suite run."""
    @wraps(func)
    def wrapper(*args, **kwargs):
        start_time = time.time()
        result = func(*args, **kwargs)
        logger.info("%s executed in %.4f seconds", func.__name__, time.time() - start_time)
        return result
    return wrapper


def chapman_kolmogorov_error(dyn: InducedDynamics, steps: int = CHAPMAN_KOLMOGOROV_STEPS) -> float:
    """max_t ||P^(t) - P^t||_inf where P^(t) is built one step at a time."""
    worst = 0.0
    recursive = np.eye(dyn.num_states)
    for t in range(1, steps + 1):
        recursive = recursive @ dyn.p_pi
        worst = max(worst, float(np.abs(recursive - t_step_matrix(dyn, t)).max()))
    return worst


def check_instance(instance: VerificationInstance, tol: float) -> Row:
    """Every exact identity on one random (model, policy, lambda, phi) instance."""
    model, policy, lam, phi = instance.model, instance.policy, instance.lam, instance.phi
    dyn = induce(model, policy)
    report = equivalence_report(model, policy, lam, phi)
    v = evaluate_exact(dyn, model.gamma)
    lm = build_lambda_model(model, policy, lam)
    d = discounted_distribution(dyn, model.gamma, model.rho0).weights
    reduction = build_lambda_model(model, policy, 0.0).d_lambda

    row = {
        "index": instance.index,
        "num_states": model.num_states,
        "num_actions": model.num_actions,
        "gamma": model.gamma,
        "lambda": lam,
        "phi": instance.phi_kind,
        "objectives": report.to_dict(),
        "gap": report.max_pairwise_gap,
        "bellman_residual": float(np.abs(v - bellman_apply(dyn, model.gamma, v)).max()),
        "lambda_bellman_residual": float(np.abs(v - lambda_bellman_apply(lm, v)).max()),
        "chapman_kolmogorov_error": chapman_kolmogorov_error(dyn),
        "distribution_sum_error": max(abs(float(d.sum()) - 1.0),
                                      abs(float(lm.d_lambda.sum()) - 1.0)),
        "lambda_zero_reduction_error": float(np.abs(reduction - d).max()),
        "lambda_distribution_residual": lambda_distribution_residual(lm, model.rho0),
        "td_identity_error": float(np.abs(
            td_closed_form(lm, phi) - td_series(dyn, model.gamma, lam, phi)[0]).max()),
    }
    gap_tol = min(tol, VALUE_PHI_TOL) if instance.phi_kind == "value" else tol
    checks = {
        "gap": row["gap"] <= gap_tol,
        "bellman": row["bellman_residual"] <= BELLMAN_TOL,
        "lambda_bellman": row["lambda_bellman_residual"] <= BELLMAN_TOL,
        "chapman_kolmogorov": row["chapman_kolmogorov_error"] <= CHAPMAN_KOLMOGOROV_TOL,
        "distribution_sum": row["distribution_sum_error"] <= DISTRIBUTION_SUM_TOL,
        "lambda_zero_reduction": row["lambda_zero_reduction_error"] <= REDUCTION_TOL,
        "lambda_distribution": row["lambda_distribution_residual"] <= LAMBDA_RESIDUAL_TOL,
        "td_identity": row["td_identity_error"] <= IDENTITY_TOL,
    }
    row["failed_checks"] = sorted(name for name, ok in checks.items() if not ok)
    row["passed"] = not row["failed_checks"]
    return row


def check_bound_instance(instance: BoundInstance,
                         counterexample_dir: Optional[str] = None) -> Row:
    """Surrogate bound and Pinsker chain on one policy pair; a violation carries the full instance."""
    model, pi, pi_prime, lam = instance.model, instance.pi, instance.pi_prime, instance.lam
    report = surrogate_bound(model, pi, pi_prime, lam)
    chain = pinsker_chain(model, pi, pi_prime, lam)
    bound_holds = report.slack >= -BOUND_TOL
    chain_holds = chain.holds(PINSKER_TOL)
    row = {
        "index": instance.index,
        "num_states": model.num_states,
        "num_actions": model.num_actions,
        "gamma": model.gamma,
        "lambda": lam,
        "mix": instance.mix,
        "report": report.to_dict(),
        "pinsker_chain": chain.to_dict(),
        "gap": max(0.0, -report.slack),
        "bound_holds": bound_holds,
        "chain_holds": chain_holds,
        "passed": bound_holds and chain_holds,
    }
    if not bound_holds:
        document = {
            "index": instance.index,
            "lambda": lam,
            "model": model.to_dict(),
            "pi": pi.to_list(),
            "pi_prime": pi_prime.to_list(),
            "report": report.to_dict(),
        }
        row["counterexample"] = document
        if counterexample_dir is not None:
            row["counterexample_path"] = write_counterexample(counterexample_dir, instance.index,
                                                              document)
    return row


def check_bound(seed: int, index: int, counterexample_dir: Optional[str] = None) -> Row:
    return check_bound_instance(bound_instance(seed, index), counterexample_dir)


def run_instances(fn: Callable[[int], Row], count: int, workers: int = 1) -> List[Row]:
    """Apply ``fn`` to indices 0..count-1 on a thread pool; rows come back sorted by index."""
    rows = []
    if workers <= 1:
        rows = [fn(index) for index in range(count)]
    else:
        with ThreadPoolExecutor(max_workers=workers) as executor:
            futures = {executor.submit(fn, index): index for index in range(count)}
            for future in as_completed(futures):
                index = futures[future]
                try:
                    rows.append(future.result())
                except Exception as e:
                    logger.error("instance %d raised %s", index, e)
                    raise
    return sorted(rows, key=lambda row: row["index"])


def summarize(rows: List[Row]) -> dict:
    frame = pd.DataFrame([{"index": row["index"], "passed": bool(row["passed"]),
                           "gap": float(row["gap"])} for row in rows],
                         columns=["index", "passed", "gap"])
    if frame.empty:
        return {"passed": 0, "failed": 0, "max_gap": 0.0}
    passed = int(frame["passed"].sum())
    return {"passed": passed, "failed": int(len(frame) - passed),
            "max_gap": float(frame["gap"].max())}


@timed
def verify(seed: int, count: int, tol: float, workers: int = 1) -> List[Row]:
    return run_instances(lambda index: check_instance(verification_instance(seed, index), tol),
                         count, workers)


@timed
def bound_check(seed: int, count: int, workers: int = 1,
                counterexample_dir: Optional[str] = None) -> List[Row]:
    return run_instances(lambda index: check_bound(seed, index, counterexample_dir),
                         count, workers)
