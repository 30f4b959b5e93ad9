"""
Command-line front end.

    python main_terminal.py objectives --mdp data/m2.json --policy data/uniform_m2.json --lambda 0.5
    python main_terminal.py verify --instances 100 --seed 7 --tol 1e-7

Every command writes one JSON report ``{command, version, config, results, summary}``.
Exit codes: 0 all checks passed, 1 a check failed, 2 usage or input error.
"""
import argparse
import datetime
import logging
import math
import sys
from typing import List, Optional, Tuple

import numpy as np

from lambda_mdp import __version__, suite
from lambda_mdp.config import DEFAULTS, RunConfig, configure_logging
from lambda_mdp.errors import (DimensionError, InputError, InvalidModelError,
                               InvalidParameterError, LambdaMdpError, UsageError)
from lambda_mdp.instances import BoundInstance
from lambda_mdp.io_utils import (load_mdp, load_phi, load_policy, write_report,
                                 write_trajectories_jsonl)
from lambda_mdp.lambda_operators import build_lambda_model, lambda_distribution
from lambda_mdp.mdp_core import (MdpModel, PolicyTable, Violation, induce, normalize_model,
                                 normalize_policy, uniform_policy, validate_mdp, validate_policy)
from lambda_mdp.objectives import (PhiFunction, equivalence_report, lambda_distribution_residual,
                                   objective_standard)
from lambda_mdp.policy_optimization import TrustRegionConfig, optimize
from lambda_mdp.trajectory_sampler import (empirical_occupancy, horizon_for_tolerance,
                                           monte_carlo_objective, sample_trajectories,
                                           truncation_bound)
from lambda_mdp.transition_analysis import discounted_distribution
from lambda_mdp.value_solver import evaluate, evaluate_iterative

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_CHECK_FAILED = 1
EXIT_INPUT_ERROR = 2

DISTRIBUTION_TOL = 1e-10
MONOTONE_SLACK = 1e-9
KL_SLACK = 1.05
SAMPLE_HORIZON_TOL = 1e-3

# errors caused by what the caller supplied
INPUT_ERRORS = (InputError, UsageError, InvalidModelError, DimensionError, InvalidParameterError)


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--mdp", dest="mdp_path", help="MDP JSON file")
    common.add_argument("--policy", dest="policy_path", help="policy JSON file (default: uniform)")
    common.add_argument("--phi", dest="phi_path", help="phi JSON file (default: zero)")
    common.add_argument("--gamma", dest="gamma_override", type=float,
                        help="override the model's discount")
    common.add_argument("--lambda", dest="lam", type=float, default=DEFAULTS["lam"])
    common.add_argument("--seed", type=int, default=DEFAULTS["seed"])
    common.add_argument("--instances", type=int, default=DEFAULTS["instances"])
    common.add_argument("--tol", type=float, default=DEFAULTS["tol"])
    common.add_argument("--workers", type=int, default=DEFAULTS["workers"])
    common.add_argument("--output", "-o", help="report file (default: standard output)")
    common.add_argument("--normalize", action="store_true",
                        help="renormalize transition, rho0 and policy rows before use")
    common.add_argument("--deterministic", action=argparse.BooleanOptionalAction, default=True,
                        help="omit timestamps so identical runs give identical reports")
    common.add_argument("--log-level", default=DEFAULTS["log_level"])

    parser = argparse.ArgumentParser(prog="lambda_mdp", description=__doc__.split("\n\n")[0].strip())
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    commands = parser.add_subparsers(dest="command", required=True)
    for name in ("validate", "evaluate", "distributions", "objectives", "verify"):
        commands.add_parser(name, parents=[common])
    sample = commands.add_parser("sample", parents=[common])
    sample.add_argument("--horizon", type=int)
    sample.add_argument("--count", type=int, default=10000)
    sample.add_argument("--trajectories-out", dest="trajectories_out",
                        help="write the trajectories as JSON lines")
    opt = commands.add_parser("optimize", parents=[common])
    opt.add_argument("--steps", type=int, default=50)
    opt.add_argument("--radius", type=float, default=0.01)
    opt.add_argument("--kl-direction", dest="kl_direction", choices=("forward", "reverse"),
                     default="forward")
    bound = commands.add_parser("bound-check", parents=[common])
    bound.add_argument("--policy-prime", dest="policy_prime_path",
                       help="baseline policy pi' for a single pair (with --mdp)")
    bound.add_argument("--counterexample-dir", dest="counterexample_dir",
                       help="write every bound violation as a JSON document")
    return parser


def config_from_args(args: argparse.Namespace) -> RunConfig:
    values = {key: value for key, value in vars(args).items() if key not in ("log_level",)}
    return RunConfig(**values)


def _load_inputs(config: RunConfig, model: Optional[MdpModel], policy: Optional[PolicyTable],
                 phi: Optional[PhiFunction]):
    if model is None and config.mdp_path is not None:
        model = load_mdp(config.mdp_path)
    if model is not None:
        if config.gamma_override is not None:
            model = model.with_gamma(config.gamma_override)
        if config.normalize:
            model = normalize_model(model)
    if policy is None and config.policy_path is not None:
        policy = load_policy(config.policy_path)
    if policy is not None and config.normalize:
        policy = normalize_policy(policy)
    if phi is None and config.phi_path is not None:
        phi = load_phi(config.phi_path)
    return model, policy, phi


def _require_valid(model: MdpModel, policy: Optional[PolicyTable]) -> PolicyTable:
    violations = validate_mdp(model)
    if violations:
        raise InvalidModelError(violations)
    if policy is None:
        return uniform_policy(model.num_states, model.num_actions)
    violations = validate_policy(policy, model.num_states, model.num_actions)
    if violations:
        raise InvalidModelError(violations)
    return policy


def _summary(passed: int, failed: int, max_gap: float) -> dict:
    return {"passed": passed, "failed": failed, "max_gap": max_gap}


def _validate(config, model, policy, phi):
    violations = validate_mdp(model)
    if policy is not None:
        violations += [Violation(f"policy.{v.path}", v.message)
                       for v in validate_policy(policy, model.num_states, model.num_actions)]
    results = [v.to_dict() for v in violations]
    return results, _summary(int(not violations), len(violations), 0.0)


def _evaluate(config, model, policy, phi):
    bundle = evaluate(model, policy)
    iterative = evaluate_iterative(induce(model, policy), model.gamma, tol=config.tol)
    gap = float(np.abs(iterative.v - bundle.v).max())
    result = {"v": bundle.v, "q": bundle.q, "advantage": bundle.adv,
              "iterations": iterative.iterations, "iterative_gap": gap}
    return [result], _summary(int(gap <= config.tol), int(gap > config.tol), gap)


def _distributions(config, model, policy, phi):
    dyn = induce(model, policy)
    d = discounted_distribution(dyn, model.gamma, model.rho0).weights
    lm = build_lambda_model(model, policy, config.lam)
    per_start = [{"start": s,
                  "discounted": discounted_distribution(dyn, model.gamma, s).weights,
                  "lambda": lambda_distribution(lm, s).weights}
                 for s in range(model.num_states)]
    residual = lambda_distribution_residual(lm, model.rho0)
    sum_error = max(abs(float(d.sum()) - 1.0), abs(float(lm.d_lambda.sum()) - 1.0))
    gap = max(residual, sum_error)
    result = {"gamma_tilde": lm.gamma_tilde, "discounted": d, "lambda": lm.d_lambda,
              "p_lambda": lm.p_lambda, "r_lambda": lm.r_lambda,
              "lambda_distribution_residual": residual, "sum_error": sum_error,
              "per_start": per_start}
    ok = gap <= DISTRIBUTION_TOL
    return [result], _summary(int(ok), int(not ok), gap)


def _objectives(config, model, policy, phi):
    if phi is None:
        phi = PhiFunction.zeros(model.num_states)
    report = equivalence_report(model, policy, config.lam, phi)
    ok = report.max_pairwise_gap <= config.tol
    return [report.to_dict()], _summary(int(ok), int(not ok), report.max_pairwise_gap)


def _verify(config, model, policy, phi):
    rows = suite.verify(config.seed, config.instances, config.tol, config.workers)
    return rows, suite.summarize(rows)


def _sample(config, model, policy, phi):
    r_max = float(np.abs(model.reward).max())
    horizon = config.horizon or horizon_for_tolerance(model.gamma, r_max, SAMPLE_HORIZON_TOL)
    trajectories = sample_trajectories(model, policy, horizon, config.count, config.seed,
                                       config.workers)
    if config.trajectories_out:
        write_trajectories_jsonl(trajectories, config.trajectories_out)
    estimate, stderr = monte_carlo_objective(trajectories, model.gamma)
    exact, _ = objective_standard(model, policy)
    bound = truncation_bound(model.gamma, horizon, r_max)
    error = abs(estimate - exact)
    occupancy = empirical_occupancy(trajectories, model.gamma, model.num_states)
    d = discounted_distribution(induce(model, policy), model.gamma, model.rho0).weights
    result = {"horizon": horizon, "count": config.count, "estimate": estimate, "stderr": stderr,
              "exact": exact, "truncation_bound": bound, "error": error,
              "empirical_occupancy": occupancy,
              "occupancy_tv": 0.5 * float(np.abs(occupancy - d).sum())}
    ok = error <= 3.0 * stderr + bound
    return [result], _summary(int(ok), int(not ok), error)


def _optimize(config, model, policy, phi):
    cfg = TrustRegionConfig(radius=config.radius, lam=config.lam, kl_direction=config.kl_direction)
    steps = optimize(model, policy, cfg, config.steps)
    j_start, _ = objective_standard(model, policy)
    results, failed, worst = [], 0, 0.0
    previous = j_start
    for k, step in enumerate(steps):
        decrease = max(0.0, previous - step.objective)
        ok = decrease <= MONOTONE_SLACK and step.mean_kl <= KL_SLACK * config.radius
        failed += int(not ok)
        worst = max(worst, decrease)
        results.append({"step": k, **step.to_dict(), "passed": ok})
        previous = step.objective
    return results, _summary(len(steps) - failed, failed, worst)


def _bound_check(config, model, policy, phi):
    if model is not None:
        # a single user-supplied pair: pi from --policy, pi' from --policy-prime
        pi_prime = _require_valid(model, load_policy(config.policy_prime_path))
        pair = BoundInstance(0, model, policy, pi_prime, config.lam, math.nan)
        rows = [suite.check_bound_instance(pair, config.counterexample_dir)]
        return rows, suite.summarize(rows)
    rows = suite.bound_check(config.seed, config.instances, config.workers,
                             config.counterexample_dir)
    return rows, suite.summarize(rows)


HANDLERS = {
    "validate": _validate,
    "evaluate": _evaluate,
    "distributions": _distributions,
    "objectives": _objectives,
    "verify": _verify,
    "sample": _sample,
    "optimize": _optimize,
    "bound-check": _bound_check,
}


def run(config: RunConfig, model: Optional[MdpModel] = None, policy: Optional[PolicyTable] = None,
        phi: Optional[PhiFunction] = None) -> Tuple[int, dict]:
    """Run one command; returns the exit code and the JSON-ready report."""
    report = {"command": config.command, "version": __version__, "config": config.to_dict()}
    if not config.deterministic:
        report["generated_at"] = datetime.datetime.now(datetime.timezone.utc).isoformat()
    try:
        config.check(model_supplied=model is not None)
        model, policy, phi = _load_inputs(config, model, policy, phi)
        if config.command != "validate" and model is not None:
            policy = _require_valid(model, policy)
        results, summary = HANDLERS[config.command](config, model, policy, phi)
    except INPUT_ERRORS as e:
        logger.error("%s", e)
        report.update(results=[], summary=_summary(0, 0, 0.0), error=str(e))
        return EXIT_INPUT_ERROR, report
    except LambdaMdpError as e:
        logger.error("%s failed: %s", config.command, e)
        report.update(results=[], summary=_summary(0, 1, math.nan), error=str(e))
        return EXIT_CHECK_FAILED, report
    report.update(results=results, summary=summary)
    return (EXIT_OK if summary["failed"] == 0 else EXIT_CHECK_FAILED), report


def main(argv: Optional[List[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    configure_logging(args.log_level)
    config = config_from_args(args)
    code, report = run(config)
    if "error" in report:
        sys.stderr.write(f"error: {report['error']}\n")
    write_report(report, config.output)
    return code

