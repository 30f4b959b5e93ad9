"""Reading MDP, policy and phi files; writing reports, trajectory dumps and counterexamples."""
import json
import logging
import math
import os
import sys
from typing import Iterable, Optional

import numpy as np
import pandas as pd

from lambda_mdp.errors import InputError
from lambda_mdp.mdp_core import MdpModel, PolicyTable
from lambda_mdp.objectives import PhiFunction

logger = logging.getLogger(__name__)

MDP_KEYS = ("num_states", "num_actions", "gamma", "rho0", "transition", "reward")


def load_json(filename: str):
    """
    Load JSON data from a specified file.

    Parameters
    ----------
    filename : str
        The path to the JSON file to be loaded.

    Returns
    -------
    dict or list
        The data loaded from the JSON file.

    Raises
    ------
    InputError
        When the file is missing or is not valid JSON (with line and column).
    """
    try:
        with open(filename, 'r') as file:
            data = json.load(file)
    except FileNotFoundError:
        raise InputError("file not found", path=filename)
    except json.JSONDecodeError as e:
        raise InputError(f"invalid JSON: {e.msg}", path=filename, line=e.lineno, column=e.colno)
    except OSError as e:
        raise InputError(f"cannot read file: {e.strerror}", path=filename)
    return data


def _numeric_array(value, key: str, ndim: Iterable[int], source: Optional[str]) -> np.ndarray:
    try:
        array = np.asarray(value, dtype=float)
    except (TypeError, ValueError):
        raise InputError(f"{key}: expected a rectangular array of numbers", path=source)
    if array.ndim not in tuple(ndim):
        raise InputError(f"{key}: expected {' or '.join(str(n) for n in ndim)} nesting levels, "
                         f"got {array.ndim}", path=source)
    return array


def _integer(value, key: str, source: Optional[str]) -> int:
    if isinstance(value, bool) or not isinstance(value, (int, float)) or int(value) != value:
        raise InputError(f"{key}: expected an integer, got {value!r}", path=source)
    return int(value)


def parse_mdp(data, source: Optional[str] = None) -> MdpModel:
    """Build an MdpModel from the JSON schema without checking its invariants.

    Invariant violations (row sums, ranges, shapes against num_states) are left
    to ``validate_mdp`` so they can be reported as data.
    """
    if not isinstance(data, dict):
        raise InputError("MDP document must be a JSON object", path=source)
    missing = [key for key in MDP_KEYS if key not in data]
    if missing:
        raise InputError(f"missing keys: {', '.join(missing)}", path=source)
    num_states = _integer(data["num_states"], "num_states", source)
    num_actions = _integer(data["num_actions"], "num_actions", source)
    gamma = data["gamma"]
    if isinstance(gamma, bool) or not isinstance(gamma, (int, float)):
        raise InputError(f"gamma: expected a number, got {gamma!r}", path=source)
    rho0 = _numeric_array(data["rho0"], "rho0", (1,), source)
    transition = _numeric_array(data["transition"], "transition", (3,), source)
    reward = _numeric_array(data["reward"], "reward", (2, 3), source)
    if reward.ndim == 2:
        if reward.shape != transition.shape[:2]:
            raise InputError(f"reward: 2-level shape {reward.shape} does not match "
                             f"transition {transition.shape[:2]}", path=source)
        reward = np.broadcast_to(reward[:, :, None], transition.shape)
    return MdpModel(num_states, num_actions, transition, reward, rho0, float(gamma))


def load_mdp(path: str) -> MdpModel:
    return parse_mdp(load_json(path), source=path)


def parse_policy(data, source: Optional[str] = None) -> PolicyTable:
    return PolicyTable(_numeric_array(data, "policy", (2,), source))


def load_policy(path: str) -> PolicyTable:
    return parse_policy(load_json(path), source=path)


def parse_phi(data, source: Optional[str] = None) -> PhiFunction:
    values = _numeric_array(data, "phi", (1,), source)
    if not np.all(np.isfinite(values)):
        raise InputError("phi: entries must be finite", path=source)
    return PhiFunction(values)


def load_phi(path: str) -> PhiFunction:
    return parse_phi(load_json(path), source=path)


def to_jsonable(value):
    """Plain JSON types; infinities and NaN become the strings "inf", "-inf", "nan"."""
    if isinstance(value, dict):
        return {str(k): to_jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [to_jsonable(v) for v in value]
    if isinstance(value, np.ndarray):
        return to_jsonable(value.tolist())
    if isinstance(value, (bool, np.bool_)):
        return bool(value)
    if isinstance(value, (int, np.integer)):
        return int(value)
    if isinstance(value, (float, np.floating)):
        value = float(value)
        if math.isnan(value):
            return "nan"
        if math.isinf(value):
            return "inf" if value > 0 else "-inf"
        return value
    return value


def dumps_report(report: dict) -> str:
    return json.dumps(to_jsonable(report), sort_keys=True, indent=2) + "\n"


def write_report(report: dict, output: Optional[str] = None):
    text = dumps_report(report)
    if output is None or output == "-":
        sys.stdout.write(text)
        return
    with open(output, 'w') as file:
        file.write(text)
    logger.info("report written to %s", output)


def write_trajectories_jsonl(trajectories, path: str):
    """One JSON object per line with the keys states, actions and rewards."""
    frame = pd.DataFrame([trajectory.to_dict() for trajectory in trajectories],
                         columns=["states", "actions", "rewards"])
    frame.to_json(path, orient="records", lines=True)
    logger.info("%d trajectories written to %s", len(frame), path)


def write_counterexample(directory: str, index: int, document: dict) -> str:
    os.makedirs(directory, exist_ok=True)
    path = os.path.join(directory, f"counterexample_{index:05d}.json")
    with open(path, 'w') as file:
        file.write(dumps_report(document))
    logger.warning("bound violation on instance %d written to %s", index, path)
    return path
