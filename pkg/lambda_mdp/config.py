"""
Run configuration.

Defaults come from the environment (a ``.env`` file is honoured through
python-dotenv); command-line flags and request bodies override them.
"""
import logging
import os
from dataclasses import asdict, dataclass, fields
from typing import Optional

from dotenv import load_dotenv

from lambda_mdp.errors import UsageError

load_dotenv()

COMMANDS = ("validate", "evaluate", "distributions", "objectives", "verify", "sample",
            "optimize", "bound-check")
# commands that read a model file; verify and bound-check generate their own instances
MODEL_COMMANDS = ("validate", "evaluate", "distributions", "objectives", "sample", "optimize")

DEFAULTS = {
    "lam": float(os.getenv("LAMBDA_MDP_LAMBDA", "0.95")),
    "seed": int(os.getenv("LAMBDA_MDP_SEED", "0")),
    "instances": int(os.getenv("LAMBDA_MDP_INSTANCES", "100")),
    "tol": float(os.getenv("LAMBDA_MDP_TOL", "1e-7")),
    "workers": int(os.getenv("LAMBDA_MDP_WORKERS", "4")),
    "log_level": os.getenv("LAMBDA_MDP_LOG_LEVEL", "WARNING"),
    "host": os.getenv("LAMBDA_MDP_HOST", "127.0.0.1"),
    "port": int(os.getenv("LAMBDA_MDP_PORT", "5000")),
}

FIELD_TYPES = {
    "gamma_override": float, "lam": float, "tol": float, "radius": float,
    "seed": int, "instances": int, "horizon": int, "count": int, "steps": int, "workers": int,
    "normalize": bool, "deterministic": bool,
    "kl_direction": str,
}

LOG_FORMAT = "%(asctime)s %(levelname)s %(name)s: %(message)s"


def configure_logging(level: Optional[str] = None):
    level = (level or DEFAULTS["log_level"]).upper()
    logging.basicConfig(level=getattr(logging, level, logging.WARNING), format=LOG_FORMAT)


@dataclass
class RunConfig:
    command: str
    mdp_path: Optional[str] = None
    policy_path: Optional[str] = None
    policy_prime_path: Optional[str] = None
    phi_path: Optional[str] = None
    gamma_override: Optional[float] = None
    lam: float = DEFAULTS["lam"]
    seed: int = DEFAULTS["seed"]
    instances: int = DEFAULTS["instances"]
    tol: float = DEFAULTS["tol"]
    output: Optional[str] = None
    horizon: Optional[int] = None
    count: int = 10000
    steps: int = 50
    radius: float = 0.01
    workers: int = DEFAULTS["workers"]
    normalize: bool = False
    kl_direction: str = "forward"
    deterministic: bool = True
    trajectories_out: Optional[str] = None
    counterexample_dir: Optional[str] = None

    @classmethod
    def from_mapping(cls, command: str, values: dict) -> "RunConfig":
        """Build a config from a JSON object (the server's request body)."""
        known = {f.name for f in fields(cls)} - {"command"}
        unknown = sorted(set(values) - known)
        if unknown:
            raise UsageError(f"unknown config keys: {', '.join(unknown)}")
        coerced = {}
        for key, value in values.items():
            kind = FIELD_TYPES.get(key)
            if value is None or kind is None:
                coerced[key] = value
                continue
            if kind is bool and not isinstance(value, bool):
                raise UsageError(f"{key}: expected true or false, got {value!r}")
            if kind is int and (isinstance(value, bool)
                                or isinstance(value, float) and not value.is_integer()):
                raise UsageError(f"{key}: expected an integer, got {value!r}")
            try:
                coerced[key] = kind(value)
            except (TypeError, ValueError):
                raise UsageError(f"{key}: expected {kind.__name__}, got {value!r}")
        return cls(command=command, **coerced)

    def check(self, model_supplied: bool = False):
        """Raise UsageError when a command-specific field is missing or out of range."""
        if self.command not in COMMANDS:
            raise UsageError(f"unknown command {self.command!r}; expected one of {', '.join(COMMANDS)}")
        if self.command in MODEL_COMMANDS and self.mdp_path is None and not model_supplied:
            raise UsageError(f"{self.command} requires --mdp")
        if not 0.0 <= self.lam <= 1.0:
            raise UsageError(f"--lambda must lie in [0,1], got {self.lam}")
        if self.gamma_override is not None and not 0.0 < self.gamma_override < 1.0:
            raise UsageError(f"--gamma must lie in (0,1), got {self.gamma_override}")
        if self.tol <= 0:
            raise UsageError(f"--tol must be positive, got {self.tol}")
        if self.instances < 1:
            raise UsageError(f"--instances must be at least 1, got {self.instances}")
        if self.workers < 1:
            raise UsageError(f"--workers must be at least 1, got {self.workers}")
        if self.command == "sample":
            if self.count < 1:
                raise UsageError(f"--count must be at least 1, got {self.count}")
            if self.horizon is not None and self.horizon < 1:
                raise UsageError(f"--horizon must be at least 1, got {self.horizon}")
        if self.command == "optimize":
            if self.steps < 1:
                raise UsageError(f"--steps must be at least 1, got {self.steps}")
            if self.radius <= 0:
                raise UsageError(f"--radius must be positive, got {self.radius}")
        if self.command == "bound-check" and (self.mdp_path is not None or model_supplied) \
                and self.policy_prime_path is None:
            raise UsageError("bound-check on a model file requires --policy-prime")
        if self.kl_direction not in ("forward", "reverse"):
            raise UsageError(f"--kl-direction must be forward or reverse, got {self.kl_direction!r}")

    def to_dict(self) -> dict:
        return asdict(self)
