"""Exception types raised by the library and mapped to exit codes by the CLI."""
from typing import Optional, Sequence, Tuple

import numpy as np


class LambdaMdpError(Exception):
    """Base class for every error raised by lambda_mdp."""


class InputError(LambdaMdpError):
    """A file is missing, does not parse, or does not follow the input schema."""

    def __init__(self, message: str, path: Optional[str] = None,
                 line: Optional[int] = None, column: Optional[int] = None):
        self.path = path
        self.line = line
        self.column = column
        location = ""
        if path is not None:
            location = str(path)
            if line is not None:
                location += f":{line}"
                if column is not None:
                    location += f":{column}"
            location += ": "
        super().__init__(location + message)


class UsageError(LambdaMdpError):
    """The command line asks for something the command cannot do."""


class DimensionError(LambdaMdpError, ValueError):
    """Array shapes of a model, policy or vector do not agree."""


class InvalidParameterError(LambdaMdpError, ValueError):
    """A scalar parameter (gamma, lambda, t, tolerance, ...) is out of range."""


class InvalidModelError(LambdaMdpError, ValueError):
    """A model or policy violates its invariants."""

    def __init__(self, violations: Sequence):
        self.violations = list(violations)
        lines = "; ".join(str(v) for v in self.violations[:5])
        more = len(self.violations) - 5
        if more > 0:
            lines += f"; ... {more} more"
        super().__init__(f"invalid input: {lines}")


class NumericalError(LambdaMdpError, ArithmeticError):
    """A linear solve failed or produced values outside the admissible range."""


class ConvergenceError(LambdaMdpError, RuntimeError):
    """An iterative procedure ran out of iterations."""

    def __init__(self, message: str, last_iterate=None, residual: float = float("nan"),
                 iterations: int = 0):
        self.last_iterate = None if last_iterate is None else np.array(last_iterate)
        self.residual = residual
        self.iterations = iterations
        super().__init__(f"{message} (iterations={iterations}, residual={residual:.3e})")


class BisectionError(ConvergenceError):
    """Temperature bisection of the trust-region step did not meet its tolerance."""

    def __init__(self, message: str, bracket: Tuple[float, float], residual: float,
                 iterations: int):
        self.bracket = bracket
        super().__init__(f"{message}; bracket=[{bracket[0]:.6e}, {bracket[1]:.6e}]",
                         residual=residual, iterations=iterations)
