"""
Errors Module
Exception hierarchy shared by the numeric kernels, the harness and the CLI.
"""

from typing import Optional


class PhasecoreError(Exception):
    """Base class for every error raised by phasecore."""


class ContractViolation(PhasecoreError, ValueError):
    """A precondition of an operation does not hold."""


class ParameterError(ContractViolation):
    """Invalid bound parameters; the message names the violated constraint."""


class ConfigError(PhasecoreError):
    """Malformed or unknown configuration."""


class ConvergenceError(PhasecoreError, RuntimeError):
    """
    An iterative eigensolver reached its iteration cap.

    Args:
        message: Human readable description
        residual: Final residual norm ‖G v − λ v‖
        iterations: Number of iterations performed
    """

    def __init__(self, message: str, residual: float, iterations: Optional[int] = None):
        super().__init__(f"{message} (residual={residual:.3e}, iterations={iterations})")
        self.residual = residual
        self.iterations = iterations
