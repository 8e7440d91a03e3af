"""Exception types shared across the package."""


class PolynodeError(Exception):
    """Base class for all package-specific errors."""


class DomainError(PolynodeError, ValueError):
    """An input lies outside the mathematical domain of an operation."""


class UnsupportedStateError(PolynodeError, ValueError):
    """A kinematic state the plane-stress machinery cannot handle."""


class IntegrationError(PolynodeError, ArithmeticError):
    """The ODE trajectory became non-finite."""

    def __init__(self, step: int, message: str = ""):
        self.step = step
        super().__init__(message or f"non-finite state at integration step {step}")


class ParseError(PolynodeError, ValueError):
    """A document or file violates its schema.

    ``where`` points at the offending key path or line number.
    """

    def __init__(self, message: str, where: str = ""):
        self.where = where
        super().__init__(f"{message}" + (f" (at {where})" if where else ""))


class ConfigError(PolynodeError, ValueError):
    """An invalid run configuration (flags, split rules, grids)."""


class TrainingDivergedError(PolynodeError, RuntimeError):
    """Loss became non-finite during optimization.

    Carries the last finite snapshot so callers can salvage it.
    """

    def __init__(self, snapshot=None, iteration: int = -1):
        self.snapshot = snapshot
        self.iteration = iteration
        super().__init__(f"training loss became non-finite at iteration {iteration}")
