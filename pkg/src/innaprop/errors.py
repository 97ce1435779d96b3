"""Exception hierarchy shared by every module."""


class InnapropError(Exception):
    """Base class for all library errors."""


class ContractViolation(InnapropError):
    """A caller broke a documented precondition (dimension mismatch, bad argument)."""


class DomainError(InnapropError):
    """An operation left its numeric domain (division by zero element, non-finite loss)."""


class DivergenceError(InnapropError):
    """An optimizer or integrator produced a non-finite state.

    Carries the step index at which the run blew up so harnesses can record
    it instead of crashing.
    """

    def __init__(self, step, message=None):
        self.step = step
        super().__init__(message or f"non-finite state at step {step}")


class WellPosednessError(InnapropError):
    """A schedule can emit a step size gamma_k >= beta, which makes the
    theta update's divisor beta - gamma_k vanish or flip sign."""


class ConfigError(InnapropError):
    """A run configuration is malformed or inconsistent."""


class ParseError(InnapropError):
    """An input file (CSV dataset, config) could not be parsed."""
