"""Exception hierarchy shared across the package.

The CLI maps these onto process exit codes, so raising the right class
matters more than the message text.
"""


class StakesimError(Exception):
    """Base class for all errors raised by this package."""


class ConfigError(StakesimError):
    """Invalid or unparseable configuration (CLI exit code 2)."""


class ParameterError(StakesimError, ValueError):
    """A value passed to an operation is outside its documented domain."""


class DomainError(ParameterError):
    """Evaluation requested outside a function's mathematical domain."""


class NumericError(StakesimError, ArithmeticError):
    """Overflow, singularity or other runtime numeric failure (exit code 3)."""
