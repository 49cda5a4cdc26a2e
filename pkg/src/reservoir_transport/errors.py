"""Exception hierarchy.

Every error carries a ``category`` string and an ``exit_code`` so that the
command-line front end can report failures in machine-readable form.
"""


class TransportError(Exception):
    category = "error"
    exit_code = 1


class ConfigError(TransportError, ValueError):
    """Invalid or incomplete configuration.  ``key`` holds the offending key path."""

    category = "config"
    exit_code = 2

    def __init__(self, message, key=None):
        self.key = key
        if key is not None:
            message = f"{key}: {message}"
        super().__init__(message)


class NumericalError(TransportError, ArithmeticError):
    category = "numerical"
    exit_code = 3


class DomainError(NumericalError, ValueError):
    """An argument lies outside the domain where a quantity is finite."""

    category = "domain"


class SolverError(NumericalError):
    """Root bracketing or eigen-decomposition failed."""


class IntegrationError(NumericalError):
    """The ODE integration stopped early; ``last_state`` is the last good state."""

    category = "integration"

    def __init__(self, message, last_state=None):
        super().__init__(message)
        self.last_state = last_state


class InvariantError(NumericalError):
    """A monitored invariant (conservation, Hermiticity, Pauli bound) was violated."""

    category = "invariant"

    def __init__(self, message, diagnostics=None):
        super().__init__(message)
        self.diagnostics = diagnostics or {}


class FitWindowError(NumericalError):
    """The requested fit window cannot support an exponential fit."""

    category = "fit"
