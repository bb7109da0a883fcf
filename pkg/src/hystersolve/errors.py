"""Exception hierarchy shared by all hystersolve modules."""


class HystersolveError(Exception):
    """Base class for every error raised by this package."""


class ThresholdError(HystersolveError, ValueError):
    """A play threshold was negative."""


class RangeError(HystersolveError, ValueError):
    """An input left the declared range of an operator or density."""


class ConfigurationError(HystersolveError, ValueError):
    """Inconsistent shapes or parameters handed to an operator."""


class SingularSystemError(HystersolveError, ArithmeticError):
    """Zero pivot met during the tridiagonal elimination."""


class StepFailure(HystersolveError, RuntimeError):
    """The nonlinear solve of one time step did not converge."""

    def __init__(self, message, step=None, residual=None, iterations=None):
        super().__init__(message)
        self.step = step
        self.residual = residual
        self.iterations = iterations


class ConfigError(HystersolveError, ValueError):
    """A configuration file could not be parsed or violates a hypothesis.

    ``violations`` holds one tagged message per breached item, for example
    ``"hy2: gamma integral zero"``.
    """

    def __init__(self, violations, line=None):
        if isinstance(violations, str):
            violations = [violations]
        self.violations = list(violations)
        self.line = line
        msg = "; ".join(self.violations)
        if line is not None:
            msg = f"line {line}: {msg}"
        super().__init__(msg)
