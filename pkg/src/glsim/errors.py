"""Exception hierarchy shared by all glsim modules."""


class GlsimError(Exception):
    """Base class for every error raised by this package."""


class InvalidDimension(GlsimError, ValueError):
    pass


class InvalidRadii(GlsimError, ValueError):
    pass


class TooCoarse(GlsimError, ValueError):
    pass


class NumericalFailure(GlsimError, ArithmeticError):
    """Raised when a simulation cannot be continued (CLI exit code 2)."""


class ZeroPivot(NumericalFailure):
    pass


class NonConvergence(NumericalFailure):
    pass


class Blowup(NumericalFailure):
    pass


class InsufficientData(GlsimError, ValueError):
    pass


class ConfigError(GlsimError):
    """Base for configuration problems (CLI exit code 1)."""


class ParseError(ConfigError):
    pass


class ValidationError(ConfigError):
    """Carries every violation found, not just the first.

    ``problems`` is a list of ``(key, message)`` pairs where ``key`` is the
    dotted config path of the offending entry, e.g. ``"params.alpha"``.
    """

    def __init__(self, problems):
        self.problems = list(problems)
        text = "; ".join(f"{key}: {msg}" for key, msg in self.problems)
        super().__init__(text)

    @property
    def keys(self):
        return [key for key, _ in self.problems]
