"""Exception hierarchy shared by all sheathlab modules."""


class SheathLabError(Exception):
    """Base class for every error raised by sheathlab."""


class DomainError(SheathLabError, ValueError):
    pass


class BranchError(SheathLabError, ValueError):
    """Potential value outside the range of the admissible Bernoulli branch."""


class BranchEscape(SheathLabError):
    pass


class NegativeV(SheathLabError):
    pass


class InsufficientWindow(SheathLabError):
    pass


class NonExistence(SheathLabError):
    """The stationary problem has no (non-trivial) monotone solution."""

    def __init__(self, message, verdict=None):
        super().__init__(message)
        self.verdict = verdict


class NonConvergence(SheathLabError):
    def __init__(self, message, residual=float("nan")):
        super().__init__(message)
        self.residual = residual


class PositivityViolation(SheathLabError):
    pass


class CharacteristicSignViolation(SheathLabError):
    pass


class GridMismatch(SheathLabError, ValueError):
    pass


class DegenerateFit(SheathLabError):
    pass


class ConfigError(SheathLabError, ValueError):
    pass
