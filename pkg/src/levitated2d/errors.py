"""Exception and warning types shared across the package."""


class ModelError(Exception):
    """Base class for every error raised by levitated2d."""


class ValidationError(ModelError, ValueError):
    """Invalid user input: parameters, configs, files."""

    def __init__(self, message, key=None):
        super().__init__(message)
        self.key = key


class NumericalError(ModelError, ArithmeticError):
    """A computation could not be carried out on valid input."""


class PoleError(NumericalError):
    pass


class DegenerateError(ValidationError):
    pass


class InstabilityError(NumericalError):
    """Drift matrix has no stable steady state."""

    def __init__(self, message, abscissa=None):
        super().__init__(message)
        self.abscissa = abscissa


class PhysicalityError(NumericalError):
    """Covariance matrix violates the uncertainty principle."""


class DiscordConditionError(NumericalError):
    """Closed-form Gaussian discord is not applicable to this state."""


class SimulationDivergedError(NumericalError):
    pass


class UnphysicalStateWarning(UserWarning):
    pass


class IllConditionedWarning(UserWarning):
    pass


class FlatLandscapeWarning(UserWarning):
    pass
