"""Exception hierarchy shared by the library and the CLI."""


class UvmsError(Exception):
    """Base class for all library errors."""


class SingularOrientation(UvmsError):
    """Pitch angle too close to +-pi/2 for the Euler-rate Jacobian."""


class RankDeficientJacobian(UvmsError):
    pass


class OnObstacleBoundary(UvmsError):
    """Navigation potential evaluated on or beyond an inflated boundary."""


class StuckAtSaddle(UvmsError):
    def __init__(self, message, t=None):
        super().__init__(message)
        self.t = t


class EnvelopeViolation(UvmsError):
    """An estimation error left its prescribed-performance envelope."""

    def __init__(self, message, t=None, axis=None, ratio=None):
        super().__init__(message)
        self.t = t
        self.axis = axis
        self.ratio = ratio


class SingularMass(UvmsError):
    pass


class NonFiniteState(UvmsError):
    def __init__(self, message, t=None, quantity=None):
        super().__init__(message)
        self.t = t
        self.quantity = quantity


class ConfigError(UvmsError):
    """Configuration could not be parsed or failed schema checks."""


class ParseError(ConfigError):
    pass


class SchemaError(ConfigError):
    pass
