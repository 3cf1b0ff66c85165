"""Exception hierarchy shared by all modules."""


class HoloNeutronError(Exception):
    """Base class for every error raised by this package."""


class NoPropagatingOrderError(HoloNeutronError, ValueError):
    pass


class DomainError(HoloNeutronError, ValueError):
    pass


class AccuracyError(HoloNeutronError, ArithmeticError):
    """Numerical result failed its own refinement check."""


class NoSignalError(HoloNeutronError, ValueError):
    pass


class GeometryError(HoloNeutronError, ValueError):
    pass


class ConfigError(HoloNeutronError, ValueError):
    pass
