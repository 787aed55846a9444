"""Exception hierarchy shared by all modules."""


class LocalKMSError(Exception):
    """Base class for all library errors."""


class NotInForwardCone(LocalKMSError, ValueError):
    pass


class OnLightcone(LocalKMSError, ValueError):
    pass


class ImagScaleOutOfStrip(LocalKMSError, ValueError):
    pass


class PathUnavailable(LocalKMSError, ValueError):
    pass


class OffShell(LocalKMSError, ValueError):
    pass


class StencilNotSpacelike(LocalKMSError, ValueError):
    pass


class NonConvergent(LocalKMSError, ArithmeticError):
    pass


class OrderTooHigh(LocalKMSError, ValueError):
    pass


class NotThermal(LocalKMSError, ValueError):
    """No inverse temperature vector in the forward cone reproduces the data."""


class DegenerateTensor(LocalKMSError, ValueError):
    pass


class Infeasible(LocalKMSError, ValueError):
    pass


class EmptyGrid(LocalKMSError, ValueError):
    pass


class ConfigInvalid(LocalKMSError, ValueError):
    def __init__(self, path: str, message: str):
        super().__init__(f"{path}: {message}")
        self.path = path


class UnknownState(LocalKMSError, KeyError):
    pass
