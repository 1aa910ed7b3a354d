"""Exception types raised by the simulator."""


class RabiSqueezeError(Exception):
    """Base class for all simulator errors."""


class LeakError(RabiSqueezeError):
    """Population reached the top of the truncated Fock space."""


class ZeroProbability(RabiSqueezeError):
    pass


class NotHermitian(RabiSqueezeError):
    pass


class RegimeError(RabiSqueezeError):
    """Coherent components are not well separated enough for the requested check."""


class GridTooSmall(RabiSqueezeError):
    pass


class UnstableEstimate(RabiSqueezeError):
    """Fisher information changed by more than the allowed amount under grid refinement."""


class NonPositive(RabiSqueezeError, ValueError):
    pass


class IntegratorDiverged(RabiSqueezeError):
    pass
