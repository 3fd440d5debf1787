"""Exception hierarchy shared by all submodules."""


class PrivFunnelError(Exception):
    """Base class for every error raised by this package."""


class InvalidDistribution(PrivFunnelError, ValueError):
    pass


class ZeroProbabilityEvent(PrivFunnelError, ValueError):
    """Conditioning on an event of probability zero."""


class DimensionMismatch(PrivFunnelError, ValueError):
    pass


class EmptyPolytope(PrivFunnelError):
    pass


class UnboundedPolytope(PrivFunnelError):
    pass


class BudgetExceeded(PrivFunnelError):
    """Vertex enumeration produced more rays than the configured cap."""


class LPInfeasible(PrivFunnelError):
    pass


class LPUnbounded(PrivFunnelError):
    pass


class AlphabetTooLarge(PrivFunnelError, ValueError):
    pass


class NonMonotoneDetected(PrivFunnelError):
    """A leakage curve decreased during bisection."""


class AttributeBudgetExceeded(PrivFunnelError, ValueError):
    pass


class SchemaMismatch(PrivFunnelError, ValueError):
    pass


class EmptyAfterFiltering(PrivFunnelError, ValueError):
    pass
