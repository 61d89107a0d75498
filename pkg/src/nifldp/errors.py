"""Exception types raised across the package."""


class NiFlDpError(Exception):
    """Base class for all errors raised by nifldp."""


class EmptyPartition(NiFlDpError, ValueError):
    pass


class WeightMismatch(NiFlDpError, ValueError):
    pass


class NotInitial(NiFlDpError):
    """put_part attempted after a Put event already occurred."""


class BadPartition(NiFlDpError, ValueError):
    """Partitions are not disjoint or do not cover the global dataset."""


class NotEnabled(NiFlDpError):
    """A transition rule was applied in a state where its guard is false."""


class StateExplosion(NiFlDpError):
    def __init__(self, ceiling: int):
        super().__init__(f"reachable state count exceeded ceiling of {ceiling}")
        self.ceiling = ceiling


class NondeterministicModel(NiFlDpError):
    """A distribution was requested from a model that is not purely probabilistic."""


class PreconditionViolation(NiFlDpError, ValueError):
    def __init__(self, message: str, client=None):
        super().__init__(message)
        self.client = client


class InfiniteEpsilon(NiFlDpError):
    """Realized epsilon is infinite, so the advantage bounds are vacuous."""

    def __init__(self, report):
        super().__init__("realized epsilon is +inf; advantage bounds are vacuous")
        self.report = report


class NoSecretPoint(NiFlDpError, ValueError):
    pass
