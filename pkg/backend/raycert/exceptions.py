class RayCertError(Exception):
    """Base class for every error raised by the toolkit"""

    pass


class ModelError(RayCertError):
    """Raised when a point model description or its parameters are invalid"""

    pass


class UnknownLabel(ModelError):
    """Raised when a point label does not resolve in a model"""

    pass


class RegionError(RayCertError):
    """Raised when a window region is unbounded or degenerate"""

    pass


class ContractViolation(RayCertError):
    """Raised when the precondition of an operation does not hold"""

    pass


class SynthesisRefused(RayCertError):
    """Raised when no ray structure may be built for the requested input"""

    pass


class TransferRefused(RayCertError):
    """Raised when a finite-component certificate cannot be transferred"""

    pass


class NetError(RayCertError):
    """Raised when a net cannot be built on a domain sample"""

    pass


class OperatorRejected(RayCertError):
    """Raised when operator input violates the isometry, frame or shift contract"""

    pass
