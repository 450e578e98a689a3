"""Exception hierarchy."""


class RRSimError(Exception):
    pass


class ConfigurationError(RRSimError, ValueError):
    """Inconsistent dimensions, parameters or config files."""


class DomainError(RRSimError, ValueError):
    """Argument outside the domain of an operation (e.g. t < t0)."""


class BlowupError(RRSimError, FloatingPointError):
    """A vector field produced a non-finite value."""


class SynthesisError(RRSimError, RuntimeError):
    pass


class IntegrityError(RRSimError, ValueError):
    pass


class AnalysisError(RRSimError, ValueError):
    pass
