"""Exception hierarchy shared by all modules."""


class ParameterError(ValueError):
    """A caller-supplied parameter violates a documented rule."""


class SearchSpaceError(ParameterError):
    """An exhaustive enumeration would exceed the configured cap."""


class InfeasibleError(ParameterError):
    """The requested configuration cannot satisfy the alignment constraints."""


class UnsupportedScenarioError(ParameterError):
    """The scenario lies outside what the library models (e.g. M > N)."""


class NumericError(RuntimeError):
    """A numerical routine failed (singular covariance, degenerate fit...)."""


class EstimationError(RuntimeError):
    """Blind statistics could not be estimated from the available samples."""
