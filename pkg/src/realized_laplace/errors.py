"""Exception types shared across the package."""


class ParameterError(ValueError):
    """A model or estimator parameter is outside its admissible range."""


class InputError(ValueError):
    """Observed data cannot be used (too short, malformed, non-finite)."""


class EstimationError(RuntimeError):
    """A numerical estimation step failed on otherwise valid input."""
