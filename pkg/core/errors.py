class DenoisingToolkitError(Exception):
    """Base class for data and validation errors raised by the toolkit."""


class CorpusError(DenoisingToolkitError):
    """Unreadable corpus path, malformed record or duplicate document id."""


class EmptySubsetError(DenoisingToolkitError):
    """The requested vocabulary subset has no words to sample from."""


class ModelValidationError(DenoisingToolkitError):
    """A confusion model violates its probability constraints."""


class SamplingError(DenoisingToolkitError):
    """Invalid Monte Carlo sampling request."""


class EnumerationLimitError(DenoisingToolkitError):
    """Exhaustive enumeration would exceed the configured term limit."""


class EvaluationError(DenoisingToolkitError):
    """Evaluation inputs cannot be scored (empty reference, unmatched ids)."""
