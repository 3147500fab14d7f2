"""Exception hierarchy shared by every module of the toolkit."""


class EbtkError(ValueError):
    """Base class for all toolkit errors."""


class NonHermitianInput(EbtkError):
    pass


class NoConvergence(EbtkError):
    pass


class BadShape(EbtkError):
    pass


class BadPermutation(EbtkError):
    pass


class DimensionMismatch(EbtkError):
    pass


class NotTracePreserving(EbtkError):
    pass


class InvalidChannel(EbtkError):
    pass


class InvalidPovm(EbtkError):
    pass


class InvalidHolevoForm(EbtkError):
    pass


class InvalidEnsemble(EbtkError):
    pass


class InconsistentConstraints(EbtkError):
    pass


class NotAValidDecomposition(EbtkError):
    pass


class DimensionCap(EbtkError):
    """Requested problem exceeds the configured ambient-dimension cap."""


class DocumentError(EbtkError):
    """A JSON document is malformed; ``field`` is the dotted path of the culprit."""

    def __init__(self, field: str, message: str):
        super().__init__(f"{field}: {message}")
        self.field = field
