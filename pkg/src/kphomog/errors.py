"""Exception hierarchy.

Everything deriving from :class:`ValidationError` maps to CLI exit code 1.
:class:`TransportError` and :class:`RateLimited` are I/O failures (exit 2).
"""


class KphomogError(Exception):
    """Base class of every error raised by this package."""


class ValidationError(KphomogError):
    """Input data violates a precondition."""


class EmptyPhrase(ValidationError):
    pass


class EmptyReference(ValidationError):
    pass


class EmptyOriginal(ValidationError):
    pass


class EmptyDocument(ValidationError):
    pass


class EmptyCorpus(ValidationError):
    pass


class InsufficientData(ValidationError):
    pass


class ConstantSeries(ValidationError):
    pass


class ParseError(ValidationError):
    def __init__(self, message, line=None, path=None):
        self.line = line
        self.path = path
        where = ""
        if path is not None:
            where += f"{path}:"
        if line is not None:
            where += f"{line}:"
        super().__init__(f"{where} {message}" if where else message)


class MissingField(ParseError):
    pass


class DuplicateId(ParseError):
    pass


class DuplicatePrediction(ParseError):
    pass


class UnresolvedDocId(ValidationError):
    pass


class MissingReferences(ValidationError):
    pass


class NoReferences(ValidationError):
    pass


class NoOverlap(ValidationError):
    pass


class MalformedResponse(ValidationError):
    pass


class TransportError(KphomogError):
    """The endpoint could not be reached after all retry attempts."""


class RateLimited(TransportError):
    """The endpoint kept answering 429 after all retry attempts."""
