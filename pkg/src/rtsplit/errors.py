class RtsplitError(Exception):
    """Base class for all package errors."""


class MalformedAudio(RtsplitError):
    pass


class UnsupportedFormat(RtsplitError):
    def __init__(self, field: str, value, expected):
        self.field = field
        self.value = value
        self.expected = expected
        super().__init__(f"unsupported {field}: {value!r} (expected {expected!r})")


class InvalidTimeline(RtsplitError):
    pass


class InvalidCorpus(RtsplitError):
    pass


class DegenerateFit(RtsplitError):
    pass


class BackendUnavailable(RtsplitError):
    pass


class ProtocolError(RtsplitError):
    pass


class IncompleteFrame(RtsplitError):
    """Raised by the decoder when the buffer does not hold a whole frame yet."""

    def __init__(self, needed: int):
        self.needed = needed
        super().__init__(f"need {needed} more bytes")
