"""Exception types shared across the package."""


class SpanwalkError(Exception):
    """Base class for all package errors."""


class FormatError(SpanwalkError):
    """A document, dump, parse, or dataset file violates its format contract."""


class ChannelError(SpanwalkError):
    """A plug-in channel failed to produce a usable response."""
