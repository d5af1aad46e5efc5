"""Exception hierarchy shared by every pipeline stage."""


class LogSentinelError(Exception):
    """Base class; the CLI maps subclasses to exit code 2."""

    stage = "pipeline"


class MalformedLine(LogSentinelError):
    stage = "ingest"

    def __init__(self, message, line_number=None):
        super().__init__(message)
        self.line_number = line_number


class IoFailure(LogSentinelError):
    stage = "io"


class EmptyJoin(LogSentinelError):
    stage = "build"


class SchemaMismatch(LogSentinelError):
    stage = "schema"


class SingleClass(LogSentinelError):
    stage = "fit"


class NonFiniteInput(LogSentinelError):
    stage = "fit"


class ZeroMargin(LogSentinelError):
    stage = "select"


class LengthMismatch(LogSentinelError):
    stage = "metrics"


class PerplexityTooLarge(LogSentinelError):
    stage = "project"


class TooFewRows(LogSentinelError):
    stage = "split"


class ConfigError(LogSentinelError):
    stage = "config"
