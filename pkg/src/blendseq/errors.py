"""Exception hierarchy shared by every pipeline stage."""


class BlendseqError(Exception):
    """Base class for all errors raised by this package."""


class MalformedRow(BlendseqError):
    def __init__(self, message, *, file=None, line=None):
        self.file = file
        self.line = line
        where = ""
        if file is not None:
            where = f"{file}:"
        if line is not None:
            where += f"line {line}: "
        elif where:
            where += " "
        super().__init__(f"{where}{message}")


class UnknownPlatform(MalformedRow):
    pass


class DuplicateStudent(MalformedRow):
    pass


class EmptyStream(BlendseqError):
    pass


class EmptySession(BlendseqError):
    pass


class NoSessions(BlendseqError):
    pass


class EmptySessionList(BlendseqError):
    pass


class EmptyGroup(BlendseqError):
    pass


class UnknownStudent(BlendseqError):
    pass


class InsufficientData(BlendseqError):
    pass


class InvalidProfile(BlendseqError):
    pass


class InvalidPattern(BlendseqError):
    pass


class ConfigError(BlendseqError):
    pass


class UnwritableOutput(BlendseqError):
    pass


class PipelineError(BlendseqError):
    """A stage failure, tagged with the stage name for CLI diagnostics."""

    def __init__(self, stage, cause):
        self.stage = stage
        self.cause = cause
        super().__init__(f"[{stage}] {cause}")
