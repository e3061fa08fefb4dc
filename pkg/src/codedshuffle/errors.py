"""Exception hierarchy shared by every module."""


class CodedShuffleError(Exception):
    pass


class ParameterError(CodedShuffleError, ValueError):
    """A parameter constraint was violated before any work started."""


class ProtocolError(CodedShuffleError, RuntimeError):
    """The protocol reached a state its correctness argument rules out.

    Raising one of these always indicates a bug (or tampered state), never bad
    user input.
    """


class PreconditionError(ProtocolError):
    pass


class IncompleteRoundError(ProtocolError):
    pass


class CorruptRoundError(ProtocolError):
    pass


class ReportError(CodedShuffleError):
    pass
