"""Exception hierarchy shared by every tcefuzz module."""

from typing import Optional


class TcefuzzError(Exception):
    """Root of all expected failures raised by the fuzzer itself."""


class ParseError(TcefuzzError):
    def __init__(self, message: str, span=None):
        self.message = message
        self.span = span
        where = f"{span.start}: " if span is not None else ""
        super().__init__(f"{where}{message}")


class PrintError(TcefuzzError):
    pass


class UnknownNode(TcefuzzError):
    def __init__(self, node_id: int):
        self.node_id = node_id
        super().__init__(f"unknown node id {node_id}")


class MergeConflict(TcefuzzError):
    pass


class Untypeable(TcefuzzError):
    pass


class BoundUnsatisfiable(TcefuzzError):
    pass


class DepthExhausted(TcefuzzError):
    pass


class NoCandidate(TcefuzzError):
    pass


class ConfigError(TcefuzzError):
    pass


class EmptyCorpus(TcefuzzError):
    pass


class BudgetExhausted(TcefuzzError):
    pass


class CompilerFault(Exception):
    """Raised by an injected fault inside the compiler under test.

    Not a TcefuzzError: crash capture catches this type only.
    """

    def __init__(self, fault: str, phase: str, kind: str, message: Optional[str] = None,
                 site: Optional[str] = None):
        self.fault = fault
        self.phase = phase
        self.kind = kind
        # compiler location of the defect, shared by every raise of one fault
        self.site = site
        super().__init__(message or f"{phase} crash: {kind}")
