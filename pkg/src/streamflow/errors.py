"""Exception hierarchy shared across the platform.

Every error carries a short machine-readable ``code`` that the HTTP layer
copies into ``{"error": code, "message": ...}`` bodies.
"""
from __future__ import annotations


class StreamflowError(Exception):
    code = "Error"


class MalformedDescriptor(StreamflowError):
    code = "MalformedDescriptor"


class ExpressionSyntaxError(MalformedDescriptor):
    code = "ExpressionSyntaxError"

    def __init__(self, stream: str, channel: str | None, offset: int, detail: str):
        self.stream = stream
        self.channel = channel
        self.offset = offset
        where = f"stream '{stream}'" + (f", channel '{channel}'" if channel else "")
        super().__init__(f"{where}: {detail} (offset {offset})")


class DanglingAlias(MalformedDescriptor):
    code = "DanglingAlias"


class MalformedUpdate(StreamflowError):
    code = "MalformedUpdate"


class MalformedSubscription(StreamflowError):
    code = "MalformedSubscription"


class UnknownSource(StreamflowError):
    code = "UnknownSource"


class NotFound(StreamflowError):
    code = "NotFound"


class Conflict(StreamflowError):
    code = "Conflict"


class BadRange(StreamflowError):
    code = "BadRange"


class CompositeWrite(StreamflowError):
    """External data was sent to a stream that only the pipeline may write."""

    code = "CompositeWrite"


class InfeasibleKnobs(StreamflowError):
    code = "InfeasibleKnobs"


class UnknownNode(StreamflowError):
    code = "UnknownNode"


class RuntimeUnhealthy(StreamflowError):
    code = "RuntimeUnhealthy"
