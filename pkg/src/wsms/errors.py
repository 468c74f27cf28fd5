"""Exception hierarchy shared by every stage of the pipeline."""

from __future__ import annotations


class WsmsError(Exception):
    """Base class for all domain errors raised by this package."""


class CatalogError(WsmsError):
    """Malformed catalog text or a violated catalog invariant."""


class CycleError(CatalogError):
    """Precedence edges contain a cycle."""

    def __init__(self, members):
        self.members = tuple(sorted(set(members)))
        super().__init__("precedence cycle among {" + ", ".join(self.members) + "}")


class QueryError(WsmsError):
    """Base class for errors in the query front end."""


class LexError(QueryError):
    def __init__(self, message: str, position: int):
        self.position = position
        super().__init__(f"{message} at offset {position}")


class QuerySyntaxError(QueryError):
    def __init__(self, message: str, position: int, expected: tuple[str, ...] = ()):
        self.position = position
        self.expected = expected
        detail = f"{message} at offset {position}"
        if expected:
            detail += " (expected " + " or ".join(expected) + ")"
        super().__init__(detail)


class ValidationError(QueryError):
    """Query names do not resolve against the catalog."""


class PlanningError(WsmsError):
    """Planner could not produce a plan (size guard, unsatisfiable capability...)."""


class ExecutionError(WsmsError):
    """Failure while evaluating a plan."""


class TypeMismatchError(ExecutionError):
    """Integer and string values compared or joined."""


class FabricError(ExecutionError):
    """The simulated service fabric rejected an invocation."""
