"""lcoracle.errors — exception hierarchy shared by every layer.

Library code raises these; the CLI turns them into `{"ok": false, ...}` /
stderr + exit 1, the MCP server into error dicts. Nothing here imports from
the rest of the package.
"""

from __future__ import annotations

from typing import Any


class LcoracleError(Exception):
    """Base class for every error this package raises on purpose."""


class ConfigError(LcoracleError):
    """Unknown config key, bad value, or unreadable config file."""


class MalformedBatch(LcoracleError):
    """A batch references a missing edge/vertex or reuses a retired id."""


class NonIsolatedDeletion(LcoracleError):
    """Isolated-vertex deletion of a vertex that still has edges."""


class UnknownVertex(LcoracleError):
    """A query or operation names a vertex the structure does not hold."""


class StaleClusterId(LcoracleError):
    """A cluster id that was never issued or has since died."""


class PreconditionViolated(LcoracleError):
    """An operation's documented precondition does not hold on its input."""


class BudgetExceeded(LcoracleError):
    """A structure was asked to absorb more updates than it was built for."""


class DuplicateEndpoint(LcoracleError):
    """A matching reuses an endpoint or targets a non-fresh vertex."""


class IterationCapExceeded(LcoracleError):
    """An iterative closure did not converge within its cap."""


class BatchTooLarge(LcoracleError):
    """A batch is larger than the structure's φ·|G| admission bound."""


class NotAPath(LcoracleError):
    """A vertex/edge sequence is not a walk in the graph it claims."""


class EndpointNotTerminal(LcoracleError):
    """Path unfolding was asked for a path whose endpoint is not a terminal."""


class QueryWasFar(LcoracleError):
    """Path reporting was asked for a pair the oracle declared FAR."""


class BackendFailure(LcoracleError):
    """A distance backend returned no path for a connected pair."""


class InstanceTooLarge(LcoracleError):
    """A brute-force oracle was handed an instance above its cap."""


class ParseError(LcoracleError):
    """Malformed trace or instance file line."""

    def __init__(self, line_no: int, message: str) -> None:
        super().__init__(f"line {line_no}: {message}")
        self.line_no = line_no


class AuditFailure(LcoracleError):
    """A verification audit failed; `details` names the failing checks."""

    def __init__(self, message: str, details: dict[str, Any] | None = None) -> None:
        super().__init__(message)
        self.details = details or {}
