"""Exception types shared across the package."""


class QFGError(Exception):
    """Base class for all package errors."""


class ImpossibleOutcomeError(QFGError, ValueError):
    """A forced measurement outcome has (numerically) zero probability."""


class InvalidStateError(QFGError, RuntimeError):
    """An operation was requested that the current registry state forbids."""


class ContradictoryGraphError(QFGError, ValueError):
    """The factor graph assigns zero total mass to every assignment."""


class ResourceLimitError(QFGError, RuntimeError):
    """A dense representation would exceed the configured size cap."""


class GraphParseError(QFGError, ValueError):
    """A graph document failed validation."""
