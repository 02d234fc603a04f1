"""Exception hierarchy shared across the engine, SQL front end and services."""

from __future__ import annotations


class PyrliteError(Exception):
    """Base class for all errors raised by this package."""


class EncodingError(PyrliteError):
    """A value cannot be represented in the log wire format."""


class LogCorruptionError(PyrliteError):
    """The log file is damaged or was read at a bad offset."""

    def __init__(self, message: str, offset: int, last_good: int | None = None):
        super().__init__(message)
        self.offset = offset
        # Byte offset of the end of the last transaction that decoded cleanly.
        self.last_good = last_good


class DurableAppendError(PyrliteError):
    """A commit could not be written to the log; nothing was installed."""


class RelocationError(PyrliteError):
    """A transaction-temporary uid had no mapping during commit relocation."""


class SqlSyntaxError(PyrliteError):
    def __init__(self, message: str, line: int, column: int):
        super().__init__(f"{message} (line {line}, column {column})")
        self.line = line
        self.column = column


class NameError_(PyrliteError):
    """An identifier did not resolve during binding."""


class AuthorizationError(PyrliteError):
    """User/role lacks a privilege, or the role is not usable by the user."""


class StatementError(PyrliteError):
    """A statement is invalid against the effective schema."""


class SqlRuntimeError(PyrliteError):
    """Runtime evaluation failure (type mismatch, division by zero, ...)."""


class CardinalityError(SqlRuntimeError):
    """A scalar subquery returned more than one row."""


class ConstraintError(PyrliteError):
    def __init__(self, message: str, constraint: str = "", row: int | None = None):
        super().__init__(message)
        self.constraint = constraint
        self.row = row


class TransactionConflict(PyrliteError):
    """Commit validation failed; carries the ConflictReport."""

    def __init__(self, report):
        super().__init__(f"transaction conflict: {report.reason} on {report.conflicting_object}")
        self.report = report


class TransactionTooOld(PyrliteError):
    """The snapshot predates the retained change history; begin again."""


class RestViewError(PyrliteError):
    """A federated fetch could not complete for one or more contributors."""

    def __init__(self, message: str, unreachable=(), reachable=()):
        super().__init__(message)
        self.unreachable = list(unreachable)
        self.reachable = list(reachable)


class SchemaDriftError(PyrliteError):
    """A table definition changed since the client model was generated."""

    def __init__(self, table: str, expected, actual):
        super().__init__(
            f"schema drift on {table}: expected {expected}, server has {actual}")
        self.table = table
        self.expected = expected
        self.actual = actual


class VersionConflictError(PyrliteError):
    """A conditional write lost a race: the row changed since it was read."""


class HttpStatusError(PyrliteError):
    """Unexpected HTTP response from a server or contributor."""

    def __init__(self, status: int, message: str = ""):
        super().__init__(f"HTTP {status}: {message}" if message else f"HTTP {status}")
        self.status = status
