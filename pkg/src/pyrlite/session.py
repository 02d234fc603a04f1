"""Statement sessions: autocommit per statement or explicit BEGIN/COMMIT.

One session holds at most one open transaction.  Errors never kill the
session: a failed statement leaves the open transaction exactly as it was
before the statement (transactions are immutable values), and autocommit
failures simply discard the work.
"""

from __future__ import annotations

from typing import Optional

from .engine import Database, may_use_role
from .errors import AuthorizationError, PyrliteError
from .snapshot import NS_ROLE
from .sql.ast import SetRole, TxCmd
from .sql.executor import Result, execute_statement
from .sql.parser import parse_statement


def _remote_sender():
    from .restsvc.client import send_remote_write
    return send_remote_write


class Session:
    def __init__(self, db: Database, user: str, role: Optional[str] = None):
        self.db = db
        self.user = user
        self.role = role
        self.tx = None
        db.begin(user, role)   # fail fast on bad identity/role

    @property
    def in_transaction(self) -> bool:
        return self.tx is not None

    def run(self, text: str) -> Result:
        stmt = parse_statement(text)
        if isinstance(stmt, TxCmd):
            return self._tx_command(stmt.action)
        if isinstance(stmt, SetRole):
            return self._set_role(stmt.name)
        explicit = self.tx is not None
        tx = self.tx if explicit else self.db.begin(self.user, self.role)
        result = execute_statement(tx, stmt)
        if explicit:
            self.tx = result.tx
            return result
        self.db.commit(result.tx, send_remote=_remote_sender())
        result.tx = None
        return result

    def _tx_command(self, action: str) -> Result:
        if action == "BEGIN":
            if self.tx is not None:
                raise PyrliteError("a transaction is already open")
            self.tx = self.db.begin(self.user, self.role)
            return Result([], None, None, None, message="transaction started")
        if action == "COMMIT":
            if self.tx is None:
                return Result([], None, None, None,
                              message="warning: no open transaction")
            tx, self.tx = self.tx, None
            self.db.commit(tx, send_remote=_remote_sender())
            return Result([], None, None, None, message="committed")
        if self.tx is None:
            return Result([], None, None, None,
                          message="warning: no open transaction")
        self.tx = None   # a rolled-back transaction is simply forgotten
        return Result([], None, None, None, message="rolled back")

    def _set_role(self, name: str) -> Result:
        if self.tx is not None:
            raise PyrliteError("cannot change role inside a transaction")
        snap = self.db.snapshot
        user_obj = snap.user_by_name(self.user)
        user = user_obj.uid if user_obj is not None else self.user
        if name.upper() == "PUBLIC":
            self.role = "PUBLIC"
            return Result([], None, None, None, message="role is PUBLIC")
        role_uid = snap.resolve(NS_ROLE, name)
        if role_uid is None or not may_use_role(snap, user, role_uid):
            raise AuthorizationError(f"cannot set role {name}")
        self.role = name
        return Result([], None, None, None, message=f"role is {name}")
