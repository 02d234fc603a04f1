"""Recursive-descent parser for the SQL subset.

Statements: CREATE TABLE/VIEW (including AS GET [USING t])/ROLE/USER,
GRANT/REVOKE, INSERT..VALUES, UPDATE, DELETE, SELECT (expressions, aliases,
scalar subqueries, CASE, CAST, aggregates, ORDER BY), SET ROLE, TABLE t,
DROP, ALTER VIEW/TABLE ADD COLUMN, BEGIN/COMMIT/ROLLBACK.

Metadata words are parsed per the accepted list; unknown words are
rejected with the list of accepted ones.
"""

from __future__ import annotations

import datetime
import functools
from typing import List, Optional, Tuple

from ..errors import SqlSyntaxError
from .ast import (AlterTableAdd, AlterView, BinOp, Case, Cast, ColDef, ColRef,
                  CreateRole, CreateTable, CreateUser, CreateView, Delete,
                  DropStmt, Expr, FkSpec, FuncCall, Grant, Insert, IsNull,
                  Lit, Select, SelectItem, SetRole, Statement, Subquery,
                  TableCmd, TableConstraint, TableRef, TxCmd, TypeSpec, UnOp,
                  Update)
from .lexer import Token, tokenize

METADATA_WORDS = (
    "CAPTION", "LEGEND", "X", "Y", "HISTOGRAM", "LINE", "PIE", "POINTS",
    "URL", "MIME", "SQLAGENT", "USER", "PASSWORD", "JSON", "CSV", "ETAG",
    "MILLI", "MONOTONIC", "INVERTS", "FORMATS", "ATTRIBUTE", "ENTITY",
    "SUFFIX", "PREFIX",
)

_CHART_WORDS = ("HISTOGRAM", "LINE", "PIE", "POINTS")

AGG_KWS = ("SUM", "COUNT", "AVG", "MIN", "MAX")


class _Parser:
    def __init__(self, text: str):
        self.tokens = tokenize(text)
        self.pos = 0

    # -- cursor helpers ----------------------------------------------------

    @property
    def cur(self) -> Token:
        return self.tokens[self.pos]

    def advance(self) -> Token:
        t = self.cur
        if t.kind != "EOF":
            self.pos += 1
        return t

    def err(self, msg, tok: Optional[Token] = None):
        tok = tok or self.cur
        shown = tok.value if tok.kind != "EOF" else "end of input"
        raise SqlSyntaxError(f"{msg} near {shown!r}", tok.line, tok.col)

    def expect_kw(self, *words) -> Token:
        if self.cur.is_kw(*words):
            return self.advance()
        self.err(f"expected {' or '.join(words)}")

    def expect_punct(self, p) -> Token:
        if self.cur.is_punct(p):
            return self.advance()
        self.err(f"expected {p!r}")

    def accept_kw(self, *words) -> bool:
        if self.cur.is_kw(*words):
            self.advance()
            return True
        return False

    def accept_punct(self, p) -> bool:
        if self.cur.is_punct(p):
            self.advance()
            return True
        return False

    def ident(self, what="identifier") -> str:
        t = self.cur
        if t.kind in ("IDENT", "QIDENT"):
            self.advance()
            return t.value
        # contextual keywords usable as names (e.g. a table called DATE
        # stays a keyword; only non-reserved-ish words pass)
        self.err(f"expected {what}")

    def name_or_public(self) -> str:
        if self.cur.is_kw("PUBLIC"):
            self.advance()
            return "PUBLIC"
        if self.cur.is_kw("USER"):    # GRANT ... TO USER "x" form
            self.advance()
        return self.ident("grantee")

    # -- statements ----------------------------------------------------------

    def statement(self) -> Statement:
        t = self.cur
        if t.is_kw("CREATE"):
            return self.create_stmt()
        if t.is_kw("GRANT") or t.is_kw("REVOKE"):
            return self.grant_stmt(revoke=t.value == "REVOKE")
        if t.is_kw("INSERT"):
            return self.insert_stmt()
        if t.is_kw("UPDATE"):
            return self.update_stmt()
        if t.is_kw("DELETE"):
            return self.delete_stmt()
        if t.is_kw("SELECT"):
            return self.select_stmt()
        if t.is_kw("SET"):
            self.advance()
            self.expect_kw("ROLE")
            return SetRole(self.ident("role name"))
        if t.is_kw("TABLE"):
            self.advance()
            return TableCmd(self.ident("table name"))
        if t.is_kw("DROP"):
            self.advance()
            kind = self.expect_kw("TABLE", "VIEW", "ROLE", "USER").value
            return DropStmt(kind, self.ident())
        if t.is_kw("ALTER"):
            return self.alter_stmt()
        if t.is_kw("BEGIN"):
            self.advance()
            self.accept_kw("TRANSACTION", "WORK")
            return TxCmd("BEGIN")
        if t.is_kw("COMMIT"):
            self.advance()
            self.accept_kw("TRANSACTION", "WORK")
            return TxCmd("COMMIT")
        if t.is_kw("ROLLBACK"):
            self.advance()
            self.accept_kw("TRANSACTION", "WORK")
            return TxCmd("ROLLBACK")
        self.err("expected a statement")

    def create_stmt(self) -> Statement:
        self.expect_kw("CREATE")
        t = self.cur
        if t.is_kw("TABLE"):
            return self.create_table()
        if t.is_kw("VIEW"):
            return self.create_view()
        if t.is_kw("ROLE"):
            self.advance()
            return CreateRole(self.ident("role name"))
        if t.is_kw("USER"):
            self.advance()
            return CreateUser(self.ident("user name"))
        self.err("expected TABLE, VIEW, ROLE or USER")

    def typespec(self) -> TypeSpec:
        t = self.cur
        if t.is_kw("INT", "INTEGER"):
            self.advance()
            return TypeSpec("INT")
        if t.is_kw("BOOLEAN"):
            self.advance()
            return TypeSpec("BOOLEAN")
        if t.is_kw("DATE"):
            self.advance()
            return TypeSpec("DATE")
        if t.is_kw("CHAR"):
            self.advance()
            precision = 0
            if self.accept_punct("("):
                precision = self.int_literal()
                self.expect_punct(")")
            return TypeSpec("CHAR", precision)
        if t.is_kw("NUMERIC", "DECIMAL"):
            self.advance()
            precision, scale = 0, None
            if self.accept_punct("("):
                precision = self.int_literal()
                if self.accept_punct(","):
                    scale = self.int_literal()
                self.expect_punct(")")
            return TypeSpec("NUMERIC", precision, scale)
        self.err("expected a type")

    def int_literal(self) -> int:
        t = self.cur
        if t.kind == "NUMBER" and isinstance(t.value, int):
            self.advance()
            return t.value
        self.err("expected an integer")

    def referential_action(self) -> str:
        if self.accept_kw("CASCADE"):
            return "CASCADE"
        if self.accept_kw("RESTRICT"):
            return "RESTRICT"
        if self.accept_kw("SET"):
            self.expect_kw("NULL")
            return "SET_NULL"
        if self.cur.is_kw("NO"):
            self.err("NO ACTION is not available; use CASCADE, RESTRICT or SET NULL")
        self.err("expected CASCADE, RESTRICT or SET NULL")

    def fk_tail(self) -> FkSpec:
        self.expect_kw("REFERENCES")
        table = self.ident("table name")
        cols: Tuple[str, ...] = ()
        if self.accept_punct("("):
            cols = tuple(self.ident_list())
            self.expect_punct(")")
        on_delete, on_update = "CASCADE", "RESTRICT"
        while self.cur.is_kw("ON"):
            self.advance()
            which = self.expect_kw("DELETE", "UPDATE").value
            action = self.referential_action()
            if which == "DELETE":
                on_delete = action
            else:
                on_update = action
        return FkSpec(table, cols, on_delete, on_update)

    def ident_list(self) -> List[str]:
        out = [self.ident()]
        while self.accept_punct(","):
            out.append(self.ident())
        return out

    def create_table(self) -> CreateTable:
        self.expect_kw("TABLE")
        name = self.ident("table name")
        self.expect_punct("(")
        columns, constraints = [], []
        while True:
            if self.cur.is_kw("PRIMARY"):
                self.advance()
                self.expect_kw("KEY")
                self.expect_punct("(")
                constraints.append(TableConstraint(
                    "PRIMARY", tuple(self.ident_list())))
                self.expect_punct(")")
            elif self.cur.is_kw("UNIQUE"):
                self.advance()
                self.expect_punct("(")
                constraints.append(TableConstraint(
                    "UNIQUE", tuple(self.ident_list())))
                self.expect_punct(")")
            elif self.cur.is_kw("FOREIGN"):
                self.advance()
                self.expect_kw("KEY")
                self.expect_punct("(")
                cols = tuple(self.ident_list())
                self.expect_punct(")")
                constraints.append(TableConstraint("FOREIGN", cols,
                                                   fk=self.fk_tail()))
            elif self.cur.is_kw("CHECK"):
                self.advance()
                self.expect_punct("(")
                constraints.append(TableConstraint("CHECK",
                                                   check=self.expression()))
                self.expect_punct(")")
            else:
                columns.append(self.column_def())
            if not self.accept_punct(","):
                break
        self.expect_punct(")")
        return CreateTable(name, tuple(columns), tuple(constraints))

    def column_def(self) -> ColDef:
        cname = self.ident("column name")
        spec = self.typespec()
        notnull = pk = unique = False
        fk = None
        check = None
        while True:
            if self.cur.is_kw("PRIMARY"):
                self.advance()
                self.expect_kw("KEY")
                pk = True
            elif self.cur.is_kw("UNIQUE"):
                self.advance()
                unique = True
            elif self.cur.is_kw("NOT"):
                self.advance()
                self.expect_kw("NULL")
                notnull = True
            elif self.cur.is_kw("REFERENCES"):
                fk = self.fk_tail()
            elif self.cur.is_kw("CHECK"):
                self.advance()
                self.expect_punct("(")
                check = self.expression()
                self.expect_punct(")")
            else:
                break
        return ColDef(cname, spec, notnull, pk, unique, fk, check)

    def create_view(self) -> CreateView:
        self.expect_kw("VIEW")
        name = self.ident("view name")
        colnames: Tuple[str, ...] = ()
        of_columns: Tuple[Tuple[str, TypeSpec], ...] = ()
        if self.accept_punct("("):
            colnames = tuple(self.ident_list())
            self.expect_punct(")")
        if self.accept_kw("OF"):
            self.expect_punct("(")
            cols = [(self.ident(), self.typespec())]
            while self.accept_punct(","):
                cols.append((self.ident(), self.typespec()))
            self.expect_punct(")")
            of_columns = tuple(cols)
        self.expect_kw("AS")
        if self.accept_kw("GET"):
            using = None
            if self.accept_kw("USING"):
                using = self.ident("using-table name")
            metadata = self.metadata_words()
            return CreateView(name, colnames, of_columns, None, True, using,
                              metadata)
        query = self.select_stmt()
        metadata = self.metadata_words()
        return CreateView(name, colnames, of_columns, query, False, None,
                          metadata)

    def metadata_words(self) -> Tuple[Tuple[str, str], ...]:
        out = []
        while True:
            t = self.cur
            if t.kind == "STRING":
                # a bare string is URL metadata
                self.advance()
                out.append(("URL", t.value))
                continue
            word = None
            if t.kind == "IDENT" and t.value in METADATA_WORDS:
                word = t.value
            elif t.is_kw("USER") and self.tokens[self.pos + 1].kind == "STRING":
                word = "USER"
            if word is None:
                if t.kind == "IDENT" and t.kind != "EOF" and not t.is_punct(";"):
                    self.err(f"unknown metadata word {t.value!r}; accepted: "
                             + ", ".join(METADATA_WORDS))
                break
            self.advance()
            value = ""
            if word in _CHART_WORDS and self.accept_punct("("):
                a = self.ident()
                self.expect_punct(",")
                b = self.ident()
                self.expect_punct(")")
                value = f"{a},{b}"
            elif word in ("INVERTS", "FORMATS", "SUFFIX", "PREFIX"):
                value = self.ident()
            elif self.cur.kind == "STRING":
                value = self.advance().value
            out.append((word, value))
        return tuple(out)

    def _grant_target(self, revoke: bool) -> Tuple[str, ...]:
        if revoke and self.cur.is_kw("FROM"):
            self.advance()
        else:
            self.expect_kw("TO")
        grantees = [self.name_or_public()]
        while self.accept_punct(","):
            grantees.append(self.name_or_public())
        return tuple(grantees)

    def grant_stmt(self, revoke: bool) -> Grant:
        self.advance()
        first = self.cur
        is_priv = first.is_kw("SELECT", "INSERT", "UPDATE", "DELETE",
                              "REFERENCES") or \
            (first.kind == "IDENT" and first.value in ("OWNER", "USAGE"))
        if is_priv:
            privs: List[str] = []
            while True:
                kw = self.advance().value
                privs.append("SELECT" if kw == "REFERENCES" else kw)
                if not self.accept_punct(","):
                    break
            self.expect_kw("ON")
            self.accept_kw("TABLE")
            obj = self.ident("object name")
            return Grant(tuple(privs), None, obj,
                         self._grant_target(revoke), revoke)
        role = self.ident("role name")
        return Grant((), role, None, self._grant_target(revoke), revoke)

    def insert_stmt(self) -> Insert:
        self.expect_kw("INSERT")
        self.expect_kw("INTO")
        table = self.ident("table name")
        columns: Tuple[str, ...] = ()
        if self.accept_punct("("):
            columns = tuple(self.ident_list())
            self.expect_punct(")")
        self.expect_kw("VALUES")
        rows = []
        while True:
            self.expect_punct("(")
            row = [self.expression()]
            while self.accept_punct(","):
                row.append(self.expression())
            self.expect_punct(")")
            rows.append(tuple(row))
            if not self.accept_punct(","):
                break
        return Insert(table, columns, tuple(rows))

    def update_stmt(self) -> Update:
        self.expect_kw("UPDATE")
        table = self.ident("table name")
        self.expect_kw("SET")
        sets = []
        while True:
            col = self.ident("column name")
            self.expect_punct("=")
            sets.append((col, self.expression()))
            if not self.accept_punct(","):
                break
        where = self.expression() if self.accept_kw("WHERE") else None
        return Update(table, tuple(sets), where)

    def delete_stmt(self) -> Delete:
        self.expect_kw("DELETE")
        self.expect_kw("FROM")
        table = self.ident("table name")
        where = self.expression() if self.accept_kw("WHERE") else None
        return Delete(table, where)

    def alter_stmt(self) -> Statement:
        self.expect_kw("ALTER")
        if self.accept_kw("VIEW"):
            name = self.ident("view name")
            self.expect_kw("AS")
            return AlterView(name, self.select_stmt())
        self.expect_kw("TABLE")
        table = self.ident("table name")
        self.expect_kw("ADD")
        self.accept_kw("COLUMN")
        return AlterTableAdd(table, self.column_def())

    def select_stmt(self) -> Select:
        self.expect_kw("SELECT")
        items = [self.select_item()]
        while self.accept_punct(","):
            items.append(self.select_item())
        froms: List[TableRef] = []
        if self.accept_kw("FROM"):
            froms.append(self.table_ref())
            while self.accept_punct(","):
                froms.append(self.table_ref())
        where = self.expression() if self.accept_kw("WHERE") else None
        order = []
        if self.accept_kw("ORDER"):
            self.expect_kw("BY")
            while True:
                e = self.expression()
                asc = True
                if self.accept_kw("DESC"):
                    asc = False
                else:
                    self.accept_kw("ASC")
                order.append((e, asc))
                if not self.accept_punct(","):
                    break
        return Select(tuple(items), tuple(froms), where, tuple(order))

    def select_item(self) -> SelectItem:
        if self.cur.is_punct("*"):
            self.advance()
            return SelectItem(star=True)
        e = self.expression()
        return SelectItem(e, self._bare_alias())

    def _bare_alias(self) -> Optional[str]:
        """Alias with or without AS; metadata words need explicit AS."""
        if self.accept_kw("AS"):
            return self.ident("alias")
        t = self.cur
        if t.kind == "QIDENT" or \
                (t.kind == "IDENT" and t.value not in METADATA_WORDS):
            return self.advance().value
        return None

    def table_ref(self) -> TableRef:
        name = self.ident("table name")
        return TableRef(name, self._bare_alias())

    # -- expressions: precedence climbing -----------------------------------

    def expression(self) -> Expr:
        return self.or_expr()

    def or_expr(self) -> Expr:
        e = self.and_expr()
        while self.cur.is_kw("OR"):
            self.advance()
            e = BinOp("OR", e, self.and_expr())
        return e

    def and_expr(self) -> Expr:
        e = self.not_expr()
        while self.cur.is_kw("AND"):
            self.advance()
            e = BinOp("AND", e, self.not_expr())
        return e

    def not_expr(self) -> Expr:
        if self.cur.is_kw("NOT"):
            self.advance()
            return UnOp("NOT", self.not_expr())
        return self.comparison()

    def comparison(self) -> Expr:
        e = self.additive()
        t = self.cur
        if t.is_punct("=", "<>", "<", "<=", ">", ">="):
            op = self.advance().value
            return BinOp(op, e, self.additive())
        if t.is_kw("IS"):
            self.advance()
            negated = self.accept_kw("NOT")
            self.expect_kw("NULL")
            return IsNull(e, negated)
        return e

    def additive(self) -> Expr:
        e = self.multiplicative()
        while self.cur.is_punct("+", "-", "||"):
            op = self.advance().value
            e = BinOp(op, e, self.multiplicative())
        return e

    def multiplicative(self) -> Expr:
        e = self.unary()
        while self.cur.is_punct("*", "/"):
            op = self.advance().value
            e = BinOp(op, e, self.unary())
        return e

    def unary(self) -> Expr:
        if self.cur.is_punct("-"):
            self.advance()
            return UnOp("-", self.unary())
        if self.cur.is_punct("+"):
            self.advance()
            return self.unary()
        return self.primary()

    def primary(self) -> Expr:
        t = self.cur
        if t.kind == "NUMBER":
            self.advance()
            return Lit(t.value)
        if t.kind == "STRING":
            self.advance()
            return Lit(t.value)
        if t.is_kw("NULL"):
            self.advance()
            return Lit(None)
        if t.is_kw("TRUE"):
            self.advance()
            return Lit(True)
        if t.is_kw("FALSE"):
            self.advance()
            return Lit(False)
        if t.is_kw("DATE") and self.tokens[self.pos + 1].kind == "STRING":
            self.advance()
            raw = self.advance().value
            try:
                return Lit(datetime.date.fromisoformat(raw))
            except ValueError:
                self.err(f"bad date literal {raw!r}", t)
        if t.is_kw("CASE"):
            return self.case_expr()
        if t.is_kw("CAST"):
            self.advance()
            self.expect_punct("(")
            e = self.expression()
            self.expect_kw("AS")
            spec = self.typespec()
            self.expect_punct(")")
            return Cast(e, spec)
        if t.is_kw(*AGG_KWS):
            name = self.advance().value
            self.expect_punct("(")
            if name == "COUNT" and self.accept_punct("*"):
                self.expect_punct(")")
                return FuncCall("COUNT", None, star=True)
            arg = self.expression()
            self.expect_punct(")")
            return FuncCall(name, arg)
        if t.is_punct("("):
            self.advance()
            if self.cur.is_kw("SELECT"):
                sub = self.select_stmt()
                self.expect_punct(")")
                return Subquery(sub)
            e = self.expression()
            self.expect_punct(")")
            return e
        if t.kind in ("IDENT", "QIDENT"):
            first = self.advance().value
            if self.accept_punct("."):
                second = self.ident("column name")
                return ColRef((first, second))
            return ColRef((first,))
        self.err("expected an expression")

    def case_expr(self) -> Case:
        self.expect_kw("CASE")
        whens = []
        while self.cur.is_kw("WHEN"):
            self.advance()
            c = self.expression()
            self.expect_kw("THEN")
            whens.append((c, self.expression()))
        otherwise = None
        if self.accept_kw("ELSE"):
            otherwise = self.expression()
        self.expect_kw("END")
        if not whens:
            self.err("CASE requires at least one WHEN")
        return Case(tuple(whens), otherwise)


def parse_statement(text: str) -> Statement:
    p = _Parser(text)
    stmt = p.statement()
    p.accept_punct(";")
    if p.cur.kind != "EOF":
        p.err("unexpected trailing input")
    return stmt


@functools.lru_cache(maxsize=512)
def parse_expression(text: str) -> Expr:
    p = _Parser(text)
    e = p.expression()
    if p.cur.kind != "EOF":
        p.err("unexpected trailing input")
    return e
