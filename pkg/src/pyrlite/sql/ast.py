"""Statement and expression syntax trees, with a canonical printer.

``to_sql`` emits text that reparses to a structurally equal tree; it is
also how predicates travel to remote contributors.
"""

from __future__ import annotations

import datetime
from dataclasses import dataclass
from typing import Optional, Tuple

from ..values import Real
from .lexer import KEYWORDS


def quote_ident(name: str) -> str:
    if name and name.isupper() and name not in KEYWORDS \
            and name.replace("_", "A").replace("$", "A").isalnum() \
            and not name[0].isdigit():
        return name
    return '"' + name.replace('"', '""') + '"'


def quote_string(s: str) -> str:
    return "'" + s.replace("'", "''") + "'"


# -- expressions ------------------------------------------------------------

@dataclass(frozen=True)
class Expr:
    def to_sql(self) -> str:
        raise NotImplementedError


@dataclass(frozen=True)
class Lit(Expr):
    value: object

    def to_sql(self):
        v = self.value
        if v is None:
            return "NULL"
        if isinstance(v, bool):
            return "TRUE" if v else "FALSE"
        if isinstance(v, (int, Real)):
            return str(v)
        if isinstance(v, datetime.date):
            return f"DATE '{v.isoformat()}'"
        return quote_string(v)


@dataclass(frozen=True)
class ColRef(Expr):
    parts: Tuple[str, ...]    # NAME or (QUALIFIER, NAME)

    def to_sql(self):
        return ".".join(quote_ident(p) for p in self.parts)


@dataclass(frozen=True)
class BinOp(Expr):
    op: str
    left: Expr
    right: Expr

    def to_sql(self):
        return f"({self.left.to_sql()} {self.op} {self.right.to_sql()})"


@dataclass(frozen=True)
class UnOp(Expr):
    op: str                   # NOT | -
    operand: Expr

    def to_sql(self):
        if self.op == "NOT":
            return f"(NOT {self.operand.to_sql()})"
        return f"(- {self.operand.to_sql()})"


@dataclass(frozen=True)
class IsNull(Expr):
    operand: Expr
    negated: bool = False

    def to_sql(self):
        suffix = "IS NOT NULL" if self.negated else "IS NULL"
        return f"({self.operand.to_sql()} {suffix})"


@dataclass(frozen=True)
class Case(Expr):
    whens: Tuple[Tuple[Expr, Expr], ...]
    otherwise: Optional[Expr] = None

    def to_sql(self):
        parts = ["CASE"]
        for c, r in self.whens:
            parts.append(f"WHEN {c.to_sql()} THEN {r.to_sql()}")
        if self.otherwise is not None:
            parts.append(f"ELSE {self.otherwise.to_sql()}")
        parts.append("END")
        return " ".join(parts)


@dataclass(frozen=True)
class TypeSpec:
    base: str                 # INT | CHAR | NUMERIC | BOOLEAN | DATE
    precision: int = 0
    scale: Optional[int] = None

    def to_sql(self):
        if self.scale is not None:
            return f"{self.base}({self.precision},{self.scale})"
        if self.precision:
            return f"{self.base}({self.precision})"
        return self.base


@dataclass(frozen=True)
class Cast(Expr):
    operand: Expr
    typespec: TypeSpec

    def to_sql(self):
        return f"CAST({self.operand.to_sql()} AS {self.typespec.to_sql()})"


@dataclass(frozen=True)
class FuncCall(Expr):
    name: str                 # SUM | COUNT | AVG | MIN | MAX
    arg: Optional[Expr]       # None for COUNT(*)
    star: bool = False

    def to_sql(self):
        inner = "*" if self.star else self.arg.to_sql()
        return f"{self.name}({inner})"


@dataclass(frozen=True)
class Subquery(Expr):
    select: "Select"

    def to_sql(self):
        return f"({self.select.to_sql()})"


AGGREGATES = ("SUM", "COUNT", "AVG", "MIN", "MAX")


def contains_aggregate(e: Expr) -> bool:
    """Aggregate call in this expression, not counting nested subqueries."""
    if isinstance(e, FuncCall) and e.name in AGGREGATES:
        return True
    if isinstance(e, BinOp):
        return contains_aggregate(e.left) or contains_aggregate(e.right)
    if isinstance(e, (UnOp, IsNull)):
        return contains_aggregate(e.operand)
    if isinstance(e, Cast):
        return contains_aggregate(e.operand)
    if isinstance(e, Case):
        for c, r in e.whens:
            if contains_aggregate(c) or contains_aggregate(r):
                return True
        return e.otherwise is not None and contains_aggregate(e.otherwise)
    return False


# -- statements ---------------------------------------------------------------

@dataclass(frozen=True)
class Statement:
    def to_sql(self) -> str:
        raise NotImplementedError


@dataclass(frozen=True)
class FkSpec:
    table: str
    columns: Tuple[str, ...] = ()        # referenced columns; () = parent PK
    on_delete: str = "CASCADE"
    on_update: str = "RESTRICT"

    def to_sql(self):
        s = f"REFERENCES {quote_ident(self.table)}"
        if self.columns:
            s += "(" + ", ".join(quote_ident(c) for c in self.columns) + ")"
        s += f" ON DELETE {self.on_delete.replace('_', ' ')}"
        s += f" ON UPDATE {self.on_update.replace('_', ' ')}"
        return s


@dataclass(frozen=True)
class ColDef:
    name: str
    typespec: TypeSpec
    notnull: bool = False
    primary_key: bool = False
    unique: bool = False
    references: Optional[FkSpec] = None
    check: Optional[Expr] = None

    def to_sql(self):
        parts = [quote_ident(self.name), self.typespec.to_sql()]
        if self.primary_key:
            parts.append("PRIMARY KEY")
        if self.unique:
            parts.append("UNIQUE")
        if self.notnull:
            parts.append("NOT NULL")
        if self.references:
            parts.append(self.references.to_sql())
        if self.check is not None:
            parts.append(f"CHECK ({self.check.to_sql()})")
        return " ".join(parts)


@dataclass(frozen=True)
class TableConstraint:
    kind: str                           # PRIMARY | UNIQUE | FOREIGN | CHECK
    columns: Tuple[str, ...] = ()
    fk: Optional[FkSpec] = None
    check: Optional[Expr] = None

    def to_sql(self):
        cols = "(" + ", ".join(quote_ident(c) for c in self.columns) + ")"
        if self.kind == "PRIMARY":
            return f"PRIMARY KEY {cols}"
        if self.kind == "UNIQUE":
            return f"UNIQUE {cols}"
        if self.kind == "FOREIGN":
            return f"FOREIGN KEY {cols} {self.fk.to_sql()}"
        return f"CHECK ({self.check.to_sql()})"


@dataclass(frozen=True)
class CreateTable(Statement):
    name: str
    columns: Tuple[ColDef, ...]
    constraints: Tuple[TableConstraint, ...] = ()

    def to_sql(self):
        items = [c.to_sql() for c in self.columns]
        items += [c.to_sql() for c in self.constraints]
        return f"CREATE TABLE {quote_ident(self.name)} (" + ", ".join(items) + ")"


@dataclass(frozen=True)
class CreateView(Statement):
    name: str
    colnames: Tuple[str, ...] = ()                        # view(a, b) form
    of_columns: Tuple[Tuple[str, TypeSpec], ...] = ()     # OF (a int, ...) form
    query: Optional["Select"] = None
    get: bool = False
    using: Optional[str] = None
    metadata: Tuple[Tuple[str, str], ...] = ()

    def to_sql(self):
        s = f"CREATE VIEW {quote_ident(self.name)}"
        if self.colnames:
            s += "(" + ", ".join(quote_ident(c) for c in self.colnames) + ")"
        if self.of_columns:
            s += " OF (" + ", ".join(
                f"{quote_ident(n)} {t.to_sql()}" for n, t in self.of_columns) + ")"
        s += " AS "
        if self.get:
            s += "GET"
            if self.using:
                s += f" USING {quote_ident(self.using)}"
        else:
            s += self.query.to_sql()
        for word, val in self.metadata:
            s += f" {word} {quote_string(val)}" if val else f" {word}"
        return s


@dataclass(frozen=True)
class CreateRole(Statement):
    name: str

    def to_sql(self):
        return f"CREATE ROLE {quote_ident(self.name)}"


@dataclass(frozen=True)
class CreateUser(Statement):
    name: str

    def to_sql(self):
        return f"CREATE USER {quote_ident(self.name)}"


@dataclass(frozen=True)
class Grant(Statement):
    privileges: Tuple[str, ...] = ()     # empty = role grant
    role: Optional[str] = None
    object: Optional[str] = None
    grantees: Tuple[str, ...] = ()
    revoke: bool = False

    def to_sql(self):
        verb = "REVOKE" if self.revoke else "GRANT"
        to = "FROM" if self.revoke else "TO"
        names = ", ".join(quote_ident(g) if g != "PUBLIC" else "PUBLIC"
                          for g in self.grantees)
        if self.role is not None:
            return f"{verb} {quote_ident(self.role)} {to} {names}"
        privs = ", ".join(self.privileges)
        return f"{verb} {privs} ON {quote_ident(self.object)} {to} {names}"


@dataclass(frozen=True)
class Insert(Statement):
    table: str
    columns: Tuple[str, ...] = ()
    rows: Tuple[Tuple[Expr, ...], ...] = ()

    def to_sql(self):
        s = f"INSERT INTO {quote_ident(self.table)}"
        if self.columns:
            s += "(" + ", ".join(quote_ident(c) for c in self.columns) + ")"
        s += " VALUES " + ", ".join(
            "(" + ", ".join(e.to_sql() for e in row) + ")" for row in self.rows)
        return s


@dataclass(frozen=True)
class Update(Statement):
    table: str
    assignments: Tuple[Tuple[str, Expr], ...]
    where: Optional[Expr] = None

    def to_sql(self):
        s = f"UPDATE {quote_ident(self.table)} SET " + ", ".join(
            f"{quote_ident(c)} = {e.to_sql()}" for c, e in self.assignments)
        if self.where is not None:
            s += f" WHERE {self.where.to_sql()}"
        return s


@dataclass(frozen=True)
class Delete(Statement):
    table: str
    where: Optional[Expr] = None

    def to_sql(self):
        s = f"DELETE FROM {quote_ident(self.table)}"
        if self.where is not None:
            s += f" WHERE {self.where.to_sql()}"
        return s


@dataclass(frozen=True)
class SelectItem:
    expr: Optional[Expr] = None
    alias: Optional[str] = None
    star: bool = False

    def to_sql(self):
        if self.star:
            return "*"
        s = self.expr.to_sql()
        if self.alias:
            s += f" AS {quote_ident(self.alias)}"
        return s


@dataclass(frozen=True)
class TableRef:
    name: str
    alias: Optional[str] = None

    def to_sql(self):
        s = quote_ident(self.name)
        if self.alias:
            s += f" AS {quote_ident(self.alias)}"
        return s


@dataclass(frozen=True)
class Select(Statement):
    items: Tuple[SelectItem, ...]
    froms: Tuple[TableRef, ...] = ()
    where: Optional[Expr] = None
    order: Tuple[Tuple[Expr, bool], ...] = ()   # (key, ascending)

    def to_sql(self):
        s = "SELECT " + ", ".join(i.to_sql() for i in self.items)
        if self.froms:
            s += " FROM " + ", ".join(f.to_sql() for f in self.froms)
        if self.where is not None:
            s += f" WHERE {self.where.to_sql()}"
        if self.order:
            s += " ORDER BY " + ", ".join(
                f"{e.to_sql()} {'ASC' if asc else 'DESC'}" for e, asc in self.order)
        return s


@dataclass(frozen=True)
class SetRole(Statement):
    name: str

    def to_sql(self):
        return f"SET ROLE {quote_ident(self.name)}"


@dataclass(frozen=True)
class TableCmd(Statement):
    name: str

    def to_sql(self):
        return f"TABLE {quote_ident(self.name)}"


@dataclass(frozen=True)
class DropStmt(Statement):
    kind: str                 # TABLE | VIEW | ROLE | USER
    name: str

    def to_sql(self):
        return f"DROP {self.kind} {quote_ident(self.name)}"


@dataclass(frozen=True)
class AlterView(Statement):
    name: str
    query: Select

    def to_sql(self):
        return f"ALTER VIEW {quote_ident(self.name)} AS {self.query.to_sql()}"


@dataclass(frozen=True)
class AlterTableAdd(Statement):
    table: str
    column: ColDef

    def to_sql(self):
        return f"ALTER TABLE {quote_ident(self.table)} ADD COLUMN {self.column.to_sql()}"


@dataclass(frozen=True)
class TxCmd(Statement):
    action: str               # BEGIN | COMMIT | ROLLBACK

    def to_sql(self):
        return self.action
