"""Parsing the SQL subset: accepted shapes, errors, and print round-trips."""

import datetime

import pytest

from pyrlite.errors import SqlSyntaxError
from pyrlite.sql.ast import (BinOp, Case, Cast, ColRef, CreateTable,
                             CreateView, FuncCall, Grant, Insert, Lit,
                             Select, Subquery, TypeSpec)
from pyrlite.sql.parser import parse_expression, parse_statement
from pyrlite.values import Real


def test_create_table_sales():
    s = parse_statement(
        "create table sales (cust char(12) primary key, "
        "custSales numeric(8,2))")
    assert isinstance(s, CreateTable)
    assert s.name == "SALES"
    c0, c1 = s.columns
    assert c0.name == "CUST" and c0.primary_key
    assert c0.typespec == TypeSpec("CHAR", 12)
    assert c1.name == "CUSTSALES" and c1.typespec == TypeSpec("NUMERIC", 8, 2)


def test_create_restview_with_url():
    s = parse_statement(
        "create view VV of (E int, F char) as get "
        "'http://localhost:8188/DB/DB/t'")
    assert isinstance(s, CreateView) and s.get
    assert s.of_columns == (("E", TypeSpec("INT")), ("F", TypeSpec("CHAR")))
    assert ("URL", "http://localhost:8188/DB/DB/t") in s.metadata
    assert s.using is None


def test_create_restview_using():
    s = parse_statement(
        "create view WW of (E int, D char, K int, F char) as get using VU")
    assert s.get and s.using == "VU"
    assert [n for n, _ in s.of_columns] == ["E", "D", "K", "F"]


def test_syntax_error_with_position():
    with pytest.raises(SqlSyntaxError) as e:
        parse_statement("select * frm t")
    assert "FRM" in str(e.value) or "frm" in str(e.value).lower()
    assert e.value.line == 1


def test_unknown_metadata_word_lists_accepted():
    with pytest.raises(SqlSyntaxError, match="accepted"):
        parse_statement("create view v of (a int) as get 'u' SPARKLINE")


def test_metadata_words_parsed_and_kept():
    s = parse_statement(
        "create view v of (a int) as get url 'http://x' mime 'text/plain' "
        "etag caption 'Sales' pie(a, a)")
    words = dict(s.metadata)
    assert words["URL"] == "http://x"
    assert words["MIME"] == "text/plain"
    assert "ETAG" in words
    assert words["CAPTION"] == "Sales"
    assert words["PIE"] == "A,A"


def test_doubled_quotes_and_concat():
    e = parse_expression("'it''s' || \"Weird \"\"Name\"\"\"")
    assert isinstance(e, BinOp) and e.op == "||"
    assert e.left == Lit("it's")
    assert e.right == ColRef(('Weird "Name"',))


def test_identifier_case_folding():
    s = parse_statement('select custSales, "mixedCase" from sales')
    assert s.items[0].expr == ColRef(("CUSTSALES",))
    assert s.items[1].expr == ColRef(("MIXEDCASE",)) or \
        s.items[1].expr == ColRef(("mixedCase",))
    # delimited identifiers keep their case
    assert s.items[1].expr == ColRef(("mixedCase",))


def test_select_with_alias_subqueries_case_cast():
    text = ("select case when runningSalesShare <= 0.5 then 'A' "
            "when runningSalesShare > 0.5 and runningSalesShare <= 0.85 "
            "then 'B' when runningSalesShare > 0.85 then 'C' else null end "
            "as Category, cust, custSales, "
            "cast(cast(custSales / (select sum(custSales) from sales_V) * 100 "
            "as decimal(6, 2)) as char(6)) || '%' as share "
            "from sales_V order by custSales desc")
    s = parse_statement(text)
    assert isinstance(s, Select)
    assert s.items[0].alias == "CATEGORY"
    assert isinstance(s.items[0].expr, Case)
    assert len(s.items[0].expr.whens) == 3
    share = s.items[3].expr
    assert isinstance(share, BinOp) and share.op == "||"
    assert isinstance(share.left, Cast)
    assert share.left.typespec == TypeSpec("CHAR", 6)
    assert s.order[0][1] is False   # descending


def test_correlated_subquery_view():
    text = ("create view sales_V(cust, custSales, runningSalesShare) as "
            "select cust, custSales, "
            "(select sum(custSales) from sales where custSales >= u.custSales)"
            " / (select sum(custSales) from sales) from sales as u")
    s = parse_statement(text)
    assert s.colnames == ("CUST", "CUSTSALES", "RUNNINGSALESSHARE")
    ratio = s.query.items[2].expr
    assert isinstance(ratio, BinOp) and ratio.op == "/"
    assert isinstance(ratio.left, Subquery) and isinstance(ratio.right, Subquery)
    inner = ratio.left.select
    assert inner.where == BinOp(">=", ColRef(("CUSTSALES",)),
                                ColRef(("U", "CUSTSALES")))


def test_insert_multiple_rows():
    s = parse_statement("insert into sales values ('Bosch', 17000.00), "
                        "('Boss', 13000.00), ('Daimler', 20000.00)")
    assert isinstance(s, Insert) and len(s.rows) == 3
    assert s.rows[0][1] == Lit(Real(1700000, -2))


def test_grant_forms():
    g = parse_statement('grant select on members to public')
    assert g.privileges == ("SELECT",) and g.grantees == ("PUBLIC",)
    g = parse_statement('grant E to "usermachine/username"')
    assert g.role == "E" and g.grantees == ("usermachine/username",)
    g = parse_statement("grant references on t to r1")
    assert g.privileges == ("SELECT",)   # synonym collapses
    g = parse_statement("revoke insert on t from r1")
    assert g.revoke and g.privileges == ("INSERT",)


def test_no_action_is_rejected():
    with pytest.raises(SqlSyntaxError, match="NO ACTION"):
        parse_statement("create table c (p int references t on delete no action)")


def test_fk_defaults_and_explicit_actions():
    s = parse_statement("create table c (p int references t)")
    fk = s.columns[0].references
    assert fk.on_delete == "CASCADE" and fk.on_update == "RESTRICT"
    s = parse_statement("create table c (p int references t on delete "
                        "set null on update cascade)")
    fk = s.columns[0].references
    assert fk.on_delete == "SET_NULL" and fk.on_update == "CASCADE"


def test_misc_statements():
    assert parse_statement("set role membergames").name == "MEMBERGAMES"
    assert parse_statement("table vu").name == "VU"
    assert parse_statement("drop view ww").kind == "VIEW"
    assert parse_statement("begin").action == "BEGIN"
    alter = parse_statement("alter view v as select 1 from t")
    assert alter.name == "V"
    add = parse_statement("alter table t add column x int not null")
    assert add.column.name == "X" and add.column.notnull


def test_date_literal_and_is_null():
    e = parse_expression("d = date '2022-03-04'")
    assert e.right == Lit(datetime.date(2022, 3, 4))
    e = parse_expression("x is not null")
    assert e.negated


def test_count_star():
    e = parse_expression("count(*)")
    assert isinstance(e, FuncCall) and e.star


CORPUS = [
    "create table sales (cust char(12) primary key, custSales numeric(8,2))",
    "create table played (id int primary key, winner int references members, "
    "loser int references members, agreed boolean)",
    "create table t (a int, b char not null, check (a > 0), "
    "unique (a, b), foreign key (a) references p(x) on delete restrict)",
    "create view VV of (E int, F char) as get 'http://localhost:8188/DB/DB/t'",
    "create view WW of (E int, D char, K int, F char) as get using VU",
    "create view sales_V(cust, custSales, runningSalesShare) as select cust, "
    "custSales, (select sum(custSales) from sales where custSales >= "
    "u.custSales) / (select sum(custSales) from sales) from sales as u",
    "create role admin",
    'create user "machine/me"',
    "grant select on members to public",
    'grant E to "usermachine/username", PUBLIC',
    "insert into sales values ('Bosch', 17000.00), ('Boss', 13000.00)",
    "insert into t(a, b) values (1, 'x')",
    "update played set agreed = true where winner = 5 and loser = 7",
    "delete from t where a <> 3",
    "select * from ww where e = 5",
    "select sum(x), count(*), avg(x), min(x), max(x) from t",
    "select a, b as c from t, t as u where t.a = u.b order by a asc, b desc",
    "select case when x <= 0.5 then 'A' else 'B' end from t",
    "select cast(x as decimal(6,2)) from t where y is not null",
    "select -x + 3 * (y - 2) / z || 'pct' from t",
    "set role sales",
    "table vu",
    "drop table t",
    "alter view v as select a from t",
    "alter table t add column z date",
]


@pytest.mark.parametrize("text", CORPUS)
def test_pretty_print_reparses_to_equal_ast(text):
    ast1 = parse_statement(text)
    printed = ast1.to_sql()
    ast2 = parse_statement(printed)
    assert ast1 == ast2
