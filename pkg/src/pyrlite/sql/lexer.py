"""SQL tokenizer.

Undelimited identifiers fold to upper case; ``"..."`` delimited identifiers
keep their spelling and are never keywords.  String literals use ``'...'``
with doubled quotes for embedded ones.  Every token carries line/column for
error reporting.
"""

from __future__ import annotations

from dataclasses import dataclass

from ..errors import SqlSyntaxError
from ..values import Real

KEYWORDS = {
    "SELECT", "FROM", "WHERE", "ORDER", "BY", "ASC", "DESC", "AS", "ON",
    "CREATE", "TABLE", "VIEW", "ROLE", "USER", "OF", "GET", "USING",
    "GRANT", "REVOKE", "TO", "INSERT", "INTO", "VALUES", "UPDATE", "SET",
    "DELETE", "DROP", "ALTER", "ADD", "COLUMN",
    "PRIMARY", "KEY", "UNIQUE", "FOREIGN", "REFERENCES", "CHECK", "NOT",
    "NULL", "CASCADE", "RESTRICT", "NO", "ACTION",
    "AND", "OR", "IS", "CASE", "WHEN", "THEN", "ELSE", "END", "CAST",
    "TRUE", "FALSE", "DATE", "BEGIN", "COMMIT", "ROLLBACK", "PUBLIC",
    "INT", "INTEGER", "CHAR", "NUMERIC", "DECIMAL", "BOOLEAN",
    "SUM", "COUNT", "AVG", "MIN", "MAX", "TRANSACTION", "WORK",
}

PUNCT = ("||", "<>", "<=", ">=", "(", ")", ",", ".", ";", "=", "<", ">",
         "+", "-", "*", "/")


@dataclass(frozen=True)
class Token:
    kind: str        # KW | IDENT | QIDENT | STRING | NUMBER | PUNCT | EOF
    value: object
    line: int
    col: int

    def is_kw(self, *words) -> bool:
        return self.kind == "KW" and self.value in words

    def is_punct(self, *ps) -> bool:
        return self.kind == "PUNCT" and self.value in ps


def tokenize(text: str):
    tokens = []
    i, line, col = 0, 1, 1
    n = len(text)

    def err(msg):
        raise SqlSyntaxError(msg, line, col)

    while i < n:
        c = text[i]
        if c == "\n":
            i += 1
            line += 1
            col = 1
            continue
        if c in " \t\r":
            i += 1
            col += 1
            continue
        if text.startswith("--", i):
            while i < n and text[i] != "\n":
                i += 1
            continue
        start_line, start_col = line, col
        if c == "'":
            i += 1
            col += 1
            buf = []
            while True:
                if i >= n:
                    raise SqlSyntaxError("unterminated string literal",
                                         start_line, start_col)
                if text[i] == "'":
                    if i + 1 < n and text[i + 1] == "'":
                        buf.append("'")
                        i += 2
                        col += 2
                        continue
                    i += 1
                    col += 1
                    break
                if text[i] == "\n":
                    line += 1
                    col = 0
                buf.append(text[i])
                i += 1
                col += 1
            tokens.append(Token("STRING", "".join(buf), start_line, start_col))
            continue
        if c == '"':
            i += 1
            col += 1
            buf = []
            while True:
                if i >= n:
                    raise SqlSyntaxError("unterminated delimited identifier",
                                         start_line, start_col)
                if text[i] == '"':
                    if i + 1 < n and text[i + 1] == '"':
                        buf.append('"')
                        i += 2
                        col += 2
                        continue
                    i += 1
                    col += 1
                    break
                buf.append(text[i])
                i += 1
                col += 1
            tokens.append(Token("QIDENT", "".join(buf), start_line, start_col))
            continue
        if c.isdigit():
            j = i
            while j < n and text[j].isdigit():
                j += 1
            if j < n and text[j] == "." and j + 1 < n and text[j + 1].isdigit():
                j += 1
                while j < n and text[j].isdigit():
                    j += 1
                tok = Token("NUMBER", Real.from_string(text[i:j]),
                            start_line, start_col)
            else:
                tok = Token("NUMBER", int(text[i:j]), start_line, start_col)
            col += j - i
            i = j
            tokens.append(tok)
            continue
        if c.isalpha() or c == "_":
            j = i
            while j < n and (text[j].isalnum() or text[j] in "_$"):
                j += 1
            word = text[i:j]
            upper = word.upper()
            if upper in KEYWORDS:
                tokens.append(Token("KW", upper, start_line, start_col))
            else:
                tokens.append(Token("IDENT", upper, start_line, start_col))
            col += j - i
            i = j
            continue
        matched = None
        for p in PUNCT:
            if text.startswith(p, i):
                matched = p
                break
        if matched is None:
            err(f"unexpected character {c!r}")
        tokens.append(Token("PUNCT", matched, start_line, start_col))
        i += len(matched)
        col += len(matched)
    tokens.append(Token("EOF", None, line, col))
    return tokens
