"""Minimal s-expression reader shared by the Church frontend and the core syntax."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Union


class ParseError(Exception):
    """Malformed source text. Carries a 1-based line/column when known."""

    def __init__(self, message: str, line: int | None = None, col: int | None = None):
        self.line = line
        self.col = col
        where = f"{line}:{col}: " if line is not None else ""
        super().__init__(where + message)


@dataclass(frozen=True)
class Symbol:
    name: str
    line: int = 0
    col: int = 0

    def __str__(self) -> str:
        return self.name


@dataclass(frozen=True)
class Number:
    value: float
    line: int = 0
    col: int = 0


@dataclass(frozen=True)
class SList:
    items: tuple
    line: int = 0
    col: int = 0

    def __len__(self) -> int:
        return len(self.items)

    def __getitem__(self, i):
        return self.items[i]


SExpr = Union[Symbol, Number, SList]

_SPECIAL_FLOATS = {"+inf": float("inf"), "-inf": float("-inf"), "inf": float("inf"), "nan": float("nan")}


def _atom(tok: str, line: int, col: int) -> SExpr:
    if tok in _SPECIAL_FLOATS:
        return Number(_SPECIAL_FLOATS[tok], line, col)
    try:
        return Number(float(tok), line, col)
    except ValueError:
        return Symbol(tok, line, col)


def tokenize(text: str):
    """Yield (token, line, col). Comments run from ';' to end of line."""
    line, col = 1, 1
    i, n = 0, len(text)
    while i < n:
        ch = text[i]
        if ch == "\n":
            line, col = line + 1, 1
            i += 1
        elif ch.isspace():
            i += 1
            col += 1
        elif ch == ";":
            while i < n and text[i] != "\n":
                i += 1
        elif ch in "()[]":
            yield ch, line, col
            i += 1
            col += 1
        else:
            start, scol = i, col
            while i < n and not text[i].isspace() and text[i] not in "()[];":
                i += 1
            col += i - start
            yield text[start:i], line, scol


def read_all(text: str) -> list[SExpr]:
    """Read every top-level datum in ``text``."""
    stack: list[tuple[list, str, int, int]] = []
    out: list[SExpr] = []
    closers = {"(": ")", "[": "]"}
    for tok, line, col in tokenize(text):
        if tok in "([":
            stack.append(([], tok, line, col))
        elif tok in ")]":
            if not stack:
                raise ParseError(f"unexpected '{tok}'", line, col)
            items, opener, oline, ocol = stack.pop()
            if closers[opener] != tok:
                raise ParseError(f"'{opener}' opened at {oline}:{ocol} closed by '{tok}'", line, col)
            node = SList(tuple(items), oline, ocol)
            (stack[-1][0] if stack else out).append(node)
        else:
            node = _atom(tok, line, col)
            (stack[-1][0] if stack else out).append(node)
    if stack:
        _, opener, oline, ocol = stack[-1]
        raise ParseError(f"unclosed '{opener}'", oline, ocol)
    return out


def read_one(text: str) -> SExpr:
    data = read_all(text)
    if len(data) != 1:
        raise ParseError(f"expected exactly one datum, found {len(data)}")
    return data[0]
