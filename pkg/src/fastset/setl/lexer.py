"""Tokenizer for SETL source text."""

from __future__ import annotations

from dataclasses import dataclass
from typing import List

KEYWORDS = {
    "instance", "constructor", "contract", "if", "verify", "transfer", "claim",
    "isSettled", "apply", "and", "or", "not", "in", "true", "false", "infinity",
    "none", "empty", "nil", "time",
}

# longest first so that ":=" wins over ":" and so on
OPERATORS = [
    "...", ":=", "+=", "-=", "->", "==", "!=", "<=", ">=",
    "{", "}", "(", ")", "[", "]", ",", ";", ":", ".", "<", ">", "+", "-", "=",
]


class ParseError(Exception):
    def __init__(self, line: int, column: int, expected: str) -> None:
        super().__init__(f"{line}:{column}: expected {expected}")
        self.line = line
        self.column = column
        self.expected = expected


@dataclass(frozen=True)
class Token:
    kind: str   # IDENT, KW, INT, STRING, HEX, ADDR, OP, EOF
    text: str
    line: int
    column: int
    value: object = None


def _is_ident_start(ch: str) -> bool:
    return ch.isalpha() or ch == "_"


def _is_ident_char(ch: str) -> bool:
    return ch.isalnum() or ch == "_"


def tokenize(source: str) -> List[Token]:
    tokens: List[Token] = []
    i, line, col = 0, 1, 1
    n = len(source)

    def advance(k: int) -> None:
        nonlocal i, line, col
        for _ in range(k):
            if source[i] == "\n":
                line += 1
                col = 1
            else:
                col += 1
            i += 1

    while i < n:
        ch = source[i]
        if ch in " \t\r\n":
            advance(1)
            continue
        if source.startswith("//", i):
            while i < n and source[i] != "\n":
                advance(1)
            continue
        start_line, start_col = line, col
        if source.startswith("0x", i):
            j = i + 2
            while j < n and source[j] in "0123456789abcdefABCDEF":
                j += 1
            text = source[i:j]
            if (j - i - 2) % 2:
                raise ParseError(line, col, "an even number of hex digits")
            tokens.append(Token("HEX", text, start_line, start_col, bytes.fromhex(text[2:])))
            advance(j - i)
            continue
        if ch.isdigit():
            j = i
            while j < n and source[j].isdigit():
                j += 1
            text = source[i:j]
            tokens.append(Token("INT", text, start_line, start_col, int(text)))
            advance(j - i)
            continue
        if ch == "@":
            j = i + 1
            while j < n and source[j] in "0123456789abcdefABCDEF":
                j += 1
            if j - i - 1 != 64:
                raise ParseError(line, col, "an address literal of 64 hex digits")
            text = source[i:j]
            tokens.append(Token("ADDR", text, start_line, start_col, bytes.fromhex(text[1:])))
            advance(j - i)
            continue
        if ch == '"':
            j = i + 1
            out = []
            while j < n and source[j] != '"':
                if source[j] == "\\" and j + 1 < n:
                    nxt = source[j + 1]
                    out.append({"n": "\n", "t": "\t"}.get(nxt, nxt))
                    j += 2
                    continue
                if source[j] == "\n":
                    break
                out.append(source[j])
                j += 1
            if j >= n or source[j] != '"':
                raise ParseError(start_line, start_col, "closing quote")
            tokens.append(Token("STRING", source[i:j + 1], start_line, start_col, "".join(out)))
            advance(j + 1 - i)
            continue
        if _is_ident_start(ch):
            j = i
            while j < n and _is_ident_char(source[j]):
                j += 1
            # primes are part of names: s', s''
            while j < n and source[j] == "'":
                j += 1
            text = source[i:j]
            kind = "KW" if text in KEYWORDS else "IDENT"
            tokens.append(Token(kind, text, start_line, start_col))
            advance(j - i)
            continue
        for op in OPERATORS:
            if source.startswith(op, i):
                tokens.append(Token("OP", op, start_line, start_col))
                advance(len(op))
                break
        else:
            raise ParseError(line, col, f"a token, found {ch!r}")
    tokens.append(Token("EOF", "", line, col))
    return tokens
