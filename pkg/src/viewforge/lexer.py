"""Tokenizer for the view-document DSL, scenarios and refinement scripts.

Identifiers may contain internal hyphens (``pick-up_branch``); a hyphen
continues an identifier only when the next character could extend one,
so arithmetic minus must be surrounded by whitespace.  ``Class#3`` is a
single object-identifier token.  Comments run from ``//`` to end of line.
"""

from __future__ import annotations

from dataclasses import dataclass

from .errors import ParseError

KEYWORDS = frozenset({
    "typedocument", "endtypedocument",
    "objectmodeldocument", "endobjectmodeldocument",
    "classdocument", "endclassdocument",
    "lifecycledocument", "endlifecycledocument",
    "scenario", "endscenario",
    "sort", "Set", "classes", "relationship", "class",
    "attributes", "methods",
    "state", "initial", "transition", "endtransition",
    "input", "output", "pre", "post", "havoc",
    "true", "false", "and", "or", "not",
    "isin", "union", "diff", "subseteq",
    "exists", "forall",
    "self", "in", "out", "Object", "In", "arg", "sndr",
    "object", "with", "stimulus",
    "horizon", "seed", "max_delay", "drop_on_stall",
})

# token types
IDENT = "IDENT"
KEYWORD = "KEYWORD"
OBJID = "OBJID"
INT = "INT"
PRIME = "PRIME"
EOF = "EOF"

_PUNCT2 = {"->": "->", "..": "..", "=>": "=>", "/=": "/=", "--": "--"}
_PUNCT1 = set("{}()[]:;,.=+-*!?")


@dataclass(frozen=True)
class Token:
    type: str
    value: object
    line: int
    col: int

    def __repr__(self) -> str:
        return f"Token({self.type}, {self.value!r}, {self.line}:{self.col})"


def _is_ident_start(ch: str) -> bool:
    return ch.isalpha() or ch == "_"


def _is_ident_part(ch: str) -> bool:
    return ch.isalnum() or ch == "_"


def lex(source: str) -> list[Token]:
    tokens: list[Token] = []
    i = 0
    line = 1
    col = 1
    n = len(source)

    while i < n:
        ch = source[i]

        if ch == "\n":
            i += 1
            line += 1
            col = 1
            continue
        if ch in " \t\r":
            i += 1
            col += 1
            continue
        if ch == "/" and i + 1 < n and source[i + 1] == "/":
            while i < n and source[i] != "\n":
                i += 1
            continue

        if _is_ident_start(ch):
            start, start_col = i, col
            while i < n:
                c = source[i]
                if _is_ident_part(c):
                    i += 1
                    col += 1
                elif c == "-" and i + 1 < n and _is_ident_part(source[i + 1]):
                    i += 2
                    col += 2
                else:
                    break
            word = source[start:i]
            if i < n and source[i] == "#":
                j = i + 1
                if j >= n or not source[j].isdigit():
                    raise ParseError("expected digits after '#'", line, col)
                while j < n and source[j].isdigit():
                    j += 1
                index = int(source[i + 1:j])
                col += j - i
                i = j
                tokens.append(Token(OBJID, (word, index), line, start_col))
                continue
            ttype = KEYWORD if word in KEYWORDS else IDENT
            tokens.append(Token(ttype, word, line, start_col))
            continue

        if ch.isdigit():
            start, start_col = i, col
            while i < n and source[i].isdigit():
                i += 1
                col += 1
            tokens.append(Token(INT, int(source[start:i]), line, start_col))
            continue

        if ch == "'":
            tokens.append(Token(PRIME, "'", line, col))
            i += 1
            col += 1
            continue

        two = source[i:i + 2]
        if two in _PUNCT2:
            tokens.append(Token(two, two, line, col))
            i += 2
            col += 2
            continue
        if ch in _PUNCT1:
            tokens.append(Token(ch, ch, line, col))
            i += 1
            col += 1
            continue

        raise ParseError(f"unexpected character {ch!r}", line, col)

    tokens.append(Token(EOF, "", line, col))
    return tokens
