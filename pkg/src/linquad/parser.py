"""Recursive-descent parser for the expression language.

Grammar (operators listed loosest to tightest, ^ is right-associative):

    expr   := term (("+" | "-") term)*
    term   := factor (("*" | "/") factor)*
    factor := ("-")? power
    power  := atom ("^" factor)?
    atom   := NUMBER | IDENT | IDENT "(" expr ")" | "(" expr ")"

NUMBER is a decimal literal (integer, fraction part, optional exponent).
IDENT is either one of the known variables or a function name immediately
followed by "(". A leading minus on a bare numeric literal is folded into
the literal so that printed expressions re-parse to an identical tree.
"""

from __future__ import annotations

import re
from fractions import Fraction

from .expr import Div, Expr, Func, Neg, Num, Pow, Var, Add, Sub, Mul, FUNCTIONS

DEFAULT_VARIABLES = frozenset({"x", "y", "z", "u", "t"})

_TOKEN_RE = re.compile(
    r"\s*(?:"
    r"(?P<number>\d+(?:\.\d*)?(?:[eE][+-]?\d+)?|\.\d+(?:[eE][+-]?\d+)?)"
    r"|(?P<ident>[A-Za-z_][A-Za-z_0-9]*)"
    r"|(?P<op>[-+*/^()])"
    r")"
)


class ParseError(Exception):
    """Syntax error with byte offset and the token set that was expected."""

    def __init__(self, message: str, offset: int, expected: tuple[str, ...] = ()):
        self.offset = offset
        self.expected = expected
        detail = f"{message} at offset {offset}"
        if expected:
            detail += f" (expected {', '.join(expected)})"
        super().__init__(detail)


class _Token:
    __slots__ = ("kind", "text", "offset")

    def __init__(self, kind: str, text: str, offset: int):
        self.kind = kind
        self.text = text
        self.offset = offset


def _tokenize(text: str) -> list[_Token]:
    tokens: list[_Token] = []
    pos = 0
    while pos < len(text):
        match = _TOKEN_RE.match(text, pos)
        if match is None:
            stripped = text[pos:].lstrip()
            if not stripped:
                break
            bad = len(text) - len(stripped)
            raise ParseError(f"unexpected character '{text[bad]}'", bad)
        if match.lastgroup == "number":
            tokens.append(_Token("number", match.group("number"), match.start("number")))
        elif match.lastgroup == "ident":
            tokens.append(_Token("ident", match.group("ident"), match.start("ident")))
        else:
            tokens.append(_Token(match.group("op"), match.group("op"), match.start("op")))
        pos = match.end()
    tokens.append(_Token("end", "", len(text)))
    return tokens


def _literal(text: str) -> Num:
    if re.fullmatch(r"\d+", text):
        return Num(Fraction(int(text)))
    return Num(float(text))


class _Parser:
    def __init__(self, text: str, variables: frozenset[str]):
        self.text = text
        self.tokens = _tokenize(text)
        self.index = 0
        self.variables = variables

    def peek(self) -> _Token:
        return self.tokens[self.index]

    def advance(self) -> _Token:
        token = self.tokens[self.index]
        self.index += 1
        return token

    def expect(self, kind: str) -> _Token:
        token = self.peek()
        if token.kind != kind:
            raise ParseError(
                f"unexpected {token.kind if token.kind != 'end' else 'end of input'}",
                token.offset,
                expected=(kind,),
            )
        return self.advance()

    def parse(self) -> Expr:
        result = self.expression()
        token = self.peek()
        if token.kind != "end":
            raise ParseError(
                f"unexpected '{token.text}'", token.offset, expected=("+", "-", "*", "/", "^", "end")
            )
        return result

    def expression(self) -> Expr:
        node = self.term()
        while self.peek().kind in ("+", "-"):
            op = self.advance()
            rhs = self.term()
            node = Add(node, rhs) if op.kind == "+" else Sub(node, rhs)
        return node

    def term(self) -> Expr:
        node = self.factor()
        while self.peek().kind in ("*", "/"):
            op = self.advance()
            rhs = self.factor()
            if op.kind == "*":
                node = Mul(node, rhs)
            else:
                if isinstance(rhs, Num) and rhs.value == 0:
                    raise ParseError("division by literal zero", op.offset)
                node = Div(node, rhs)
        return node

    def factor(self) -> Expr:
        if self.peek().kind == "-":
            self.advance()
            inner = self.power()
            if isinstance(inner, Num):
                return Num(-inner.value)
            return Neg(inner)
        return self.power()

    def power(self) -> Expr:
        base = self.atom()
        if self.peek().kind == "^":
            self.advance()
            exponent = self.factor()
            return Pow(base, exponent)
        return base

    def atom(self) -> Expr:
        token = self.peek()
        if token.kind == "number":
            self.advance()
            return _literal(token.text)
        if token.kind == "(":
            self.advance()
            inner = self.expression()
            self.expect(")")
            return inner
        if token.kind == "ident":
            self.advance()
            if self.peek().kind == "(":
                if token.text not in FUNCTIONS:
                    raise ParseError(f"unknown function '{token.text}'", token.offset)
                self.advance()
                argument = self.expression()
                self.expect(")")
                return Func(token.text, argument)
            if token.text in self.variables:
                return Var(token.text)
            raise ParseError(
                f"unknown identifier '{token.text}'",
                token.offset,
                expected=tuple(sorted(self.variables)),
            )
        raise ParseError(
            f"unexpected {token.kind if token.kind != 'end' else 'end of input'}",
            token.offset,
            expected=("number", "identifier", "(", "-"),
        )


def parse(text: str, variables: frozenset[str] | set[str] = DEFAULT_VARIABLES) -> Expr:
    """Parse an expression string into an ``Expr`` tree."""
    return _Parser(text, frozenset(variables)).parse()
