"""Recursive-descent parser for the expression language.

Grammar, loosest binding first::

    expr   := term (('+' | '-') term)*
    term   := factor (('*' | '/') factor)*
    factor := '-' factor | power
    power  := atom ('^' factor)?
    atom   := number | ident | ident '(' expr ')'
            | ident '[' expr (',' expr)* ']' '(' expr ')' | '(' expr ')'

``^`` is right-associative and binds tighter than unary minus, so ``-x^2``
is ``-(x^2)`` while ``x^-2`` is ``x^(-2)``.
"""

import re
from fractions import Fraction

from . import expr as ex
from .errors import ParseError

_TOKEN = re.compile(
    r"""
    (?P<ws>[ \t\r]+)
  | (?P<nl>\n)
  | (?P<num>(?:\d+\.\d*|\.\d+|\d+)(?:[eE][+-]?\d+)?)
  | (?P<ident>[A-Za-z_][A-Za-z0-9_]*)
  | (?P<op>[-+*/^()\[\],])
    """,
    re.VERBOSE,
)


class Token:
    __slots__ = ("kind", "text", "line", "col")

    def __init__(self, kind, text, line, col):
        self.kind, self.text, self.line, self.col = kind, text, line, col

    def __repr__(self):
        return f"Token({self.kind}, {self.text!r}, {self.line}:{self.col})"


def tokenize(source):
    tokens = []
    pos, line, line_start = 0, 1, 0
    while pos < len(source):
        m = _TOKEN.match(source, pos)
        if m is None:
            raise ParseError(f"unexpected character {source[pos]!r}", line, pos - line_start, source)
        kind = m.lastgroup
        if kind == "nl":
            line += 1
            line_start = m.end()
        elif kind != "ws":
            tokens.append(Token(kind, m.group(), line, pos - line_start))
        pos = m.end()
    tokens.append(Token("end", "", line, pos - line_start))
    return tokens


def _number(text):
    if re.fullmatch(r"\d+", text):
        return Fraction(int(text))
    return float(text)


class _Parser:
    def __init__(self, source):
        self.source = source
        self.tokens = tokenize(source)
        self.i = 0

    @property
    def tok(self):
        return self.tokens[self.i]

    def error(self, message, tok=None):
        tok = tok or self.tok
        return ParseError(message, tok.line, tok.col, self.source)

    def unexpected(self):
        tok = self.tok
        if tok.kind == "end":
            return self.error("unexpected end of input")
        return self.error(f"unexpected {tok.text!r}")

    def accept(self, text):
        if self.tok.kind == "op" and self.tok.text == text:
            self.i += 1
            return True
        return False

    def expect(self, text):
        if not self.accept(text):
            raise self.error(f"expected {text!r}" + ("" if self.tok.kind == "end" else f", found {self.tok.text!r}"))

    def parse(self):
        e = self.expr()
        if self.tok.kind != "end":
            raise self.unexpected()
        return e

    def expr(self):
        e = self.term()
        while True:
            if self.accept("+"):
                e = ex.add(e, self.term())
            elif self.accept("-"):
                e = ex.sub(e, self.term())
            else:
                return e

    def term(self):
        e = self.factor()
        while True:
            if self.accept("*"):
                e = ex.mul(e, self.factor())
            elif self.accept("/"):
                e = ex.div(e, self.factor())
            else:
                return e

    def factor(self):
        if self.accept("-"):
            return ex.neg(self.factor())
        return self.power()

    def power(self):
        base = self.atom()
        if self.accept("^"):
            return ex.power(base, self.factor())
        return base

    def atom(self):
        tok = self.tok
        if tok.kind == "num":
            self.i += 1
            return ex.Const(_number(tok.text))
        if tok.kind == "ident":
            self.i += 1
            if self.accept("("):
                if tok.text not in ex.FUNCTIONS:
                    raise self.error(f"unknown function {tok.text!r}", tok)
                arg = self.expr()
                self.expect(")")
                return ex.func(tok.text, arg)
            if self.accept("["):
                if tok.text not in ex.SLOT_KINDS:
                    raise self.error(f"unknown operator {tok.text!r}", tok)
                params = [self.expr()]
                while self.accept(","):
                    params.append(self.expr())
                self.expect("]")
                self.expect("(")
                arg = self.expr()
                self.expect(")")
                return ex.slot(tok.text, params, arg)
            if tok.text in ex.NAMED_CONSTANTS:
                return ex.NamedConst(tok.text)
            return ex.Var(tok.text)
        if self.accept("("):
            e = self.expr()
            self.expect(")")
            return e
        raise self.unexpected()


def parse(source):
    """Parse expression text into a canonical tree; raises ParseError."""
    return _Parser(source).parse()
