"""Concrete syntax for formulas and templates.

Grammar (whitespace-insensitive)::

    formula := since EOF
    since   := or [ 'S' window unary ]        -- S does not chain
    or      := and ( '||' and )*
    and     := unary ( '&&' unary )*
    unary   := '!' unary | 'X' '^' NAT unary | ('P' | 'H') window unary | primary
    primary := 'T' | atom | '(' since ')'
    atom    := xJ ('>' | '<') value | uI '==' value
    value   := NUMBER | '?' NAME
    window  := '[' NAT ',' NAT ']' | '[' '?' NAME ']'

``P`` is "previously", ``H`` "historically" and ``X^n`` the n-step shift.
The operands of ``S`` must be unary or parenthesized, and an ``S``
expression used as an operand must itself be parenthesized.
"""

from __future__ import annotations

import re

from .errors import ParseError
from .formula import (
    CONTROL,
    THRESHOLD,
    WINDOW,
    And,
    CtrlEQ,
    Formula,
    Historically,
    Not,
    Or,
    Previously,
    Shift,
    Since,
    Slot,
    StateGT,
    StateLT,
    SystemSignature,
    TrueConst,
)

_TOKEN = re.compile(
    r"""
    (?P<ws>\s+)
  | (?P<num>[+-]?(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)
  | (?P<slot>\?[A-Za-z_][A-Za-z0-9_]*)
  | (?P<ident>[A-Za-z_][A-Za-z0-9_]*)
  | (?P<op>&&|\|\||==|[<>!()\[\],^])
    """,
    re.VERBOSE,
)
_VAR = re.compile(r"([xu])(\d+)\Z")
_KEYWORDS = {"S", "P", "H", "X", "T"}


class _Tok:
    __slots__ = ("kind", "text", "start", "end")

    def __init__(self, kind, text, start, end):
        self.kind, self.text, self.start, self.end = kind, text, start, end

    def __repr__(self):
        return f"{self.kind}:{self.text!r}@{self.start}"


def _tokenize(text):
    pos, out = 0, []
    while pos < len(text):
        m = _TOKEN.match(text, pos)
        if m is None:
            raise ParseError(f"unexpected character {text[pos]!r}", (pos, pos + 1), text)
        kind = m.lastgroup
        if kind != "ws":
            word = m.group()
            if kind == "ident":
                if word in _KEYWORDS:
                    kind = "kw"
                elif _VAR.match(word):
                    kind = "var"
                else:
                    raise ParseError(f"unknown identifier {word!r}", m.span(), text)
            out.append(_Tok(kind, word, m.start(), m.end()))
        pos = m.end()
    out.append(_Tok("eof", "", len(text), len(text)))
    return out


class _Parser:
    def __init__(self, text, sig):
        self.text = text
        self.sig = sig
        self.toks = _tokenize(text)
        self.i = 0
        self.slot_names = set()

    # token helpers
    def peek(self):
        return self.toks[self.i]

    def next(self):
        tok = self.toks[self.i]
        if tok.kind != "eof":
            self.i += 1
        return tok

    def error(self, msg, tok=None):
        tok = tok or self.peek()
        what = "end of input" if tok.kind == "eof" else repr(tok.text)
        raise ParseError(f"{msg}, found {what}", (tok.start, tok.end), self.text)

    def is_op(self, text):
        tok = self.peek()
        return tok.kind == "op" and tok.text == text

    def is_kw(self, text):
        tok = self.peek()
        return tok.kind == "kw" and tok.text == text

    def expect_op(self, text):
        if not self.is_op(text):
            self.error(f"expected {text!r}")
        return self.next()

    def nat(self):
        tok = self.peek()
        if tok.kind != "num" or not tok.text.isdigit():
            self.error("expected a natural number")
        self.next()
        return int(tok.text)

    # grammar
    def parse(self):
        phi = self.since()
        if self.peek().kind != "eof":
            self.error("unexpected trailing input")
        return phi

    def since(self):
        left, compound = self.or_expr()
        if not self.is_kw("S"):
            return left
        s_tok = self.next()
        if compound:
            self.error("left operand of S must be parenthesized", s_tok)
        window = self.window()
        right = self.unary()
        if self.is_op("&&") or self.is_op("||") or self.is_kw("S"):
            self.error("an S expression used as an operand must be parenthesized")
        return Since(left, right, window)

    def or_expr(self):
        left, compound = self.and_expr()
        while self.is_op("||"):
            self.next()
            right, _ = self.and_expr()
            left, compound = Or(left, right), True
        return left, compound

    def and_expr(self):
        left = self.unary()
        compound = False
        while self.is_op("&&"):
            self.next()
            left, compound = And(left, self.unary()), True
        return left, compound

    def unary(self):
        tok = self.peek()
        if self.is_op("!"):
            self.next()
            return Not(self.unary())
        if self.is_kw("X"):
            self.next()
            self.expect_op("^")
            n = self.nat()
            return Shift(n, self.unary())
        if self.is_kw("P") or self.is_kw("H"):
            self.next()
            window = self.window()
            arg = self.unary()
            return (Previously if tok.text == "P" else Historically)(arg, window)
        return self.primary()

    def primary(self):
        tok = self.peek()
        if self.is_kw("T"):
            self.next()
            return TrueConst()
        if self.is_op("("):
            self.next()
            phi = self.since()
            self.expect_op(")")
            return phi
        if tok.kind == "var":
            return self.atom()
        self.error("expected a formula")

    def atom(self):
        tok = self.next()
        letter, idx = _VAR.match(tok.text).groups()
        var = int(idx)
        if self.sig is not None:
            limit = self.sig.n if letter == "x" else self.sig.m
            if var >= limit:
                raise ParseError(
                    f"unknown variable {tok.text} (system has {limit} {letter}-variables)",
                    (tok.start, tok.end),
                    self.text,
                )
        op = self.peek()
        if letter == "x":
            if not (self.is_op(">") or self.is_op("<")):
                self.error(f"expected '>' or '<' after {tok.text}")
            self.next()
            value = self.value(THRESHOLD)
            return (StateGT if op.text == ">" else StateLT)(var, value)
        if not self.is_op("=="):
            self.error(f"expected '==' after {tok.text}")
        self.next()
        return CtrlEQ(var, self.value(CONTROL))

    def value(self, kind):
        tok = self.peek()
        if tok.kind == "slot":
            return self.slot(kind)
        if tok.kind != "num":
            self.error("expected a number or a ?slot")
        self.next()
        return _number(tok.text)

    def slot(self, kind):
        tok = self.next()
        name = tok.text[1:]
        if name in self.slot_names:
            raise ParseError(f"slot ?{name} is used twice", (tok.start, tok.end), self.text)
        self.slot_names.add(name)
        return Slot(name, kind)

    def window(self):
        open_tok = self.expect_op("[")
        if self.peek().kind == "slot":
            w = self.slot(WINDOW)
            self.expect_op("]")
            return w
        a = self.nat()
        self.expect_op(",")
        b = self.nat()
        close = self.expect_op("]")
        if a < b:
            raise ParseError(
                f"window [{a},{b}] has a < b", (open_tok.start, close.end), self.text
            )
        return (a, b)


def _number(text):
    try:
        return int(text)
    except ValueError:
        return float(text)


def parse(text, sig: SystemSignature = None) -> Formula:
    """Parse formula or template text; variable indices are checked against ``sig``."""
    if isinstance(text, (bytes, bytearray)):
        try:
            text = bytes(text).decode("ascii")
        except UnicodeDecodeError as exc:
            raise ParseError("formula text must be ASCII", (exc.start, exc.end)) from None
    try:
        return _Parser(text, sig).parse()
    except RecursionError:
        raise ParseError("formula nested too deeply", (0, len(text)), text) from None


def format_number(v) -> str:
    v = float(v)
    if v.is_integer():
        return str(int(v))
    return repr(v)


def _fmt_value(v):
    return f"?{v.name}" if isinstance(v, Slot) else format_number(v)


def _fmt_window(w):
    return f"[?{w.name}]" if isinstance(w, Slot) else f"[{w[0]},{w[1]}]"


def to_text(phi: Formula) -> str:
    """Fully parenthesized text that ``parse`` maps back to ``phi``."""
    if isinstance(phi, TrueConst):
        return "T"
    if isinstance(phi, StateGT):
        return f"(x{phi.var} > {_fmt_value(phi.threshold)})"
    if isinstance(phi, StateLT):
        return f"(x{phi.var} < {_fmt_value(phi.threshold)})"
    if isinstance(phi, CtrlEQ):
        return f"(u{phi.var} == {_fmt_value(phi.value)})"
    if isinstance(phi, Not):
        return f"(!{to_text(phi.arg)})"
    if isinstance(phi, And):
        return f"({to_text(phi.left)} && {to_text(phi.right)})"
    if isinstance(phi, Or):
        return f"({to_text(phi.left)} || {to_text(phi.right)})"
    if isinstance(phi, Shift):
        return f"(X^{phi.n} {to_text(phi.arg)})"
    if isinstance(phi, Previously):
        return f"(P{_fmt_window(phi.window)} {to_text(phi.arg)})"
    if isinstance(phi, Historically):
        return f"(H{_fmt_window(phi.window)} {to_text(phi.arg)})"
    if isinstance(phi, Since):
        return f"({to_text(phi.left)} S{_fmt_window(phi.window)} {to_text(phi.right)})"
    raise TypeError(f"not a formula: {phi!r}")
