"""Mean-function expression language.

Grammar (EBNF)::

    expr    = term , { ("+" | "-") , term } ;
    term    = unary , { ("*" | "/") , unary } ;
    unary   = "-" , unary | power ;
    power   = atom , [ "^" , unary ] ;          (* right associative *)
    atom    = number | param | covariate | func , "(" , expr , ")" | "(" , expr , ")" ;
    param   = "b" , digit , { digit } ;          (* b1 .. bp *)
    func    = "exp" | "log" | "sqrt" | "sinh" | "cosh" | "tanh" | "arcsinh" ;

Binary operators are parsed by precedence climbing.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from typing import Union

from .errors import ModelSyntaxError

FUNCTIONS = ("exp", "log", "sqrt", "sinh", "cosh", "tanh", "arcsinh")

# (precedence, right-associative)
BINARY = {"+": (1, False), "-": (1, False), "*": (2, False), "/": (2, False), "^": (4, True)}
UNARY_PREC = 3

_PARAM_RE = re.compile(r"b([1-9][0-9]*)\Z")
_TOKEN_RE = re.compile(
    r"\s*(?:(?P<num>(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)|(?P<name>[A-Za-z_][A-Za-z0-9_]*)|(?P<op>[-+*/^(),]))"
)


@dataclass(frozen=True)
class Num:
    value: float
    pos: int = field(default=0, compare=False)


@dataclass(frozen=True)
class Param:
    index: int  # 1-based, as written
    pos: int = field(default=0, compare=False)


@dataclass(frozen=True)
class Covariate:
    name: str
    column: int
    pos: int = field(default=0, compare=False)


@dataclass(frozen=True)
class Neg:
    operand: "Expr"
    pos: int = field(default=0, compare=False)


@dataclass(frozen=True)
class BinOp:
    op: str
    left: "Expr"
    right: "Expr"
    pos: int = field(default=0, compare=False)


@dataclass(frozen=True)
class Call:
    func: str
    arg: "Expr"
    pos: int = field(default=0, compare=False)


Expr = Union[Num, Param, Covariate, Neg, BinOp, Call]


@dataclass(frozen=True)
class Token:
    kind: str  # "num", "name", "op" or "end"
    text: str
    pos: int


def tokenize(text: str) -> list[Token]:
    tokens = []
    pos = 0
    while pos < len(text):
        if text[pos:].strip() == "":
            break
        m = _TOKEN_RE.match(text, pos)
        if m is None:
            bad = pos + len(text[pos:]) - len(text[pos:].lstrip())
            raise ModelSyntaxError(f"unexpected character {text[bad]!r}", bad)
        kind = m.lastgroup
        tokens.append(Token(kind, m.group(kind), m.start(kind)))
        pos = m.end()
    tokens.append(Token("end", "", len(text)))
    return tokens


class _Parser:
    def __init__(self, text: str, covariates: dict[str, int], p: int | None):
        self.tokens = tokenize(text)
        self.i = 0
        self.covariates = covariates
        self.p = p

    @property
    def tok(self) -> Token:
        return self.tokens[self.i]

    def advance(self) -> Token:
        t = self.tokens[self.i]
        self.i += 1
        return t

    def expect(self, text: str) -> Token:
        t = self.tok
        if t.text != text or t.kind == "end":
            found = "end of input" if t.kind == "end" else repr(t.text)
            raise ModelSyntaxError(f"expected {text!r}, found {found}", t.pos)
        return self.advance()

    def parse(self) -> Expr:
        node = self.expression(0)
        if self.tok.kind != "end":
            raise ModelSyntaxError(f"unexpected {self.tok.text!r}", self.tok.pos)
        return node

    def expression(self, min_prec: int) -> Expr:
        left = self.primary()
        while self.tok.kind == "op" and self.tok.text in BINARY:
            prec, right_assoc = BINARY[self.tok.text]
            if prec < min_prec:
                break
            op = self.advance()
            # "^" takes a unary-level operand on its right so that 2^-1 parses.
            next_min = UNARY_PREC if right_assoc else prec + 1
            right = self.expression(next_min)
            left = BinOp(op.text, left, right, op.pos)
        return left

    def primary(self) -> Expr:
        t = self.tok
        if t.kind == "op" and t.text == "-":
            self.advance()
            return Neg(self.expression(UNARY_PREC), t.pos)
        if t.kind == "op" and t.text == "(":
            self.advance()
            node = self.expression(0)
            self.expect(")")
            return node
        if t.kind == "num":
            self.advance()
            return Num(float(t.text), t.pos)
        if t.kind == "name":
            self.advance()
            return self.name(t)
        found = "end of input" if t.kind == "end" else repr(t.text)
        raise ModelSyntaxError(f"unexpected {found}", t.pos)

    def name(self, t: Token) -> Expr:
        if t.text in FUNCTIONS:
            if self.tok.text != "(":
                raise ModelSyntaxError(f"function {t.text!r} must be called with parentheses", t.pos)
            self.advance()
            arg = self.expression(0)
            if self.tok.text == ",":
                raise ModelSyntaxError(f"function {t.text!r} takes exactly 1 argument", self.tok.pos)
            self.expect(")")
            return Call(t.text, arg, t.pos)
        m = _PARAM_RE.match(t.text)
        if m and t.text not in self.covariates:
            k = int(m.group(1))
            if self.p is not None and k > self.p:
                raise ModelSyntaxError(f"parameter {t.text} exceeds p={self.p}", t.pos)
            return Param(k, t.pos)
        if t.text in self.covariates:
            if self.tok.text == "(":
                raise ModelSyntaxError(f"{t.text!r} is not a function", self.tok.pos)
            return Covariate(t.text, self.covariates[t.text], t.pos)
        raise ModelSyntaxError(f"unknown identifier {t.text!r}", t.pos)


def parse(text: str, covariates=(), p: int | None = None) -> Expr:
    """Parse ``text`` into an AST.

    ``covariates`` lists the column names that may appear; a covariate is
    resolved to its position in that list.
    """
    if not text or not text.strip():
        raise ModelSyntaxError("empty model expression", 0)
    names = {name: j for j, name in enumerate(covariates)}
    for name in names:
        if name in FUNCTIONS:
            raise ModelSyntaxError(f"covariate name {name!r} clashes with a function name")
        if _PARAM_RE.match(name):
            raise ModelSyntaxError(f"covariate name {name!r} clashes with parameter names")
    return _Parser(text, names, p).parse()


def to_text(node: Expr) -> str:
    """Fully parenthesized rendering that reparses to an identical tree."""
    if isinstance(node, Num):
        return repr(node.value)
    if isinstance(node, Param):
        return f"b{node.index}"
    if isinstance(node, Covariate):
        return node.name
    if isinstance(node, Neg):
        return f"(-{to_text(node.operand)})"
    if isinstance(node, BinOp):
        return f"({to_text(node.left)} {node.op} {to_text(node.right)})"
    if isinstance(node, Call):
        return f"{node.func}({to_text(node.arg)})"
    raise TypeError(f"not an expression node: {node!r}")


def walk(node: Expr):
    yield node
    if isinstance(node, Neg):
        yield from walk(node.operand)
    elif isinstance(node, BinOp):
        yield from walk(node.left)
        yield from walk(node.right)
    elif isinstance(node, Call):
        yield from walk(node.arg)


def parameter_indices(node: Expr) -> set[int]:
    return {n.index for n in walk(node) if isinstance(n, Param)}


def covariate_columns(node: Expr) -> set[int]:
    return {n.column for n in walk(node) if isinstance(n, Covariate)}
