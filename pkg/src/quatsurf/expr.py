"""A small quaternion expression language in the planar coordinate z.

Grammar, loosest binding first::

    expr   := expr ('+' | '-') term
    term   := term ('*' | '/') unary
    unary  := '-' unary | power
    power  := atom ('^' ['-'] INT)*
    atom   := NUMBER | i | j | k | pi | z | zbar | x | y | r
            | conj(expr) | re(expr) | im(expr) | exp(expr) | '(' expr ')'

Products are never reordered, ``p / q`` means ``p * q^-1`` and powers take
integer exponents only.  ``z`` is embedded as ``x + y i``.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from typing import Union

import numpy as np

from . import quat as Q

SINGULAR_TOL = 1e-14

CONSTANTS = ("i", "j", "k", "pi")
VARIABLES = ("z", "zbar", "x", "y", "r")
FUNCTIONS = ("conj", "re", "im", "exp")


class ExprError(ValueError):
    pass


class LexError(ExprError):
    def __init__(self, message: str, pos: int):
        super().__init__(f"{message} at position {pos}")
        self.pos = pos


class ParseError(ExprError):
    def __init__(self, message: str, pos: int):
        super().__init__(f"{message} at position {pos}")
        self.pos = pos


class SingularValueError(ExprError):
    """Division by a quaternion that is numerically zero."""

    def __init__(self, message: str, location=None):
        super().__init__(message)
        self.location = location


# ---------------------------------------------------------------- AST


@dataclass(frozen=True)
class Num:
    value: float


@dataclass(frozen=True)
class Sym:
    name: str


@dataclass(frozen=True)
class Call:
    func: str
    arg: "Node"


@dataclass(frozen=True)
class Neg:
    operand: "Node"


@dataclass(frozen=True)
class Add:
    left: "Node"
    right: "Node"


@dataclass(frozen=True)
class Sub:
    left: "Node"
    right: "Node"


@dataclass(frozen=True)
class Mul:
    left: "Node"
    right: "Node"


@dataclass(frozen=True)
class Div:
    left: "Node"
    right: "Node"


@dataclass(frozen=True)
class Pow:
    base: "Node"
    exponent: int


Node = Union[Num, Sym, Call, Neg, Add, Sub, Mul, Div, Pow]

_BINARY = {"+": Add, "-": Sub, "*": Mul, "/": Div}
_LBP = {"+": 10, "-": 10, "*": 20, "/": 20, "^": 40}
_UNARY_RBP = 30


# ---------------------------------------------------------------- lexer

_TOKEN_RE = re.compile(
    r"""
    (?P<ws>\s+)
  | (?P<num>(\d+\.?\d*|\.\d+)([eE][+-]?\d+)?)
  | (?P<name>[A-Za-z_][A-Za-z_0-9]*)
  | (?P<op>[-+*/^(),])
    """,
    re.VERBOSE,
)


@dataclass(frozen=True)
class Token:
    kind: str
    text: str
    pos: int


def tokenize(text: str) -> list[Token]:
    tokens = []
    pos = 0
    while pos < len(text):
        m = _TOKEN_RE.match(text, pos)
        if m is None:
            raise LexError(f"unexpected character {text[pos]!r}", pos)
        kind = m.lastgroup
        if kind != "ws":
            tokens.append(Token(kind, m.group(), pos))
        pos = m.end()
    tokens.append(Token("end", "", len(text)))
    return tokens


# ---------------------------------------------------------------- parser


class _Parser:
    def __init__(self, text: str):
        self.tokens = tokenize(text)
        self.i = 0

    @property
    def tok(self) -> Token:
        return self.tokens[self.i]

    def advance(self) -> Token:
        t = self.tokens[self.i]
        self.i += 1
        return t

    def expect(self, text: str) -> Token:
        if self.tok.text != text or self.tok.kind == "end":
            found = self.tok.text or "end of input"
            raise ParseError(f"expected {text!r}, found {found!r}", self.tok.pos)
        return self.advance()

    def expr(self, rbp: int = 0) -> Node:
        left = self.nud(self.advance())
        while self.tok.kind == "op" and _LBP.get(self.tok.text, 0) > rbp:
            left = self.led(self.advance(), left)
        return left

    def nud(self, t: Token) -> Node:
        if t.kind == "num":
            return Num(float(t.text))
        if t.kind == "name":
            if t.text in FUNCTIONS:
                self.expect("(")
                arg = self.expr()
                self.expect(")")
                return Call(t.text, arg)
            if t.text in CONSTANTS or t.text in VARIABLES:
                return Sym(t.text)
            raise ParseError(f"unknown name {t.text!r}", t.pos)
        if t.text == "-":
            return Neg(self.expr(_UNARY_RBP))
        if t.text == "(":
            inner = self.expr()
            self.expect(")")
            return inner
        found = t.text or "end of input"
        raise ParseError(f"expected an operand, found {found!r}", t.pos)

    def led(self, t: Token, left: Node) -> Node:
        if t.text == "^":
            return Pow(left, self.integer_exponent())
        return _BINARY[t.text](left, self.expr(_LBP[t.text]))

    def integer_exponent(self) -> int:
        sign = 1
        if self.tok.text == "-":
            self.advance()
            sign = -1
        paren = self.tok.text == "("
        if paren:
            self.advance()
            if self.tok.text == "-":
                self.advance()
                sign = -sign
        t = self.advance()
        if t.kind != "num" or not re.fullmatch(r"\d+", t.text):
            raise ParseError(f"expected an integer exponent, found {t.text or 'end of input'!r}", t.pos)
        if paren:
            self.expect(")")
        return sign * int(t.text)


def parse(text: str) -> Node:
    p = _Parser(text)
    node = p.expr()
    if p.tok.kind != "end":
        raise ParseError(f"expected end of input, found {p.tok.text!r}", p.tok.pos)
    return node


# ---------------------------------------------------------------- printer

_PREC = {Add: 10, Sub: 10, Mul: 20, Div: 20, Neg: 30, Pow: 40}


def _prec(node: Node) -> int:
    return _PREC.get(type(node), 100)


def to_text(node: Node) -> str:
    """Render ``node`` so that ``parse(to_text(node)) == node``."""
    if isinstance(node, Num):
        if node.value < 0 or not np.isfinite(node.value):
            raise ExprError(f"literal {node.value!r} has no source form")
        return repr(float(node.value))
    if isinstance(node, Sym):
        return node.name
    if isinstance(node, Call):
        return f"{node.func}({to_text(node.arg)})"
    if isinstance(node, Neg):
        inner = to_text(node.operand)
        if _prec(node.operand) < _UNARY_RBP:
            inner = f"({inner})"
        return f"-{inner}"
    if isinstance(node, Pow):
        base = to_text(node.base)
        if _prec(node.base) <= _PREC[Pow]:
            base = f"({base})"
        return f"{base}^{node.exponent}"
    op = {Add: "+", Sub: "-", Mul: "*", Div: "/"}[type(node)]
    p = _prec(node)
    left = to_text(node.left)
    if _prec(node.left) < p:
        left = f"({left})"
    right = to_text(node.right)
    # left associativity: an equal-precedence right operand needs brackets
    if _prec(node.right) <= p:
        right = f"({right})"
    return f"{left} {op} {right}"


# ---------------------------------------------------------------- evaluation


def _symbol(name: str, z: np.ndarray) -> np.ndarray:
    if name in Q.BASIS:
        return np.broadcast_to(Q.BASIS[name], z.shape + (4,))
    if name == "pi":
        return Q.from_complex(np.full(z.shape, np.pi))
    if name == "z":
        return Q.from_complex(z)
    if name == "zbar":
        return Q.from_complex(np.conj(z))
    if name == "x":
        return Q.from_complex(z.real)
    if name == "y":
        return Q.from_complex(z.imag)
    if name == "r":
        return Q.from_complex(np.abs(z))
    raise ExprError(f"unknown symbol {name!r}")


def _safe_inverse(q: np.ndarray, z: np.ndarray) -> np.ndarray:
    n = Q.qnorm(q)
    bad = n < SINGULAR_TOL
    if np.any(bad):
        where = complex(z[bad].flat[0]) if z.ndim else complex(z)
        raise SingularValueError(f"division by a vanishing quaternion at z = {where}", where)
    return Q.qinv(q)


def _power(base: np.ndarray, n: int, z: np.ndarray) -> np.ndarray:
    if n < 0:
        base = _safe_inverse(base, z)
        n = -n
    out = np.broadcast_to(Q.ONE, base.shape).copy()
    for _ in range(n):
        out = Q.qmul(out, base)
    return out


def evaluate(node: Node, z) -> np.ndarray:
    """Quaternion value of ``node`` at the complex point(s) ``z``."""
    z = np.asarray(z, dtype=complex)
    return _eval(node, z)


def _eval(node: Node, z: np.ndarray) -> np.ndarray:
    if isinstance(node, Num):
        return Q.from_complex(np.full(z.shape, node.value))
    if isinstance(node, Sym):
        return _symbol(node.name, z)
    if isinstance(node, Neg):
        return -_eval(node.operand, z)
    if isinstance(node, Call):
        v = _eval(node.arg, z)
        fn = {"conj": Q.qconj, "re": Q.qre, "im": Q.qim, "exp": Q.qexp}[node.func]
        return fn(v)
    if isinstance(node, Pow):
        return _power(_eval(node.base, z), node.exponent, z)
    left = _eval(node.left, z)
    right = _eval(node.right, z)
    if isinstance(node, Add):
        return left + right
    if isinstance(node, Sub):
        return left - right
    if isinstance(node, Mul):
        return Q.qmul(left, right)
    return Q.qmul(left, _safe_inverse(right, z))


def compile_expr(source) -> Node:
    """Accept either source text or an already-parsed node."""
    if isinstance(source, str):
        return parse(source)
    return source
