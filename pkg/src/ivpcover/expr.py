"""Polynomial expression trees, parser, printer and ODE system definitions.

The grammar covers exactly what autonomous polynomial right-hand sides need:

    expr   :=  term  (('+' | '-') term)*
    term   :=  unary (('*' | '/') unary)*
    unary  :=  '-' unary | power
    power  :=  atom ('^' INT)*          # exponent: nonnegative integer literal
    atom   :=  NUMBER | IDENT | '(' expr ')'

so precedence is ^ > unary minus > * / > + - with left associativity.
Numeric literals are read as exact rationals and stay exact until they are
lifted into the evaluation semantics (float, Interval, jet, Fraction).
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from fractions import Fraction
from typing import Callable, Mapping, Sequence, TypeVar, Union

from .errors import DomainError
from .intervals import Box, Interval

__all__ = [
    "Expr",
    "Constant",
    "Var",
    "Param",
    "Neg",
    "Add",
    "Sub",
    "Mul",
    "Div",
    "PowInt",
    "UnknownIdentifier",
    "NonIntegerExponent",
    "parse_expr",
    "format_expr",
    "eval_expr",
    "OdeSystem",
    "parse_problem_text",
    "parse_problem_file",
    "DomainError",
]


class UnknownIdentifier(ValueError):
    """An identifier in an expression is neither a variable nor a parameter."""


class NonIntegerExponent(ValueError):
    """'^' was applied to something other than a nonnegative integer literal."""


@dataclass(frozen=True)
class Constant:
    value: Fraction


@dataclass(frozen=True)
class Var:
    index: int
    name: str


@dataclass(frozen=True)
class Param:
    name: str


@dataclass(frozen=True)
class Neg:
    a: "Expr"


@dataclass(frozen=True)
class Add:
    a: "Expr"
    b: "Expr"


@dataclass(frozen=True)
class Sub:
    a: "Expr"
    b: "Expr"


@dataclass(frozen=True)
class Mul:
    a: "Expr"
    b: "Expr"


@dataclass(frozen=True)
class Div:
    a: "Expr"
    b: "Expr"


@dataclass(frozen=True)
class PowInt:
    base: "Expr"
    exponent: int


Expr = Union[Constant, Var, Param, Neg, Add, Sub, Mul, Div, PowInt]


# -- tokenizer -------------------------------------------------------------

_TOKEN_RE = re.compile(
    r"\s*(?:(?P<num>(?:\d+\.\d*|\.\d+|\d+)(?:[eE][+-]?\d+)?)"
    r"|(?P<ident>[A-Za-z_][A-Za-z0-9_]*)"
    r"|(?P<op>[-+*/^()]))"
)


def _tokenize(text: str) -> list[tuple[str, str, int]]:
    tokens = []
    pos = 0
    while pos < len(text):
        m = _TOKEN_RE.match(text, pos)
        if m is None:
            if text[pos:].strip() == "":
                break
            raise SyntaxError(f"unexpected character {text[pos]!r} at position {pos}")
        kind = m.lastgroup
        tokens.append((kind, m.group(kind), m.start(kind)))
        pos = m.end()
    tokens.append(("end", "", len(text)))
    return tokens


def _fraction_from_literal(s: str) -> Fraction:
    if "e" in s or "E" in s:
        mant, _, exp = s.replace("E", "e").partition("e")
        return _fraction_from_literal(mant) * Fraction(10) ** int(exp)
    if "." in s:
        intpart, _, fracpart = s.partition(".")
        num = int(intpart or "0") * 10 ** len(fracpart) + int(fracpart or "0")
        return Fraction(num, 10 ** len(fracpart))
    return Fraction(int(s))


class _Parser:
    def __init__(self, text: str, variables: Sequence[str], params: Sequence[str]):
        self.text = text
        self.tokens = _tokenize(text)
        self.i = 0
        self.var_index = {name: k for k, name in enumerate(variables)}
        self.params = set(params)

    def peek(self) -> tuple[str, str, int]:
        return self.tokens[self.i]

    def advance(self) -> tuple[str, str, int]:
        tok = self.tokens[self.i]
        self.i += 1
        return tok

    def expect_op(self, op: str) -> None:
        kind, val, pos = self.peek()
        if kind != "op" or val != op:
            raise SyntaxError(f"expected {op!r} at position {pos}")
        self.advance()

    def parse(self) -> Expr:
        e = self.expr()
        kind, val, pos = self.peek()
        if kind != "end":
            raise SyntaxError(f"unexpected {val!r} at position {pos}")
        return e

    def expr(self) -> Expr:
        e = self.term()
        while True:
            kind, val, _ = self.peek()
            if kind == "op" and val in "+-":
                self.advance()
                rhs = self.term()
                e = Add(e, rhs) if val == "+" else Sub(e, rhs)
            else:
                return e

    def term(self) -> Expr:
        e = self.unary()
        while True:
            kind, val, _ = self.peek()
            if kind == "op" and val in "*/":
                self.advance()
                rhs = self.unary()
                e = Mul(e, rhs) if val == "*" else Div(e, rhs)
            else:
                return e

    def unary(self) -> Expr:
        kind, val, _ = self.peek()
        if kind == "op" and val == "-":
            self.advance()
            return Neg(self.unary())
        return self.power()

    def power(self) -> Expr:
        e = self.atom()
        while True:
            kind, val, _ = self.peek()
            if kind == "op" and val == "^":
                self.advance()
                nkind, nval, npos = self.peek()
                if nkind != "num" or not nval.isdigit():
                    raise NonIntegerExponent(
                        f"exponent must be a nonnegative integer literal, "
                        f"got {nval!r} at position {npos}"
                    )
                self.advance()
                e = PowInt(e, int(nval))
            else:
                return e

    def atom(self) -> Expr:
        kind, val, pos = self.advance()
        if kind == "num":
            return Constant(_fraction_from_literal(val))
        if kind == "ident":
            if val in self.var_index:
                return Var(self.var_index[val], val)
            if val in self.params:
                return Param(val)
            raise UnknownIdentifier(f"unknown identifier {val!r} at position {pos}")
        if kind == "op" and val == "(":
            e = self.expr()
            self.expect_op(")")
            return e
        what = repr(val) if val else "end of input"
        raise SyntaxError(f"expected a value, got {what} at position {pos}")


def parse_expr(
    text: str, variables: Sequence[str], params: Sequence[str] = ()
) -> Expr:
    """Parse an expression over the named variables and parameters."""
    if not text.strip():
        raise SyntaxError("empty expression at position 0")
    return _Parser(text, variables, params).parse()


# -- printer ---------------------------------------------------------------

_LVL_ADD, _LVL_MUL, _LVL_NEG, _LVL_POW, _LVL_ATOM = 1, 2, 3, 4, 5


def _const_literal(v: Fraction) -> str:
    if v.denominator == 1:
        return str(v.numerator)
    # exact decimal form when the denominator is 2^a * 5^b
    den = v.denominator
    a = b = 0
    while den % 2 == 0:
        den //= 2
        a += 1
    while den % 5 == 0:
        den //= 5
        b += 1
    if den == 1:
        shift = max(a, b)
        digits = v.numerator * 10**shift // v.denominator
        s = str(abs(digits)).rjust(shift + 1, "0")
        sign = "-" if digits < 0 else ""
        out = f"{sign}{s[:-shift]}.{s[-shift:]}" if shift else f"{sign}{s}"
        return out
    return f"{v.numerator}/{v.denominator}"  # reparses as Div with equal value


def _fmt(e: Expr, min_level: int) -> str:
    if isinstance(e, Constant):
        s = _const_literal(e.value)
        return f"({s})" if s.startswith("-") or "/" in s else s
    if isinstance(e, Var):
        return e.name
    if isinstance(e, Param):
        return e.name
    if isinstance(e, Neg):
        body = "-" + _fmt(e.a, _LVL_NEG)
        return body if min_level <= _LVL_NEG else f"({body})"
    if isinstance(e, (Add, Sub)):
        op = "+" if isinstance(e, Add) else "-"
        body = _fmt(e.a, _LVL_ADD) + op + _fmt(e.b, _LVL_ADD + 1)
        return body if min_level <= _LVL_ADD else f"({body})"
    if isinstance(e, (Mul, Div)):
        op = "*" if isinstance(e, Mul) else "/"
        body = _fmt(e.a, _LVL_MUL) + op + _fmt(e.b, _LVL_MUL + 1)
        return body if min_level <= _LVL_MUL else f"({body})"
    if isinstance(e, PowInt):
        body = _fmt(e.base, _LVL_POW) + "^" + str(e.exponent)
        return body if min_level <= _LVL_POW else f"({body})"
    raise TypeError(f"not an expression node: {e!r}")


def format_expr(e: Expr) -> str:
    """Minimal-parenthesis text form; reparses to a structurally equal tree."""
    return _fmt(e, _LVL_ADD)


# -- evaluation --------------------------------------------------------------

T = TypeVar("T")


def eval_expr(
    e: Expr,
    env: Sequence[T],
    params: Mapping[str, T],
    lift: Callable[[Fraction], T],
) -> T:
    """Evaluate in any semantics supporting +, -, *, /, ** and unary minus.

    Over Intervals the result encloses the range of the expression's
    syntactic form (sub-expressions are evaluated independently, so the
    dependency effect may widen but never truncate the true range).
    """
    if isinstance(e, Constant):
        return lift(e.value)
    if isinstance(e, Var):
        return env[e.index]
    if isinstance(e, Param):
        return params[e.name]
    if isinstance(e, Neg):
        return -eval_expr(e.a, env, params, lift)
    if isinstance(e, Add):
        return eval_expr(e.a, env, params, lift) + eval_expr(e.b, env, params, lift)
    if isinstance(e, Sub):
        return eval_expr(e.a, env, params, lift) - eval_expr(e.b, env, params, lift)
    if isinstance(e, Mul):
        return eval_expr(e.a, env, params, lift) * eval_expr(e.b, env, params, lift)
    if isinstance(e, Div):
        return eval_expr(e.a, env, params, lift) / eval_expr(e.b, env, params, lift)
    if isinstance(e, PowInt):
        return eval_expr(e.base, env, params, lift) ** e.exponent
    raise TypeError(f"not an expression node: {e!r}")


def expr_variables(e: Expr) -> set[int]:
    """Indices of all variables occurring in the tree."""
    if isinstance(e, Var):
        return {e.index}
    if isinstance(e, (Constant, Param)):
        return set()
    if isinstance(e, Neg):
        return expr_variables(e.a)
    if isinstance(e, PowInt):
        return expr_variables(e.base)
    return expr_variables(e.a) | expr_variables(e.b)


# -- symbolic differentiation -------------------------------------------------

_ZERO = Constant(Fraction(0))
_ONE = Constant(Fraction(1))


def _cval(e: Expr) -> Fraction | None:
    return e.value if isinstance(e, Constant) else None


def _fneg(a: Expr) -> Expr:
    v = _cval(a)
    if v is not None:
        return Constant(-v)
    if isinstance(a, Neg):
        return a.a
    return Neg(a)


def _fadd(a: Expr, b: Expr) -> Expr:
    va, vb = _cval(a), _cval(b)
    if va is not None and vb is not None:
        return Constant(va + vb)
    if va == 0:
        return b
    if vb == 0:
        return a
    return Add(a, b)


def _fsub(a: Expr, b: Expr) -> Expr:
    va, vb = _cval(a), _cval(b)
    if va is not None and vb is not None:
        return Constant(va - vb)
    if vb == 0:
        return a
    if va == 0:
        return _fneg(b)
    return Sub(a, b)


def _fmul(a: Expr, b: Expr) -> Expr:
    va, vb = _cval(a), _cval(b)
    if va == 0 or vb == 0:
        return _ZERO
    if va is not None and vb is not None:
        return Constant(va * vb)
    if va == 1:
        return b
    if vb == 1:
        return a
    return Mul(a, b)


def _fdiv(a: Expr, b: Expr) -> Expr:
    va, vb = _cval(a), _cval(b)
    if va == 0 and vb != 0:
        return _ZERO
    if va is not None and vb is not None and vb != 0:
        return Constant(va / vb)
    if vb == 1:
        return a
    return Div(a, b)


def _fpow(a: Expr, n: int) -> Expr:
    if n == 0:
        return _ONE
    if n == 1:
        return a
    v = _cval(a)
    if v is not None and (v != 0 or n > 0):
        return Constant(v**n)
    return PowInt(a, n)


def diff_expr(e: Expr, v: int) -> Expr:
    """Partial derivative with respect to variable index v, lightly folded.

    Folding only drops exact-zero and exact-one factors introduced by the
    product/chain rules, so evaluating the result over intervals encloses
    the true partial derivative's range just as eval_expr does for e.
    """
    if isinstance(e, (Constant, Param)):
        return _ZERO
    if isinstance(e, Var):
        return _ONE if e.index == v else _ZERO
    if isinstance(e, Neg):
        return _fneg(diff_expr(e.a, v))
    if isinstance(e, Add):
        return _fadd(diff_expr(e.a, v), diff_expr(e.b, v))
    if isinstance(e, Sub):
        return _fsub(diff_expr(e.a, v), diff_expr(e.b, v))
    if isinstance(e, Mul):
        return _fadd(
            _fmul(diff_expr(e.a, v), e.b), _fmul(e.a, diff_expr(e.b, v))
        )
    if isinstance(e, Div):
        num = _fsub(
            _fmul(diff_expr(e.a, v), e.b), _fmul(e.a, diff_expr(e.b, v))
        )
        return _fdiv(num, _fpow(e.b, 2))
    if isinstance(e, PowInt):
        inner = diff_expr(e.base, v)
        scaled = _fmul(Constant(Fraction(e.exponent)), _fpow(e.base, e.exponent - 1))
        return _fmul(scaled, inner)
    raise TypeError(f"not an expression node: {e!r}")


# -- ODE systems -------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class OdeSystem:
    """An autonomous system x' = f(x) with exact rational parameters."""

    name: str
    var_names: tuple[str, ...]
    params: dict[str, Fraction]
    rhs: tuple[Expr, ...]

    def __post_init__(self) -> None:
        if len(self.rhs) != len(self.var_names):
            raise ValueError(
                f"system {self.name!r}: {len(self.rhs)} equations "
                f"for {len(self.var_names)} variables"
            )

    @property
    def dim(self) -> int:
        return len(self.var_names)

    def param_intervals(self) -> dict[str, Interval]:
        return {k: Interval.from_fraction(v) for k, v in self.params.items()}

    def param_floats(self) -> dict[str, float]:
        return {k: float(v) for k, v in self.params.items()}

    def f_box(self, box: Box) -> Box:
        """Outward interval enclosure of f over the box."""
        pv = self.param_intervals()
        env = box.ivs
        return Box(
            eval_expr(e, env, pv, Interval.from_fraction) for e in self.rhs
        )

    def f_point(self, xs: Sequence[float]) -> tuple[float, ...]:
        """Approximate (round-to-nearest) value of f at a point."""
        pv = self.param_floats()
        return tuple(eval_expr(e, list(xs), pv, float) for e in self.rhs)


# -- problem files -----------------------------------------------------------


def parse_problem_text(text: str) -> tuple[OdeSystem, Box]:
    """Parse the line-oriented problem format; returns (system, initial box).

    Keys: name, dim, vars, param (repeatable), rhs (one per variable,
    written `rhs <var> <expression>`), init_center, init_radius.
    '#' starts a comment; blank lines are ignored.
    """
    name = None
    dim = None
    var_names: list[str] | None = None
    params: dict[str, Fraction] = {}
    rhs_text: dict[str, str] = {}
    center: list[Fraction] | None = None
    radius: list[Fraction] | None = None

    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        key, _, rest = line.partition(" ")
        rest = rest.strip()
        try:
            if key == "name":
                name = rest
            elif key == "dim":
                dim = int(rest)
            elif key == "vars":
                var_names = rest.split()
            elif key == "param":
                pname, _, pval = rest.partition(" ")
                params[pname] = Fraction(pval.strip())
            elif key == "rhs":
                vname, _, etext = rest.partition(" ")
                if vname in rhs_text:
                    raise ValueError(f"duplicate rhs for variable {vname!r}")
                rhs_text[vname] = etext.strip()
            elif key == "init_center":
                center = [Fraction(tok) for tok in rest.split()]
            elif key == "init_radius":
                radius = [Fraction(tok) for tok in rest.split()]
            else:
                raise ValueError(f"unknown key {key!r}")
        except (ValueError, ZeroDivisionError) as exc:
            raise ValueError(f"problem file line {lineno}: {exc}") from exc

    missing = [
        k
        for k, v in [
            ("name", name),
            ("dim", dim),
            ("vars", var_names),
            ("rhs", rhs_text or None),
            ("init_center", center),
            ("init_radius", radius),
        ]
        if v is None
    ]
    if missing:
        raise ValueError(f"problem file: missing required keys {missing}")
    assert var_names is not None and center is not None and radius is not None

    if dim != len(var_names):
        raise ValueError(f"dim {dim} but {len(var_names)} variable names")
    if set(rhs_text) != set(var_names):
        raise ValueError(
            f"rhs variables {sorted(rhs_text)} do not match vars {var_names}"
        )
    if len(center) != dim or len(radius) != dim:
        raise ValueError("init_center/init_radius must list one value per variable")
    if any(r < 0 for r in radius):
        raise ValueError("init_radius entries must be nonnegative")

    rhs = tuple(
        parse_expr(rhs_text[v], var_names, list(params)) for v in var_names
    )
    system = OdeSystem(str(name), tuple(var_names), params, rhs)
    init = Box(
        Interval(
            Interval.from_fraction(c - r).lo,
            Interval.from_fraction(c + r).hi,
        )
        for c, r in zip(center, radius)
    )
    return system, init


def parse_problem_file(path) -> tuple[OdeSystem, Box]:
    with open(path, "r", encoding="utf-8") as fh:
        return parse_problem_text(fh.read())
