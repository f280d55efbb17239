"""Small real-valued expression language with forward-mode dual numbers.

Transition cocycles, partitions and curves are all written in this language,
for example ``"n*phi"`` or ``"1 + 0.3*cos(2*pi*t)"``.  Expressions are parsed
into an immutable AST; :func:`eval_dual` evaluates them on :class:`Dual`
numbers whose values may be numpy arrays, so a whole grid of points can be
pushed through one tree walk.

Precedence, loosest first: ``+ -``, ``* /``, unary minus, ``^`` (right
associative).  ``-u^2`` therefore means ``-(u^2)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Mapping, Union

import numpy as np

__all__ = [
    "Expr",
    "Num",
    "Var",
    "Neg",
    "BinOp",
    "Call",
    "Dual",
    "ExprError",
    "ExprSyntaxError",
    "UnboundVariableError",
    "EvalDomainError",
    "parse",
    "to_text",
    "eval_dual",
    "evaluate",
    "free_variables",
    "substitute",
    "FUNCTIONS",
    "CONSTANTS",
]


class ExprError(Exception):
    pass


class ExprSyntaxError(ExprError):
    def __init__(self, message: str, offset: int, source: str = ""):
        super().__init__(f"{message} at offset {offset}")
        self.offset = offset
        self.source = source


class UnboundVariableError(ExprError):
    def __init__(self, name: str):
        super().__init__(f"unbound variable {name!r}")
        self.name = name


class EvalDomainError(ExprError):
    def __init__(self, message: str, expr: "Expr"):
        super().__init__(f"{message} in {to_text(expr)!r}")
        self.expr = expr


# ---------------------------------------------------------------------------
# AST


@dataclass(frozen=True)
class Num:
    value: float


@dataclass(frozen=True)
class Var:
    name: str


@dataclass(frozen=True)
class Neg:
    operand: "Expr"


@dataclass(frozen=True)
class BinOp:
    op: str  # one of + - * / ^
    left: "Expr"
    right: "Expr"


@dataclass(frozen=True)
class Call:
    func: str
    args: tuple


Expr = Union[Num, Var, Neg, BinOp, Call]

FUNCTIONS = {
    "sin": 1,
    "cos": 1,
    "tan": 1,
    "exp": 1,
    "log": 1,
    "sqrt": 1,
    "abs": 1,
    "atan2": 2,
}

# Names that are not free variables.  ``alpha`` is bound at evaluation time.
CONSTANTS = ("pi", "alpha")


# ---------------------------------------------------------------------------
# Tokenizer and parser


def _tokenize(src: str):
    tokens = []
    i = 0
    n = len(src)
    while i < n:
        c = src[i]
        if c.isspace():
            i += 1
            continue
        if c.isdigit() or (c == "." and i + 1 < n and src[i + 1].isdigit()):
            start = i
            while i < n and (src[i].isdigit() or src[i] == "."):
                i += 1
            if i < n and src[i] in "eE":
                j = i + 1
                if j < n and src[j] in "+-":
                    j += 1
                if j < n and src[j].isdigit():
                    i = j
                    while i < n and src[i].isdigit():
                        i += 1
            text = src[start:i]
            try:
                value = float(text)
            except ValueError:
                raise ExprSyntaxError(f"malformed number {text!r}", start, src) from None
            tokens.append(("num", value, start))
            continue
        if c.isalpha() or c == "_":
            start = i
            while i < n and (src[i].isalnum() or src[i] == "_"):
                i += 1
            tokens.append(("name", src[start:i], start))
            continue
        if c in "+-*/^(),":
            tokens.append((c, c, i))
            i += 1
            continue
        raise ExprSyntaxError(f"unexpected character {c!r}", i, src)
    tokens.append(("end", None, n))
    return tokens


class _Parser:
    def __init__(self, src: str):
        self.src = src
        self.tokens = _tokenize(src)
        self.pos = 0

    def peek(self):
        return self.tokens[self.pos]

    def advance(self):
        tok = self.tokens[self.pos]
        self.pos += 1
        return tok

    def expect(self, kind: str):
        tok = self.advance()
        if tok[0] != kind:
            raise self.error(tok, f"expected {kind!r}")
        return tok

    def error(self, tok, message: str) -> ExprSyntaxError:
        if tok[0] == "end":
            return ExprSyntaxError("unexpected end of input", tok[2], self.src)
        return ExprSyntaxError(f"{message}, found {tok[1]!r}", tok[2], self.src)

    def parse(self) -> Expr:
        expr = self.additive()
        tok = self.peek()
        if tok[0] != "end":
            raise self.error(tok, "unexpected token")
        return expr

    def additive(self) -> Expr:
        left = self.multiplicative()
        while self.peek()[0] in ("+", "-"):
            op = self.advance()[0]
            left = BinOp(op, left, self.multiplicative())
        return left

    def multiplicative(self) -> Expr:
        left = self.unary()
        while self.peek()[0] in ("*", "/"):
            op = self.advance()[0]
            left = BinOp(op, left, self.unary())
        return left

    def unary(self) -> Expr:
        if self.peek()[0] == "-":
            self.advance()
            bare = self.peek()[0] == "num"
            operand = self.unary()
            # fold negation of a bare literal so printed negative numbers round-trip
            if bare and isinstance(operand, Num):
                return Num(-operand.value)
            return Neg(operand)
        if self.peek()[0] == "+":
            self.advance()
            return self.unary()
        return self.power()

    def power(self) -> Expr:
        base = self.atom()
        if self.peek()[0] == "^":
            self.advance()
            # right associative; exponent may carry its own sign
            return BinOp("^", base, self.unary())
        return base

    def atom(self) -> Expr:
        tok = self.advance()
        kind = tok[0]
        if kind == "num":
            return Num(tok[1])
        if kind == "(":
            inner = self.additive()
            self.expect(")")
            return inner
        if kind == "name":
            name = tok[1]
            if self.peek()[0] == "(":
                if name not in FUNCTIONS:
                    raise ExprSyntaxError(f"unknown function {name!r}", tok[2], self.src)
                self.advance()
                args = [self.additive()]
                while self.peek()[0] == ",":
                    self.advance()
                    args.append(self.additive())
                self.expect(")")
                if len(args) != FUNCTIONS[name]:
                    raise ExprSyntaxError(
                        f"{name} takes {FUNCTIONS[name]} argument(s), got {len(args)}",
                        tok[2],
                        self.src,
                    )
                return Call(name, tuple(args))
            if name in FUNCTIONS:
                raise ExprSyntaxError(f"function {name!r} used without arguments", tok[2], self.src)
            return Var(name)
        raise self.error(tok, "expected a number, name or '('")


def parse(src: str) -> Expr:
    """Parse expression text into an AST.

    Raises :class:`ExprSyntaxError` carrying the byte offset of the problem.
    """
    if not src or not src.strip():
        raise ExprSyntaxError("empty expression", 0, src or "")
    if not src.isascii():
        bad = next(i for i, c in enumerate(src) if not c.isascii())
        raise ExprSyntaxError("non-ASCII character", len(src[:bad].encode()), src)
    return _Parser(src).parse()


def _as_expr(e: Union[Expr, str]) -> Expr:
    return parse(e) if isinstance(e, str) else e


# ---------------------------------------------------------------------------
# Printing and inspection


def to_text(e: Expr) -> str:
    """Print an AST so that ``parse(to_text(e)) == e``."""
    if isinstance(e, Num):
        text = repr(float(e.value))
        return f"({text})" if e.value < 0 or text.startswith("-") else text
    if isinstance(e, Var):
        return e.name
    if isinstance(e, Neg):
        inner = to_text(e.operand)
        return f"(-({inner}))" if isinstance(e.operand, Num) and not inner.startswith("(") else f"(-{inner})"
    if isinstance(e, BinOp):
        return f"({to_text(e.left)} {e.op} {to_text(e.right)})"
    if isinstance(e, Call):
        return f"{e.func}({', '.join(to_text(a) for a in e.args)})"
    raise TypeError(f"not an expression: {e!r}")


def free_variables(e: Union[Expr, str]) -> frozenset:
    """Variable names in ``e``, excluding the named constants."""
    e = _as_expr(e)
    if isinstance(e, Num):
        return frozenset()
    if isinstance(e, Var):
        return frozenset() if e.name in CONSTANTS else frozenset([e.name])
    if isinstance(e, Neg):
        return free_variables(e.operand)
    if isinstance(e, BinOp):
        return free_variables(e.left) | free_variables(e.right)
    return frozenset().union(*(free_variables(a) for a in e.args))


def substitute(e: Union[Expr, str], mapping: Mapping[str, Union[Expr, str]]) -> Expr:
    """Simultaneously replace variables by expressions."""
    e = _as_expr(e)
    mapping = {k: _as_expr(v) for k, v in mapping.items()}

    def go(node):
        if isinstance(node, Var):
            return mapping.get(node.name, node)
        if isinstance(node, Num):
            return node
        if isinstance(node, Neg):
            return Neg(go(node.operand))
        if isinstance(node, BinOp):
            return BinOp(node.op, go(node.left), go(node.right))
        return Call(node.func, tuple(go(a) for a in node.args))

    return go(e)


# ---------------------------------------------------------------------------
# Dual numbers


def _pad(deriv: np.ndarray, ndim: int) -> np.ndarray:
    extra = ndim - (deriv.ndim - 1)
    return deriv.reshape(deriv.shape + (1,) * extra) if extra > 0 else deriv


class Dual:
    """Value plus first derivatives, one slot per independent variable.

    ``value`` may be a float or an ndarray of shape ``S``; ``deriv`` then has
    shape ``(nslots,) + S``.
    """

    __slots__ = ("value", "deriv")

    def __init__(self, value, deriv):
        self.value = value
        self.deriv = np.asarray(deriv, dtype=float)

    @classmethod
    def constant(cls, value, nslots: int) -> "Dual":
        value = np.asarray(value, dtype=float) if np.ndim(value) else float(value)
        return cls(value, np.zeros((nslots,) + np.shape(value)))

    @classmethod
    def variable(cls, value, slot: int, nslots: int) -> "Dual":
        d = cls.constant(value, nslots)
        d.deriv[slot] = 1.0
        return d

    @property
    def nslots(self) -> int:
        return self.deriv.shape[0]

    def _lift(self, other) -> "Dual":
        if isinstance(other, Dual):
            return other
        return Dual.constant(other, self.nslots)

    def _pair(self, other):
        """Both operands with derivative arrays padded to the result rank."""
        other = self._lift(other)
        nd = max(np.ndim(self.value), np.ndim(other.value))
        return _pad(self.deriv, nd), other, _pad(other.deriv, nd)

    def __add__(self, other):
        da, other, db = self._pair(other)
        return Dual(self.value + other.value, da + db)

    __radd__ = __add__

    def __sub__(self, other):
        da, other, db = self._pair(other)
        return Dual(self.value - other.value, da - db)

    def __rsub__(self, other):
        return self._lift(other) - self

    def __neg__(self):
        return Dual(-self.value, -self.deriv)

    def __mul__(self, other):
        da, other, db = self._pair(other)
        return Dual(self.value * other.value, da * other.value + self.value * db)

    __rmul__ = __mul__

    def __truediv__(self, other):
        da, other, db = self._pair(other)
        q = self.value / other.value
        return Dual(q, (da - q * db) / other.value)

    def __rtruediv__(self, other):
        return self._lift(other) / self

    def __repr__(self) -> str:
        return f"Dual({self.value!r}, {self.deriv.tolist()!r})"


# ---------------------------------------------------------------------------
# Evaluation


def _is_integer(x) -> bool:
    return bool(np.all(np.equal(np.mod(x, 1.0), 0.0)))


def _dual_pow(base: Dual, expo: Dual, node) -> Dual:
    b, p = base.value, expo.value
    nd = max(np.ndim(b), np.ndim(p))
    base = Dual(b, _pad(base.deriv, nd))
    expo = Dual(p, _pad(expo.deriv, nd))
    expo_const = not np.any(expo.deriv)
    if expo_const and _is_integer(p):
        if np.any((b == 0) & (p < 0)):
            raise EvalDomainError("division by zero", node)
        value = np.power(b, p) if np.ndim(b) or np.ndim(p) else float(b) ** float(p)
        # d(b^p) = p b^(p-1) db; b^(p-1) at b=0 is fine for p >= 1
        if np.ndim(b) or np.ndim(p):
            with np.errstate(divide="ignore", invalid="ignore"):
                slope = np.where(p == 0, 0.0, p * np.power(b, p - 1.0))
        else:
            slope = 0.0 if p == 0 else p * float(b) ** (float(p) - 1.0)
        return Dual(value, base.deriv * slope)
    if np.any(b <= 0):
        if expo_const and np.all(p > 1) and not np.any(b < 0) and not np.any(base.deriv):
            return Dual(np.power(b, p), np.zeros_like(base.deriv))
        raise EvalDomainError("power of non-positive base with non-integer exponent", node)
    value = np.power(b, p)
    logb = np.log(b)
    return Dual(value, value * (expo.deriv * logb + p * base.deriv / b))


def _apply(func: str, args, node) -> Dual:
    if func == "atan2":
        y, x = args
        r2 = x.value * x.value + y.value * y.value
        if np.any(r2 == 0):
            raise EvalDomainError("atan2 of (0, 0)", node)
        nd = np.ndim(r2)
        return Dual(np.arctan2(y.value, x.value), (x.value * _pad(y.deriv, nd) - y.value * _pad(x.deriv, nd)) / r2)
    (a,) = args
    v = a.value
    if func == "sin":
        return Dual(np.sin(v), np.cos(v) * a.deriv)
    if func == "cos":
        return Dual(np.cos(v), -np.sin(v) * a.deriv)
    if func == "tan":
        c = np.cos(v)
        if np.any(np.abs(c) < 1e-300):
            raise EvalDomainError("tan at a pole", node)
        t = np.sin(v) / c
        return Dual(t, (1.0 + t * t) * a.deriv)
    if func == "exp":
        e = np.exp(v)
        return Dual(e, e * a.deriv)
    if func == "log":
        if np.any(v <= 0):
            raise EvalDomainError("log of non-positive value", node)
        return Dual(np.log(v), a.deriv / v)
    if func == "sqrt":
        if np.any(v < 0):
            raise EvalDomainError("sqrt of negative value", node)
        s = np.sqrt(v)
        if np.any((s == 0) & np.any(a.deriv != 0, axis=0)):
            raise EvalDomainError("sqrt not differentiable at 0", node)
        with np.errstate(divide="ignore", invalid="ignore"):
            d = np.where(a.deriv == 0, 0.0, a.deriv / (2.0 * s))
        return Dual(s, d)
    if func == "abs":
        return Dual(np.abs(v), np.sign(v) * a.deriv)
    raise EvalDomainError(f"unknown function {func!r}", node)


def eval_dual(
    e: Union[Expr, str],
    env: Mapping[str, Dual],
    constants: Mapping[str, float] | None = None,
) -> Dual:
    """Evaluate ``e`` on dual numbers.

    ``env`` binds every free variable; ``constants`` binds ``alpha`` (and may
    override ``pi``).  Domain problems raise :class:`EvalDomainError` naming
    the offending subexpression instead of producing NaN.
    """
    e = _as_expr(e)
    if not env:
        raise ValueError("env must bind at least one variable (it fixes the slot count)")
    nslots = next(iter(env.values())).nslots
    consts = {"pi": math.pi}
    if constants:
        consts.update(constants)

    def go(node) -> Dual:
        if isinstance(node, Num):
            return Dual.constant(node.value, nslots)
        if isinstance(node, Var):
            if node.name in env:
                return env[node.name]
            if node.name in consts and consts[node.name] is not None:
                return Dual.constant(consts[node.name], nslots)
            raise UnboundVariableError(node.name)
        if isinstance(node, Neg):
            return -go(node.operand)
        if isinstance(node, BinOp):
            left, right = go(node.left), go(node.right)
            if node.op == "+":
                return left + right
            if node.op == "-":
                return left - right
            if node.op == "*":
                return left * right
            if node.op == "/":
                if np.any(right.value == 0):
                    raise EvalDomainError("division by zero", node)
                return left / right
            return _dual_pow(left, right, node)
        return _apply(node.func, [go(a) for a in node.args], node)

    with np.errstate(over="raise", invalid="raise"):
        try:
            out = go(e)
        except (FloatingPointError, OverflowError) as exc:
            raise EvalDomainError(f"floating point error ({exc})", e) from None
    if not np.all(np.isfinite(out.value)) or not np.all(np.isfinite(out.deriv)):
        raise EvalDomainError("non-finite result", e)
    return out


def evaluate(
    e: Union[Expr, str],
    env: Mapping[str, float],
    constants: Mapping[str, float] | None = None,
):
    """Plain pointwise evaluation (values only)."""
    duals = {k: Dual.constant(v, 1) for k, v in env.items()}
    if not duals:
        duals = {"__": Dual.constant(0.0, 1)}
    return eval_dual(e, duals, constants).value
