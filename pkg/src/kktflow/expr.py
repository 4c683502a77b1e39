"""Scalar expressions over x1..xN with forward-mode gradients.

Grammar (precedence high to low: ``^``, unary minus, ``* /``, ``+ -``)::

    expr   := term (("+" | "-") term)*
    term   := unary (("*" | "/") unary)*
    unary  := "-" unary | power
    power  := atom ("^" unary)?
    atom   := number | xK | func "(" expr ")" | "(" expr ")"
    func   := sin | cos | exp | log | sqrt | abs

``^`` is right-associative and binds tighter than a leading minus, so
``-x1^2`` is ``-(x1^2)`` and ``2^-x1`` is ``2^(-x1)``.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass, field
from typing import Union

import numpy as np

FUNCTIONS = ("sin", "cos", "exp", "log", "sqrt", "abs")
NONSMOOTH = frozenset({"abs"})


class ExprError(ValueError):
    """Base class for parse and evaluation errors."""


class ParseError(ExprError):
    def __init__(self, message: str, offset: int):
        super().__init__(f"{message} at offset {offset}")
        self.offset = offset


class DomainError(ExprError):
    """Evaluation left the domain of an operation (log of 0, x/0, ...)."""

    def __init__(self, message: str, node: "Node | None" = None):
        super().__init__(message if node is None else f"{message} in '{to_text(node)}'")
        self.node = node


# --- AST -------------------------------------------------------------------


@dataclass(frozen=True)
class Const:
    value: float


@dataclass(frozen=True)
class Var:
    index: int  # zero-based


@dataclass(frozen=True)
class Neg:
    arg: "Node"


@dataclass(frozen=True)
class Call:
    name: str
    arg: "Node"


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
    left: "Node"
    right: "Node"


Node = Union[Const, Var, Neg, Call, Add, Sub, Mul, Div, Pow]
_BINARY = (Add, Sub, Mul, Div, Pow)
_SYMBOL = {Add: "+", Sub: "-", Mul: "*", Div: "/", Pow: "^"}


def walk(node: Node):
    """Yield every node of the tree, parents before children."""
    stack = [node]
    while stack:
        n = stack.pop()
        yield n
        if isinstance(n, _BINARY):
            stack.append(n.right)
            stack.append(n.left)
        elif isinstance(n, (Neg, Call)):
            stack.append(n.arg)


def _is_constant(node: Node) -> bool:
    return not any(isinstance(n, Var) for n in walk(node))


def _is_affine(node: Node) -> bool:
    if isinstance(node, (Const, Var)) or _is_constant(node):
        return True
    if isinstance(node, Neg):
        return _is_affine(node.arg)
    if isinstance(node, (Add, Sub)):
        return _is_affine(node.left) and _is_affine(node.right)
    if isinstance(node, Mul):
        return (_is_constant(node.left) and _is_affine(node.right)) or (
            _is_constant(node.right) and _is_affine(node.left))
    if isinstance(node, Div):
        return _is_affine(node.left) and _is_constant(node.right)
    return False


# --- parser ------------------------------------------------------------------

_TOKEN = re.compile(
    r"\s*(?:(?P<num>(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)"
    r"|(?P<id>[A-Za-z_][A-Za-z_0-9]*)"
    r"|(?P<op>[-+*/^()]))"
)


class _Parser:
    def __init__(self, text: str, n_vars: int):
        self.text = text
        self.n_vars = n_vars
        self.tokens: list[tuple[str, str, int]] = []
        pos = 0
        while True:
            m = _TOKEN.match(text, pos)
            if m is None or m.end() == pos:
                rest = text[pos:]
                if rest.strip() == "":
                    break
                bad = pos + len(rest) - len(rest.lstrip())
                raise ParseError(f"unexpected character {text[bad]!r}", self._byte(bad))
            kind = m.lastgroup
            self.tokens.append((kind, m.group(kind), m.start(kind)))
            pos = m.end()
        self.i = 0

    def _byte(self, char_offset: int) -> int:
        return len(self.text[:char_offset].encode("utf-8"))

    def peek(self):
        if self.i < len(self.tokens):
            return self.tokens[self.i]
        return ("end", "", len(self.text))

    def error(self, message: str):
        raise ParseError(message, self._byte(self.peek()[2]))

    def expect(self, value: str):
        kind, tok, _ = self.peek()
        if kind == "end":
            self.error(f"expected {value!r} but input ended")
        if tok != value:
            self.error(f"expected {value!r}, found {tok!r}")
        self.i += 1

    def parse(self) -> Node:
        node = self.expr()
        kind, tok, _ = self.peek()
        if kind != "end":
            self.error(f"unexpected token {tok!r}")
        return node

    def expr(self) -> Node:
        node = self.term()
        while self.peek()[1] in ("+", "-") and self.peek()[0] == "op":
            op = self.peek()[1]
            self.i += 1
            rhs = self.term()
            node = Add(node, rhs) if op == "+" else Sub(node, rhs)
        return node

    def term(self) -> Node:
        node = self.unary()
        while self.peek()[1] in ("*", "/") and self.peek()[0] == "op":
            op = self.peek()[1]
            self.i += 1
            rhs = self.unary()
            node = Mul(node, rhs) if op == "*" else Div(node, rhs)
        return node

    def unary(self) -> Node:
        if self.peek()[:2] == ("op", "-"):
            self.i += 1
            return Neg(self.unary())
        return self.power()

    def power(self) -> Node:
        base = self.atom()
        if self.peek()[:2] == ("op", "^"):
            self.i += 1
            return Pow(base, self.unary())
        return base

    def atom(self) -> Node:
        kind, tok, off = self.peek()
        if kind == "num":
            self.i += 1
            value = float(tok)
            if not math.isfinite(value):
                raise ParseError(f"number {tok!r} is not finite", self._byte(off))
            return Const(value)
        if kind == "id":
            self.i += 1
            if tok in FUNCTIONS:
                self.expect("(")
                arg = self.expr()
                self.expect(")")
                return Call(tok, arg)
            m = re.fullmatch(r"x(\d+)", tok)
            if m is None:
                raise ParseError(f"unknown identifier {tok!r}", self._byte(off))
            k = int(m.group(1))
            if not 1 <= k <= self.n_vars:
                raise ParseError(
                    f"variable {tok} out of range x1..x{self.n_vars}", self._byte(off)
                )
            return Var(k - 1)
        if (kind, tok) == ("op", "("):
            self.i += 1
            node = self.expr()
            self.expect(")")
            return node
        if kind == "end":
            self.error("unexpected end of input")
        self.error(f"unexpected token {tok!r}")


# --- printing ----------------------------------------------------------------

_PREC = {Add: 1, Sub: 1, Mul: 2, Div: 2, Neg: 3, Pow: 4}


def _prec(node: Node) -> int:
    return _PREC.get(type(node), 5)


def to_text(node: Node) -> str:
    """Render with the minimum parentheses needed to re-parse to ``node``."""
    if isinstance(node, Const):
        v = float(node.value)
        positive = math.copysign(1.0, v) > 0
        text = str(int(v)) if positive and v.is_integer() and v < 1e15 else repr(v)
        return text if positive else f"({text})"
    if isinstance(node, Var):
        return f"x{node.index + 1}"
    if isinstance(node, Call):
        return f"{node.name}({to_text(node.arg)})"
    if isinstance(node, Neg):
        inner = to_text(node.arg)
        # the operand of a unary minus is itself a unary-level expression
        return "-" + (inner if _prec(node.arg) >= 3 else f"({inner})")
    p = _prec(node)
    left, right = to_text(node.left), to_text(node.right)
    if isinstance(node, Pow):
        if _prec(node.left) <= 4:  # base must be an atom
            left = f"({left})"
        if _prec(node.right) < 3:
            right = f"({right})"
        return f"{left}^{right}"
    if _prec(node.left) < p:
        left = f"({left})"
    # left-associative: equal precedence on the right needs parentheses
    if _prec(node.right) <= p:
        right = f"({right})"
    return f"{left} {_SYMBOL[type(node)]} {right}"


# --- dual numbers ------------------------------------------------------------


@dataclass
class Dual:
    """Value together with its gradient with respect to x1..xN."""

    value: float
    partials: np.ndarray

    @classmethod
    def variable(cls, value: float, index: int, n: int) -> "Dual":
        partials = np.zeros(n)
        partials[index] = 1.0
        return cls(float(value), partials)

    @classmethod
    def constant(cls, value: float, n: int) -> "Dual":
        return cls(float(value), np.zeros(n))

    def __add__(self, other: "Dual") -> "Dual":
        return Dual(self.value + other.value, self.partials + other.partials)

    def __sub__(self, other: "Dual") -> "Dual":
        return Dual(self.value - other.value, self.partials - other.partials)

    def __neg__(self) -> "Dual":
        return Dual(-self.value, -self.partials)

    def __mul__(self, other: "Dual") -> "Dual":
        return Dual(
            self.value * other.value,
            self.value * other.partials + other.value * self.partials,
        )

    def __truediv__(self, other: "Dual") -> "Dual":
        q = self.value / other.value
        return Dual(q, (self.partials - q * other.partials) / other.value)

    def scale(self, value: float, slope: float) -> "Dual":
        """Chain rule for a scalar function with the given value and slope."""
        return Dual(value, slope * self.partials)


def _dual_eval(node: Node, x: np.ndarray) -> Dual:
    n = len(x)
    if isinstance(node, Const):
        return Dual.constant(node.value, n)
    if isinstance(node, Var):
        return Dual.variable(x[node.index], node.index, n)
    if isinstance(node, Neg):
        return -_dual_eval(node.arg, x)
    if isinstance(node, Call):
        a = _dual_eval(node.arg, x)
        u = a.value
        if node.name == "sin":
            return a.scale(math.sin(u), math.cos(u))
        if node.name == "cos":
            return a.scale(math.cos(u), -math.sin(u))
        if node.name == "exp":
            try:
                e = math.exp(u)
            except OverflowError:
                raise DomainError("exp overflow", node) from None
            return a.scale(e, e)
        if node.name == "log":
            if u <= 0:
                raise DomainError("log of nonpositive value", node)
            return a.scale(math.log(u), 1.0 / u)
        if node.name == "sqrt":
            if u < 0 or (u == 0 and a.partials.any()):
                raise DomainError("sqrt outside its differentiable domain", node)
            s = math.sqrt(u)
            return a.scale(s, 0.5 / s if s > 0 else 0.0)
        if node.name == "abs":
            return a.scale(abs(u), float((u > 0) - (u < 0)))
        raise DomainError(f"unknown function {node.name}", node)
    a = _dual_eval(node.left, x)
    b = _dual_eval(node.right, x)
    if isinstance(node, Add):
        return a + b
    if isinstance(node, Sub):
        return a - b
    if isinstance(node, Mul):
        return a * b
    if isinstance(node, Div):
        if b.value == 0:
            raise DomainError("division by zero", node)
        return a / b
    # Pow
    u, w = a.value, b.value
    constant_exponent = not b.partials.any()
    if u == 0 and w < 0:
        raise DomainError("zero raised to a negative power", node)
    if constant_exponent:
        if u < 0 and w != int(w):
            raise DomainError("negative base with fractional exponent", node)
        if u == 0 and 0 < w < 1 and a.partials.any():
            raise DomainError("power not differentiable at zero", node)
        try:
            value = u**w
            slope = w * u ** (w - 1) if w != 0 else 0.0
        except (OverflowError, ZeroDivisionError):
            raise DomainError("power overflow", node) from None
        return a.scale(value, slope)
    if u <= 0:
        raise DomainError("nonpositive base with variable exponent", node)
    try:
        value = u**w
    except OverflowError:
        raise DomainError("power overflow", node) from None
    return Dual(value, value * (w * a.partials / u + math.log(u) * b.partials))


# --- compiled kernel ---------------------------------------------------------


class _Codegen:
    """Unrolls forward-mode dual arithmetic into straight-line Python.

    Each node contributes one value temporary and one temporary per nonzero
    partial; structurally zero partials are never materialised.
    """

    def __init__(self, n_vars: int):
        self.n = n_vars
        self.lines: list[str] = []
        self.nodes: list[Node] = []
        self.count = 0

    def tmp(self, src: str) -> str:
        name = f"t{self.count}"
        self.count += 1
        self.lines.append(f"{name} = {src}")
        return name

    def fail(self, cond: str, message: str, node: Node):
        self.nodes.append(node)
        self.lines.append(f"if {cond}: raise _err({message!r}, _nodes[{len(self.nodes) - 1}])")

    def partials(self, fn, *parts):
        out = []
        for k in range(self.n):
            src = fn(*(p[k] for p in parts))
            out.append(None if src is None else self.tmp(src))
        return out

    def emit(self, node: Node):
        if isinstance(node, Const):
            return repr(float(node.value)), [None] * self.n
        if isinstance(node, Var):
            d = [None] * self.n
            d[node.index] = "1.0"
            return f"x{node.index}", d
        if isinstance(node, Neg):
            v, d = self.emit(node.arg)
            return self.tmp(f"-{v}"), self.partials(lambda a: a and f"-{a}", d)
        if isinstance(node, Call):
            return self.emit_call(node)
        a, da = self.emit(node.left)
        b, db = self.emit(node.right)
        if isinstance(node, Add):
            v = self.tmp(f"{a} + {b}")
            return v, self.partials(_join("+"), da, db)
        if isinstance(node, Sub):
            v = self.tmp(f"{a} - {b}")
            return v, self.partials(_join("-"), da, db)
        if isinstance(node, Mul):
            v = self.tmp(f"{a} * {b}")
            return v, self.partials(
                lambda p, q: _sum(q and f"{a} * {q}", p and f"{b} * {p}"), da, db
            )
        if isinstance(node, Div):
            self.fail(f"{b} == 0.0", "division by zero", node)
            v = self.tmp(f"{a} / {b}")
            return v, self.partials(
                lambda p, q: (p or q) and f"({_sum(p, q and f'-{v} * {q}')}) / {b}", da, db
            )
        return self.emit_pow(node, a, da, b, db)

    def emit_pow(self, node, a, da, b, db):
        self.fail(f"{a} == 0.0 and {b} < 0.0", "zero raised to a negative power", node)
        if all(q is None for q in db):
            self.fail(
                f"{a} < 0.0 and {b} != int({b})", "negative base with fractional exponent", node
            )
            if any(p is not None for p in da):
                self.fail(f"{a} == 0.0 and 0.0 < {b} < 1.0", "power not differentiable at zero", node)
            v = self.tmp(f"_pow({a}, {b})")
            if all(p is None for p in da):
                return v, [None] * self.n
            s = self.tmp(f"({b} * _pow({a}, {b} - 1.0) if {b} != 0.0 else 0.0)")
            return v, self.partials(lambda p: p and f"{s} * {p}", da)
        self.fail(f"{a} <= 0.0", "nonpositive base with variable exponent", node)
        v = self.tmp(f"_pow({a}, {b})")
        la = self.tmp(f"_log({a})")
        return v, self.partials(
            lambda p, q: (p or q) and f"{v} * ({_sum(p and f'{b} * {p} / {a}', q and f'{la} * {q}')})",
            da,
            db,
        )

    def emit_call(self, node: Call):
        a, da = self.emit(node.arg)
        name = node.name
        if name == "sin":
            v = self.tmp(f"_sin({a})")
            s = self.tmp(f"_cos({a})")
        elif name == "cos":
            v = self.tmp(f"_cos({a})")
            s = self.tmp(f"-_sin({a})")
        elif name == "exp":
            v = self.tmp(f"_exp({a})")
            s = v
        elif name == "log":
            self.fail(f"{a} <= 0.0", "log of nonpositive value", node)
            v = self.tmp(f"_log({a})")
            s = self.tmp(f"1.0 / {a}")
        elif name == "sqrt":
            cond = f"{a} < 0.0"
            if any(p is not None for p in da):
                cond = f"{a} <= 0.0"
            self.fail(cond, "sqrt outside its differentiable domain", node)
            v = self.tmp(f"_sqrt({a})")
            s = self.tmp(f"(0.5 / {v} if {v} > 0.0 else 0.0)")
        elif name == "abs":
            v = self.tmp(f"abs({a})")
            s = self.tmp(f"float(({a} > 0.0) - ({a} < 0.0))")
        else:  # pragma: no cover - parser rejects other names
            raise ExprError(f"unknown function {name}")
        return v, self.partials(lambda p: p and f"{s} * {p}", da)


def _sum(*terms):
    live = [t for t in terms if t]
    return " + ".join(live) if live else None


def _join(op):
    def combine(p, q):
        if q is None:
            return p
        if p is None:
            return q if op == "+" else f"-{q}"
        return f"{p} {op} {q}"

    return combine


def _pow(a: float, b: float) -> float:
    r = a**b
    if isinstance(r, complex):  # pragma: no cover - guarded by the domain checks
        raise ValueError("complex power")
    return r


def _compile(root: Node, n_vars: int):
    gen = _Codegen(n_vars)
    value, partials = gen.emit(root)
    body = [f"x{k} = x[{k}]" for k in range(n_vars)] + gen.lines
    grad = ", ".join(p if p is not None else "0.0" for p in partials)
    body.append(f"return {value}, [{grad}]")
    src = "def _kernel(x):\n" + "\n".join("    " + line for line in body)
    scope = {
        "_err": DomainError,
        "_nodes": gen.nodes,
        "_pow": _pow,
        "_sin": math.sin,
        "_cos": math.cos,
        "_exp": math.exp,
        "_log": math.log,
        "_sqrt": math.sqrt,
    }
    exec(compile(src, "<kktflow-expr>", "exec"), scope)
    return scope["_kernel"]


# --- public API --------------------------------------------------------------


@dataclass(frozen=True)
class Expression:
    """Parsed scalar expression in ``n_vars`` variables.

    Immutable; evaluation is reentrant.
    """

    root: Node
    n_vars: int
    _kernel: object = field(default=None, repr=False, compare=False, hash=False)

    def __post_init__(self):
        if self.n_vars < 1:
            raise ExprError("n_vars must be positive")
        for node in walk(self.root):
            if isinstance(node, Var) and not 0 <= node.index < self.n_vars:
                raise ExprError(f"variable index {node.index} out of range")

    def __str__(self) -> str:
        return to_text(self.root)

    @property
    def functions(self) -> set[str]:
        return {n.name for n in walk(self.root) if isinstance(n, Call)}

    @property
    def is_smooth(self) -> bool:
        return not (self.functions & NONSMOOTH)

    @property
    def is_affine(self) -> bool:
        """True when the expression is affine in x by construction (constant gradient)."""
        return _is_affine(self.root)

    def _compiled(self):
        kernel = self._kernel
        if kernel is None:
            kernel = _compile(self.root, self.n_vars)
            object.__setattr__(self, "_kernel", kernel)
        return kernel

    def eval_grad(self, x) -> tuple[float, np.ndarray]:
        """Value and exact gradient at ``x``."""
        value, grad = self.eval_grad_list(x)
        return value, np.array(grad)

    def eval_grad_list(self, x) -> tuple[float, list[float]]:
        if len(x) != self.n_vars:
            raise ExprError(f"expected {self.n_vars} coordinates, got {len(x)}")
        try:
            return self._compiled()(x)
        except (OverflowError, ZeroDivisionError):
            raise DomainError("overflow", self.root) from None

    def eval_dual(self, x) -> Dual:
        """Reference evaluation by walking the tree with :class:`Dual` numbers."""
        x = np.asarray(x, dtype=float)
        if len(x) != self.n_vars:
            raise ExprError(f"expected {self.n_vars} coordinates, got {len(x)}")
        return _dual_eval(self.root, x)

    def __call__(self, x) -> float:
        return self.eval_grad_list(x)[0]


def parse(text: str, n_vars: int) -> Expression:
    return Expression(_Parser(text, n_vars).parse(), n_vars)


def eval_grad(e: Expression, x) -> tuple[float, np.ndarray]:
    return e.eval_grad(x)
