"""Small arithmetic expression grammar with symbolic differentiation.

Expressions use ``+ - * / ^``, the functions ``sin cos sinh cosh``, numeric
literals, the constant ``pi`` and a fixed set of variable names.  Parsing is
delegated to :mod:`ast`; only whitelisted nodes are accepted, so no user text
is ever evaluated directly.

>>> e = parse("sin(r)^2", ("r", "phi"))
>>> str(e.diff("r"))
'2 * sin(r) * cos(r)'
"""

from __future__ import annotations

import ast
import math

import numpy as np

FUNCTIONS = ("sin", "cos", "sinh", "cosh")


class ExpressionError(ValueError):
    """Raised for text outside the expression grammar."""


class Expr:
    def __add__(self, other):
        return add(self, other)

    def __sub__(self, other):
        return add(self, neg(other))

    def __mul__(self, other):
        return mul(self, other)

    def __truediv__(self, other):
        return div(self, other)

    def __neg__(self):
        return neg(self)

    def compile(self, variables, backend="numpy"):
        """Return a Python callable taking ``variables`` positionally."""
        namespace = {"math": math, "np": np}
        mod = "np" if backend == "numpy" else "math"
        src = f"lambda {', '.join(variables)}: " + self.code(mod)
        fn = eval(compile(src, "<expr>", "eval"), namespace)
        if backend == "numpy" and not self.free():
            const = self.value()
            return lambda *args: np.full(np.shape(np.asarray(args[0], dtype=float)), const)
        return fn

    def free(self):
        return set()


class Num(Expr):
    def __init__(self, v):
        self.v = float(v)

    def diff(self, var):
        return Num(0.0)

    def code(self, mod):
        return repr(self.v)

    def value(self):
        return self.v

    def __str__(self):
        if self.v == int(self.v) and abs(self.v) < 1e15:
            return str(int(self.v))
        return repr(self.v)


class Var(Expr):
    def __init__(self, name):
        self.name = name

    def diff(self, var):
        return Num(1.0 if var == self.name else 0.0)

    def code(self, mod):
        return self.name

    def free(self):
        return {self.name}

    def __str__(self):
        return self.name


class Bin(Expr):
    def __init__(self, op, a, b):
        self.op, self.a, self.b = op, a, b

    def free(self):
        return self.a.free() | self.b.free()

    def value(self):
        x, y = self.a.value(), self.b.value()
        return {"+": x + y, "*": x * y, "/": x / y if y else math.inf, "^": x ** y}[self.op]

    def diff(self, var):
        a, b = self.a, self.b
        da, db = a.diff(var), b.diff(var)
        if self.op == "+":
            return add(da, db)
        if self.op == "*":
            return add(mul(da, b), mul(a, db))
        if self.op == "/":
            return div(add(mul(da, b), neg(mul(a, db))), power(b, Num(2)))
        # power
        if not b.free():
            n = b.value()
            return mul(mul(Num(n), power(a, Num(n - 1))), da)
        # a^b = exp(b log a); only meaningful for a > 0
        return mul(self, add(mul(db, Fn("log", a)), div(mul(b, da), a)))

    def code(self, mod):
        sym = {"+": "+", "*": "*", "/": "/", "^": "**"}[self.op]
        return f"({self.a.code(mod)} {sym} {self.b.code(mod)})"

    def __str__(self):
        if self.op == "^":
            return f"{_wrap(self.a)}^{_wrap(self.b)}"
        return f"{_wrap(self.a, self.op)} {self.op} {_wrap(self.b, self.op)}"


class Neg(Expr):
    def __init__(self, a):
        self.a = a

    def free(self):
        return self.a.free()

    def value(self):
        return -self.a.value()

    def diff(self, var):
        return neg(self.a.diff(var))

    def code(self, mod):
        return f"(-{self.a.code(mod)})"

    def __str__(self):
        return f"-{_wrap(self.a)}"


class Fn(Expr):
    def __init__(self, name, a):
        self.name, self.a = name, a

    def free(self):
        return self.a.free()

    def value(self):
        return getattr(math, self.name)(self.a.value())

    def diff(self, var):
        a = self.a
        da = a.diff(var)
        outer = {
            "sin": lambda: Fn("cos", a),
            "cos": lambda: neg(Fn("sin", a)),
            "sinh": lambda: Fn("cosh", a),
            "cosh": lambda: Fn("sinh", a),
            "log": lambda: div(Num(1), a),
        }[self.name]()
        return mul(outer, da)

    def code(self, mod):
        return f"{mod}.{self.name}({self.a.code(mod)})"

    def __str__(self):
        return f"{self.name}({self.a})"


def _wrap(e, op=None):
    if isinstance(e, (Num, Var, Fn)):
        return str(e)
    if isinstance(e, Bin) and op in ("+",) and e.op in ("+", "*", "/", "^"):
        return str(e)
    if isinstance(e, Bin) and op == "*" and e.op in ("*", "^"):
        return str(e)
    return f"({e})"


def _const(e):
    return not e.free() and isinstance(e, (Num,))


def add(a, b):
    if _const(a) and a.v == 0:
        return b
    if _const(b) and b.v == 0:
        return a
    if _const(a) and _const(b):
        return Num(a.v + b.v)
    return Bin("+", a, b)


def mul(a, b):
    if _const(a) and a.v == 0 or _const(b) and b.v == 0:
        return Num(0)
    if _const(a) and a.v == 1:
        return b
    if _const(b) and b.v == 1:
        return a
    if _const(a) and _const(b):
        return Num(a.v * b.v)
    if _const(b):
        return mul(b, a)
    if _const(a) and isinstance(b, Bin) and b.op == "*" and _const(b.a):
        return mul(Num(a.v * b.a.v), b.b)
    return Bin("*", a, b)


def div(a, b):
    if _const(b) and b.v == 1:
        return a
    if _const(a) and a.v == 0:
        return Num(0)
    return Bin("/", a, b)


def neg(a):
    if _const(a):
        return Num(-a.v)
    if isinstance(a, Neg):
        return a.a
    return Neg(a)


def power(a, b):
    if _const(b) and b.v == 1:
        return a
    if _const(b) and b.v == 0:
        return Num(1)
    return Bin("^", a, b)


_BINOPS = {ast.Add: "+", ast.Sub: "-", ast.Mult: "*", ast.Div: "/", ast.Pow: "^"}


def parse(text, variables):
    """Parse ``text`` into an :class:`Expr` over the given variable names."""
    if not isinstance(text, str):
        if isinstance(text, (int, float)) and not isinstance(text, bool):
            return Num(text)
        raise ExpressionError(f"expression must be a string, got {type(text).__name__}")
    if "**" in text:
        raise ExpressionError("use '^' for powers")
    try:
        tree = ast.parse(text.replace("^", "**"), mode="eval")
    except SyntaxError as exc:
        raise ExpressionError(f"cannot parse expression {text!r}: {exc.msg}") from None
    return _convert(tree.body, tuple(variables), text)


def _convert(node, variables, text):
    if isinstance(node, ast.Constant) and isinstance(node.value, (int, float)) \
            and not isinstance(node.value, bool):
        return Num(node.value)
    if isinstance(node, ast.Name):
        if node.id in variables:
            return Var(node.id)
        if node.id == "pi":
            return Num(math.pi)
        raise ExpressionError(
            f"unknown name {node.id!r} in {text!r}; allowed variables: {', '.join(variables)}")
    if isinstance(node, ast.UnaryOp) and isinstance(node.op, (ast.USub, ast.UAdd)):
        inner = _convert(node.operand, variables, text)
        return neg(inner) if isinstance(node.op, ast.USub) else inner
    if isinstance(node, ast.BinOp) and type(node.op) in _BINOPS:
        a = _convert(node.left, variables, text)
        b = _convert(node.right, variables, text)
        op = _BINOPS[type(node.op)]
        if op == "-":
            return add(a, neg(b))
        if op == "+":
            return add(a, b)
        if op == "*":
            return mul(a, b)
        if op == "/":
            return div(a, b)
        return power(a, b)
    if isinstance(node, ast.Call) and isinstance(node.func, ast.Name) \
            and node.func.id in FUNCTIONS and len(node.args) == 1 and not node.keywords:
        return Fn(node.func.id, _convert(node.args[0], variables, text))
    raise ExpressionError(f"unsupported construct in {text!r}")
