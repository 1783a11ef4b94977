"""Small expression grammar for declaring dynamics, costs and first integrals.

Expressions are built from state variables ``y1..ym``, control variables
``u1..up``, decimal numbers, ``pi``, the operators ``+ - * / ^`` (``^`` takes a
constant exponent) and the functions ``sin cos exp sqrt abs``.  Parsed
expressions support exact symbolic differentiation with respect to state
variables, which is what the first-integral checks rely on.

Two compilation targets are provided: a scalar form operating on plain float
tuples (used inside the fixed-step integrator loop, where numpy's per-call
overhead dominates) and a batched numpy form used for whole-grid assembly.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

_FUNCTIONS = {
    "sin": (math.sin, np.sin),
    "cos": (math.cos, np.cos),
    "exp": (math.exp, np.exp),
    "sqrt": (math.sqrt, np.sqrt),
    "abs": (abs, np.abs),
}


class ExpressionError(ValueError):
    """Raised when an expression cannot be parsed or differentiated."""

    def __init__(self, message: str, text: str = "", pos: int | None = None):
        if pos is not None:
            message = f"{message} (at position {pos} in {text!r})"
        super().__init__(message)


@dataclass(frozen=True)
class Num:
    value: float


@dataclass(frozen=True)
class Var:
    kind: str  # "y" or "u"
    index: int  # zero-based


@dataclass(frozen=True)
class Unary:
    op: str  # "neg"
    arg: "Node"


@dataclass(frozen=True)
class Binary:
    op: str  # "+", "-", "*", "/"
    left: "Node"
    right: "Node"


@dataclass(frozen=True)
class Power:
    base: "Node"
    exponent: float


@dataclass(frozen=True)
class Call:
    func: str
    arg: "Node"


Node = Num | Var | Unary | Binary | Power | Call


class _Parser:
    def __init__(self, text: str, dim_state: int, dim_control: int):
        self.text = text
        self.pos = 0
        self.m = dim_state
        self.p = dim_control

    def fail(self, message: str):
        raise ExpressionError(message, self.text, self.pos)

    def skip_ws(self):
        while self.pos < len(self.text) and self.text[self.pos].isspace():
            self.pos += 1

    def peek(self) -> str:
        self.skip_ws()
        return self.text[self.pos] if self.pos < len(self.text) else ""

    def parse(self) -> Node:
        node = self.parse_sum()
        self.skip_ws()
        if self.pos != len(self.text):
            self.fail("unexpected trailing input")
        return node

    def parse_sum(self) -> Node:
        node = self.parse_product()
        while True:
            ch = self.peek()
            if ch and ch in "+-":
                self.pos += 1
                rhs = self.parse_product()
                node = Binary(ch, node, rhs)
            else:
                return node

    def parse_product(self) -> Node:
        node = self.parse_unary()
        while True:
            ch = self.peek()
            if ch and ch in "*/":
                self.pos += 1
                rhs = self.parse_unary()
                node = Binary(ch, node, rhs)
            else:
                return node

    def parse_unary(self) -> Node:
        ch = self.peek()
        if ch == "-":
            self.pos += 1
            return Unary("neg", self.parse_unary())
        if ch == "+":
            self.pos += 1
            return self.parse_unary()
        return self.parse_power()

    def parse_power(self) -> Node:
        base = self.parse_atom()
        if self.peek() == "^":
            self.pos += 1
            sign = 1.0
            if self.peek() == "-":
                self.pos += 1
                sign = -1.0
            exp_node = self.parse_atom()
            if not isinstance(exp_node, Num):
                self.fail("exponent must be a constant")
            return Power(base, sign * exp_node.value)
        return base

    def parse_atom(self) -> Node:
        ch = self.peek()
        if ch == "(":
            self.pos += 1
            node = self.parse_sum()
            if self.peek() != ")":
                self.fail("expected ')'")
            self.pos += 1
            return node
        if ch.isdigit() or ch == ".":
            return self.parse_number()
        if ch.isalpha() or ch == "_":
            return self.parse_name()
        self.fail("expected a number, variable or '('")

    def parse_number(self) -> Num:
        start = self.pos
        text = self.text
        while self.pos < len(text) and (text[self.pos].isdigit() or text[self.pos] == "."):
            self.pos += 1
        if self.pos < len(text) and text[self.pos] in "eE":
            probe = self.pos + 1
            if probe < len(text) and text[probe] in "+-":
                probe += 1
            if probe < len(text) and text[probe].isdigit():
                self.pos = probe
                while self.pos < len(text) and text[self.pos].isdigit():
                    self.pos += 1
        try:
            return Num(float(text[start:self.pos]))
        except ValueError:
            self.fail(f"bad number {text[start:self.pos]!r}")

    def parse_name(self) -> Node:
        start = self.pos
        text = self.text
        while self.pos < len(text) and (text[self.pos].isalnum() or text[self.pos] == "_"):
            self.pos += 1
        name = text[start:self.pos]
        if name == "pi":
            return Num(math.pi)
        if name in _FUNCTIONS:
            if self.peek() != "(":
                self.fail(f"function {name!r} needs an argument")
            self.pos += 1
            arg = self.parse_sum()
            if self.peek() != ")":
                self.fail("expected ')'")
            self.pos += 1
            return Call(name, arg)
        if name[0] in "yu" and name[1:].isdigit():
            index = int(name[1:]) - 1
            dim = self.m if name[0] == "y" else self.p
            if not 0 <= index < dim:
                self.fail(f"variable {name!r} out of range (dimension {dim})")
            return Var(name[0], index)
        self.fail(f"unknown name {name!r}")


def parse_expr(text: str, dim_state: int, dim_control: int) -> Node:
    """Parse one expression; variable indices are validated against the dims."""
    return _Parser(text, dim_state, dim_control).parse()


def diff(node: Node, index: int) -> Node:
    """Exact derivative with respect to state variable ``y{index+1}``."""
    if isinstance(node, Num):
        return Num(0.0)
    if isinstance(node, Var):
        if node.kind == "y" and node.index == index:
            return Num(1.0)
        return Num(0.0)
    if isinstance(node, Unary):
        return Unary("neg", diff(node.arg, index))
    if isinstance(node, Binary):
        dl, dr = diff(node.left, index), diff(node.right, index)
        if node.op in "+-":
            return Binary(node.op, dl, dr)
        if node.op == "*":
            return Binary("+", Binary("*", dl, node.right), Binary("*", node.left, dr))
        # quotient rule
        num = Binary("-", Binary("*", dl, node.right), Binary("*", node.left, dr))
        return Binary("/", num, Power(node.right, 2.0))
    if isinstance(node, Power):
        inner = diff(node.base, index)
        scaled = Binary("*", Num(node.exponent), Power(node.base, node.exponent - 1.0))
        return Binary("*", scaled, inner)
    if isinstance(node, Call):
        inner = diff(node.arg, index)
        if node.func == "sin":
            outer: Node = Call("cos", node.arg)
        elif node.func == "cos":
            outer = Unary("neg", Call("sin", node.arg))
        elif node.func == "exp":
            outer = Call("exp", node.arg)
        elif node.func == "sqrt":
            outer = Binary("/", Num(0.5), Call("sqrt", node.arg))
        else:
            raise ExpressionError(f"function {node.func!r} is not differentiable here")
        return Binary("*", outer, inner)
    raise ExpressionError(f"cannot differentiate node {node!r}")


def _emit(node: Node, fns: str) -> str:
    if isinstance(node, Num):
        return repr(node.value)
    if isinstance(node, Var):
        return f"{node.kind}[{node.index}]"
    if isinstance(node, Unary):
        return f"(-{_emit(node.arg, fns)})"
    if isinstance(node, Binary):
        return f"({_emit(node.left, fns)} {node.op} {_emit(node.right, fns)})"
    if isinstance(node, Power):
        return f"({_emit(node.base, fns)} ** {repr(node.exponent)})"
    if isinstance(node, Call):
        return f"{fns}_{node.func}({_emit(node.arg, fns)})"
    raise ExpressionError(f"cannot compile node {node!r}")


def _compile(nodes: tuple[Node, ...], numpy_mode: bool):
    fns = "_np" if numpy_mode else "_sc"
    namespace: dict[str, object] = {}
    for name, (scalar_fn, numpy_fn) in _FUNCTIONS.items():
        namespace[f"{fns}_{name}"] = numpy_fn if numpy_mode else scalar_fn
    body = ", ".join(_emit(node, fns) for node in nodes)
    source = f"def _f(y, u):\n    return ({body},)\n"
    exec(compile(source, "<occlp-expr>", "exec"), namespace)
    return namespace["_f"]


def compile_scalar(nodes: tuple[Node, ...]):
    """Compile to ``f(y_tuple, u_tuple) -> tuple[float, ...]`` on plain floats."""
    return _compile(nodes, numpy_mode=False)


def compile_batch(nodes: tuple[Node, ...]):
    """Compile to a numpy form: ``f(Y, U) -> (n, len(nodes))`` for row-stacked points."""
    raw = _compile(nodes, numpy_mode=True)

    def batched(ys: np.ndarray, us: np.ndarray) -> np.ndarray:
        ys = np.asarray(ys, dtype=float)
        us = np.asarray(us, dtype=float)
        n = ys.shape[0]
        cols = raw(ys.T, us.T)
        out = np.empty((n, len(cols)))
        for j, col in enumerate(cols):
            out[:, j] = col
        return out

    return batched
