"""Immutable symbolic expression trees with differentiation and evaluation.

Every coefficient, condition and residual in the toolkit is an ``Expr``.
Trees are frozen dataclasses, so they hash, compare structurally and can be
shared freely across threads.
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Callable, Mapping, Union

Number = Union[Fraction, float]

FUNCTIONS = ("sin", "cos", "tan", "sinh", "cosh", "tanh", "exp", "ln", "sqrt")


class ExprError(Exception):
    """Base error for expression construction and evaluation."""


class EvaluationError(ExprError):
    """Evaluation failed; carries the offending subtree."""

    def __init__(self, message: str, expr: "Expr | None" = None):
        self.expr = expr
        if expr is not None:
            message = f"{message} in subexpression '{expr}'"
        super().__init__(message)


class UnboundVariableError(EvaluationError):
    pass


@dataclass(frozen=True)
class Expr:
    """Base node. Use the module-level constructors to build trees."""

    def __add__(self, other):
        return add(self, _coerce(other))

    def __radd__(self, other):
        return add(_coerce(other), self)

    def __sub__(self, other):
        return sub(self, _coerce(other))

    def __rsub__(self, other):
        return sub(_coerce(other), self)

    def __mul__(self, other):
        return mul(self, _coerce(other))

    def __rmul__(self, other):
        return mul(_coerce(other), self)

    def __truediv__(self, other):
        return div(self, _coerce(other))

    def __rtruediv__(self, other):
        return div(_coerce(other), self)

    def __pow__(self, other):
        return pow_(self, _coerce(other))

    def __neg__(self):
        return neg(self)

    def __str__(self):
        return format_expr(self)


@dataclass(frozen=True)
class Num(Expr):
    value: Number


@dataclass(frozen=True)
class Var(Expr):
    name: str


@dataclass(frozen=True)
class Neg(Expr):
    arg: Expr


@dataclass(frozen=True)
class Func(Expr):
    name: str
    arg: Expr


@dataclass(frozen=True)
class Add(Expr):
    lhs: Expr
    rhs: Expr


@dataclass(frozen=True)
class Sub(Expr):
    lhs: Expr
    rhs: Expr


@dataclass(frozen=True)
class Mul(Expr):
    lhs: Expr
    rhs: Expr


@dataclass(frozen=True)
class Div(Expr):
    lhs: Expr
    rhs: Expr


@dataclass(frozen=True)
class Pow(Expr):
    base: Expr
    exponent: Expr


def _coerce(value) -> Expr:
    if isinstance(value, Expr):
        return value
    return num(value)


def num(value: int | Fraction | float) -> Num:
    """Numeric literal; ints become exact rationals, floats stay floats."""
    if isinstance(value, bool):
        raise TypeError("booleans are not numeric literals")
    if isinstance(value, int):
        return Num(Fraction(value))
    if isinstance(value, (Fraction, float)):
        return Num(value)
    raise TypeError(f"cannot build a literal from {value!r}")


def var(name: str) -> Var:
    return Var(name)


def variables(names: str) -> tuple[Var, ...]:
    """Split a whitespace-separated name list into Var nodes."""
    return tuple(Var(n) for n in names.split())


ZERO = Num(Fraction(0))
ONE = Num(Fraction(1))


def _is_literal(e: Expr, value) -> bool:
    return isinstance(e, Num) and e.value == value


def is_zero_literal(e: Expr) -> bool:
    return _is_literal(e, 0)


def add(a: Expr, b: Expr) -> Expr:
    if _is_literal(a, 0):
        return b
    if _is_literal(b, 0):
        return a
    if isinstance(a, Num) and isinstance(b, Num):
        return Num(a.value + b.value)
    return Add(a, b)


def sub(a: Expr, b: Expr) -> Expr:
    if _is_literal(b, 0):
        return a
    if _is_literal(a, 0):
        return neg(b)
    if isinstance(a, Num) and isinstance(b, Num):
        return Num(a.value - b.value)
    return Sub(a, b)


def mul(a: Expr, b: Expr) -> Expr:
    if _is_literal(a, 0) or _is_literal(b, 0):
        return ZERO
    if _is_literal(a, 1):
        return b
    if _is_literal(b, 1):
        return a
    if isinstance(a, Num) and isinstance(b, Num):
        return Num(a.value * b.value)
    return Mul(a, b)


def div(a: Expr, b: Expr) -> Expr:
    if _is_literal(b, 0):
        raise ValueError("literal zero denominator")
    if _is_literal(a, 0):
        return ZERO
    if _is_literal(b, 1):
        return a
    if isinstance(a, Num) and isinstance(b, Num):
        if isinstance(a.value, Fraction) and isinstance(b.value, Fraction):
            return Num(a.value / b.value)
        return Num(_to_float(a.value) / _to_float(b.value))
    return Div(a, b)


def neg(a: Expr) -> Expr:
    if isinstance(a, Num):
        return Num(-a.value)
    if isinstance(a, Neg):
        return a.arg
    return Neg(a)


def pow_(base: Expr, exponent: Expr) -> Expr:
    if _is_literal(exponent, 1):
        return base
    if _is_literal(exponent, 0):
        return ONE
    if _is_literal(base, 1):
        return ONE
    if isinstance(base, Num) and isinstance(exponent, Num):
        k = _as_int(exponent.value)
        if k is not None:
            if isinstance(base.value, Fraction):
                if base.value == 0 and k < 0:
                    raise ValueError("literal zero denominator")
                return Num(base.value**k)
            return Num(base.value**k)
    return Pow(base, exponent)


def func(name: str, arg: Expr) -> Func:
    if name not in FUNCTIONS:
        raise ValueError(f"unknown function '{name}'")
    return Func(name, arg)


def sin(e: Expr) -> Expr:
    return Func("sin", e)


def cos(e: Expr) -> Expr:
    return Func("cos", e)


def sinh(e: Expr) -> Expr:
    return Func("sinh", e)


def cosh(e: Expr) -> Expr:
    return Func("cosh", e)


def exp(e: Expr) -> Expr:
    return Func("exp", e)


def ln(e: Expr) -> Expr:
    return Func("ln", e)


def sqrt(e: Expr) -> Expr:
    return Func("sqrt", e)


def add_all(terms) -> Expr:
    """Balanced sum; keeps tree depth logarithmic in the term count."""
    terms = [t for t in terms]
    if not terms:
        return ZERO
    while len(terms) > 1:
        terms = [
            add(terms[i], terms[i + 1]) if i + 1 < len(terms) else terms[i]
            for i in range(0, len(terms), 2)
        ]
    return terms[0]


def mul_all(factors) -> Expr:
    factors = [f for f in factors]
    if not factors:
        return ONE
    while len(factors) > 1:
        factors = [
            mul(factors[i], factors[i + 1]) if i + 1 < len(factors) else factors[i]
            for i in range(0, len(factors), 2)
        ]
    return factors[0]


def _as_int(value: Number) -> int | None:
    if isinstance(value, Fraction):
        if value.denominator == 1:
            return int(value)
        return None
    if isinstance(value, float) and value.is_integer() and abs(value) < 2**53:
        return int(value)
    return None


def _to_float(value: Number) -> float:
    return float(value)


def children(e: Expr) -> tuple[Expr, ...]:
    if isinstance(e, (Num, Var)):
        return ()
    if isinstance(e, Neg):
        return (e.arg,)
    if isinstance(e, Func):
        return (e.arg,)
    if isinstance(e, Pow):
        return (e.base, e.exponent)
    return (e.lhs, e.rhs)


def node_count(e: Expr) -> int:
    return 1 + sum(node_count(c) for c in children(e))


def free_variables(e: Expr) -> frozenset[str]:
    if isinstance(e, Var):
        return frozenset((e.name,))
    if isinstance(e, Num):
        return frozenset()
    out: frozenset[str] = frozenset()
    for c in children(e):
        out |= free_variables(c)
    return out


def substitute(e: Expr, name: str, replacement: Expr) -> Expr:
    """Replace every occurrence of the variable by the replacement tree."""
    if isinstance(e, Var):
        return replacement if e.name == name else e
    if isinstance(e, Num):
        return e
    if isinstance(e, Neg):
        return neg(substitute(e.arg, name, replacement))
    if isinstance(e, Func):
        return Func(e.name, substitute(e.arg, name, replacement))
    if isinstance(e, Add):
        return add(substitute(e.lhs, name, replacement), substitute(e.rhs, name, replacement))
    if isinstance(e, Sub):
        return sub(substitute(e.lhs, name, replacement), substitute(e.rhs, name, replacement))
    if isinstance(e, Mul):
        return mul(substitute(e.lhs, name, replacement), substitute(e.rhs, name, replacement))
    if isinstance(e, Div):
        return div(substitute(e.lhs, name, replacement), substitute(e.rhs, name, replacement))
    if isinstance(e, Pow):
        return pow_(substitute(e.base, name, replacement), substitute(e.exponent, name, replacement))
    raise TypeError(f"unknown node {e!r}")


# Derivatives of the unary functions, as builders applied to the argument.
_FUNC_DERIVATIVE: dict[str, Callable[[Expr], Expr]] = {
    "sin": lambda a: Func("cos", a),
    "cos": lambda a: neg(Func("sin", a)),
    "tan": lambda a: div(ONE, pow_(Func("cos", a), num(2))),
    "sinh": lambda a: Func("cosh", a),
    "cosh": lambda a: Func("sinh", a),
    "tanh": lambda a: div(ONE, pow_(Func("cosh", a), num(2))),
    "exp": lambda a: Func("exp", a),
    "ln": lambda a: div(ONE, a),
    "sqrt": lambda a: div(ONE, mul(num(2), Func("sqrt", a))),
}


def differentiate(e: Expr, name: str) -> Expr:
    """Exact partial derivative with respect to the named variable."""
    if isinstance(e, Num):
        return ZERO
    if isinstance(e, Var):
        return ONE if e.name == name else ZERO
    if isinstance(e, Neg):
        return neg(differentiate(e.arg, name))
    if isinstance(e, Add):
        return add(differentiate(e.lhs, name), differentiate(e.rhs, name))
    if isinstance(e, Sub):
        return sub(differentiate(e.lhs, name), differentiate(e.rhs, name))
    if isinstance(e, Mul):
        return add(
            mul(differentiate(e.lhs, name), e.rhs),
            mul(e.lhs, differentiate(e.rhs, name)),
        )
    if isinstance(e, Div):
        return div(
            sub(
                mul(differentiate(e.lhs, name), e.rhs),
                mul(e.lhs, differentiate(e.rhs, name)),
            ),
            pow_(e.rhs, num(2)),
        )
    if isinstance(e, Pow):
        dexp = differentiate(e.exponent, name)
        if is_zero_literal(dexp):
            # constant exponent: k * b^(k-1) * b'
            return mul(
                mul(e.exponent, pow_(e.base, sub(e.exponent, ONE))),
                differentiate(e.base, name),
            )
        # variable exponent: rewrite through exp(e*ln b)
        return mul(
            e,
            add(
                mul(dexp, Func("ln", e.base)),
                div(mul(e.exponent, differentiate(e.base, name)), e.base),
            ),
        )
    if isinstance(e, Func):
        return mul(_FUNC_DERIVATIVE[e.name](e.arg), differentiate(e.arg, name))
    raise TypeError(f"unknown node {e!r}")


def _real_pow(base: float, exponent: float) -> float:
    if exponent.is_integer() and abs(exponent) < 2**53:
        k = int(exponent)
        if base == 0.0 and k < 0:
            raise ZeroDivisionError("zero base with negative exponent")
        return base**k
    if base > 0.0:
        return math.exp(exponent * math.log(base))
    if base == 0.0 and exponent > 0.0:
        return 0.0
    raise ValueError("non-positive base with non-integer exponent")


_REAL_FUNC: dict[str, Callable[[float], float]] = {
    "sin": math.sin,
    "cos": math.cos,
    "tan": math.tan,
    "sinh": math.sinh,
    "cosh": math.cosh,
    "tanh": math.tanh,
    "exp": math.exp,
    "ln": math.log,
    "sqrt": math.sqrt,
}

_COMPLEX_FUNC: dict[str, Callable[[complex], complex]] = {
    "sin": cmath.sin,
    "cos": cmath.cos,
    "tan": cmath.tan,
    "sinh": cmath.sinh,
    "cosh": cmath.cosh,
    "tanh": cmath.tanh,
    "exp": cmath.exp,
    "ln": cmath.log,
    "sqrt": cmath.sqrt,
}


def evaluate(e: Expr, bindings: Mapping[str, float]) -> float:
    """Recursive double-precision evaluation; every free variable must be bound."""
    if isinstance(e, Num):
        return _to_float(e.value)
    if isinstance(e, Var):
        try:
            return float(bindings[e.name])
        except KeyError:
            raise UnboundVariableError(f"unbound variable '{e.name}'", e) from None
    if isinstance(e, Neg):
        return -evaluate(e.arg, bindings)
    if isinstance(e, Add):
        return evaluate(e.lhs, bindings) + evaluate(e.rhs, bindings)
    if isinstance(e, Sub):
        return evaluate(e.lhs, bindings) - evaluate(e.rhs, bindings)
    if isinstance(e, Mul):
        return evaluate(e.lhs, bindings) * evaluate(e.rhs, bindings)
    if isinstance(e, Div):
        denominator = evaluate(e.rhs, bindings)
        if denominator == 0.0:
            raise EvaluationError("division by zero", e)
        return evaluate(e.lhs, bindings) / denominator
    if isinstance(e, Pow):
        base = evaluate(e.base, bindings)
        exponent = evaluate(e.exponent, bindings)
        try:
            return _real_pow(base, exponent)
        except (ValueError, ZeroDivisionError, OverflowError) as err:
            raise EvaluationError(str(err), e) from None
    if isinstance(e, Func):
        value = evaluate(e.arg, bindings)
        try:
            return _REAL_FUNC[e.name](value)
        except (ValueError, OverflowError) as err:
            raise EvaluationError(f"{e.name}: {err}", e) from None
    raise TypeError(f"unknown node {e!r}")


def evaluate_with_scale(e: Expr, bindings: Mapping[str, float]) -> tuple[float, float]:
    """Evaluate and also report the largest absolute subterm value.

    The scale is the reference magnitude for relative residual tests: a sum
    that nearly cancels is judged against the size of what was summed.
    """

    def walk(node: Expr) -> float:
        if isinstance(node, Num):
            value = _to_float(node.value)
        elif isinstance(node, Var):
            try:
                value = float(bindings[node.name])
            except KeyError:
                raise UnboundVariableError(f"unbound variable '{node.name}'", node) from None
        elif isinstance(node, Neg):
            value = -walk(node.arg)
        elif isinstance(node, Add):
            value = walk(node.lhs) + walk(node.rhs)
        elif isinstance(node, Sub):
            value = walk(node.lhs) - walk(node.rhs)
        elif isinstance(node, Mul):
            value = walk(node.lhs) * walk(node.rhs)
        elif isinstance(node, Div):
            denominator = walk(node.rhs)
            if denominator == 0.0:
                raise EvaluationError("division by zero", node)
            value = walk(node.lhs) / denominator
        elif isinstance(node, Pow):
            base = walk(node.base)
            exponent = walk(node.exponent)
            try:
                value = _real_pow(base, exponent)
            except (ValueError, ZeroDivisionError, OverflowError) as err:
                raise EvaluationError(str(err), node) from None
        elif isinstance(node, Func):
            argument = walk(node.arg)
            try:
                value = _REAL_FUNC[node.name](argument)
            except (ValueError, OverflowError) as err:
                raise EvaluationError(f"{node.name}: {err}", node) from None
        else:
            raise TypeError(f"unknown node {node!r}")
        magnitude = abs(value)
        if magnitude > scale[0]:
            scale[0] = magnitude
        return value

    scale = [0.0]
    result = walk(e)
    return result, scale[0]


def evaluate_complex(e: Expr, bindings: Mapping[str, complex]) -> complex:
    """Complex evaluation; ln and non-integer powers use the principal branch."""
    if isinstance(e, Num):
        return complex(_to_float(e.value))
    if isinstance(e, Var):
        try:
            return complex(bindings[e.name])
        except KeyError:
            raise UnboundVariableError(f"unbound variable '{e.name}'", e) from None
    if isinstance(e, Neg):
        return -evaluate_complex(e.arg, bindings)
    if isinstance(e, Add):
        return evaluate_complex(e.lhs, bindings) + evaluate_complex(e.rhs, bindings)
    if isinstance(e, Sub):
        return evaluate_complex(e.lhs, bindings) - evaluate_complex(e.rhs, bindings)
    if isinstance(e, Mul):
        return evaluate_complex(e.lhs, bindings) * evaluate_complex(e.rhs, bindings)
    if isinstance(e, Div):
        denominator = evaluate_complex(e.rhs, bindings)
        if denominator == 0:
            raise EvaluationError("division by zero", e)
        return evaluate_complex(e.lhs, bindings) / denominator
    if isinstance(e, Pow):
        base = evaluate_complex(e.base, bindings)
        exponent = evaluate_complex(e.exponent, bindings)
        if exponent.imag == 0.0:
            k = exponent.real
            if k.is_integer() and abs(k) < 2**53:
                if base == 0 and k < 0:
                    raise EvaluationError("division by zero", e)
                return base ** int(k)
        if base == 0:
            if exponent.imag == 0.0 and exponent.real > 0:
                return 0j
            raise EvaluationError("zero base with non-positive exponent", e)
        return cmath.exp(exponent * cmath.log(base))
    if isinstance(e, Func):
        value = evaluate_complex(e.arg, bindings)
        try:
            return _COMPLEX_FUNC[e.name](value)
        except (ValueError, OverflowError) as err:
            raise EvaluationError(f"{e.name}: {err}", e) from None
    raise TypeError(f"unknown node {e!r}")


# -- printing ----------------------------------------------------------------

_PREC_ADD = 1
_PREC_MUL = 2
_PREC_NEG = 3
_PREC_POW = 4
_PREC_ATOM = 5


def _precedence(e: Expr) -> int:
    if isinstance(e, (Add, Sub)):
        return _PREC_ADD
    if isinstance(e, (Mul, Div)):
        return _PREC_MUL
    if isinstance(e, Neg):
        return _PREC_NEG
    if isinstance(e, Num):
        if e.value < 0:
            return _PREC_NEG
        if isinstance(e.value, Fraction) and e.value.denominator != 1:
            return _PREC_MUL
        return _PREC_ATOM
    if isinstance(e, Pow):
        return _PREC_POW
    return _PREC_ATOM


def _wrap(e: Expr, minimum: int, right_of_binary: bool = False) -> str:
    text = format_expr(e)
    if _precedence(e) < minimum:
        return f"({text})"
    if right_of_binary and text.startswith("-"):
        return f"({text})"
    return text


def format_expr(e: Expr) -> str:
    """Render with minimal parentheses; re-parsing yields the same tree."""
    if isinstance(e, Num):
        v = e.value
        if isinstance(v, Fraction):
            if v.denominator == 1:
                return str(v.numerator)
            return f"{v.numerator}/{v.denominator}"
        return repr(v)
    if isinstance(e, Var):
        return e.name
    if isinstance(e, Neg):
        return "-" + _wrap(e.arg, _PREC_POW)
    if isinstance(e, Add):
        return f"{_wrap(e.lhs, _PREC_ADD)} + {_wrap(e.rhs, _PREC_ADD + 1, True)}"
    if isinstance(e, Sub):
        return f"{_wrap(e.lhs, _PREC_ADD)} - {_wrap(e.rhs, _PREC_ADD + 1, True)}"
    if isinstance(e, Mul):
        return f"{_wrap(e.lhs, _PREC_MUL)}*{_wrap(e.rhs, _PREC_MUL + 1, True)}"
    if isinstance(e, Div):
        return f"{_wrap(e.lhs, _PREC_MUL)}/{_wrap(e.rhs, _PREC_MUL + 1, True)}"
    if isinstance(e, Pow):
        base = _wrap(e.base, _PREC_ATOM)
        exponent = _wrap(e.exponent, _PREC_NEG, True)
        return f"{base}^{exponent}"
    if isinstance(e, Func):
        return f"{e.name}({format_expr(e.arg)})"
    raise TypeError(f"unknown node {e!r}")


# -- compilation -------------------------------------------------------------


def compile_expr(e: Expr, params: tuple[str, ...], scaled: bool = False) -> Callable:
    """Compile to a plain Python function for fast repeated evaluation.

    Identical subtrees share one temporary, so large condition expressions
    with repeated coefficient blocks stay cheap. With ``scaled=True`` the
    function returns ``(value, max_abs_subterm)``.
    """
    lines: list[str] = []
    names: dict[Expr, str] = {}
    counter = [0]

    def emit(node: Expr) -> str:
        if node in names:
            return names[node]
        if isinstance(node, Num):
            code = repr(_to_float(node.value))
        elif isinstance(node, Var):
            if node.name not in params:
                raise UnboundVariableError(f"unbound variable '{node.name}'", node)
            code = node.name
        elif isinstance(node, Neg):
            code = f"-{emit(node.arg)}"
        elif isinstance(node, Add):
            code = f"{emit(node.lhs)} + {emit(node.rhs)}"
        elif isinstance(node, Sub):
            code = f"{emit(node.lhs)} - {emit(node.rhs)}"
        elif isinstance(node, Mul):
            code = f"{emit(node.lhs)} * {emit(node.rhs)}"
        elif isinstance(node, Div):
            code = f"{emit(node.lhs)} / {emit(node.rhs)}"
        elif isinstance(node, Pow):
            code = f"_pow({emit(node.base)}, {emit(node.exponent)})"
        elif isinstance(node, Func):
            code = f"_f_{node.name}({emit(node.arg)})"
        else:
            raise TypeError(f"unknown node {node!r}")
        name = f"t{counter[0]}"
        counter[0] += 1
        lines.append(f"    {name} = {code}")
        if scaled:
            lines.append(f"    _m = max(_m, abs({name}))")
        names[node] = name
        return name

    root = emit(e)
    header = f"def _compiled({', '.join(params)}):"
    body = ["    _m = 0.0"] if scaled else []
    footer = f"    return ({root}, _m)" if scaled else f"    return {root}"
    source = "\n".join([header, *body, *lines, footer])
    namespace: dict = {"_pow": _real_pow, "max": max, "abs": abs}
    for fname, fn in _REAL_FUNC.items():
        namespace[f"_f_{fname}"] = fn
    exec(source, namespace)  # noqa: S102 - generated from a closed node set
    return namespace["_compiled"]
