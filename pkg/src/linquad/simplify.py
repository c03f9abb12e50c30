"""Value-preserving simplification via a rational normal form.

Expressions are flattened into a quotient of multivariate polynomials whose
generators are variables and opaque non-rational subtrees (function calls,
symbolic powers). Rational constants stay exact ``Fraction``s; decimal
literals stay floats. Sums of quotients are combined over a common
denominator, like terms collected, and common monomial/content factors
cancelled. The form is not canonical: a true zero that needs transcendental
identities (e.g. sin^2 + cos^2 = 1) will not fold to the literal 0 and is
left to the numeric tier of the zero test.
"""

from __future__ import annotations

from fractions import Fraction

from .expr import (
    Add,
    Div,
    Expr,
    Func,
    Mul,
    Neg,
    Num,
    Pow,
    Sub,
    Var,
    add_all,
    format_expr,
    mul_all,
    mul,
    neg,
    num,
    pow_,
    ZERO,
)

# A monomial maps generator -> positive exponent, stored as a sorted tuple.
Mono = tuple[tuple[Expr, int], ...]
Poly = dict[Mono, "Fraction | float"]

MAX_TERMS = 50_000

_CONST_FOLDS = {
    ("sin", 0): Fraction(0),
    ("cos", 0): Fraction(1),
    ("tan", 0): Fraction(0),
    ("sinh", 0): Fraction(0),
    ("cosh", 0): Fraction(1),
    ("tanh", 0): Fraction(0),
    ("exp", 0): Fraction(1),
    ("ln", 1): Fraction(0),
    ("sqrt", 0): Fraction(0),
    ("sqrt", 1): Fraction(1),
}


class _TooBig(Exception):
    pass


class _Ctx:
    def __init__(self):
        self.keys: dict[Expr, str] = {}

    def key(self, generator: Expr) -> str:
        text = self.keys.get(generator)
        if text is None:
            text = format_expr(generator)
            self.keys[generator] = text
        return text


def _guard(poly: Poly) -> Poly:
    if len(poly) > MAX_TERMS:
        raise _TooBig
    return poly


def _const_poly(value) -> Poly:
    if value == 0:
        return {}
    return {(): value}


_ONE_POLY: Poly = {(): Fraction(1)}


def _mono_mul(a: Mono, b: Mono, ctx: _Ctx) -> Mono:
    if not a:
        return b
    if not b:
        return a
    merged: dict[Expr, int] = dict(a)
    for generator, exponent in b:
        merged[generator] = merged.get(generator, 0) + exponent
    return tuple(sorted(merged.items(), key=lambda item: ctx.key(item[0])))


def _padd(a: Poly, b: Poly) -> Poly:
    out = dict(a)
    for mono, coefficient in b.items():
        total = out.get(mono, 0) + coefficient
        if total == 0 and not isinstance(total, float):
            out.pop(mono, None)
        elif isinstance(total, float) and total == 0.0:
            out.pop(mono, None)
        else:
            out[mono] = total
    return _guard(out)


def _pneg(a: Poly) -> Poly:
    return {mono: -coefficient for mono, coefficient in a.items()}


def _pmul(a: Poly, b: Poly, ctx: _Ctx) -> Poly:
    out: Poly = {}
    for mono_a, coefficient_a in a.items():
        for mono_b, coefficient_b in b.items():
            mono = _mono_mul(mono_a, mono_b, ctx)
            total = out.get(mono, 0) + coefficient_a * coefficient_b
            if total == 0 and not isinstance(total, float):
                out.pop(mono, None)
            elif isinstance(total, float) and total == 0.0:
                out.pop(mono, None)
            else:
                out[mono] = total
    return _guard(out)


def _ppow(a: Poly, k: int, ctx: _Ctx) -> Poly:
    result = dict(_ONE_POLY)
    base = a
    while k:
        if k & 1:
            result = _pmul(result, base, ctx)
        k >>= 1
        if k:
            base = _pmul(base, base, ctx)
    return result


Pair = tuple[Poly, Poly]


def _pair_add(a: Pair, b: Pair, ctx: _Ctx, negate: bool = False) -> Pair:
    num_a, den_a = a
    num_b, den_b = b
    rhs = _pmul(num_b, den_a, ctx)
    if negate:
        rhs = _pneg(rhs)
    return _padd(_pmul(num_a, den_b, ctx), rhs), _pmul(den_a, den_b, ctx)


def _pair_mul(a: Pair, b: Pair, ctx: _Ctx) -> Pair:
    return _pmul(a[0], b[0], ctx), _pmul(a[1], b[1], ctx)


def _atom_pair(e: Expr) -> Pair:
    return {((e, 1),): Fraction(1)}, dict(_ONE_POLY)


def _exponent_as_int(pair: Pair) -> int | None:
    """Integer value of a constant exponent pair, if it is one."""
    numerator, denominator = pair
    if len(denominator) != 1 or () not in denominator:
        return None
    if not numerator:
        return 0
    if len(numerator) != 1 or () not in numerator:
        return None
    value = numerator[()] / denominator[()]
    if isinstance(value, Fraction):
        return int(value) if value.denominator == 1 else None
    if isinstance(value, float) and value.is_integer() and abs(value) < 2**53:
        return int(value)
    return None


def _to_pair(e: Expr, ctx: _Ctx) -> Pair:
    if isinstance(e, Num):
        return _const_poly(e.value), dict(_ONE_POLY)
    if isinstance(e, Var):
        return _atom_pair(e)
    if isinstance(e, Neg):
        numerator, denominator = _to_pair(e.arg, ctx)
        return _pneg(numerator), denominator
    if isinstance(e, Add):
        return _pair_add(_to_pair(e.lhs, ctx), _to_pair(e.rhs, ctx), ctx)
    if isinstance(e, Sub):
        return _pair_add(_to_pair(e.lhs, ctx), _to_pair(e.rhs, ctx), ctx, negate=True)
    if isinstance(e, Mul):
        return _pair_mul(_to_pair(e.lhs, ctx), _to_pair(e.rhs, ctx), ctx)
    if isinstance(e, Div):
        num_l, den_l = _to_pair(e.lhs, ctx)
        num_r, den_r = _to_pair(e.rhs, ctx)
        if not num_r:
            # denominator is identically zero: keep the node opaque
            return _atom_pair(e)
        return _pmul(num_l, den_r, ctx), _pmul(den_l, num_r, ctx)
    if isinstance(e, Pow):
        exponent_pair = _to_pair(e.exponent, ctx)
        k = _exponent_as_int(exponent_pair)
        if k is not None:
            base = _to_pair(e.base, ctx)
            if k >= 0:
                return _ppow(base[0], k, ctx), _ppow(base[1], k, ctx)
            if not base[0]:
                return _atom_pair(e)
            return _ppow(base[1], -k, ctx), _ppow(base[0], -k, ctx)
        return _atom_pair(Pow(_rebuild(_to_pair(e.base, ctx), ctx), _rebuild(exponent_pair, ctx)))
    if isinstance(e, Func):
        argument = _rebuild(_to_pair(e.arg, ctx), ctx)
        if isinstance(argument, Num):
            folded = _CONST_FOLDS.get((e.name, argument.value))
            if folded is not None:
                return _const_poly(folded), dict(_ONE_POLY)
        return _atom_pair(Func(e.name, argument))
    raise TypeError(f"unknown node {e!r}")


def _mono_gcd(polys: list[Poly]) -> Mono:
    common: dict[Expr, int] | None = None
    for poly in polys:
        for mono in poly:
            exponents = dict(mono)
            if common is None:
                common = exponents
            else:
                common = {
                    generator: min(exponent, exponents[generator])
                    for generator, exponent in common.items()
                    if generator in exponents
                }
            if not common:
                return ()
    return tuple(common.items()) if common else ()


def _mono_divide(poly: Poly, factor: Mono) -> Poly:
    if not factor:
        return poly
    shift = dict(factor)
    out: Poly = {}
    for mono, coefficient in poly.items():
        reduced = [
            (generator, exponent - shift.get(generator, 0)) for generator, exponent in mono
        ]
        out[tuple((g, x) for g, x in reduced if x)] = coefficient
    return out


def _all_fractions(poly: Poly) -> bool:
    return all(isinstance(c, Fraction) for c in poly.values())


def _normalize(pair: Pair, ctx: _Ctx) -> Pair:
    numerator, denominator = pair
    if not numerator:
        return {}, dict(_ONE_POLY)
    factor = _mono_gcd([numerator, denominator])
    if factor:
        numerator = _mono_divide(numerator, factor)
        denominator = _mono_divide(denominator, factor)
    if _all_fractions(denominator) and _all_fractions(numerator):
        ordered = sorted(
            denominator.items(), key=lambda item: [(ctx.key(g), x) for g, x in item[0]]
        )
        lead = ordered[0][1]
        content = Fraction(0)
        for _, coefficient in ordered:
            content = _fraction_gcd(content, coefficient)
        if lead < 0:
            content = -content
        if content not in (0, 1):
            denominator = {m: c / content for m, c in denominator.items()}
            numerator = {m: c / content for m, c in numerator.items()}
    if numerator == denominator:
        return dict(_ONE_POLY), dict(_ONE_POLY)
    if numerator == _pneg(denominator):
        return {(): Fraction(-1)}, dict(_ONE_POLY)
    return numerator, denominator


def _fraction_gcd(a: Fraction, b: Fraction) -> Fraction:
    from math import gcd, lcm

    if a == 0:
        return abs(b)
    if b == 0:
        return abs(a)
    return Fraction(gcd(a.numerator, b.numerator), lcm(a.denominator, b.denominator))


def _term_expr(mono: Mono, coefficient) -> Expr:
    factors = [pow_(generator, num(exponent)) for generator, exponent in mono]
    core = mul_all(factors) if factors else None
    if core is None:
        return Num(coefficient)
    if coefficient == 1:
        return core
    if coefficient == -1:
        return neg(core)
    return mul(Num(coefficient), core)


def _poly_expr(poly: Poly, ctx: _Ctx) -> Expr:
    if not poly:
        return ZERO
    ordered = sorted(poly.items(), key=lambda item: [(ctx.key(g), x) for g, x in item[0]])
    return add_all(_term_expr(mono, coefficient) for mono, coefficient in ordered)


def _rebuild(pair: Pair, ctx: _Ctx | None = None) -> Expr:
    if ctx is None:
        ctx = _Ctx()
    numerator, denominator = _normalize(pair, ctx)
    top = _poly_expr(numerator, ctx)
    if denominator == _ONE_POLY or (
        len(denominator) == 1 and () in denominator and denominator[()] == 1
    ):
        return top
    return Div(top, _poly_expr(denominator, ctx))


def simplify(e: Expr) -> Expr:
    """Rewrite to the rational normal form; falls back to the input unchanged
    when the expansion would explode."""
    ctx = _Ctx()
    try:
        return _rebuild(_to_pair(e, ctx), ctx)
    except _TooBig:
        return e


def is_simplified_zero(e: Expr) -> bool:
    """True when the normal form of ``e`` is the literal 0."""
    s = simplify(e)
    return isinstance(s, Num) and s.value == 0
