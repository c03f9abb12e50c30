"""Randomized zero-testing of expressions over box domains.

The decision procedure has two tiers: a symbolic tier (the rational normal
form folds to the literal 0) and a numeric tier (the expression stays below a
relative tolerance at seeded random sample points). Points falling into
excluded regions around singularities are rejected before evaluation. An
expression that cannot be evaluated at enough points is reported as
indeterminate rather than claimed zero or nonzero.
"""

from __future__ import annotations

import math
import random
from dataclasses import dataclass, field
from enum import Enum
from typing import Iterable, Mapping

from .expr import (
    EvaluationError,
    Expr,
    Num,
    compile_expr,
    free_variables,
)
from .simplify import simplify

DEFAULT_SAMPLES = 200
DEFAULT_TOL = 1e-9
DEFAULT_SEED = 42

# Guard width around the poles of the bundled examples (x = 0, y^2 + z^2 = 0).
DEFAULT_GUARD = 1e-6

_MAX_DRAW_FACTOR = 50


@dataclass(frozen=True)
class Exclusion:
    """Reject samples where |expr| <= threshold."""

    expr: Expr
    threshold: float


@dataclass(frozen=True)
class Domain:
    """Closed sampling box per variable plus singularity guards."""

    intervals: Mapping[str, tuple[float, float]]
    exclusions: tuple[Exclusion, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "intervals", dict(self.intervals))
        for name, (lo, hi) in self.intervals.items():
            if not lo < hi:
                raise ValueError(f"empty interval for '{name}': {lo}..{hi}")

    @classmethod
    def for_variables(
        cls,
        names: Iterable[str],
        lo: float = 0.5,
        hi: float = 1.5,
        guard_poles: bool = True,
    ) -> "Domain":
        """Default box with guards for the poles common in this problem family."""
        from .parser import parse

        names = sorted(set(names))
        exclusions: list[Exclusion] = []
        if guard_poles:
            if "x" in names:
                exclusions.append(Exclusion(parse("x"), DEFAULT_GUARD))
            if "y" in names and "z" in names:
                exclusions.append(Exclusion(parse("y^2 + z^2"), DEFAULT_GUARD))
            if "u" in names:
                exclusions.append(Exclusion(parse("u"), DEFAULT_GUARD))
        return cls({name: (lo, hi) for name in names}, tuple(exclusions))

    def covers(self, expr: Expr) -> bool:
        return free_variables(expr) <= set(self.intervals)

    def with_exclusion(self, expr: Expr, threshold: float = DEFAULT_GUARD) -> "Domain":
        return Domain(self.intervals, self.exclusions + (Exclusion(expr, threshold),))


class ZeroStatus(Enum):
    SYMBOLIC_ZERO = "symbolic-zero"
    NUMERICALLY_ZERO = "numerically-zero"
    VIOLATED = "violated"
    INDETERMINATE = "indeterminate"


@dataclass(frozen=True)
class Witness:
    point: dict[str, float]
    residual: float


@dataclass(frozen=True)
class ZeroVerdict:
    status: ZeroStatus
    max_abs_residual: float = 0.0
    witness: Witness | None = None
    samples_used: int = 0

    @property
    def passed(self) -> bool:
        return self.status in (ZeroStatus.SYMBOLIC_ZERO, ZeroStatus.NUMERICALLY_ZERO)

    def to_dict(self) -> dict:
        out: dict = {
            "status": self.status.value,
            "max_abs_residual": self.max_abs_residual,
            "samples_used": self.samples_used,
        }
        if self.witness is not None:
            out["witness"] = {
                "point": {k: v for k, v in sorted(self.witness.point.items())},
                "residual": self.witness.residual,
            }
        return out


def _draw(rng: random.Random, intervals: Mapping[str, tuple[float, float]], order: list[str]):
    return {name: rng.uniform(*intervals[name]) for name in order}


def is_zero(
    e: Expr,
    dom: Domain,
    n_samples: int = DEFAULT_SAMPLES,
    tol: float = DEFAULT_TOL,
    seed: int = DEFAULT_SEED,
) -> ZeroVerdict:
    """Decide whether ``e`` vanishes identically on the domain.

    Deterministic for fixed ``(seed, n_samples, tol)``. Residuals are judged
    relative to the largest subterm magnitude at each point, so cancellations
    between large terms are not mistaken for violations.
    """
    if not dom.covers(e):
        missing = sorted(free_variables(e) - set(dom.intervals))
        raise ValueError(f"domain does not cover variables {missing}")

    reduced = simplify(e)
    if isinstance(reduced, Num) and reduced.value == 0:
        return ZeroVerdict(ZeroStatus.SYMBOLIC_ZERO)

    order = sorted(dom.intervals)
    params = tuple(order)
    evaluator = compile_expr(reduced, params, scaled=True)
    guards = [(compile_expr(exc.expr, params), exc.threshold) for exc in dom.exclusions]

    rng = random.Random(seed)
    max_attempts = max(1, _MAX_DRAW_FACTOR * n_samples)
    accepted = 0
    evaluated = 0
    max_abs = 0.0
    worst: Witness | None = None
    worst_rel = 0.0
    violated = False

    attempts = 0
    while accepted < n_samples and attempts < max_attempts:
        attempts += 1
        point = _draw(rng, dom.intervals, order)
        args = [point[name] for name in order]
        admissible = True
        for guard, threshold in guards:
            try:
                if abs(guard(*args)) <= threshold:
                    admissible = False
                    break
            except (EvaluationError, ZeroDivisionError, ValueError, OverflowError):
                admissible = False
                break
        if not admissible:
            continue
        accepted += 1
        try:
            value, scale = evaluator(*args)
        except (EvaluationError, ZeroDivisionError, ValueError, OverflowError):
            continue
        if not math.isfinite(value) or not math.isfinite(scale):
            continue
        evaluated += 1
        magnitude = abs(value)
        if magnitude > max_abs:
            max_abs = magnitude
        relative = magnitude / (1.0 + scale)
        if magnitude > tol * (1.0 + scale):
            violated = True
            if relative >= worst_rel:
                worst_rel = relative
                worst = Witness(point, value)

    if evaluated < n_samples / 2:
        return ZeroVerdict(ZeroStatus.INDETERMINATE, max_abs, None, evaluated)
    if violated:
        return ZeroVerdict(ZeroStatus.VIOLATED, max_abs, worst, evaluated)
    return ZeroVerdict(ZeroStatus.NUMERICALLY_ZERO, max_abs, None, evaluated)
