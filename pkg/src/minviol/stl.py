"""STL formula trees, discrete-time traces, and Boolean satisfaction.

Formulas are immutable trees over the core grammar (predicate, True,
negation, conjunction, until, since) plus the usual derived operators
(or, implies, eventually, globally, once, historically).  Time is
exclusively a discrete index k in [0, K]; the trace's time increment is
metadata only.  Temporal windows are half-bounded by intersecting the
shifted interval with [0, K]; an empty window makes an until false (and
its globally dual true).
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

__all__ = [
    "Trace",
    "Interval",
    "Formula",
    "TrueFormula",
    "Predicate",
    "Not",
    "And",
    "Or",
    "Implies",
    "Until",
    "Since",
    "Eventually",
    "Globally",
    "Once",
    "Historically",
    "normalize",
    "boolean_sat",
    "parse_formula",
    "FormulaSyntaxError",
    "TRUE",
]


class ContractViolation(ValueError):
    """An operation was called outside its stated contract."""


@dataclass(frozen=True, eq=False)
class Trace:
    """Output trajectory over discrete times 0..K with fixed increment dt.

    ``values`` has shape (n_y, K+1); every entry must be finite and
    ``dt`` must be positive.  Instances are immutable (the array is
    marked read-only), compare by identity, and are safe to share
    across threads.
    """

    values: np.ndarray
    dt: float = 1.0

    def __post_init__(self) -> None:
        values = np.asarray(self.values, dtype=float)
        if values.ndim == 1:
            values = values.reshape(1, -1)
        if values.ndim != 2 or values.shape[1] < 2:
            raise ContractViolation(
                "trace needs shape (n_y, K+1) with K >= 1, got %r" % (values.shape,)
            )
        if not np.all(np.isfinite(values)):
            raise ContractViolation("trace values must be finite")
        if not self.dt > 0:
            raise ContractViolation("dt must be positive")
        values = values.copy()
        values.setflags(write=False)
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "dt", float(self.dt))

    @property
    def n_y(self) -> int:
        return self.values.shape[0]

    @property
    def K(self) -> int:
        """Final time index."""
        return self.values.shape[1] - 1

    def time(self, k: int) -> float:
        return k * self.dt

    def check_index(self, k: int) -> None:
        if not 0 <= k <= self.K:
            raise IndexError("time index %d outside [0, %d]" % (k, self.K))


@dataclass(frozen=True)
class Interval:
    """Discrete interval [lo, hi] of relative time indices, lo <= hi."""

    lo: int
    hi: int

    def __post_init__(self) -> None:
        if self.lo < 0 or self.hi < self.lo:
            raise ContractViolation("interval needs 0 <= lo <= hi, got [%s, %s]" % (self.lo, self.hi))


class Formula:
    """Base class for STL formula nodes.  Nodes are immutable values."""

    __slots__ = ()


@dataclass(frozen=True)
class TrueFormula(Formula):
    def __str__(self) -> str:
        return "true"


TRUE = TrueFormula()


@dataclass(frozen=True)
class Predicate(Formula):
    """Atomic predicate p(y, k) >= 0.

    ``evaluate`` maps (trace, k) to the real margin p(y, k); it must be
    deterministic and total for every k in [0, K].  Predicates compare
    equal by id only, so a registry must not reuse ids across distinct
    evaluators.
    """

    id: str
    evaluate: Callable[[Trace, int], float] = field(compare=False, repr=False)

    def __str__(self) -> str:
        return self.id


@dataclass(frozen=True)
class Not(Formula):
    child: Formula

    def __str__(self) -> str:
        return "not(%s)" % self.child


@dataclass(frozen=True)
class And(Formula):
    left: Formula
    right: Formula

    def __str__(self) -> str:
        return "and(%s, %s)" % (self.left, self.right)


@dataclass(frozen=True)
class Or(Formula):
    left: Formula
    right: Formula

    def __str__(self) -> str:
        return "or(%s, %s)" % (self.left, self.right)


@dataclass(frozen=True)
class Implies(Formula):
    left: Formula
    right: Formula

    def __str__(self) -> str:
        return "implies(%s, %s)" % (self.left, self.right)


def _interval_str(interval: Interval | None) -> str:
    return "" if interval is None else "[%d,%d]" % (interval.lo, interval.hi)


@dataclass(frozen=True)
class Until(Formula):
    interval: Interval | None
    left: Formula
    right: Formula

    def __str__(self) -> str:
        return "U%s(%s, %s)" % (_interval_str(self.interval), self.left, self.right)


@dataclass(frozen=True)
class Since(Formula):
    interval: Interval | None
    left: Formula
    right: Formula

    def __str__(self) -> str:
        return "S%s(%s, %s)" % (_interval_str(self.interval), self.left, self.right)


@dataclass(frozen=True)
class Eventually(Formula):
    interval: Interval | None
    child: Formula

    def __str__(self) -> str:
        return "F%s(%s)" % (_interval_str(self.interval), self.child)


@dataclass(frozen=True)
class Globally(Formula):
    interval: Interval | None
    child: Formula

    def __str__(self) -> str:
        return "G%s(%s)" % (_interval_str(self.interval), self.child)


@dataclass(frozen=True)
class Once(Formula):
    interval: Interval | None
    child: Formula

    def __str__(self) -> str:
        return "O%s(%s)" % (_interval_str(self.interval), self.child)


@dataclass(frozen=True)
class Historically(Formula):
    interval: Interval | None
    child: Formula

    def __str__(self) -> str:
        return "H%s(%s)" % (_interval_str(self.interval), self.child)


_CORE_TYPES = (TrueFormula, Predicate, Not, And, Until, Since)


def is_core(formula: Formula) -> bool:
    """True when the tree uses only predicate/True/not/and/until/since nodes."""
    if isinstance(formula, (TrueFormula, Predicate)):
        return True
    if isinstance(formula, Not):
        return is_core(formula.child)
    if isinstance(formula, And):
        return is_core(formula.left) and is_core(formula.right)
    if isinstance(formula, (Until, Since)):
        return is_core(formula.left) and is_core(formula.right)
    return False


def normalize(formula: Formula) -> Formula:
    """Rewrite derived operators into the core grammar.

    or(a, b)      -> not(and(not a, not b))
    implies(a, b) -> or(not a, b)
    F_I(a)        -> true U_I a
    G_I(a)        -> not(F_I(not a))
    O_I(a)        -> true S_I a
    H_I(a)        -> not(O_I(not a))
    """
    if isinstance(formula, (TrueFormula, Predicate)):
        return formula
    if isinstance(formula, Not):
        return Not(normalize(formula.child))
    if isinstance(formula, And):
        return And(normalize(formula.left), normalize(formula.right))
    if isinstance(formula, Or):
        return Not(And(Not(normalize(formula.left)), Not(normalize(formula.right))))
    if isinstance(formula, Implies):
        return normalize(Or(Not(formula.left), formula.right))
    if isinstance(formula, Until):
        return Until(formula.interval, normalize(formula.left), normalize(formula.right))
    if isinstance(formula, Since):
        return Since(formula.interval, normalize(formula.left), normalize(formula.right))
    if isinstance(formula, Eventually):
        return Until(formula.interval, TRUE, normalize(formula.child))
    if isinstance(formula, Globally):
        return Not(Until(formula.interval, TRUE, Not(normalize(formula.child))))
    if isinstance(formula, Once):
        return Since(formula.interval, TRUE, normalize(formula.child))
    if isinstance(formula, Historically):
        return Not(Since(formula.interval, TRUE, Not(normalize(formula.child))))
    raise TypeError("unknown formula node %r" % type(formula).__name__)


def _bounds(interval: Interval | None, K: int) -> tuple[int, int]:
    if interval is None:
        return 0, K
    return interval.lo, interval.hi


def forward_window(interval: Interval | None, K: int, k: int) -> range:
    """Absolute indices (k + I) intersected with [0, K]."""
    lo, hi = _bounds(interval, K)
    return range(k + lo, min(k + hi, K) + 1)


def backward_window(interval: Interval | None, K: int, k: int) -> range:
    """Absolute indices (k - I) intersected with [0, K]."""
    lo, hi = _bounds(interval, K)
    return range(max(k - hi, 0), k - lo + 1)


def boolean_sat(formula: Formula, trace: Trace, k: int = 0) -> bool:
    """Standard discrete-time Boolean STL verdict at time index k.

    A predicate holds iff its margin is >= 0.  Works on both derived
    and core formulas; agrees with ``boolean_sat(normalize(formula))``.
    """
    trace.check_index(k)
    return _sat(formula, trace, k)


def _sat(formula: Formula, trace: Trace, k: int) -> bool:
    K = trace.K
    if isinstance(formula, TrueFormula):
        return True
    if isinstance(formula, Predicate):
        return formula.evaluate(trace, k) >= 0
    if isinstance(formula, Not):
        return not _sat(formula.child, trace, k)
    if isinstance(formula, And):
        return _sat(formula.left, trace, k) and _sat(formula.right, trace, k)
    if isinstance(formula, Or):
        return _sat(formula.left, trace, k) or _sat(formula.right, trace, k)
    if isinstance(formula, Implies):
        return (not _sat(formula.left, trace, k)) or _sat(formula.right, trace, k)
    if isinstance(formula, Until):
        for kp in forward_window(formula.interval, K, k):
            if _sat(formula.right, trace, kp) and all(
                _sat(formula.left, trace, kq) for kq in range(k, kp)
            ):
                return True
        return False
    if isinstance(formula, Since):
        for kp in backward_window(formula.interval, K, k):
            if _sat(formula.right, trace, kp) and all(
                _sat(formula.left, trace, kq) for kq in range(kp + 1, k + 1)
            ):
                return True
        return False
    if isinstance(formula, Eventually):
        return any(_sat(formula.child, trace, kp) for kp in forward_window(formula.interval, K, k))
    if isinstance(formula, Globally):
        return all(_sat(formula.child, trace, kp) for kp in forward_window(formula.interval, K, k))
    if isinstance(formula, Once):
        return any(_sat(formula.child, trace, kp) for kp in backward_window(formula.interval, K, k))
    if isinstance(formula, Historically):
        return all(_sat(formula.child, trace, kp) for kp in backward_window(formula.interval, K, k))
    raise TypeError("unknown formula node %r" % type(formula).__name__)


# --------------------------------------------------------------------------
# Textual formula syntax
#
#   formula  := 'true' | IDENT | unary | binary | bool2 | 'not' '(' formula ')'
#   unary    := ('G'|'F'|'O'|'H') interval? '(' formula ')'
#   binary   := ('U'|'S') interval? '(' formula ',' formula ')'
#   bool2    := ('and'|'or'|'implies') '(' formula ',' formula ')'
#   interval := '[' NAT ',' NAT ']'
#
# A missing interval means the full horizon [0, K].  IDENT names a
# registered predicate.


class FormulaSyntaxError(ValueError):
    """Raised on malformed formula text; carries the character position."""

    def __init__(self, message: str, position: int):
        super().__init__("%s (at position %d)" % (message, position))
        self.position = position


_TOKEN_RE = re.compile(r"\s*(?:(?P<name>[A-Za-z_][A-Za-z0-9_]*)|(?P<nat>\d+)|(?P<sym>[()\[\],]))")

_UNARY = {"G": Globally, "F": Eventually, "O": Once, "H": Historically}
_BINARY_TEMPORAL = {"U": Until, "S": Since}
_BINARY_BOOL = {"and": And, "or": Or, "implies": Implies}


class _Parser:
    def __init__(self, text: str, predicates: dict[str, Callable[[Trace, int], float]] | None):
        self.text = text
        self.predicates = predicates or {}
        self.tokens: list[tuple[str, str, int]] = []
        pos = 0
        while pos < len(text):
            match = _TOKEN_RE.match(text, pos)
            if match is None or match.lastgroup is None:
                stripped = text[pos:].lstrip()
                if not stripped:
                    break
                raise FormulaSyntaxError("unexpected character %r" % stripped[0], pos)
            self.tokens.append((match.lastgroup, match.group(match.lastgroup), match.start(match.lastgroup)))
            pos = match.end()
        self.index = 0

    def peek(self) -> tuple[str, str, int] | None:
        return self.tokens[self.index] if self.index < len(self.tokens) else None

    def next(self) -> tuple[str, str, int]:
        token = self.peek()
        if token is None:
            raise FormulaSyntaxError("unexpected end of formula", len(self.text))
        self.index += 1
        return token

    def expect(self, value: str) -> None:
        kind, text, pos = self.next()
        if text != value:
            raise FormulaSyntaxError("expected %r, got %r" % (value, text), pos)

    def parse(self) -> Formula:
        formula = self.formula()
        token = self.peek()
        if token is not None:
            raise FormulaSyntaxError("trailing input %r" % token[1], token[2])
        return formula

    def formula(self) -> Formula:
        kind, text, pos = self.next()
        if kind != "name":
            raise FormulaSyntaxError("expected operator or predicate, got %r" % text, pos)
        if text == "true":
            return TRUE
        if text == "not":
            self.expect("(")
            child = self.formula()
            self.expect(")")
            return Not(child)
        if text in _BINARY_BOOL:
            self.expect("(")
            left = self.formula()
            self.expect(",")
            right = self.formula()
            self.expect(")")
            return _BINARY_BOOL[text](left, right)
        if text in _UNARY:
            interval = self.optional_interval()
            self.expect("(")
            child = self.formula()
            self.expect(")")
            return _UNARY[text](interval, child)
        if text in _BINARY_TEMPORAL:
            interval = self.optional_interval()
            self.expect("(")
            left = self.formula()
            self.expect(",")
            right = self.formula()
            self.expect(")")
            return _BINARY_TEMPORAL[text](interval, left, right)
        # predicate reference
        if text not in self.predicates:
            raise FormulaSyntaxError("unknown predicate %r" % text, pos)
        return Predicate(text, self.predicates[text])

    def optional_interval(self) -> Interval | None:
        token = self.peek()
        if token is None or token[1] != "[":
            return None
        self.expect("[")
        lo = self.natural()
        self.expect(",")
        hi = self.natural()
        self.expect("]")
        try:
            return Interval(int(lo), int(hi))
        except ContractViolation as exc:
            raise FormulaSyntaxError(str(exc), token[2]) from exc

    def natural(self) -> int:
        kind, text, pos = self.next()
        if kind != "nat":
            raise FormulaSyntaxError("expected natural number, got %r" % text, pos)
        return int(text)


def parse_formula(
    text: str, predicates: dict[str, Callable[[Trace, int], float]] | None = None
) -> Formula:
    """Parse the textual syntax, binding predicate names from a registry."""
    return _Parser(text, predicates).parse()
