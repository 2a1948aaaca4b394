"""Violation costs, non-uniform quantization, and bit-packed scalar costs.

A prioritized specification set maps a trajectory to a vector of
nonnegative violation costs (the negative part of each robustness
value), quantizes each component into its violation-interval index, and
packs the resulting discrete vector into one arbitrary-precision
integer whose natural order equals the lexicographic order of the
vectors.
"""

from __future__ import annotations

import math
from bisect import bisect_left
from dataclasses import dataclass
from functools import cached_property

from .robustness import MeasureConfig, robustness
from .stl import ContractViolation, Formula, Trace, is_core, normalize

__all__ = [
    "DiscretizationScheme",
    "uniform_thresholds",
    "CostLayout",
    "ScalarCost",
    "PrioritizedSpec",
    "SpecSet",
    "violation_cost",
    "discretize",
    "pack",
    "unpack",
    "lex_compare",
    "scalar_cost",
]


@dataclass(frozen=True)
class DiscretizationScheme:
    """Partition of the cost axis into m violation intervals.

    With thresholds 0 < alpha_1 < ... < alpha_{m-1}, the intervals are
    I_0 = [0, 0], I_xi = (alpha_{xi-1}, alpha_xi] for 1 <= xi < m, and
    I_m = (alpha_{m-1}, inf).  ``m = 1`` is the degenerate scheme that
    only distinguishes satisfaction (0) from any violation (1).
    """

    m: int
    alphas: tuple[float, ...] = ()

    def __post_init__(self) -> None:
        if self.m < 1:
            raise ContractViolation("need at least one violation interval")
        alphas = tuple(float(a) for a in self.alphas)
        if len(alphas) != self.m - 1:
            raise ContractViolation(
                "scheme with m=%d needs %d thresholds, got %d" % (self.m, self.m - 1, len(alphas))
            )
        if any(a <= 0 for a in alphas):
            raise ContractViolation("thresholds must be positive")
        if any(b <= a for a, b in zip(alphas, alphas[1:])):
            raise ContractViolation("thresholds must be strictly increasing")
        object.__setattr__(self, "alphas", alphas)


def uniform_thresholds(c_bar: float, m: int) -> DiscretizationScheme:
    """Equally spaced thresholds alpha_xi = c_bar * xi / (m - 1) over [0, c_bar].

    For m < 2 the single-interval scheme (no thresholds) is returned.
    """
    if not c_bar > 0:
        raise ContractViolation("c_bar must be positive")
    if m < 2:
        return DiscretizationScheme(1)
    return DiscretizationScheme(m, tuple(c_bar * xi / (m - 1) for xi in range(1, m)))


def violation_cost(config: MeasureConfig, formula: Formula, trace: Trace) -> float:
    """Nonnegative violation cost -min(0, robustness(y, 0))."""
    eta = robustness(config, formula, trace, 0)
    return cost_from_robustness(eta)


def cost_from_robustness(eta: float) -> float:
    if eta >= 0:  # includes +inf and the measure-zero signed zero
        return 0.0
    return -eta  # -(-inf) = +inf


def discretize(cost: float, scheme: DiscretizationScheme) -> int:
    """Interval index of a nonnegative cost; +inf maps to m."""
    if math.isnan(cost) or cost < 0:
        raise ContractViolation("cost must be nonnegative, got %r" % cost)
    if cost == 0:
        return 0
    if math.isinf(cost):
        return scheme.m
    # right-closed intervals: an exact threshold lands in the lower index
    return bisect_left(scheme.alphas, cost) + 1


@dataclass(frozen=True)
class CostLayout:
    """Static bit layout for packing discrete cost vectors.

    ``widths[i]`` is the word width b_i of component i; the offset B_i
    is the total width of all lower-priority components.  When the
    layout is derived from interval counts, ``maxima`` carries each m_i
    and packing range-checks against it; a widths-only layout skips the
    upper range check (the packing formula still applies verbatim).
    """

    widths: tuple[int, ...]
    maxima: tuple[int, ...] | None = None

    def __post_init__(self) -> None:
        widths = tuple(int(b) for b in self.widths)
        if not widths or any(b < 1 for b in widths):
            raise ContractViolation("layout needs positive widths")
        object.__setattr__(self, "widths", widths)
        if self.maxima is not None:
            maxima = tuple(int(m) for m in self.maxima)
            if len(maxima) != len(widths):
                raise ContractViolation("maxima/widths length mismatch")
            object.__setattr__(self, "maxima", maxima)

    @classmethod
    def from_interval_counts(cls, ms: tuple[int, ...] | list[int]) -> "CostLayout":
        ms = tuple(int(m) for m in ms)
        if not ms or any(m < 1 for m in ms):
            raise ContractViolation("interval counts must be >= 1")
        # b_i = ceil(log2(m_i + 1)) == m_i.bit_length() for m_i >= 1
        return cls(tuple(m.bit_length() for m in ms), ms)

    @cached_property
    def offsets(self) -> tuple[int, ...]:
        out = []
        shift = 0
        for b in reversed(self.widths):
            out.append(shift)
            shift += b
        return tuple(reversed(out))

    @property
    def total_bits(self) -> int:
        return sum(self.widths)

    def __len__(self) -> int:
        return len(self.widths)


def pack(vector: "list[int] | tuple[int, ...]", layout: CostLayout) -> int:
    """Pack a discrete cost vector into its scalar utility value."""
    if len(vector) != len(layout):
        raise ContractViolation("vector length %d != layout length %d" % (len(vector), len(layout)))
    value = 0
    maxima = layout.maxima
    for i, component in enumerate(vector):
        c = int(component)
        if c < 0:
            raise ContractViolation("discrete costs are nonnegative")
        if maxima is not None and c > maxima[i]:
            raise ContractViolation("component %d exceeds m=%d: %d" % (i, maxima[i], c))
        value += c << layout.offsets[i]
    return value


def unpack(value: int, layout: CostLayout) -> tuple[int, ...]:
    """Inverse of ``pack`` on the range of valid vectors."""
    if value < 0 or value >> layout.total_bits:
        raise ContractViolation("scalar value outside layout range")
    return tuple((value >> off) & ((1 << b) - 1) for b, off in zip(layout.widths, layout.offsets))


def lex_compare(a, b) -> int:
    """Lexicographic comparison: -1, 0, or +1."""
    if len(a) != len(b):
        raise ContractViolation("lexicographic comparison needs equal lengths")
    for x, y in zip(a, b):
        if x < y:
            return -1
        if x > y:
            return 1
    return 0


@dataclass(frozen=True)
class ScalarCost:
    """Arbitrary-precision packed cost; ordered by the integer value."""

    value: int
    layout: CostLayout

    def __post_init__(self) -> None:
        if self.value < 0 or self.value >> self.layout.total_bits:
            raise ContractViolation("scalar value outside layout range")

    def components(self) -> tuple[int, ...]:
        return unpack(self.value, self.layout)

    def decimal(self) -> str:
        return str(self.value)

    def _check(self, other: "ScalarCost") -> None:
        if self.layout != other.layout:
            raise ContractViolation("comparing scalar costs from different layouts")

    def __lt__(self, other: "ScalarCost") -> bool:
        self._check(other)
        return self.value < other.value

    def __le__(self, other: "ScalarCost") -> bool:
        self._check(other)
        return self.value <= other.value


@dataclass(frozen=True)
class PrioritizedSpec:
    """One specification with its measure and discretization scheme."""

    name: str
    formula: Formula
    measure: MeasureConfig
    scheme: DiscretizationScheme


class SpecSet:
    """Totally ordered specification set, highest priority first.

    The bit layout is computed once at construction; formulas are
    normalized once so repeated evaluations share the same trees.
    """

    def __init__(self, specs: "list[PrioritizedSpec] | tuple[PrioritizedSpec, ...]"):
        specs = tuple(specs)
        if not specs:
            raise ContractViolation("spec set needs at least one specification")
        self.specs = specs
        self.layout = CostLayout.from_interval_counts([s.scheme.m for s in specs])
        self._normalized = tuple(
            s.formula if is_core(s.formula) else normalize(s.formula) for s in specs
        )

    def __len__(self) -> int:
        return len(self.specs)

    @property
    def names(self) -> tuple[str, ...]:
        return tuple(s.name for s in self.specs)

    def continuous_costs(self, trace: Trace) -> list[float]:
        out = []
        for spec, formula in zip(self.specs, self._normalized):
            eta = robustness(spec.measure, formula, trace, 0)
            out.append(cost_from_robustness(eta))
        return out

    def robustness_values(self, trace: Trace) -> list[float]:
        return [
            robustness(spec.measure, formula, trace, 0)
            for spec, formula in zip(self.specs, self._normalized)
        ]

    def discrete_costs(self, trace: Trace) -> list[int]:
        return [
            discretize(c, spec.scheme)
            for c, spec in zip(self.continuous_costs(trace), self.specs)
        ]

    def scalar_cost(self, trace: Trace) -> ScalarCost:
        return ScalarCost(pack(self.discrete_costs(trace), self.layout), self.layout)


def scalar_cost(spec_set: SpecSet, trace: Trace) -> ScalarCost:
    """Full pipeline: robustness -> violation cost -> discretize -> pack."""
    return spec_set.scalar_cost(trace)
