"""Quantitative STL semantics: robustness measures over extended reals.

A robustness measure is a triple of a predicate-robustness function
(space, left-time, right-time, comb-time, space-left-time) and a pair
of min/max operator families (std, dur, dur-sev, smooth, agm, new, pm).
Values live on the extended real line; +/-inf are first-class and every
special case is an explicit branch.

The time-based predicate measures use IEEE signed zero to keep the
boundary case "violated now, sign flips immediately" distinguishable
from "satisfied with zero margin": a violated predicate whose sign
persists for zero further steps evaluates to -0.0.  ``is_nonnegative``
is the satisfaction-side comparison that respects this convention.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Iterable, Sequence

from .stl import (
    And,
    ContractViolation,
    Formula,
    Not,
    Predicate,
    Since,
    Trace,
    TrueFormula,
    Until,
    forward_window,
    backward_window,
    is_core,
    normalize,
)

__all__ = [
    "MeasureConfig",
    "EvalStats",
    "MEASURE_PRESETS",
    "PREDICATE_MEASURES",
    "OPERATOR_FAMILIES",
    "REVERSE_SOUND_MEASURES",
    "measure_config",
    "amin",
    "amax",
    "predicate_robustness",
    "robustness",
    "robustness_all_times",
    "is_nonnegative",
]

POS_INF = float("inf")
NEG_INF = float("-inf")

PREDICATE_MEASURES = ("space", "left-time", "right-time", "comb-time", "space-left-time")
OPERATOR_FAMILIES = ("std", "dur", "dur-sev", "smooth", "agm", "new", "pm")

#: Named measure presets: (predicate measure, min family, max family).
MEASURE_PRESETS: dict[str, tuple[str, str, str]] = {
    "space": ("space", "std", "std"),
    "left-time": ("left-time", "std", "std"),
    "right-time": ("right-time", "std", "std"),
    "comb-time": ("comb-time", "std", "std"),
    "dur": ("space", "dur", "dur"),
    "dur-sev": ("space", "dur-sev", "dur-sev"),
    "smooth": ("space", "smooth", "smooth"),
    "agm": ("space", "agm", "agm"),
    "new": ("space", "new", "new"),
    "pm": ("space", "pm", "pm"),
    "space-left-time": ("space-left-time", "std", "std"),
}

#: Measures whose sign tracks the Boolean verdict exactly (robustness < 0
#: implies violation), under the signed-zero convention for time measures.
REVERSE_SOUND_MEASURES = (
    "space",
    "left-time",
    "right-time",
    "comb-time",
    "space-left-time",
    "dur",
    "dur-sev",
)


@dataclass(frozen=True)
class MeasureConfig:
    """Selection of predicate measure, operator families, and tuning constants."""

    predicate_measure: str = "space"
    min_op: str = "std"
    max_op: str = "std"
    nu1: float = 10.0
    nu2: float = 10.0
    nu3: float = 1.0
    nu4: float = 2.0
    nu5: float = 2.0

    def __post_init__(self) -> None:
        if self.predicate_measure not in PREDICATE_MEASURES:
            raise ContractViolation("unknown predicate measure %r" % self.predicate_measure)
        if self.min_op not in OPERATOR_FAMILIES or self.max_op not in OPERATOR_FAMILIES:
            raise ContractViolation("unknown operator family %r/%r" % (self.min_op, self.max_op))
        for name in ("nu1", "nu2", "nu3", "nu4", "nu5"):
            if not getattr(self, name) > 0:
                raise ContractViolation("%s must be positive" % name)


_DEFAULT_CONFIG = MeasureConfig()


def measure_config(name: str, **overrides: float) -> MeasureConfig:
    """Build the named Table-style preset, optionally overriding nu constants."""
    try:
        pred, min_op, max_op = MEASURE_PRESETS[name]
    except KeyError:
        raise ContractViolation(
            "unknown measure %r (choose from %s)" % (name, ", ".join(MEASURE_PRESETS))
        ) from None
    return MeasureConfig(pred, min_op, max_op, **overrides)


def is_nonnegative(value: float) -> bool:
    """Satisfaction-side sign test; -0.0 counts as negative."""
    if value > 0:
        return True
    return value == 0 and math.copysign(1.0, value) > 0


def _signed_zero_lt(a: float, b: float) -> bool:
    """Less-than that orders -0.0 strictly below +0.0."""
    if a < b:
        return True
    return a == 0 and b == 0 and math.copysign(1.0, a) < math.copysign(1.0, b)


# --------------------------------------------------------------------------
# Minimum / maximum operator families


def _amin_std(values: Sequence[float]) -> float:
    best = values[0]
    for v in values[1:]:
        if _signed_zero_lt(v, best):
            best = v
    return best


def _amin_dur(values: Sequence[float]) -> float:
    kmin = min(values)
    if kmin > 0:
        return kmin
    return -sum(1 for v in values if v < 0) / len(values)


def _amin_dur_sev(values: Sequence[float]) -> float:
    kmin = min(values)
    if kmin > 0:
        return kmin
    return sum(min(v, 0.0) for v in values) / len(values)


def _amin_smooth(values: Sequence[float], nu1: float) -> float:
    # -(1/nu1) log sum exp(-nu1 k_i), log-sum-exp stabilised
    finite = [v for v in values if v < POS_INF]
    if not finite:  # all +inf
        return POS_INF
    xs = [-nu1 * v for v in finite]
    m = max(xs)
    return -(m + math.log(sum(math.exp(x - m) for x in xs))) / nu1


def _amax_smooth(values: Sequence[float], nu2: float) -> float:
    # softmax-weighted mean: sum k_i e^(nu2 k_i) / sum e^(nu2 k_i)
    if any(v == POS_INF for v in values):
        return POS_INF
    finite = [v for v in values if v > NEG_INF]
    if not finite:  # all -inf
        return NEG_INF
    m = max(finite)
    weights = [math.exp(nu2 * (v - m)) for v in finite]
    return sum(v * w for v, w in zip(finite, weights)) / sum(weights)


def _amin_agm(values: Sequence[float]) -> float:
    z = len(values)
    kmin = min(values)
    if kmin <= 0:
        return sum(min(v, 0.0) for v in values) / z
    if any(v == POS_INF for v in values):
        return POS_INF
    # z-th root of prod(1 + k_i), evaluated in log space
    return math.exp(sum(math.log1p(v) for v in values) / z) - 1.0


def _amin_new(values: Sequence[float], nu3: float) -> float:
    kmin = min(values)
    if kmin == 0:
        return 0.0
    num = 0.0
    den = 0.0
    if kmin < 0:
        for v in values:
            if v == POS_INF:
                continue  # weight e^(k~) e^(nu3 k~) -> 0
            kt = (v - kmin) / kmin
            w = math.exp(nu3 * kt)
            num += kmin * math.exp(kt) * w
            den += w
    else:
        for v in values:
            if v == POS_INF:
                continue
            kt = (v - kmin) / kmin
            w = math.exp(-nu3 * kt)
            num += v * w
            den += w
        if den == 0.0:  # all +inf handled before; unreachable in practice
            return POS_INF
    return num / den


def _amin_pm(values: Sequence[float], nu4: float, nu5: float) -> float:
    z = len(values)
    kmin = min(values)
    if kmin > 0:
        return (sum(v**nu4 for v in values) / z) ** (1.0 / nu4)
    return -((sum((-min(v, 0.0)) ** nu5 for v in values) / z) ** (1.0 / nu5))


def amin(family: str, values: Iterable[float], config: MeasureConfig | None = None) -> float:
    """Apply a minimum operator family to a nonempty vector of extended reals.

    Extended-real conventions: for the agm/new/pm/dur-sev families any
    -inf component forces -inf and an all-+inf vector gives +inf; the
    smooth operators follow the analogous explicit conventions; std and
    dur handle infinities through their own formulas.
    """
    config = config or _DEFAULT_CONFIG
    vals = [float(v) for v in values]
    if not vals:
        raise ContractViolation("amin over empty vector")
    if any(math.isnan(v) for v in vals):
        raise ContractViolation("amin over NaN")
    if family == "std":
        return _amin_std(vals)
    if family == "dur":
        return _amin_dur(vals)
    if family in ("dur-sev", "agm", "new", "pm"):
        if any(v == NEG_INF for v in vals):
            return NEG_INF
        if all(v == POS_INF for v in vals):
            return POS_INF
        if family == "dur-sev":
            return _amin_dur_sev(vals)
        if family == "agm":
            return _amin_agm(vals)
        if family == "new":
            return _amin_new(vals, config.nu3)
        return _amin_pm(vals, config.nu4, config.nu5)
    if family == "smooth":
        if any(v == NEG_INF for v in vals):
            return NEG_INF
        if all(v == POS_INF for v in vals):
            return POS_INF
        return _amin_smooth(vals, config.nu1)
    raise ContractViolation("unknown operator family %r" % family)


def amax(family: str, values: Iterable[float], config: MeasureConfig | None = None) -> float:
    """Dual maximum operator; smooth is defined explicitly, the rest by
    amax(k) = -amin(-k)."""
    config = config or _DEFAULT_CONFIG
    vals = [float(v) for v in values]
    if not vals:
        raise ContractViolation("amax over empty vector")
    if family == "smooth":
        if any(math.isnan(v) for v in vals):
            raise ContractViolation("amax over NaN")
        if any(v == POS_INF for v in vals):
            return POS_INF
        if all(v == NEG_INF for v in vals):
            return NEG_INF
        return _amax_smooth(vals, config.nu2)
    return -amin(family, [-v for v in vals], config)


# --------------------------------------------------------------------------
# Predicate robustness (the five Table rows)


@dataclass
class EvalStats:
    """Raw predicate-call accounting for one evaluation workload."""

    predicate_calls: int = 0
    calls_by_id: dict[str, int] = field(default_factory=dict)

    def record(self, pred_id: str) -> None:
        self.predicate_calls += 1
        self.calls_by_id[pred_id] = self.calls_by_id.get(pred_id, 0) + 1


class _Context:
    """Per-evaluation scratch state: memo tables and call counters."""

    __slots__ = ("trace", "config", "memo", "pred_cache", "pred_rows", "stats", "cache_predicates")

    def __init__(
        self,
        trace: Trace,
        config: MeasureConfig,
        stats: EvalStats | None,
        cache_predicates: bool,
    ):
        self.trace = trace
        self.config = config
        self.memo: dict[tuple[int, int], float] = {}
        self.pred_cache: dict[tuple[str, int], float] = {}
        self.pred_rows: dict[str, list[float]] = {}
        self.stats = stats
        self.cache_predicates = cache_predicates

    def _raw(self, pred: Predicate, k: int) -> float:
        value = float(pred.evaluate(self.trace, k))
        if math.isnan(value):
            raise ContractViolation("predicate %r returned NaN at k=%d" % (pred.id, k))
        if self.stats is not None:
            self.stats.record(pred.id)
        return value + 0.0  # normalise -0.0: sign(0) := +1 for raw margins

    def pred_value(self, pred: Predicate, k: int) -> float:
        if not self.cache_predicates:
            return self._raw(pred, k)
        row = self.pred_rows.get(pred.id)
        if row is not None:
            return row[k]
        key = (pred.id, k)
        cached = self.pred_cache.get(key)
        if cached is None:
            cached = self.pred_cache[key] = self._raw(pred, k)
        return cached

    def pred_row(self, pred: Predicate) -> list[float]:
        """All values of one predicate, evaluated at most once per index."""
        row = self.pred_rows.get(pred.id)
        if row is None:
            cache = self.pred_cache
            row = [
                cache.get((pred.id, k)) if (pred.id, k) in cache else self._raw(pred, k)
                for k in range(self.trace.K + 1)
            ]
            self.pred_rows[pred.id] = row
        return row


def _pred_robustness(ctx: _Context, pred: Predicate, k: int) -> float:
    measure = ctx.config.predicate_measure
    if measure == "space":
        return ctx.pred_value(pred, k)
    # the time-based scans touch many indices; with caching on, fetch the
    # whole value row once (still at most one evaluator call per index)
    if ctx.cache_predicates:
        row = ctx.pred_row(pred)
        value_at = row.__getitem__
    else:
        value_at = lambda kk: ctx.pred_value(pred, kk)  # noqa: E731
    p0 = value_at(k)
    K = ctx.trace.K
    negative = p0 < 0
    sign = -1.0 if negative else 1.0

    if measure == "left-time" or measure == "space-left-time":
        cap = K - k
        tau = 0
        best = abs(p0)
        while tau < cap:
            nxt = value_at(k + tau + 1)
            if (nxt < 0) != negative:
                break
            tau += 1
            candidate = tau + abs(nxt)
            if candidate > best:
                best = candidate
        if measure == "left-time":
            return math.copysign(float(tau), sign)
        return math.copysign(best, sign)

    if measure == "right-time":
        cap = k
        tau = 0
        while tau < cap:
            prv = value_at(k - tau - 1)
            if (prv < 0) != negative:
                break
            tau += 1
        return math.copysign(float(tau), sign)

    if measure == "comb-time":
        cap = max(k, K - k)
        tau = 0
        while tau < cap:
            t = tau + 1
            lo, hi = k - t, k + t
            if lo >= 0 and (value_at(lo) < 0) != negative:
                break
            if hi <= K and (value_at(hi) < 0) != negative:
                break
            tau = t
        return math.copysign(float(tau), sign)

    raise ContractViolation("unknown predicate measure %r" % measure)


def predicate_robustness(
    measure: str,
    predicate: Predicate,
    trace: Trace,
    k: int,
    *,
    config: MeasureConfig | None = None,
    stats: EvalStats | None = None,
    cache_predicates: bool = True,
) -> float:
    """Evaluate one Table row for a predicate at time k.

    The time-based rows return sign(p) * tau_max where tau_max is the
    largest horizon-clipped window over which the sign of p persists;
    space-left-time maximises tau + |p(k+tau)| over the same forward
    windows.  The feasible tau set is a contiguous prefix, so the scan
    stops at the first sign change.
    """
    trace.check_index(k)
    base = config or _DEFAULT_CONFIG
    if base.predicate_measure != measure:
        base = replace(base, predicate_measure=measure)
    ctx = _Context(trace, base, stats, cache_predicates)
    return _pred_robustness(ctx, predicate, k)


# --------------------------------------------------------------------------
# Recursive quantitative semantics


def _fold_min(ctx: _Context, values, negated: bool) -> float:
    """amin at positive polarity, amax at negative (De Morgan position)."""
    cfg = ctx.config
    if negated:
        return amax(cfg.max_op, values, cfg)
    return amin(cfg.min_op, values, cfg)


def _fold_max(ctx: _Context, values, negated: bool) -> float:
    cfg = ctx.config
    if negated:
        return amin(cfg.min_op, values, cfg)
    return amax(cfg.max_op, values, cfg)


def _eval(ctx: _Context, node: Formula, k: int, negated: bool = False) -> float:
    """Robustness of ``node`` (or of its negation when ``negated``).

    Negation is propagated structurally: each min/max fold position uses
    the operator family of the polarity actually being computed.  For
    every duality-defined family this equals the literal eta(not phi) =
    -eta(phi) recursion exactly; for the explicitly non-dual smooth
    operators it keeps every fold an under-approximation, which is what
    makes the smooth measure sound on arbitrarily negated formulas.
    """
    key = (id(node), k, negated)
    memo = ctx.memo
    hit = memo.get(key)
    if hit is not None:
        return hit
    cfg = ctx.config
    if isinstance(node, TrueFormula):
        value = NEG_INF if negated else POS_INF
    elif isinstance(node, Predicate):
        value = _pred_robustness(ctx, node, k)
        if negated:
            value = -value
    elif isinstance(node, Not):
        value = _eval(ctx, node.child, k, not negated)
    elif isinstance(node, And):
        value = _fold_min(
            ctx,
            (_eval(ctx, node.left, k, negated), _eval(ctx, node.right, k, negated)),
            negated,
        )
    elif isinstance(node, (Until, Since)):
        is_until = isinstance(node, Until)
        window = (
            forward_window(node.interval, ctx.trace.K, k)
            if is_until
            else backward_window(node.interval, ctx.trace.K, k)
        )
        if len(window) == 0:
            value = POS_INF if negated else NEG_INF
        elif cfg.min_op == "std" and cfg.max_op == "std" and not negated:
            # running prefix-min makes the nested fold O(window)
            best = NEG_INF
            prefix = POS_INF
            previous = k
            iterator = window if is_until else reversed(window)
            step = 1 if is_until else -1
            for kp in iterator:
                for kq in range(previous, kp, step):
                    left = _eval(ctx, node.left, kq)
                    if _signed_zero_lt(left, prefix):
                        prefix = left
                previous = kp
                term = _eval(ctx, node.right, kp)
                if _signed_zero_lt(prefix, term):
                    term = prefix
                if _signed_zero_lt(best, term):
                    best = term
            value = best
        elif cfg.min_op == "std" and cfg.max_op == "std":
            value = -_eval(ctx, node, k, False)  # exact duality for std
        else:
            left_true = isinstance(node.left, TrueFormula)
            outer = []
            for kp in window:
                if is_until:
                    inner_range = range(k, kp)
                else:
                    inner_range = range(kp + 1, k + 1)
                if left_true or len(inner_range) == 0:
                    inner = NEG_INF if negated else POS_INF
                else:
                    inner = _fold_min(
                        ctx, [_eval(ctx, node.left, kq, negated) for kq in inner_range], negated
                    )
                outer.append(
                    _fold_min(ctx, (_eval(ctx, node.right, kp, negated), inner), negated)
                )
            value = _fold_max(ctx, outer, negated)
    else:
        raise ContractViolation("robustness needs a normalized formula, got %r" % type(node).__name__)
    memo[key] = value
    return value


def robustness(
    config: MeasureConfig,
    formula: Formula,
    trace: Trace,
    k: int = 0,
    *,
    stats: EvalStats | None = None,
    cache_predicates: bool = True,
) -> float:
    """Robustness of a formula at time k under the configured measure.

    Derived operators are normalized away first (a no-op for core
    formulas).  Subformula values are memoized per (node, k) within this
    call only; the cache is never shared between calls.
    """
    trace.check_index(k)
    if not is_core(formula):
        formula = normalize(formula)
    ctx = _Context(trace, config, stats, cache_predicates)
    return _eval(ctx, formula, k)


def robustness_all_times(
    config: MeasureConfig,
    formula: Formula,
    trace: Trace,
    *,
    stats: EvalStats | None = None,
    cache_predicates: bool = True,
) -> list[float]:
    """Robustness at every k in [0, K], sharing one memo across times.

    With predicate caching on, each predicate evaluator is invoked at
    most once per (predicate, k) pair over the whole sweep.
    """
    if not is_core(formula):
        formula = normalize(formula)
    ctx = _Context(trace, config, stats, cache_predicates)
    return [_eval(ctx, formula, k) for k in range(trace.K + 1)]
