"""Exact ground-truth optima for the scalar linear benchmark.

The benchmark is a scalar integrator with bounded inputs and one
specification per time index, alternating "stay below r_k" (odd k) and
"stay at or above r_k" (even k), prioritized in time order.  Because
each specification targets a single time of a monotone scalar system,
the preemptive lexicographic scheme reduces to interval arithmetic: a
forward reachability pass finds the attainable interval at each time,
each specification's minimal violation is attained at an interval
endpoint, the equality constraint of the preemptive scheme tightens the
interval, and a backward pass recovers the exact set of optimal states
per time.  This construction is valid only under these structural
assumptions; it is not a general reachability tool.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field

import numpy as np

from .lexcost import (
    CostLayout,
    DiscretizationScheme,
    PrioritizedSpec,
    ScalarCost,
    SpecSet,
    discretize,
    pack,
    uniform_thresholds,
)
from .robustness import MeasureConfig
from .stl import ContractViolation, Predicate, Trace
from .systems import ScalarIntegrator, System, rollout, rollout_batch

__all__ = [
    "LinearBenchmark",
    "LexOptimum",
    "exact_lex_optimum",
    "violation_error",
    "brute_force_optimum",
    "random_benchmark",
]

_SPACE = MeasureConfig()


@dataclass(frozen=True)
class LinearBenchmark:
    """Scalar integrator benchmark with one spec per time index.

    Spec k (1-based, highest priority first) targets y_k: odd k demands
    y_k < r_k, even k demands y_k >= r_k.  Violation costs are the
    signed margins clipped at zero, so the boundary y_k = r_k counts as
    satisfied with zero margin for both directions.
    """

    thresholds: tuple[float, ...]
    schemes: tuple[DiscretizationScheme, ...]
    input_bound: float = 1.35
    x0: float = 0.0

    def __post_init__(self) -> None:
        if not self.thresholds:
            raise ContractViolation("benchmark needs at least one specification")
        if len(self.schemes) != len(self.thresholds):
            raise ContractViolation("one scheme per specification required")
        if not all(math.isfinite(r) for r in self.thresholds):
            raise ContractViolation("thresholds must be finite")
        if not self.input_bound > 0:
            raise ContractViolation("input bound must be positive")

    @property
    def horizon(self) -> int:
        return len(self.thresholds)

    @property
    def n_specs(self) -> int:
        return len(self.thresholds)

    def is_upper_bound(self, i: int) -> bool:
        """True when spec i (0-based) demands y < r (odd 1-based index)."""
        return (i + 1) % 2 == 1

    @property
    def layout(self) -> CostLayout:
        return CostLayout.from_interval_counts([s.m for s in self.schemes])

    def system(self) -> ScalarIntegrator:
        return ScalarIntegrator(bound=self.input_bound)

    def continuous_cost(self, i: int, y: float) -> float:
        r = self.thresholds[i]
        return max(0.0, y - r) if self.is_upper_bound(i) else max(0.0, r - y)

    def continuous_costs_batch(self, outputs: np.ndarray) -> np.ndarray:
        """Cost matrix (n, N) for outputs of shape (n, K+1)."""
        n = outputs.shape[0]
        costs = np.empty((n, self.n_specs))
        for i, r in enumerate(self.thresholds):
            y = outputs[:, i + 1]
            costs[:, i] = np.maximum(0.0, y - r if self.is_upper_bound(i) else r - y)
        return costs

    def discrete_costs_batch(self, costs: np.ndarray) -> np.ndarray:
        out = np.empty(costs.shape, dtype=np.int64)
        for i, scheme in enumerate(self.schemes):
            c = costs[:, i]
            out[:, i] = np.where(c == 0, 0, np.searchsorted(scheme.alphas, c, side="left") + 1)
        return out

    def scalar_costs_batch(self, outputs: np.ndarray) -> list[int]:
        """Packed scalar costs for an output batch, exact integers."""
        disc = self.discrete_costs_batch(self.continuous_costs_batch(outputs))
        layout = self.layout
        if layout.total_bits <= 62:
            weights = np.array([1 << off for off in layout.offsets], dtype=np.int64)
            return (disc @ weights).tolist()
        return [pack(row.tolist(), layout) for row in disc]

    def cost_batch(self):
        """Batch cost callable with the solver's (outputs, dt) signature."""

        def fn(outputs: np.ndarray, dt: float) -> list[int]:
            return self.scalar_costs_batch(outputs[:, 0, :])

        return fn

    def spec_set(self) -> SpecSet:
        """Generic SpecSet view (space measure over signed margins)."""

        def make_pred(i: int) -> Predicate:
            r = self.thresholds[i]
            t = i + 1
            if self.is_upper_bound(i):
                return Predicate("y%d_below" % t, lambda trace, k, r=r, t=t: r - trace.values[0, t])
            return Predicate("y%d_at_least" % t, lambda trace, k, r=r, t=t: trace.values[0, t] - r)

        specs = [
            PrioritizedSpec("spec_%d" % (i + 1), make_pred(i), _SPACE, self.schemes[i])
            for i in range(self.n_specs)
        ]
        return SpecSet(specs)


def random_benchmark(
    rng: np.random.Generator,
    n_specs: int = 8,
    ms: tuple[int, ...] | None = None,
    c_bar: float = 10.0,
    threshold_range: tuple[float, float] = (-3.0, 3.0),
) -> LinearBenchmark:
    """Benchmark with thresholds sampled uniformly from the given range."""
    thresholds = tuple(rng.uniform(*threshold_range, size=n_specs).tolist())
    if ms is None:
        ms = (5,) * n_specs
    schemes = tuple(uniform_thresholds(c_bar, m) for m in ms)
    return LinearBenchmark(thresholds, schemes)


# --------------------------------------------------------------------------
# Preemptive lexicographic optimum by interval reachability


@dataclass
class LexOptimum:
    """Optimal cost data plus one witness input plan.

    ``min_costs``/``max_costs`` are the per-spec extremes of the
    continuous cost over the exact set of lexicographically optimal
    trajectories (for the continuous problem both coincide).
    ``discrete`` is the optimal discrete cost vector in discretized
    mode, None otherwise.
    """

    mode: str
    min_costs: tuple[float, ...]
    max_costs: tuple[float, ...]
    discrete: tuple[int, ...] | None
    witness_inputs: np.ndarray
    state_intervals: tuple[tuple[float, float], ...]

    def scalar(self, layout: CostLayout) -> ScalarCost:
        if self.discrete is None:
            raise ContractViolation("scalar cost defined for discretized mode only")
        return ScalarCost(pack(list(self.discrete), layout), layout)


def _cost_interval_preimage(
    benchmark: LinearBenchmark, i: int, xi: int
) -> tuple[float, float]:
    """Closure of {y : discretized cost of spec i equals xi}.

    Open endpoints are closed: costs are continuous, so infima over the
    open constraint sets equal the closed-endpoint values.
    """
    scheme = benchmark.schemes[i]
    r = benchmark.thresholds[i]
    if xi == 0:  # cost exactly zero
        return (-math.inf, r) if benchmark.is_upper_bound(i) else (r, math.inf)
    # cost interval (alpha_{xi-1}, alpha_xi]; alphas[j] stores alpha_{j+1}
    lo_cost = 0.0 if xi == 1 else scheme.alphas[xi - 2]
    hi_cost = math.inf if xi == scheme.m else scheme.alphas[xi - 1]
    if benchmark.is_upper_bound(i):
        return r + lo_cost, r + hi_cost  # cost = max(0, y - r), nondecreasing
    return r - hi_cost, r - lo_cost  # cost = max(0, r - y), nonincreasing


def exact_lex_optimum(benchmark: LinearBenchmark, mode: str = "continuous") -> LexOptimum:
    """Preemptive lexicographic optimum of the benchmark, exactly.

    mode "continuous" minimizes the continuous cost vector; mode
    "discretized" minimizes the discrete vector under each spec's
    scheme.  Always feasible: violations quantify infeasibility.
    """
    if mode not in ("continuous", "discretized"):
        raise ContractViolation("mode must be 'continuous' or 'discretized'")
    b = benchmark.input_bound
    K = benchmark.horizon

    # forward pass with preemptive tightening (spec i targets time i+1)
    tightened: list[tuple[float, float]] = [(benchmark.x0, benchmark.x0)]
    discrete: list[int] = []
    for i in range(K):
        lo, hi = tightened[i]
        lo, hi = lo - b, hi + b
        if benchmark.is_upper_bound(i):
            best_cost = benchmark.continuous_cost(i, lo)
        else:
            best_cost = benchmark.continuous_cost(i, hi)
        if mode == "continuous":
            r = benchmark.thresholds[i]
            if best_cost == 0.0:
                if benchmark.is_upper_bound(i):
                    lo, hi = lo, min(hi, r)
                else:
                    lo, hi = max(lo, r), hi
            else:
                lo = hi = lo if benchmark.is_upper_bound(i) else hi
        else:
            xi = discretize(best_cost, benchmark.schemes[i])
            discrete.append(xi)
            p_lo, p_hi = _cost_interval_preimage(benchmark, i, xi)
            lo, hi = max(lo, p_lo), min(hi, p_hi)
        tightened.append((lo, hi))

    # backward pass: intersect with backward-reachable sets
    feasible = list(tightened)
    for t in range(K - 1, -1, -1):
        nlo, nhi = feasible[t + 1]
        lo, hi = feasible[t]
        feasible[t] = (max(lo, nlo - b), min(hi, nhi + b))

    # per-spec continuous-cost extremes over the optimal set
    mins: list[float] = []
    maxs: list[float] = []
    for i in range(K):
        lo, hi = feasible[i + 1]
        if benchmark.is_upper_bound(i):
            mins.append(benchmark.continuous_cost(i, lo))
            maxs.append(benchmark.continuous_cost(i, hi))
        else:
            mins.append(benchmark.continuous_cost(i, hi))
            maxs.append(benchmark.continuous_cost(i, lo))

    # witness: greedy midpoints through the feasible tube
    xs = [benchmark.x0]
    for t in range(K):
        lo, hi = feasible[t + 1]
        lo = max(lo, xs[-1] - b)
        hi = min(hi, xs[-1] + b)
        if math.isinf(lo) and math.isinf(hi):
            xs.append(xs[-1])
        elif math.isinf(lo):
            xs.append(min(hi, xs[-1]))
        elif math.isinf(hi):
            xs.append(max(lo, xs[-1]))
        else:
            xs.append(0.5 * (lo + hi))
    witness = np.diff(np.array(xs))

    return LexOptimum(
        mode=mode,
        min_costs=tuple(mins),
        max_costs=tuple(maxs),
        discrete=tuple(discrete) if mode == "discretized" else None,
        witness_inputs=witness,
        state_intervals=tuple(feasible),
    )


def violation_error(optimal_cont: LexOptimum, optimal_disc: LexOptimum) -> float:
    """Mean positive excess of discretized-optimal continuous cost over the
    continuous optimum, averaged over specifications."""
    if len(optimal_cont.min_costs) != len(optimal_disc.max_costs):
        raise ContractViolation("optima come from different benchmarks")
    n = len(optimal_cont.min_costs)
    total = 0.0
    for low, high in zip(optimal_cont.min_costs, optimal_disc.max_costs):
        total += max(0.0, high - low)
    return total / n


# --------------------------------------------------------------------------
# Brute-force grid oracle

_MAX_ROLLOUTS = 10**7


def brute_force_optimum(
    system: System,
    spec_set: SpecSet,
    x0: np.ndarray,
    input_grid,
    horizon: int,
    *,
    cost_batch=None,
) -> tuple[Trace, ScalarCost, int]:
    """Exhaustive scalar-cost minimum over a per-step input grid.

    Enumerates grid^horizon plans over steps 0..K-1 (the final input
    only feeds the output map and is held at the clipped zero input).
    Returns the best trace, its packed cost, and the rollout count.
    """
    grid = [np.atleast_1d(np.asarray(u, dtype=float)) for u in input_grid]
    total = len(grid) ** horizon
    if total > _MAX_ROLLOUTS:
        raise ContractViolation(
            "grid enumeration needs %d rollouts (limit %d)" % (total, _MAX_ROLLOUTS)
        )
    hold = np.clip(np.zeros(system.n_u), system.u_lo, system.u_hi)

    best_value: int | None = None
    best_trace: Trace | None = None
    chunk: list[np.ndarray] = []
    count = 0

    def flush(chunk_plans: list[np.ndarray]):
        nonlocal best_value, best_trace
        if not chunk_plans:
            return
        plans = np.stack(chunk_plans)
        outputs, valid = rollout_batch(system, x0, plans)
        if cost_batch is not None:
            idx = np.flatnonzero(valid)
            values = cost_batch(outputs[idx], system.dt)
            for i, m in enumerate(idx):
                value = int(values[i])
                if best_value is None or value < best_value:
                    best_value = value
                    best_trace = Trace(outputs[m], system.dt)
        else:
            for m in np.flatnonzero(valid):
                trace = Trace(outputs[m], system.dt)
                value = spec_set.scalar_cost(trace).value
                if best_value is None or value < best_value:
                    best_value = value
                    best_trace = trace

    for combo in itertools.product(grid, repeat=horizon):
        chunk.append(np.vstack([np.stack(combo), hold[None, :]]))
        count += 1
        if len(chunk) >= 4096:
            flush(chunk)
            chunk = []
    flush(chunk)

    if best_value is None:
        raise ContractViolation("no valid rollout on the grid")
    layout = spec_set.layout
    return best_trace, ScalarCost(best_value, layout), count
