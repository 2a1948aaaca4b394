"""Experiment harnesses: discretization study, solver ablation, and
robustness-measure comparisons at desk scale.

The studies mirror the structure of the full-scale experiments with
smaller default populations (hundreds of scenarios instead of tens of
thousands); statistics pipelines are identical, so results are read
directionally, not as exact reproductions.
"""

from __future__ import annotations

import csv
import json
import math
import time
from dataclasses import dataclass, replace
from functools import lru_cache
from pathlib import Path
from typing import Callable, Iterable, Sequence

import numpy as np

from .lexcost import DiscretizationScheme, SpecSet, uniform_thresholds
from .oracle import (
    LinearBenchmark,
    exact_lex_optimum,
    random_benchmark,
    violation_error,
)
from .robustness import (
    EvalStats,
    MEASURE_PRESETS,
    measure_config,
    robustness,
)
from .solver import (
    BetaCosine,
    BetaExponential,
    SamplesConstant,
    SamplesCosine,
    SolverConfig,
    solve,
)
from .stl import ContractViolation, Trace, parse_formula
from .systems import Scenario, rollout_batch

__all__ = [
    "CompositionSample",
    "sample_compositions",
    "composition_even",
    "composition_increase",
    "composition_decrease",
    "discretization_study",
    "DiscretizationReport",
    "solver_ablation",
    "AblationReport",
    "AblationToggles",
    "measure_benchmark",
    "MeasureReport",
    "robustness_comparison",
    "ComparisonReport",
    "running_example_fan",
    "write_csv",
]


from .seeding import generator_for as _rng


def write_csv(path: "str | Path", header: Sequence[str], rows: Iterable[Sequence]) -> None:
    with open(path, "w", newline="") as handle:
        writer = csv.writer(handle)
        writer.writerow(header)
        writer.writerows(rows)


# --------------------------------------------------------------------------
# Integer compositions (stars and bars)


@dataclass(frozen=True)
class CompositionSample:
    """Composition of m_total into parts >= 1, one per specification."""

    parts: tuple[int, ...]

    def __post_init__(self) -> None:
        if not self.parts or any(p < 1 for p in self.parts):
            raise ContractViolation("composition parts must be >= 1")

    @property
    def total(self) -> int:
        return sum(self.parts)


def sample_compositions(
    m_total: int, n_specs: int, count: int, seed=0
) -> list[CompositionSample]:
    """Uniform random compositions of m_total into n_specs parts >= 1.

    Uses the stars-and-bars bijection: choose n-1 distinct bar positions
    among the m_total-1 gaps; part sizes are the gap differences.
    """
    if m_total < n_specs:
        raise ContractViolation("m_total must be at least n_specs")
    rng = _rng(seed)
    out = []
    for _ in range(count):
        if n_specs == 1:
            out.append(CompositionSample((m_total,)))
            continue
        bars = np.sort(rng.choice(m_total - 1, size=n_specs - 1, replace=False) + 1)
        edges = np.concatenate([[0], bars, [m_total]])
        out.append(CompositionSample(tuple(int(p) for p in np.diff(edges))))
    return out


def _allocate(weights: Sequence[float], m_total: int) -> tuple[int, ...]:
    """Largest-remainder allocation of m_total with every part >= 1."""
    n = len(weights)
    if m_total < n:
        raise ContractViolation("m_total must be at least the number of parts")
    rest = m_total - n
    total_w = float(sum(weights))
    quotas = [rest * w / total_w for w in weights]
    parts = [1 + int(math.floor(q)) for q in quotas]
    leftover = m_total - sum(parts)
    remainders = sorted(
        range(n), key=lambda i: (quotas[i] - math.floor(quotas[i]), -i), reverse=True
    )
    for i in remainders[:leftover]:
        parts[i] += 1
    return tuple(parts)


def composition_even(m_total: int, n_specs: int) -> CompositionSample:
    return CompositionSample(_allocate([1.0] * n_specs, m_total))


def composition_increase(m_total: int, n_specs: int) -> CompositionSample:
    return CompositionSample(_allocate([float(i + 1) for i in range(n_specs)], m_total))


def composition_decrease(m_total: int, n_specs: int) -> CompositionSample:
    return CompositionSample(_allocate([float(n_specs - i) for i in range(n_specs)], m_total))


# --------------------------------------------------------------------------
# Discretization study


@lru_cache(maxsize=4096)
def _uniform_scheme(c_bar: float, m: int) -> DiscretizationScheme:
    return uniform_thresholds(c_bar, m)


def _benchmark_for(thresholds: tuple[float, ...], parts: tuple[int, ...], c_bar: float):
    return LinearBenchmark(thresholds, tuple(_uniform_scheme(c_bar, m) for m in parts))


@dataclass
class DiscretizationReport:
    m_totals: tuple[int, ...]
    strategies: tuple[str, ...]
    means: dict[str, tuple[float, ...]]
    stds: dict[str, tuple[float, ...]]
    best_parts: dict[int, tuple[int, ...]]
    n_scenarios: int
    n_compositions: int

    def to_rows(self):
        for strategy in self.strategies:
            for i, m_total in enumerate(self.m_totals):
                yield (strategy, m_total, self.means[strategy][i], self.stds[strategy][i])

    def write(self, directory: "str | Path") -> list[Path]:
        directory = Path(directory)
        csv_path = directory / "discretization_study.csv"
        write_csv(csv_path, ["strategy", "m_total", "mean_violation_error", "std_violation_error"], self.to_rows())
        summary = {
            "m_totals": list(self.m_totals),
            "n_scenarios": self.n_scenarios,
            "n_compositions": self.n_compositions,
            "best_parts": {str(k): list(v) for k, v in self.best_parts.items()},
        }
        json_path = directory / "discretization_study.json"
        json_path.write_text(json.dumps(summary, indent=2))
        return [csv_path, json_path]


def _scenario_study_errors(args):
    """Per-scenario violation errors for every (m_total, composition)."""
    thresholds, comp_lists, c_bar = args
    cont = exact_lex_optimum(
        _benchmark_for(thresholds, (1,) * len(thresholds), c_bar), "continuous"
    )
    errors = []
    for comps in comp_lists:
        row = []
        for parts in comps:
            disc = exact_lex_optimum(_benchmark_for(thresholds, parts, c_bar), "discretized")
            row.append(violation_error(cont, disc))
        errors.append(row)
    return errors


def discretization_study(
    n_scenarios: int = 200,
    m_totals: Sequence[int] = tuple(range(8, 161, 8)),
    n_compositions: int = 100,
    seed=0,
    n_specs: int = 8,
    c_bar: float = 10.0,
    threshold_range: tuple[float, float] = (-3.0, 3.0),
    map_fn: Callable = map,
) -> DiscretizationReport:
    """Mean violation error per interval-allocation strategy and m_total.

    Strategies: the best sampled composition (per m_total, minimizing the
    scenario-mean error), even allocation, linear increase, and linear
    decrease.  Deterministic given the seed.
    """
    m_totals = tuple(int(m) for m in m_totals)
    named = {}
    sampled: dict[int, list[tuple[int, ...]]] = {}
    for m_total in m_totals:
        named[m_total] = [
            composition_even(m_total, n_specs).parts,
            composition_increase(m_total, n_specs).parts,
            composition_decrease(m_total, n_specs).parts,
        ]
        sampled[m_total] = [
            c.parts for c in sample_compositions(m_total, n_specs, n_compositions, (seed, m_total))
        ]

    comp_lists = [named[m] + sampled[m] for m in m_totals]
    jobs = []
    for s in range(n_scenarios):
        rng = _rng((seed, "scenario", s))
        thresholds = tuple(rng.uniform(*threshold_range, size=n_specs).tolist())
        jobs.append((thresholds, comp_lists, c_bar))

    # errors[scenario][m_total_index][composition_index]
    all_errors = list(map_fn(_scenario_study_errors, jobs))

    strategies = ("best", "even", "increase", "decrease")
    means = {s: [] for s in strategies}
    stds = {s: [] for s in strategies}
    best_parts: dict[int, tuple[int, ...]] = {}
    for mi, m_total in enumerate(m_totals):
        matrix = np.array([err[mi] for err in all_errors])  # scenarios x comps
        col_means = matrix.mean(axis=0)
        best_col = int(np.argmin(col_means))
        columns = {"even": 0, "increase": 1, "decrease": 2, "best": best_col}
        best_parts[m_total] = comp_lists[mi][best_col]
        for name in strategies:
            col = matrix[:, columns[name]]
            means[name].append(float(col.mean()))
            stds[name].append(float(col.std()))
    return DiscretizationReport(
        m_totals=m_totals,
        strategies=strategies,
        means={s: tuple(v) for s, v in means.items()},
        stds={s: tuple(v) for s, v in stds.items()},
        best_parts=best_parts,
        n_scenarios=n_scenarios,
        n_compositions=n_compositions,
    )


# --------------------------------------------------------------------------
# Solver ablation


@dataclass(frozen=True)
class AblationToggles:
    """Adaptation switches relative to the baseline solver."""

    cosine_samples: bool = False
    cosine_beta: bool = False
    best_sample: bool = False

    @property
    def name(self) -> str:
        if not any((self.cosine_samples, self.cosine_beta, self.best_sample)):
            return "baseline"
        if all((self.cosine_samples, self.cosine_beta, self.best_sample)):
            return "full"
        bits = int(self.cosine_samples) * 4 + int(self.cosine_beta) * 2 + int(self.best_sample)
        return "config_%d" % bits


DEFAULT_TOGGLES = (
    AblationToggles(False, False, False),
    AblationToggles(False, False, True),
    AblationToggles(False, True, False),
    AblationToggles(False, True, True),
    AblationToggles(True, False, False),
    AblationToggles(True, False, True),
    AblationToggles(True, True, False),
    AblationToggles(True, True, True),
)


@dataclass(frozen=True)
class AblationParams:
    """Solver parameters shared by every ablation configuration."""

    iterations: int = 20
    sigma: float = 0.5
    temperature: float = 1.0
    gamma: float = 0.6
    beta_min: float = 1e-6
    m_init: int = 400
    m_final: int = 250

    def config(self, toggles: AblationToggles, bound: float, seed) -> SolverConfig:
        return SolverConfig(
            iterations=self.iterations,
            sigma=self.sigma,
            temperature=self.temperature,
            beta_rule=BetaCosine(self.beta_min) if toggles.cosine_beta else BetaExponential(self.gamma),
            sample_rule=SamplesCosine(self.m_init, self.m_final)
            if toggles.cosine_samples
            else SamplesConstant(self.m_init),
            return_rule="best_sample" if toggles.best_sample else "final_mppi",
            u_lo=-bound,
            u_hi=bound,
            seed=seed,
        )


@dataclass
class AblationRow:
    name: str
    p_lower: float
    p_equal: float
    p_higher: float
    mean_gap: float
    mean_gap_delta: float
    p_optimal: float
    excluded: int


@dataclass
class AblationReport:
    rows: list[AblationRow]
    n_scenarios: int

    def row(self, name: str) -> AblationRow:
        for row in self.rows:
            if row.name == name:
                return row
        raise KeyError(name)

    def write(self, directory: "str | Path") -> list[Path]:
        directory = Path(directory)
        csv_path = directory / "solver_ablation.csv"
        write_csv(
            csv_path,
            ["config", "p_lower", "p_equal", "p_higher", "mean_gap", "mean_gap_delta", "p_optimal", "excluded"],
            [
                (r.name, r.p_lower, r.p_equal, r.p_higher, r.mean_gap, r.mean_gap_delta, r.p_optimal, r.excluded)
                for r in self.rows
            ],
        )
        json_path = directory / "solver_ablation.json"
        json_path.write_text(
            json.dumps({"n_scenarios": self.n_scenarios, "rows": [r.__dict__ for r in self.rows]}, indent=2)
        )
        return [csv_path, json_path]


def _ablation_scenario_costs(args):
    """Solve one random scenario under every toggle set; returns exact costs."""
    seed, index, params, toggles_list, ms, c_bar = args
    rng = _rng((seed, "ablation", index))
    benchmark = random_benchmark(rng, n_specs=len(ms), ms=ms, c_bar=c_bar)
    optimum = exact_lex_optimum(benchmark, "discretized")
    s_opt = optimum.scalar(benchmark.layout).value
    system = benchmark.system()
    x0 = np.array([benchmark.x0])
    u_init = np.zeros((benchmark.horizon + 1, 1))
    cost_batch = benchmark.cost_batch()
    costs = []
    for ci, toggles in enumerate(toggles_list):
        config = params.config(toggles, benchmark.input_bound, seed=(seed, index, ci))
        result = solve(system, None, x0, u_init, config, cost_batch=cost_batch)
        costs.append(int(result.cost))
    return s_opt, costs


def solver_ablation(
    n_scenarios: int = 500,
    seed=0,
    params: AblationParams | None = None,
    toggles: Sequence[AblationToggles] = DEFAULT_TOGGLES,
    ms: tuple[int, ...] = (5,) * 8,
    c_bar: float = 10.0,
    map_fn: Callable = map,
) -> AblationReport:
    """Compare solver configurations against the exact discretized optimum.

    Per configuration: share of scenarios with lower/equal/higher cost
    than the baseline, mean optimality gap (in percent, over scenarios
    with a nonzero optimum; zero-optimum scenarios count as gap 0 when
    the solver also reaches 0 and are excluded otherwise), mean gap
    improvement over the baseline, and the share of scenarios where the
    exact optimum is attained.
    """
    params = params or AblationParams()
    toggles = tuple(toggles)
    names = [t.name for t in toggles]
    if "baseline" not in names:
        raise ContractViolation("ablation needs the baseline configuration")
    jobs = [(seed, i, params, toggles, ms, c_bar) for i in range(n_scenarios)]
    results = list(map_fn(_ablation_scenario_costs, jobs))

    opt = np.array([r[0] for r in results], dtype=object)
    cost_matrix = [[r[1][ci] for r in results] for ci in range(len(toggles))]
    base_idx = names.index("baseline")
    base_costs = cost_matrix[base_idx]

    def gaps(costs):
        values = []
        excluded = 0
        for c, s in zip(costs, opt):
            if s > 0:
                values.append(100.0 * float(c - s) / float(s))
            elif c == 0:
                values.append(0.0)
            else:
                values.append(None)
                excluded += 1
        return values, excluded

    base_gaps, _ = gaps(base_costs)
    rows = []
    for ci, name in enumerate(names):
        costs = cost_matrix[ci]
        lower = sum(1 for c, b in zip(costs, base_costs) if c < b)
        higher = sum(1 for c, b in zip(costs, base_costs) if c > b)
        equal = n_scenarios - lower - higher
        cfg_gaps, excluded = gaps(costs)
        valid = [g for g in cfg_gaps if g is not None]
        deltas = [g - b for g, b in zip(cfg_gaps, base_gaps) if g is not None and b is not None]
        rows.append(
            AblationRow(
                name=name,
                p_lower=100.0 * lower / n_scenarios,
                p_equal=100.0 * equal / n_scenarios,
                p_higher=100.0 * higher / n_scenarios,
                mean_gap=float(np.mean(valid)) if valid else 0.0,
                mean_gap_delta=float(np.mean(deltas)) if deltas else 0.0,
                p_optimal=100.0 * sum(1 for c, s in zip(costs, opt) if c == s) / n_scenarios,
                excluded=excluded,
            )
        )
    # reference row: the exact optimum compared against the baseline
    lower = sum(1 for s, b in zip(opt, base_costs) if s < b)
    higher = sum(1 for s, b in zip(opt, base_costs) if s > b)
    deltas = [-b for b in base_gaps if b is not None]
    rows.append(
        AblationRow(
            name="optimum",
            p_lower=100.0 * lower / n_scenarios,
            p_equal=100.0 * (n_scenarios - lower - higher) / n_scenarios,
            p_higher=100.0 * higher / n_scenarios,
            mean_gap=0.0,
            mean_gap_delta=float(np.mean(deltas)) if deltas else 0.0,
            p_optimal=100.0,
            excluded=0,
        )
    )
    return AblationReport(rows=rows, n_scenarios=n_scenarios)


# --------------------------------------------------------------------------
# Robustness-measure benchmark and comparison


def _workload_traces(scenario: Scenario, count: int, K: int, seed) -> list[Trace]:
    """Random feasible rollouts of the scenario's system for timing work."""
    system = scenario.system
    rng = _rng(seed)
    traces = []
    batch = rng.uniform(
        system.u_lo, system.u_hi, size=(count, K + 1, system.n_u)
    )
    outputs, valid = rollout_batch(system, scenario.initial_state, batch)
    for m in range(count):
        if valid[m]:
            traces.append(Trace(outputs[m], system.dt))
    return traces


@dataclass
class MeasureRow:
    measure: str
    t_rob_mean: float
    t_rob_std: float
    p_calls_cached_mean: float
    p_calls_cached_std: float
    p_calls_uncached_mean: float
    p_calls_uncached_std: float
    t_sol_mean: float | None = None
    t_sol_std: float | None = None


@dataclass
class MeasureReport:
    rows: list[MeasureRow]
    n_trajectories: int
    horizon: int

    def row(self, measure: str) -> MeasureRow:
        for row in self.rows:
            if row.measure == measure:
                return row
        raise KeyError(measure)

    def write(self, directory: "str | Path") -> list[Path]:
        directory = Path(directory)
        csv_path = directory / "measure_benchmark.csv"
        write_csv(
            csv_path,
            [
                "measure",
                "t_rob_mean_ms",
                "t_rob_std_ms",
                "p_calls_cached_mean",
                "p_calls_cached_std",
                "p_calls_uncached_mean",
                "p_calls_uncached_std",
                "t_sol_mean_ms",
                "t_sol_std_ms",
            ],
            [
                (
                    r.measure,
                    1e3 * r.t_rob_mean,
                    1e3 * r.t_rob_std,
                    r.p_calls_cached_mean,
                    r.p_calls_cached_std,
                    r.p_calls_uncached_mean,
                    r.p_calls_uncached_std,
                    "" if r.t_sol_mean is None else 1e3 * r.t_sol_mean,
                    "" if r.t_sol_std is None else 1e3 * r.t_sol_std,
                )
                for r in self.rows
            ],
        )
        return [csv_path]


def measure_benchmark(
    scenario: Scenario,
    measures: Sequence[str] = tuple(MEASURE_PRESETS),
    n_trajectories: int = 100,
    horizon: int = 15,
    seed=0,
    formula_text: str = "G(mu_in_lane)",
    solver_config: SolverConfig | None = None,
    n_solves: int = 0,
) -> MeasureReport:
    """Per-measure evaluation time and raw predicate-call counts.

    ``p_calls_cached`` counts evaluator invocations with the per-(id, k)
    predicate-value cache enabled; ``p_calls_uncached`` disables it so
    the time-based scans call the evaluator per visited index.  Wall
    times use a monotonic clock; the first trajectory is evaluated once
    as warmup and discarded.
    """
    registry = scenario.predicate_registry()
    formula = parse_formula(formula_text, registry)
    traces = _workload_traces(scenario, n_trajectories, horizon, (seed, "traces"))
    if not traces:
        raise ContractViolation("no valid workload trajectories")
    rows = []
    for name in measures:
        config = measure_config(name)
        robustness(config, formula, traces[0], 0)  # warmup
        times = []
        cached = []
        uncached = []
        for trace in traces:
            stats = EvalStats()
            started = time.perf_counter()
            robustness(config, formula, trace, 0, stats=stats)
            times.append(time.perf_counter() - started)
            cached.append(stats.predicate_calls)
            stats_unc = EvalStats()
            robustness(config, formula, trace, 0, stats=stats_unc, cache_predicates=False)
            uncached.append(stats_unc.predicate_calls)
        row = MeasureRow(
            measure=name,
            t_rob_mean=float(np.mean(times)),
            t_rob_std=float(np.std(times)),
            p_calls_cached_mean=float(np.mean(cached)),
            p_calls_cached_std=float(np.std(cached)),
            p_calls_uncached_mean=float(np.mean(uncached)),
            p_calls_uncached_std=float(np.std(uncached)),
        )
        if n_solves > 0 and solver_config is not None:
            sol_times = []
            measured_scenario = scenario.with_measure(name)
            for s in range(n_solves):
                spec_set = measured_scenario.spec_set()
                config_s = replace(solver_config, seed=(seed, "solve", s))
                u_init = np.zeros((scenario.horizon + 1, scenario.system.n_u))
                started = time.perf_counter()
                solve(scenario.system, spec_set, scenario.initial_state, u_init, config_s)
                sol_times.append(time.perf_counter() - started)
            row.t_sol_mean = float(np.mean(sol_times))
            row.t_sol_std = float(np.std(sol_times))
        rows.append(row)
    return MeasureReport(rows=rows, n_trajectories=len(traces), horizon=horizon)


# --------------------------------------------------------------------------
# Running-example trajectory fan and measure comparison


def running_example_fan(
    scenario: Scenario,
    phase: str = "t2",
    n_samples: int = 21,
    horizon: int = 15,
    speed: float = 8.0,
) -> list[Trace]:
    """Manually constructed trajectory fan beside / ahead of the obstacle.

    Phase "t1": the vehicle is still in the lane and the fan spreads
    swerve amplitudes.  Phase "t2": the vehicle is outside the lane next
    to the obstacle; samples 0..9 drift farther out with distinct rates,
    samples 10..n-1 head back toward the lane center with increasing
    return rates (the last sample returns fastest).  Headings are kept
    at zero so lateral profiles translate directly into lane margins.
    """
    if phase not in ("t1", "t2"):
        raise ContractViolation("phase must be 't1' or 't2'")
    dt = scenario.system.dt
    K = horizon
    half = scenario.lane.width / 2.0
    fan = []
    if phase == "t2":
        d0 = half + 1.2  # beside the obstacle, outside the lane
        x0 = scenario.obstacles[0].position[0] if scenario.obstacles else 30.0
        for i in range(n_samples):
            lateral = np.empty(K + 1)
            if i < 10:
                rate = 0.05 * (10 - i)  # drift farther out
                for k in range(K + 1):
                    lateral[k] = d0 + rate * k
            else:
                rate = 0.11 * (i - 9)  # return toward the lane center
                for k in range(K + 1):
                    lateral[k] = max(0.0, d0 - rate * k)
            fan.append(_fan_trace(x0, lateral, speed, dt))
    else:
        for i in range(n_samples):
            amplitude = -1.0 + 5.5 * i / (n_samples - 1)
            lateral = np.array([amplitude * min(k / 6.0, 1.0) for k in range(K + 1)])
            fan.append(_fan_trace(0.0, lateral, speed, dt))
    return fan


def _fan_trace(x0: float, lateral: np.ndarray, speed: float, dt: float) -> Trace:
    Kp1 = len(lateral)
    values = np.zeros((7, Kp1))
    values[0] = x0 + speed * dt * np.arange(Kp1)
    values[1] = lateral
    values[4] = speed
    return Trace(values, dt)


@dataclass
class ComparisonReport:
    measures: tuple[str, ...]
    raw: np.ndarray  # samples x measures
    normalized: np.ndarray
    skipped: tuple[str, ...]  # all-zero columns left unnormalized

    def write(self, directory: "str | Path", name: str = "robustness_comparison") -> list[Path]:
        directory = Path(directory)
        csv_path = directory / ("%s.csv" % name)
        header = ["sample"] + [m + "_raw" for m in self.measures] + [m + "_norm" for m in self.measures]
        rows = []
        for s in range(self.raw.shape[0]):
            rows.append([s] + list(self.raw[s]) + list(self.normalized[s]))
        write_csv(csv_path, header, rows)
        return [csv_path]


def robustness_comparison(
    scenario: Scenario,
    traces: Sequence[Trace],
    measures: Sequence[str],
    formula_text: str = "G(and(mu_left_bound, mu_right_bound))",
) -> ComparisonReport:
    """Per-measure robustness of each trajectory, max-abs normalized."""
    registry = scenario.predicate_registry()
    formula = parse_formula(formula_text, registry)
    raw = np.empty((len(traces), len(measures)))
    for mi, name in enumerate(measures):
        config = measure_config(name)
        for si, trace in enumerate(traces):
            raw[si, mi] = robustness(config, formula, trace, 0)
    normalized = raw.copy()
    skipped = []
    for mi, name in enumerate(measures):
        scale = np.max(np.abs(raw[:, mi]))
        if scale == 0:
            skipped.append(name)
        else:
            normalized[:, mi] = raw[:, mi] / scale
    return ComparisonReport(
        measures=tuple(measures), raw=raw, normalized=normalized, skipped=tuple(skipped)
    )
