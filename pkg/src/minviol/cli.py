"""Command-line entry point: plan, bench, eval, and oracle subcommands.

Exit codes: 0 success, 2 usage or input error, 3 runtime failure.
Every run writes a manifest (command, seed, versions, outputs) next to
its outputs; re-running with the same inputs reproduces the outputs
bit-identically up to timing fields.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np
import yaml

from . import __version__
from .bench import (
    discretization_study,
    measure_benchmark,
    robustness_comparison,
    running_example_fan,
    solver_ablation,
    write_csv,
)
from .lexcost import SpecSet
from .oracle import exact_lex_optimum, random_benchmark, violation_error
from .robustness import MEASURE_PRESETS, measure_config, robustness, robustness_all_times
from .seeding import generator_for
from .solver import BetaCosine, BetaExponential, SamplesConstant, SamplesCosine, SolverConfig
from .stl import ContractViolation, FormulaSyntaxError, Trace, boolean_sat, parse_formula
from .systems import ScenarioError, load_scenario, mpc_loop, overtaking_scenario

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_RUNTIME = 3


class CliError(Exception):
    def __init__(self, message: str, code: int = EXIT_USAGE):
        super().__init__(message)
        self.code = code


def _write_manifest(outdir: Path, command: str, args: dict, outputs: list[Path]) -> Path:
    manifest = {
        "command": command,
        "arguments": {k: str(v) for k, v in args.items()},
        "seed": args.get("seed"),
        "versions": {
            "minviol": __version__,
            "numpy": np.__version__,
            "python": sys.version.split()[0],
        },
        "timestamp": time.strftime("%Y-%m-%dT%H:%M:%S"),
        "outputs": [str(p) for p in outputs],
    }
    path = outdir / "manifest.json"
    path.write_text(json.dumps(manifest, indent=2))
    return path


def _outdir(args) -> Path:
    outdir = Path(args.output_dir)
    outdir.mkdir(parents=True, exist_ok=True)
    return outdir


def _solver_config_from(data: dict, seed) -> SolverConfig:
    beta = data.get("beta_rule", {"kind": "cosine", "beta_min": 1e-6})
    if beta.get("kind", "cosine") == "cosine":
        beta_rule = BetaCosine(float(beta.get("beta_min", 1e-6)))
    else:
        beta_rule = BetaExponential(float(beta.get("gamma", 0.6)))
    samples = data.get("sample_rule", {"kind": "cosine", "m_init": 150, "m_final": 50})
    if samples.get("kind", "cosine") == "cosine":
        sample_rule = SamplesCosine(int(samples.get("m_init", 150)), int(samples.get("m_final", 50)))
    else:
        sample_rule = SamplesConstant(int(samples.get("m_init", 150)))
    return SolverConfig(
        iterations=int(data.get("iterations", 12)),
        sigma=np.asarray(data.get("covariance", [[0.05, 0.0], [0.0, 4.0]]), dtype=float),
        temperature=float(data.get("temperature", 1.0)),
        beta_rule=beta_rule,
        sample_rule=sample_rule,
        return_rule=str(data.get("return_rule", "best_sample")),
        u_lo=np.asarray(data["u_lo"], dtype=float),
        u_hi=np.asarray(data["u_hi"], dtype=float),
        seed=seed,
    )


# --------------------------------------------------------------------------
# plan


def cmd_plan(args) -> int:
    outdir = _outdir(args)
    path = Path(args.scenario)
    if not path.exists():
        raise CliError("scenario file not found: %s" % path)
    try:
        scenario = load_scenario(path)
        raw = yaml.safe_load(path.read_text()) or {}
    except (ScenarioError, yaml.YAMLError) as exc:
        raise CliError("invalid scenario: %s" % exc)

    solver_data = dict(raw.get("solver", {}))
    solver_data.setdefault("u_lo", scenario.system.u_lo.tolist())
    solver_data.setdefault("u_hi", scenario.system.u_hi.tolist())
    if args.measure:
        scenario = scenario.with_measure(args.measure)
    if args.mpc_steps:
        steps = args.mpc_steps
    else:
        steps = int(raw.get("mpc", {}).get("steps", 20))
    try:
        config = _solver_config_from(solver_data, seed=args.seed)
    except ContractViolation as exc:
        raise CliError("invalid solver config: %s" % exc)

    try:
        result = mpc_loop(scenario, config, steps)
    except (ContractViolation, ScenarioError) as exc:
        raise CliError("planning failed: %s" % exc, EXIT_RUNTIME)

    executed = result.executed
    spec_set = scenario.spec_set()
    per_spec = [
        robustness_all_times(spec.measure, formula, executed)
        for spec, formula in zip(spec_set.specs, spec_set._normalized)
    ]

    trace_path = outdir / "executed_trace.csv"
    state_names = ["x", "y", "theta", "delta", "v"]
    input_names = ["v_delta", "a"]
    header = (
        ["k", "t"]
        + state_names
        + input_names
        + ["rob_%s" % name for name in spec_set.names]
        + ["plan_cost"]
    )
    rows = []
    for k in range(executed.K + 1):
        plan_idx = min(k, len(result.scalar_costs) - 1)
        rows.append(
            [k, round(executed.time(k), 6)]
            + [repr(v) for v in executed.values[:5, k]]
            + [repr(v) for v in executed.values[5:, k]]
            + [repr(values[k]) for values in per_spec]
            + [result.scalar_costs[plan_idx].decimal()]
        )
    write_csv(trace_path, header, rows)

    diag_path = outdir / "diagnostics.json"
    diagnostics = {
        "scenario": scenario.name,
        "mpc_steps": steps,
        "cost_vectors": [list(v) for v in result.cost_vectors],
        "scalar_costs": [s.decimal() for s in result.scalar_costs],
        "iterations": [
            [
                {
                    "beta": rec.beta,
                    "samples": rec.samples,
                    "min_cost": None if rec.min_cost is None else str(rec.min_cost),
                    "weight_entropy": rec.weight_entropy,
                    "invalid_samples": rec.invalid_samples,
                    "wall_time": rec.wall_time,
                }
                for rec in res.per_iteration
            ]
            for res in result.solve_results
        ],
    }
    diag_path.write_text(json.dumps(diagnostics, indent=2))
    outputs = [trace_path, diag_path]
    outputs.append(_write_manifest(outdir, "plan", vars(args), outputs))
    print("plan: executed %d steps, final scalar cost %s" % (steps, result.scalar_costs[-1].decimal()))
    return EXIT_OK


# --------------------------------------------------------------------------
# bench


def _parse_sweep(text: str) -> list[int]:
    if ":" in text:
        parts = [int(v) for v in text.split(":")]
        if len(parts) != 3:
            raise CliError("sweep must be start:stop:step")
        start, stop, step = parts
        values = list(range(start, stop + 1, step))
    else:
        values = [int(v) for v in text.split(",") if v]
    if not values:
        raise CliError("empty sweep")
    return values


def cmd_bench(args) -> int:
    outdir = _outdir(args)
    map_fn = map
    pool = None
    if args.threads > 1:
        pool = ProcessPoolExecutor(max_workers=args.threads)
        map_fn = pool.map
    try:
        if args.study == "discretization":
            report = discretization_study(
                n_scenarios=args.scenarios,
                m_totals=_parse_sweep(args.m_total),
                n_compositions=args.compositions,
                seed=args.seed,
                map_fn=map_fn,
            )
            outputs = report.write(outdir)
        elif args.study == "ablation":
            report = solver_ablation(
                n_scenarios=args.scenarios, seed=args.seed, map_fn=map_fn
            )
            outputs = report.write(outdir)
        elif args.study == "measures":
            scenario = overtaking_scenario()
            report = measure_benchmark(
                scenario,
                n_trajectories=args.scenarios,
                seed=args.seed,
                solver_config=_solver_config_from(
                    {
                        "iterations": 6,
                        "covariance": [[0.05, 0.0], [0.0, 4.0]],
                        "sample_rule": {"kind": "cosine", "m_init": 40, "m_final": 20},
                        "u_lo": scenario.system.u_lo.tolist(),
                        "u_hi": scenario.system.u_hi.tolist(),
                    },
                    seed=args.seed,
                ),
                n_solves=args.solves,
            )
            outputs = report.write(outdir)
        elif args.study == "comparison":
            scenario = overtaking_scenario()
            fan = running_example_fan(scenario, phase=args.phase)
            measures = ("space", "comb-time", "smooth", "pm", "dur-sev", "space-left-time")
            report = robustness_comparison(scenario, fan, measures)
            outputs = report.write(outdir, name="robustness_comparison_%s" % args.phase)
            if report.skipped:
                print("normalization skipped for all-zero measures: %s" % ", ".join(report.skipped))
        else:
            raise CliError("unknown study %r" % args.study)
    finally:
        if pool is not None:
            pool.shutdown()
    outputs.append(_write_manifest(outdir, "bench %s" % args.study, vars(args), outputs))
    print("bench %s: wrote %s" % (args.study, ", ".join(str(p) for p in outputs)))
    return EXIT_OK


# --------------------------------------------------------------------------
# eval


def _load_trace_csv(path: Path) -> tuple[Trace, dict]:
    if not path.exists():
        raise CliError("trace file not found: %s" % path)
    try:
        with open(path, newline="") as handle:
            reader = csv.reader(handle)
            header = next(reader)
            rows = [[float(v) for v in row] for row in reader if row]
    except (ValueError, StopIteration) as exc:
        raise CliError("malformed trace CSV: %s" % exc)
    if not header or not rows:
        raise CliError("trace CSV needs a header and at least two rows")
    columns = {name.strip(): i for i, name in enumerate(header)}
    values = np.array(rows).T  # one row per named signal
    try:
        trace = Trace(values, dt=1.0)
    except ContractViolation as exc:
        raise CliError("invalid trace: %s" % exc)
    registry = {
        name: (lambda t, k, i=i: t.values[i, k]) for name, i in columns.items()
    }
    return trace, registry


def cmd_eval(args) -> int:
    trace, registry = _load_trace_csv(Path(args.trace))
    if args.measure not in MEASURE_PRESETS:
        raise CliError("unknown measure %r" % args.measure)
    overrides = {}
    for name in ("nu1", "nu2", "nu3", "nu4", "nu5"):
        value = getattr(args, name)
        if value is not None:
            overrides[name] = value
    config = measure_config(args.measure, **overrides)
    try:
        formula = parse_formula(args.formula, registry)
    except FormulaSyntaxError as exc:
        raise CliError("invalid formula: %s" % exc)
    try:
        if args.all_times:
            values = robustness_all_times(config, formula, trace)
            for k, value in enumerate(values):
                print("k=%d robustness=%r" % (k, value))
            value = values[0]
        else:
            value = robustness(config, formula, trace, args.at)
        verdict = boolean_sat(formula, trace, args.at)
    except (ContractViolation, IndexError) as exc:
        raise CliError("evaluation failed: %s" % exc, EXIT_RUNTIME)
    print("robustness=%r verdict=%s" % (value, "true" if verdict else "false"))
    return EXIT_OK


# --------------------------------------------------------------------------
# oracle


def cmd_oracle(args) -> int:
    outdir = _outdir(args)
    records = []
    if args.thresholds:
        try:
            thresholds = tuple(float(v) for v in args.thresholds.split(","))
        except ValueError as exc:
            raise CliError("bad thresholds: %s" % exc)
        benchmarks = [(0, thresholds)]
    else:
        benchmarks = []
        for i in range(args.scenarios):
            rng = generator_for((args.seed, "oracle", i))
            benchmarks.append((i, tuple(rng.uniform(-3.0, 3.0, size=8).tolist())))
    for index, thresholds in benchmarks:
        rng = generator_for((args.seed, "oracle-m", index))
        from .lexcost import uniform_thresholds as _ut

        schemes = tuple(_ut(10.0, args.m) for _ in thresholds)
        from .oracle import LinearBenchmark

        benchmark = LinearBenchmark(thresholds, schemes)
        cont = exact_lex_optimum(benchmark, "continuous")
        disc = exact_lex_optimum(benchmark, "discretized")
        records.append(
            {
                "index": index,
                "thresholds": list(thresholds),
                "continuous_costs": list(cont.min_costs),
                "discrete_costs": list(disc.discrete),
                "max_continuous_costs_discrete_optimum": list(disc.max_costs),
                "violation_error": violation_error(cont, disc),
                "witness_inputs_continuous": cont.witness_inputs.tolist(),
                "witness_inputs_discretized": disc.witness_inputs.tolist(),
            }
        )
    out_path = outdir / "oracle.json"
    out_path.write_text(json.dumps(records, indent=2))
    outputs = [out_path]
    outputs.append(_write_manifest(outdir, "oracle", vars(args), outputs))
    print("oracle: wrote %s (%d record%s)" % (out_path, len(records), "s" if len(records) != 1 else ""))
    return EXIT_OK


# --------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="minviol",
        description="Minimum-violation motion planning with prioritized STL specifications.",
    )
    parser.add_argument("--seed", type=int, default=0, help="global RNG seed")
    parser.add_argument("--threads", type=int, default=1, help="scenario-level worker processes")
    parser.add_argument("--output-dir", default="out", help="directory for outputs")
    parser.add_argument("--format", choices=("csv", "json"), default="csv", help="table format")
    sub = parser.add_subparsers(dest="command", required=True)

    p_plan = sub.add_parser("plan", help="run the MPC planner on a scenario file")
    p_plan.add_argument("scenario", help="scenario YAML file")
    p_plan.add_argument("--measure", default=None, choices=tuple(MEASURE_PRESETS), help="override every spec's measure")
    p_plan.add_argument("--mpc-steps", type=int, default=None)
    p_plan.set_defaults(func=cmd_plan)

    p_bench = sub.add_parser("bench", help="run a benchmark study")
    p_bench.add_argument("study", choices=("discretization", "ablation", "measures", "comparison"))
    p_bench.add_argument("--scenarios", type=int, default=200)
    p_bench.add_argument("--compositions", type=int, default=100)
    p_bench.add_argument("--m-total", default="8:160:8", help="sweep start:stop:step or comma list")
    p_bench.add_argument("--solves", type=int, default=0, help="timed solves per measure (measures study)")
    p_bench.add_argument("--phase", choices=("t1", "t2"), default="t2")
    p_bench.set_defaults(func=cmd_bench)

    p_eval = sub.add_parser("eval", help="evaluate a formula on a trace CSV")
    p_eval.add_argument("formula")
    p_eval.add_argument("trace", help="CSV whose column names are predicate ids")
    p_eval.add_argument("--measure", default="space")
    p_eval.add_argument("--at", type=int, default=0, help="evaluation time index")
    p_eval.add_argument("--all-times", action="store_true")
    for name in ("nu1", "nu2", "nu3", "nu4", "nu5"):
        p_eval.add_argument("--%s" % name, type=float, default=None)
    p_eval.set_defaults(func=cmd_eval)

    p_oracle = sub.add_parser("oracle", help="exact optima for linear benchmarks")
    p_oracle.add_argument("--thresholds", default=None, help="comma-separated r_1..r_K")
    p_oracle.add_argument("--scenarios", type=int, default=1)
    p_oracle.add_argument("--m", type=int, default=5, help="violation intervals per spec")
    p_oracle.set_defaults(func=cmd_oracle)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code not in (0, None) else EXIT_OK
    try:
        return args.func(args)
    except CliError as exc:
        print("error: %s" % exc, file=sys.stderr)
        return exc.code
    except (ContractViolation, ScenarioError, FormulaSyntaxError) as exc:
        print("error: %s" % exc, file=sys.stderr)
        return EXIT_USAGE
    except Exception as exc:  # runtime failure
        print("runtime error: %s" % exc, file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    raise SystemExit(main())
