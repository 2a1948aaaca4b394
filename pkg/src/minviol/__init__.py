"""Minimum-violation motion planning with prioritized STL specifications."""

__version__ = "0.1.0"

from .stl import (
    Trace,
    Interval,
    Formula,
    TrueFormula,
    Predicate,
    Not,
    And,
    Or,
    Implies,
    Until,
    Since,
    Eventually,
    Globally,
    Once,
    Historically,
    TRUE,
    normalize,
    boolean_sat,
    parse_formula,
    ContractViolation,
)
from .robustness import (
    MeasureConfig,
    EvalStats,
    MEASURE_PRESETS,
    REVERSE_SOUND_MEASURES,
    measure_config,
    amin,
    amax,
    predicate_robustness,
    robustness,
    robustness_all_times,
    is_nonnegative,
)
from .lexcost import (
    DiscretizationScheme,
    uniform_thresholds,
    CostLayout,
    ScalarCost,
    PrioritizedSpec,
    SpecSet,
    violation_cost,
    discretize,
    pack,
    unpack,
    lex_compare,
    scalar_cost,
)
from .solver import (
    SolverConfig,
    SolveResult,
    BetaCosine,
    BetaExponential,
    SamplesConstant,
    SamplesCosine,
    beta_cosine,
    beta_exponential,
    sample_count_cosine,
    solve,
)
from .systems import (
    ScalarIntegrator,
    SingleTrackModel,
    SingleTrackState,
    integrator_step,
    single_track_step,
    rollout,
    rollout_batch,
    ReferencePath,
    LaneGeometry,
    VehicleShape,
    Obstacle,
    Scenario,
    ScenarioError,
    load_scenario,
    mpc_loop,
    overtaking_scenario,
)
from .oracle import (
    LinearBenchmark,
    exact_lex_optimum,
    violation_error,
    brute_force_optimum,
    random_benchmark,
)
