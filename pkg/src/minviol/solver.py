"""Deterministic sampling-based trajectory optimizer.

Each iteration draws input perturbations from a shrinking normal
distribution, clips them to the input bounds, rolls them through the
system, scores the outputs with an integer-valued scalar cost, and
updates the nominal input plan with softmin-weighted perturbations.
Temperature and covariance shrink at different rates (beta^2 vs beta),
so the effective quadratic input weight beta*lambda*Sigma^-1 vanishes
as beta decays and the pure trajectory cost dominates.  The best sample
seen across all iterations is tracked with exact integer comparisons.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field, replace
from typing import Callable, Sequence

import numpy as np

from .seeding import generator_for
from .stl import ContractViolation, Trace
from .systems import System, rollout_batch

__all__ = [
    "BetaCosine",
    "BetaExponential",
    "SamplesConstant",
    "SamplesCosine",
    "SolverConfig",
    "SolveResult",
    "IterationRecord",
    "beta_cosine",
    "beta_exponential",
    "sample_count_cosine",
    "solve",
]


def beta_cosine(j: int, iterations: int, beta_min: float) -> float:
    """Cosine decay from 1 at j=1 down to beta_min at j=J."""
    if not 1 <= j <= iterations:
        raise ContractViolation("iteration index out of range")
    phase = 0.5 * (1.0 - math.cos(math.pi * (j - 1) / (iterations - 1)))
    return 1.0 - (1.0 - beta_min) * phase


def beta_exponential(j: int, gamma: float) -> float:
    """Exponential decay sqrt(gamma^(j-1))."""
    if j < 1:
        raise ContractViolation("iteration index out of range")
    return math.sqrt(gamma ** (j - 1))


def sample_count_cosine(j: int, iterations: int, m_init: int, m_final: int) -> int:
    """Cosine decay of the per-iteration sample count, with ceiling."""
    if not 1 <= j <= iterations:
        raise ContractViolation("iteration index out of range")
    phase = 0.5 * (1.0 - math.cos(math.pi * (j - 1) / (iterations - 1)))
    return math.ceil(m_init - (m_init - m_final) * phase)


@dataclass(frozen=True)
class BetaCosine:
    beta_min: float = 1e-6

    def __post_init__(self) -> None:
        if not 0 < self.beta_min < 1:
            raise ContractViolation("beta_min must be in (0, 1)")

    def __call__(self, j: int, iterations: int) -> float:
        return beta_cosine(j, iterations, self.beta_min)


@dataclass(frozen=True)
class BetaExponential:
    gamma: float = 0.6

    def __post_init__(self) -> None:
        if not 0 < self.gamma < 1:
            raise ContractViolation("gamma must be in (0, 1)")

    def __call__(self, j: int, iterations: int) -> float:
        return beta_exponential(j, self.gamma)


@dataclass(frozen=True)
class SamplesConstant:
    m_init: int = 400

    def __post_init__(self) -> None:
        if self.m_init < 1:
            raise ContractViolation("sample count must be >= 1")

    def __call__(self, j: int, iterations: int) -> int:
        return self.m_init


@dataclass(frozen=True)
class SamplesCosine:
    m_init: int = 400
    m_final: int = 250

    def __post_init__(self) -> None:
        if not self.m_init >= self.m_final >= 1:
            raise ContractViolation("need m_init >= m_final >= 1")

    def __call__(self, j: int, iterations: int) -> int:
        return sample_count_cosine(j, iterations, self.m_init, self.m_final)


RETURN_RULES = ("best_sample", "final_mppi")


@dataclass(frozen=True)
class SolverConfig:
    """Solver parameters; validated at construction (Cholesky check)."""

    iterations: int = 20
    sigma: np.ndarray | float = 0.5
    temperature: float = 1.0
    beta_rule: BetaCosine | BetaExponential = field(default_factory=BetaCosine)
    sample_rule: SamplesConstant | SamplesCosine = field(default_factory=SamplesCosine)
    return_rule: str = "best_sample"
    u_lo: np.ndarray | float = -1.0
    u_hi: np.ndarray | float = 1.0
    seed: int | tuple = 0

    def __post_init__(self) -> None:
        if self.iterations < 2:
            raise ContractViolation("need at least two iterations")
        if not self.temperature > 0:
            raise ContractViolation("temperature must be positive")
        if self.return_rule not in RETURN_RULES:
            raise ContractViolation("unknown return rule %r" % self.return_rule)
        sigma = np.atleast_2d(np.asarray(self.sigma, dtype=float))
        try:
            np.linalg.cholesky(sigma)
        except np.linalg.LinAlgError:
            raise ContractViolation("covariance must be positive definite") from None
        object.__setattr__(self, "sigma", sigma)
        n_u = sigma.shape[0]
        u_lo = np.broadcast_to(np.asarray(self.u_lo, dtype=float), (n_u,)).copy()
        u_hi = np.broadcast_to(np.asarray(self.u_hi, dtype=float), (n_u,)).copy()
        if np.any(u_lo > u_hi):
            raise ContractViolation("need u_lo <= u_hi elementwise")
        object.__setattr__(self, "u_lo", u_lo)
        object.__setattr__(self, "u_hi", u_hi)

    @property
    def n_u(self) -> int:
        return self.sigma.shape[0]


@dataclass
class IterationRecord:
    beta: float
    samples: int
    min_cost: int | None
    weight_entropy: float
    invalid_samples: int
    wall_time: float


@dataclass
class SolveResult:
    """Best sample and final-plan trajectories with per-iteration records.

    ``best_cost`` is the exact minimum scalar cost among all evaluated
    samples; ``trace``/``cost``/``inputs`` resolve per the configured
    return rule.
    """

    best_trace: Trace
    best_cost: int
    best_inputs: np.ndarray
    mppi_trace: Trace
    mppi_cost: int | None
    mppi_inputs: np.ndarray
    per_iteration: list[IterationRecord]
    return_rule: str

    @property
    def trace(self) -> Trace:
        return self.best_trace if self.return_rule == "best_sample" else self.mppi_trace

    @property
    def cost(self) -> int | None:
        return self.best_cost if self.return_rule == "best_sample" else self.mppi_cost

    @property
    def inputs(self) -> np.ndarray:
        return self.best_inputs if self.return_rule == "best_sample" else self.mppi_inputs


def _as_cost_fn(cost) -> Callable[[Trace], int]:
    scalar = getattr(cost, "scalar_cost", None)
    if scalar is not None:
        return lambda trace: scalar(trace).value
    if callable(cost):

        def fn(trace: Trace) -> int:
            value = cost(trace)
            return getattr(value, "value", value)

        return fn
    raise ContractViolation("cost must be a SpecSet or a callable Trace -> int")


def _rng_for(seed, j: int) -> np.random.Generator:
    return generator_for((seed, j))


def _to_float(delta: int) -> float:
    try:
        return float(delta)
    except OverflowError:
        return math.inf


def solve(
    system: System,
    cost,
    x0: np.ndarray,
    u_init: np.ndarray,
    config: SolverConfig,
    *,
    cost_batch: Callable[[np.ndarray, float], Sequence[int]] | None = None,
) -> SolveResult:
    """Minimize an integer-valued trajectory cost over input plans.

    ``cost`` is a SpecSet or a callable mapping a Trace to an integer;
    ``cost_batch`` optionally scores a whole (M, n_y, K+1) output batch
    at once.  Samples whose rollout leaves the model's domain get no
    weight and are reported per iteration.  Results are bit-identical
    for identical seed, config, and inputs.
    """
    u_plan = np.asarray(u_init, dtype=float)
    if u_plan.ndim == 1:
        u_plan = u_plan[:, None]
    if u_plan.ndim != 2 or u_plan.shape[1] != config.n_u:
        raise ContractViolation("u_init must have shape (K+1, n_u)")
    if np.any(u_plan < config.u_lo - 1e-12) or np.any(u_plan > config.u_hi + 1e-12):
        raise ContractViolation("u_init violates the input bounds")
    x0 = np.asarray(x0, dtype=float)
    if not np.all(np.isfinite(x0)):
        raise ContractViolation("initial state must be finite")
    u_plan = np.clip(u_plan, config.u_lo, config.u_hi)

    cost_fn = None if cost_batch is not None else _as_cost_fn(cost)
    J = config.iterations
    lam = config.temperature
    sigma_chol = np.linalg.cholesky(config.sigma)
    sigma_inv = np.linalg.inv(config.sigma)

    best_cost: int | None = None
    best_outputs: np.ndarray | None = None
    best_inputs: np.ndarray | None = None
    records: list[IterationRecord] = []

    for j in range(1, J + 1):
        started = time.perf_counter()
        beta = config.beta_rule(j, J)
        lam_j = beta * beta * lam
        sigma_j_inv = sigma_inv / beta
        M = config.sample_rule(j, J)

        rng = _rng_for(config.seed, j)
        eps = rng.standard_normal((M, u_plan.shape[0], config.n_u)) @ (math.sqrt(beta) * sigma_chol).T
        samples = np.clip(u_plan[None, :, :] + eps, config.u_lo, config.u_hi)
        eps = samples - u_plan[None, :, :]

        outputs, valid = rollout_batch(system, x0, samples)

        costs: list[int | None] = [None] * M
        valid_idx = np.flatnonzero(valid)
        if cost_batch is not None:
            batch_values = cost_batch(outputs[valid_idx], system.dt)
            for i, m in enumerate(valid_idx):
                costs[m] = int(batch_values[i])
        else:
            for m in valid_idx:
                costs[m] = int(cost_fn(Trace(outputs[m], system.dt)))

        iteration_min: int | None = None
        for m in valid_idx:
            c = costs[m]
            if iteration_min is None or c < iteration_min:
                iteration_min = c
            if best_cost is None or c < best_cost:
                best_cost = c
                best_outputs = outputs[m].copy()
                best_inputs = samples[m].copy()

        # correction term: sum_k lambda_j eps_k^T Sigma_j^-1 u_k, plus cost
        correction = lam_j * np.einsum("mku,uv,kv->m", eps, sigma_j_inv, u_plan)
        ell = np.full(M, math.inf)
        if iteration_min is not None:
            floor = iteration_min
            for m in valid_idx:
                ell[m] = correction[m] + _to_float(costs[m] - floor)

        finite = np.isfinite(ell)
        entropy = 0.0
        if finite.any():
            ell_min = ell[finite].min()
            with np.errstate(over="ignore", under="ignore"):
                weights = np.where(finite, np.exp(-(ell - ell_min) / lam_j), 0.0)
            theta = weights.sum()
            weights /= theta
            u_plan = u_plan + np.einsum("m,mku->ku", weights, eps)
            positive = weights[weights > 0]
            entropy = float(-(positive * np.log(positive)).sum())

        records.append(
            IterationRecord(
                beta=beta,
                samples=M,
                min_cost=iteration_min,
                weight_entropy=entropy,
                invalid_samples=int(M - valid.sum()),
                wall_time=time.perf_counter() - started,
            )
        )

    mppi_trace = None
    mppi_cost: int | None = None
    final_outputs, final_valid = rollout_batch(system, x0, u_plan[None, :, :])
    if final_valid[0]:
        mppi_trace = Trace(final_outputs[0], system.dt)
        if cost_batch is not None:
            mppi_cost = int(cost_batch(final_outputs[:1], system.dt)[0])
        else:
            mppi_cost = int(cost_fn(mppi_trace)) if cost_fn is not None else None

    if best_cost is None:
        raise ContractViolation("every sampled rollout left the model's domain")
    best_trace = Trace(best_outputs, system.dt)
    if mppi_trace is None:  # final plan diverged; fall back to the best sample
        mppi_trace, mppi_cost, mppi_inputs = best_trace, best_cost, best_inputs.copy()
    else:
        mppi_inputs = u_plan

    return SolveResult(
        best_trace=best_trace,
        best_cost=best_cost,
        best_inputs=best_inputs,
        mppi_trace=mppi_trace,
        mppi_cost=mppi_cost,
        mppi_inputs=mppi_inputs,
        per_iteration=records,
        return_rule=config.return_rule,
    )
