"""Shared generators for randomized tests."""

from __future__ import annotations

import numpy as np

from minviol.seeding import generator_for
from minviol.stl import (
    TRUE,
    And,
    Eventually,
    Globally,
    Historically,
    Implies,
    Interval,
    Not,
    Once,
    Or,
    Predicate,
    Since,
    Trace,
    Until,
)


def signal_predicate(name: str, row: int) -> Predicate:
    return Predicate(name, lambda trace, k, row=row: float(trace.values[row, k]))


def linear_predicate(rng: np.random.Generator, n_y: int, name: str) -> Predicate:
    w = rng.uniform(-1.0, 1.0, size=n_y)
    b = float(rng.uniform(-2.0, 2.0))
    return Predicate(name, lambda trace, k, w=w, b=b: float(w @ trace.values[:, k] + b))


def random_trace(rng: np.random.Generator, n_y: int = 2, K: int | None = None) -> Trace:
    if K is None:
        K = int(rng.integers(2, 9))
    values = rng.normal(size=(n_y, K + 1)).cumsum(axis=1)
    return Trace(values, dt=1.0)


def random_interval(rng: np.random.Generator, K: int) -> Interval | None:
    if rng.random() < 0.4:
        return None
    lo = int(rng.integers(0, K + 1))
    hi = int(rng.integers(lo, K + 1))
    return Interval(lo, hi)


def random_formula(rng: np.random.Generator, n_y: int, K: int, depth: int = 3):
    """Random formula over all twelve node types with linear predicates."""
    counter = [0]

    def build(d: int):
        if d <= 0 or rng.random() < 0.3:
            if rng.random() < 0.05:
                return TRUE
            counter[0] += 1
            return linear_predicate(rng, n_y, "p%d" % counter[0])
        op = int(rng.integers(0, 10))
        if op == 0:
            return Not(build(d - 1))
        if op == 1:
            return And(build(d - 1), build(d - 1))
        if op == 2:
            return Or(build(d - 1), build(d - 1))
        if op == 3:
            return Implies(build(d - 1), build(d - 1))
        if op == 4:
            return Until(random_interval(rng, K), build(d - 1), build(d - 1))
        if op == 5:
            return Since(random_interval(rng, K), build(d - 1), build(d - 1))
        if op == 6:
            return Eventually(random_interval(rng, K), build(d - 1))
        if op == 7:
            return Globally(random_interval(rng, K), build(d - 1))
        if op == 8:
            return Once(random_interval(rng, K), build(d - 1))
        return Historically(random_interval(rng, K), build(d - 1))

    return build(depth)


def random_cases(seed, count: int, n_y: int = 2, depth: int = 3):
    """Deterministic list of (formula, trace, k) triples."""
    rng = generator_for(seed)
    cases = []
    for _ in range(count):
        trace = random_trace(rng, n_y)
        formula = random_formula(rng, n_y, trace.K, depth)
        k = int(rng.integers(0, trace.K + 1))
        cases.append((formula, trace, k))
    return cases
