"""Stochastic input families and regenerative path machinery.

Five order-stream families are provided, indexed 1 through 5:

1. quantity-dependent price: each order's reward is its own consumption
   row dotted with m hidden bounded random walks (one walk per resource),
2. quantity-independent price: a single bounded random walk is the reward,
3. iid price: rewards drawn Uniform(1, 5) independently,
4. drifting walk price: reward takes a fixed upward step plus uniform
   noise each period,
5. linear trend price: reward is an affine function of the period index
   plus uniform noise.

Families 1-3 use absolute-Gaussian consumption entries; families 4 and 5
use a uniform band.  Separately, a small regenerative-process toolkit
(iid cycles with finite value tables) backs the long-run-average
statistics module.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, replace

import numpy as np

from .core import Instance
from .seeding import (
    DOMAIN_CONSUMPTION,
    DOMAIN_PRICE,
    DOMAIN_REGEN,
    DOMAIN_WALK,
    substream,
)

__all__ = [
    "InputKind",
    "BoundedWalkSpec",
    "InputSpec",
    "RegenSpec",
    "input_preset",
    "gen_bounded_walk",
    "gen_instance",
    "gen_regenerative_path",
    "true_cycle_mean",
    "mean_cycle_length",
    "regeneration_rate",
]


class InputKind(enum.IntEnum):
    QUANTITY_DEPENDENT = 1
    QUANTITY_INDEPENDENT = 2
    IID_PRICE = 3
    DRIFT_WALK = 4
    LINEAR_TREND = 5


@dataclass(frozen=True)
class BoundedWalkSpec:
    """Random walk reflected into [lower, upper] by clamping.

    Increments are Rademacher (+1/-1 fair coin) by default, or
    Uniform(increment_range) when ``increment="uniform"``.
    """

    lower: float = 1.0
    upper: float = 5.0
    start: float = 1.0
    increment: str = "rademacher"
    increment_range: tuple[float, float] | None = None

    def __post_init__(self):
        if not self.lower < self.upper:
            raise ValueError("need lower < upper")
        if not self.lower <= self.start <= self.upper:
            raise ValueError("start must lie in [lower, upper]")
        if self.increment not in ("rademacher", "uniform"):
            raise ValueError(f"unknown increment kind {self.increment!r}")
        if self.increment == "uniform":
            if self.increment_range is None or len(self.increment_range) != 2:
                raise ValueError("uniform increments need increment_range=(lo, hi)")


@dataclass(frozen=True)
class InputSpec:
    """Recipe for one instance family at a fixed horizon.

    ``capacity_fraction`` is the per-period capacity of every resource;
    initial capacity is ``capacity_fraction * horizon``.  ``walk`` is
    required for kinds 1 and 2 and ignored otherwise.  ``trend_*`` fields
    shape kinds 4 and 5 only: reward step/slope, base level, and the
    half-width of the uniform noise (0 makes the stream deterministic).
    ``consumption`` picks the entry sampler: "abs_normal" (|N(0.5, 1)|),
    "uniform_band" (U(0.6, 1.4)), or "auto" (family default).
    """

    kind: InputKind
    horizon: int
    m: int
    capacity_fraction: float = 0.25
    walk: BoundedWalkSpec | None = None
    consumption: str = "auto"
    trend_noise: float = 0.2
    trend_slope: float = 0.2
    trend_base: float = 1.0

    def __post_init__(self):
        if self.horizon < 1:
            raise ValueError("horizon must be >= 1")
        if self.m < 1:
            raise ValueError("need at least one resource")
        if not 0.0 < self.capacity_fraction <= 1.0:
            raise ValueError("capacity_fraction must be in (0, 1]")
        kind = InputKind(self.kind)
        object.__setattr__(self, "kind", kind)
        if kind in (InputKind.QUANTITY_DEPENDENT, InputKind.QUANTITY_INDEPENDENT):
            if self.walk is None:
                raise ValueError(f"{kind.name} requires a walk spec")
        if self.consumption not in ("auto", "abs_normal", "uniform_band"):
            raise ValueError(f"unknown consumption sampler {self.consumption!r}")
        if self.trend_noise < 0:
            raise ValueError("trend_noise must be >= 0")

    @property
    def consumption_kind(self) -> str:
        if self.consumption != "auto":
            return self.consumption
        if self.kind in (InputKind.DRIFT_WALK, InputKind.LINEAR_TREND):
            return "uniform_band"
        return "abs_normal"


def input_preset(kind: int | InputKind, horizon: int, m: int | None = None, **overrides) -> InputSpec:
    """Spec with the family's stock parameters.

    Families 1-3 default to m=5 resources with a [1, 5] Rademacher walk
    where one is needed; families 4-5 default to m=2.  Capacity fraction
    is 0.25 everywhere.  Keyword overrides replace any field.
    """
    kind = InputKind(kind)
    if m is None:
        m = 2 if kind in (InputKind.DRIFT_WALK, InputKind.LINEAR_TREND) else 5
    walk = None
    if kind in (InputKind.QUANTITY_DEPENDENT, InputKind.QUANTITY_INDEPENDENT):
        walk = BoundedWalkSpec()
    spec = InputSpec(kind=kind, horizon=int(horizon), m=int(m), walk=walk)
    if overrides:
        spec = replace(spec, **overrides)
    return spec


def gen_bounded_walk(spec: BoundedWalkSpec, steps: int, rng: np.random.Generator | int) -> np.ndarray:
    """Simulate the clamped walk; output[0] is the start value.

    One increment is drawn per transition, so ``steps`` values consume
    ``steps - 1`` draws.  A move that would land outside [lower, upper]
    is set to the violated endpoint.
    """
    if steps < 1:
        raise ValueError("steps must be >= 1")
    if isinstance(rng, (int, np.integer)):
        rng = substream(int(rng), DOMAIN_WALK, 0)
    if spec.increment == "rademacher":
        eps = 2.0 * rng.integers(0, 2, size=steps - 1).astype(float) - 1.0
    else:
        lo, hi = spec.increment_range
        eps = rng.uniform(lo, hi, size=steps - 1)
    out = np.empty(steps)
    out[0] = spec.start
    lo, hi = spec.lower, spec.upper
    cur = spec.start
    for t in range(steps - 1):
        cur = cur + eps[t]
        if cur > hi:
            cur = hi
        elif cur < lo:
            cur = lo
        out[t + 1] = cur
    return out


def _consumption_matrix(spec: InputSpec, seed: int) -> np.ndarray:
    n, m = spec.horizon, spec.m
    cons = np.empty((n, m))
    kind = spec.consumption_kind
    for j in range(m):
        rng = substream(seed, DOMAIN_CONSUMPTION, j)
        if kind == "abs_normal":
            cons[:, j] = np.abs(rng.normal(0.5, 1.0, size=n))
        else:
            cons[:, j] = rng.uniform(0.6, 1.4, size=n)
    return cons


def gen_instance(spec: InputSpec, seed: int) -> Instance:
    """Draw one instance of the family; deterministic in (spec, seed).

    Consumption columns and hidden walks each use their own seed stream,
    so growing ``m`` leaves existing columns bit-identical.
    """
    n, m = spec.horizon, spec.m
    cons = _consumption_matrix(spec, seed)
    kind = spec.kind
    if kind == InputKind.QUANTITY_DEPENDENT:
        walks = np.empty((n, m))
        for j in range(m):
            walks[:, j] = gen_bounded_walk(spec.walk, n, substream(seed, DOMAIN_WALK, j))
        rewards = np.einsum("tj,tj->t", cons, walks)
    elif kind == InputKind.QUANTITY_INDEPENDENT:
        rewards = gen_bounded_walk(spec.walk, n, substream(seed, DOMAIN_WALK, 0))
    elif kind == InputKind.IID_PRICE:
        rewards = substream(seed, DOMAIN_PRICE, 0).uniform(1.0, 5.0, size=n)
    elif kind == InputKind.DRIFT_WALK:
        rng = substream(seed, DOMAIN_PRICE, 0)
        noise = rng.uniform(-spec.trend_noise, spec.trend_noise, size=n) if spec.trend_noise > 0 else np.zeros(n)
        rewards = spec.trend_base + spec.trend_slope * np.arange(1, n + 1) + np.cumsum(noise)
    elif kind == InputKind.LINEAR_TREND:
        rng = substream(seed, DOMAIN_PRICE, 0)
        noise = rng.uniform(-spec.trend_noise, spec.trend_noise, size=n) if spec.trend_noise > 0 else np.zeros(n)
        rewards = spec.trend_base + spec.trend_slope * np.arange(1, n + 1) + noise
    else:  # pragma: no cover - InputKind coercion makes this unreachable
        raise ValueError(f"unknown input kind {kind!r}")
    b = np.full(m, spec.capacity_fraction * n)
    return Instance(rewards=rewards, consumption=cons, b=b)


# ---------------------------------------------------------------------------
# regenerative processes with finite cycle tables
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class RegenSpec:
    """IID-cycle process: cycle length L ~ length_probs over {1..T},
    within-cycle values read off a fixed table for that length.

    Finite support keeps the long-run average exactly enumerable.
    """

    length_probs: tuple[float, ...]
    value_table: tuple[tuple[float, ...], ...]
    value_bound: float

    def __post_init__(self):
        probs = tuple(float(p) for p in self.length_probs)
        table = tuple(tuple(float(v) for v in row) for row in self.value_table)
        if len(probs) < 1:
            raise ValueError("need at least one cycle length")
        if any(p < 0 for p in probs):
            raise ValueError("length probabilities must be >= 0")
        if not math.isclose(sum(probs), 1.0, rel_tol=0, abs_tol=1e-9):
            raise ValueError("length probabilities must sum to 1")
        if len(table) != len(probs):
            raise ValueError("value_table must have one row per cycle length")
        for length, row in enumerate(table, start=1):
            if len(row) != length:
                raise ValueError(f"value_table row for length {length} has {len(row)} entries")
            if any(abs(v) > self.value_bound + 1e-12 for v in row):
                raise ValueError(f"cycle values exceed bound {self.value_bound}")
        if self.value_bound <= 0:
            raise ValueError("value_bound must be positive")
        object.__setattr__(self, "length_probs", probs)
        object.__setattr__(self, "value_table", table)

    @property
    def max_cycle_length(self) -> int:
        return len(self.length_probs)


def mean_cycle_length(spec: RegenSpec) -> float:
    return sum(p * length for length, p in enumerate(spec.length_probs, start=1))


def regeneration_rate(spec: RegenSpec) -> float:
    """Cycles per unit time, 1 / E[cycle length]."""
    return 1.0 / mean_cycle_length(spec)


def true_cycle_mean(spec: RegenSpec) -> float:
    """Long-run average value: E[cycle sum] / E[cycle length], exactly."""
    num = sum(p * sum(row) for p, row in zip(spec.length_probs, spec.value_table))
    return num / mean_cycle_length(spec)


def gen_regenerative_path(
    spec: RegenSpec, steps: int, seed: int, stream: int = 0
) -> tuple[np.ndarray, np.ndarray]:
    """Concatenate iid cycles until ``steps`` values exist (last cycle may
    be truncated).  Returns (values, cycle_start_indices)."""
    if steps < 1:
        raise ValueError("steps must be >= 1")
    rng = substream(seed, DOMAIN_REGEN, stream)
    lengths_support = np.arange(1, spec.max_cycle_length + 1)
    probs = np.asarray(spec.length_probs)
    # worst case every cycle has length 1
    lengths = rng.choice(lengths_support, size=steps, p=probs)
    ends = np.cumsum(lengths)
    ncyc = int(np.searchsorted(ends, steps, side="left")) + 1
    lengths = lengths[:ncyc]
    ends = ends[:ncyc]
    starts = ends - lengths
    flat = np.concatenate([np.asarray(row) for row in spec.value_table])
    offsets = np.concatenate([[0], np.cumsum(lengths_support)])[:-1]
    idx = np.arange(steps)
    cyc = np.searchsorted(ends, idx, side="right")
    pos = idx - starts[cyc]
    values = flat[offsets[lengths[cyc] - 1] + pos]
    cycle_starts = starts[starts < steps]
    return values, cycle_starts
