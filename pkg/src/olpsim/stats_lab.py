"""Empirical checks of the statistical guarantees behind the policies.

Three experiment families live here: an exponential tail bound for
time-averages of regenerative processes (a bound calculator with a
free-parameter optimizer plus a Monte-Carlo verifier), a long-run-average
sanity check on a doubling horizon grid, and the convergence rate of
sample-dual prices toward the long-run price.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np
from scipy import stats as _scipy_stats

from .core import DualPrice
from .dual_solver import DualProblem, SolveResult, SolverConfig, solve_dual
from .inputs import (InputKind, InputSpec, RegenSpec, gen_instance,
                     gen_regenerative_path, true_cycle_mean)

__all__ = [
    "ConcentrationParams",
    "concentration_bound",
    "DeltaSearch",
    "optimize_delta",
    "TailEstimate",
    "empirical_tail",
    "LlnReport",
    "lln_experiment",
    "reference_dual",
    "ConvergenceReport",
    "dual_convergence_experiment",
    "default_concentration_configs",
]

_Z_99 = float(_scipy_stats.norm.ppf(0.995))


@dataclass(frozen=True)
class ConcentrationParams:
    """Inputs to the regenerative tail bound.

    ``rate`` is the regeneration rate in cycles per unit time, i.e. the
    reciprocal of the mean cycle length.  ``value_bound`` caps |f| on the
    path, ``cycle_bound`` caps every cycle length, ``strength`` (> 2) and
    ``delta`` (inside (0, rate)) are the bound's free parameters.
    """

    epsilon: float
    t: float
    value_bound: float
    cycle_bound: float
    rate: float
    strength: float
    delta: float

    def __post_init__(self):
        if not (self.epsilon > 0.0):
            raise ValueError("epsilon must be positive")
        if not (self.value_bound > 0.0 and self.cycle_bound > 0.0):
            raise ValueError("value and cycle bounds must be positive")
        if not (self.rate > 0.0):
            raise ValueError("rate must be positive")
        if not (self.strength > 2.0):
            raise ValueError("strength parameter must exceed 2")
        if not (0.0 < self.delta < self.rate):
            raise ValueError("delta must lie strictly between 0 and the rate")
        floor = self.cycle_bound * self.value_bound * self.strength / self.epsilon
        if not (self.t > floor):
            raise ValueError(
                f"horizon {self.t} too small: needs t > {floor} for these parameters")


def _exp(x: float) -> float:
    # math.exp overflows past ~709.8; the bound is simply huge there
    if x > 709.0:
        return math.inf
    return math.exp(x)


def concentration_bound(params: ConcentrationParams,
                        value_range: tuple[float, float] | None = None) -> float:
    """Tail bound on P(|time-average - true mean| > epsilon).

    Returned raw: the formula upper-bounds a probability but may exceed
    1 (or 2) for weak parameters.  With ``value_range`` = (a, b) the
    one-sided variant is evaluated instead: the leading term loses its
    factor 2 and uses the interval width in place of the value bound,
    while ``params.value_bound`` should be max(|a|, |b|).
    """
    eps, t = params.epsilon, params.t
    m_val, t_cyc = params.value_bound, params.cycle_bound
    lam, k, delta = params.rate, params.strength, params.delta

    if value_range is None:
        lead_coeff, width = 2.0, m_val
    else:
        a, b = value_range
        if not (b > a):
            raise ValueError("value_range must have b > a")
        lead_coeff, width = 1.0, b - a

    lead = lead_coeff * _exp(
        -2.0 * eps * eps * (k - 2.0) ** 2 / (k * k * lam * width * width * t_cyc * t_cyc) * t)
    miscount = 2.0 * _exp(
        -delta * delta * t / ((lam - delta) ** 2 * lam * lam * t_cyc * t_cyc))
    overshoot = _exp((2.0 * delta * m_val - (k - 2.0) / k * eps) * t)
    return lead + miscount + overshoot


@dataclass(frozen=True)
class DeltaSearch:
    delta: float
    bound: float
    convex: bool


def optimize_delta(epsilon: float, t: float, value_bound: float, cycle_bound: float,
                   rate: float, strength: float, grid_size: int = 256,
                   value_range: tuple[float, float] | None = None) -> DeltaSearch:
    """Grid-minimize the bound over delta in the open interval (0, rate).

    Endpoints are excluded by a half-pitch inset.  The ``convex`` flag
    reports whether second differences on the finite part of the grid
    stay above -1e-9 (the bound is claimed convex in delta).
    """
    if grid_size < 2:
        raise ValueError("grid_size must be at least 2")
    pitch = rate / grid_size
    deltas = (np.arange(grid_size) + 0.5) * pitch
    values = np.empty(grid_size)
    for i, d in enumerate(deltas):
        p = ConcentrationParams(epsilon=epsilon, t=t, value_bound=value_bound,
                                cycle_bound=cycle_bound, rate=rate,
                                strength=strength, delta=float(d))
        values[i] = concentration_bound(p, value_range=value_range)
    best = int(np.argmin(values))
    finite = np.isfinite(values)
    ok = finite[2:] & finite[1:-1] & finite[:-2]
    with np.errstate(invalid="ignore"):
        d2 = values[2:] - 2.0 * values[1:-1] + values[:-2]
    convex = bool(np.all(d2[ok] >= -1e-9))
    return DeltaSearch(delta=float(deltas[best]), bound=float(values[best]), convex=convex)


# ---------------------------------------------------------------------------
# Monte-Carlo verification
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class TailEstimate:
    p_hat: float
    ci_halfwidth: float
    trials: int


def empirical_tail(spec: RegenSpec, epsilon: float, t: int, trials: int,
                   seed: int) -> TailEstimate:
    """Monte-Carlo tail probability of the time-average deviation.

    Estimates P(|(1/t) sum(f_i - alpha)| > epsilon) over independent
    seeded paths, with a 99% normal-approximation binomial half-width.
    """
    if trials < 100:
        raise ValueError("need at least 100 trials")
    alpha = true_cycle_mean(spec)
    hits = 0
    for trial in range(trials):
        values, _ = gen_regenerative_path(spec, t, seed, stream=trial)
        if abs(values.mean() - alpha) > epsilon:
            hits += 1
    p_hat = hits / trials
    half = _Z_99 * math.sqrt(p_hat * (1.0 - p_hat) / trials)
    return TailEstimate(p_hat=p_hat, ci_halfwidth=half, trials=trials)


@dataclass(frozen=True)
class LlnReport:
    t_grid: np.ndarray
    median_abs_dev: np.ndarray


def lln_experiment(spec: RegenSpec, t_grid, trials: int = 100,
                   seed: int = 0) -> LlnReport:
    """Median |path average - true mean| per horizon, doubling-grid style."""
    grid = np.asarray(list(t_grid), dtype=np.int64)
    alpha = true_cycle_mean(spec)
    medians = np.empty(grid.size)
    for gi, t in enumerate(grid):
        devs = np.empty(trials)
        for trial in range(trials):
            values, _ = gen_regenerative_path(spec, int(t), seed, stream=gi * trials + trial)
            devs[trial] = abs(values.mean() - alpha)
        medians[gi] = float(np.median(devs))
    return LlnReport(t_grid=grid, median_abs_dev=medians)


# ---------------------------------------------------------------------------
# dual convergence
# ---------------------------------------------------------------------------

def _require_stationary(spec: InputSpec):
    if spec.kind not in (InputKind.QUANTITY_DEPENDENT,
                         InputKind.QUANTITY_INDEPENDENT,
                         InputKind.IID_PRICE):
        raise ValueError("long-run dual prices need a stationary input kind (1-3)")


def reference_dual(spec: InputSpec, sample_size: int = 10 ** 6,
                   cfg: SolverConfig = SolverConfig(), seed: int = 0) -> DualPrice:
    """Long-run price approximated on one long sample stream.

    The sample dual uses the per-step capacity implied by ``spec``, so
    the answer does not depend on ``spec.horizon``.  Exact routes raise
    on solver failure.
    """
    _require_stationary(spec)
    inst = gen_instance(replace(spec, horizon=sample_size), seed)
    res = solve_dual(DualProblem.sample_average(inst), cfg)
    return res.price


@dataclass(frozen=True, eq=False)
class ConvergenceReport:
    n_grid: np.ndarray
    mean_sq_distance: np.ndarray
    slope: float
    slope_defined: bool
    nonconverged: int
    reference: DualPrice


def dual_convergence_experiment(spec: InputSpec, n_grid, seeds,
                                cfg: SolverConfig = SolverConfig(),
                                reference: DualPrice | None = None,
                                reference_size: int = 10 ** 6,
                                reference_seed: int = 10 ** 9 + 7) -> ConvergenceReport:
    """Mean squared distance of sample-dual prices to the long-run price.

    Each (n, seed) draws a fresh n-order stream, solves its sample dual,
    and records the squared distance to the reference.  The slope is a
    least-squares fit of log(mean squared distance) against log(n);
    it is flagged undefined for degenerate grids or zero distances.
    """
    _require_stationary(spec)
    grid = [int(n) for n in n_grid]
    seed_list = [int(s) for s in seeds]
    if reference is None:
        reference = reference_dual(spec, reference_size, cfg, reference_seed)
    ref = reference.values
    msq = np.empty(len(grid))
    nonconv = 0
    for gi, n in enumerate(grid):
        sq = np.empty(len(seed_list))
        for si, seed in enumerate(seed_list):
            inst = gen_instance(replace(spec, horizon=n), seed)
            res = solve_dual(DualProblem.sample_average(inst), cfg)
            if not res.converged:
                nonconv += 1
            diff = res.price.values - ref
            sq[si] = float(diff @ diff)
        msq[gi] = float(sq.mean())
    defined = len(grid) >= 2 and bool(np.all(msq > 0.0)) and len(set(grid)) >= 2
    if defined:
        slope = float(np.polyfit(np.log(np.asarray(grid, dtype=float)), np.log(msq), 1)[0])
    else:
        slope = math.nan
    return ConvergenceReport(n_grid=np.asarray(grid, dtype=np.int64),
                             mean_sq_distance=msq, slope=slope,
                             slope_defined=defined, nonconverged=nonconv,
                             reference=reference)


# ---------------------------------------------------------------------------
# canonical tail-check configurations
# ---------------------------------------------------------------------------

def default_concentration_configs() -> list[tuple[RegenSpec, float, int, float]]:
    """Ten (spec, epsilon, t, strength) combinations satisfying the
    bound's horizon precondition; shared by the lab command and the
    acceptance run."""
    two_cycle = RegenSpec(length_probs=(0.5, 0.5),
                          value_table=((1.0,), (0.0, 1.0)), value_bound=1.0)
    three_mix = RegenSpec(length_probs=(0.3, 0.4, 0.3),
                          value_table=((1.0,), (-0.5, 0.5), (1.0, 0.0, -1.0)),
                          value_bound=1.0)
    skew = RegenSpec(length_probs=(0.7, 0.2, 0.1),
                     value_table=((0.5,), (1.0, -1.0), (0.0, 0.5, 1.0)),
                     value_bound=1.0)
    wide = RegenSpec(length_probs=(0.25, 0.25, 0.25, 0.25),
                     value_table=((2.0,), (0.0, 2.0), (2.0, 1.0, 0.0),
                                  (0.0, 1.0, 2.0, 1.0)), value_bound=2.0)
    short = RegenSpec(length_probs=(0.9, 0.1),
                      value_table=((1.0,), (-1.0, 1.0)), value_bound=1.0)
    return [
        (two_cycle, 0.25, 600, 10.0),
        (two_cycle, 0.40, 400, 8.0),
        (three_mix, 0.20, 900, 10.0),
        (three_mix, 0.30, 700, 12.0),
        (three_mix, 0.50, 500, 16.0),
        (skew, 0.25, 800, 10.0),
        (skew, 0.35, 600, 12.0),
        (wide, 0.50, 1500, 12.0),
        (wide, 0.70, 1200, 16.0),
        (short, 0.30, 500, 10.0),
    ]
