"""Piecewise-linear dual minimization.

The central object is the convex program

    minimize_{p >= 0}   d . p  +  scale * sum_j max(r_j - a_j . p, 0)

whose minimizer prices the resources: an order is worth taking when its
reward clears its consumption priced at p.  Per-period capacities with
``scale = 1/k`` give the sample-average form; ``d = b`` with
``scale = 1`` gives the hindsight (offline) form whose value equals the
fractional packing optimum by LP duality.

Four routes are provided: a projected subgradient method, the exact
dense epigraph simplex (small k), the HiGHS-backed epigraph LP (any k),
and a brute-force grid oracle for m <= 2 used to certify the others.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np
from scipy import sparse
from scipy.optimize import linprog

from .core import DualPrice, Instance
from .simplex import solve_epigraph_lp

__all__ = [
    "DualProblem",
    "SolverConfig",
    "SolveResult",
    "dual_objective",
    "dual_subgradient",
    "solve_dual",
    "oracle_grid_min",
    "lipschitz_bound",
    "offline_optimum",
    "offline_dual",
]

# switch the HiGHS backend from simplex to interior-point above this row
# count; crossover keeps interior-point solutions vertex-exact
_HIGHS_IPM_CUTOFF = 4000
_MAX_ITER_CAP = 100_000


@dataclass(frozen=True)
class DualProblem:
    """Data of one dual minimization."""

    rewards: np.ndarray
    consumption: np.ndarray
    d: np.ndarray
    scale: float

    def __post_init__(self):
        r = np.ascontiguousarray(self.rewards, dtype=float)
        A = np.ascontiguousarray(self.consumption, dtype=float)
        d = np.ascontiguousarray(self.d, dtype=float)
        if r.ndim != 1 or A.ndim != 2 or d.ndim != 1:
            raise ValueError("rewards (k,), consumption (k, m), d (m,) required")
        if A.shape != (r.shape[0], d.shape[0]):
            raise ValueError("consumption shape does not match rewards/d")
        if r.shape[0] < 1:
            raise ValueError("need at least one order")
        if np.any(d < 0):
            raise ValueError("d must be >= 0")
        if not self.scale > 0:
            raise ValueError("scale must be positive")
        object.__setattr__(self, "rewards", r)
        object.__setattr__(self, "consumption", A)
        object.__setattr__(self, "d", d)

    @property
    def k(self) -> int:
        return self.rewards.shape[0]

    @property
    def m(self) -> int:
        return self.d.shape[0]

    @classmethod
    def sample_average(cls, inst: Instance) -> "DualProblem":
        """Per-period form: d = b/n, plus-part averaged over the n orders."""
        return cls(rewards=inst.rewards, consumption=inst.consumption,
                   d=inst.d, scale=1.0 / inst.n)

    @classmethod
    def hindsight(cls, inst: Instance) -> "DualProblem":
        """Un-normalized form whose value is the offline optimum."""
        return cls(rewards=inst.rewards, consumption=inst.consumption,
                   d=inst.b, scale=1.0)

    def region_cap(self) -> float:
        """Simplex radius containing every minimizer.

        At any minimizer, d.p <= f(p) <= f(0) = scale * sum r^+, so the
        coordinate sum is at most that over min(d).  Infinite when some
        d entry is zero.
        """
        dmin = float(self.d.min())
        if dmin <= 0.0:
            return math.inf
        plus = float(np.maximum(self.rewards, 0.0).sum())
        return self.scale * plus / dmin


@dataclass(frozen=True)
class SolverConfig:
    """Knobs for :func:`solve_dual`.

    ``method`` is one of "auto", "projected_subgradient",
    "epigraph_simplex", "epigraph_highs".  Auto picks the HiGHS epigraph
    LP (exact at any size).  ``max_iterations`` defaults to
    ``min(100000, ceil(20 m sqrt(k)))`` and only matters for the
    subgradient route.  ``simplex_size_cap`` bounds the dense tableau.
    """

    method: str = "auto"
    objective_tolerance: float = 1e-8
    max_iterations: int | None = None
    warm_start: bool = True
    simplex_size_cap: int = 2000

    def __post_init__(self):
        if self.method not in ("auto", "projected_subgradient", "epigraph_simplex", "epigraph_highs"):
            raise ValueError(f"unknown method {self.method!r}")
        if self.objective_tolerance <= 0:
            raise ValueError("objective_tolerance must be positive")
        if self.max_iterations is not None and self.max_iterations < 1:
            raise ValueError("max_iterations must be >= 1")

    def iteration_budget(self, k: int, m: int) -> int:
        if self.max_iterations is not None:
            return min(self.max_iterations, _MAX_ITER_CAP)
        return min(_MAX_ITER_CAP, int(math.ceil(20.0 * m * math.sqrt(k))))


@dataclass(frozen=True)
class SolveResult:
    price: DualPrice
    objective: float
    iterations: int
    converged: bool
    method: str


def dual_objective(prob: DualProblem, p: np.ndarray | DualPrice) -> float:
    if isinstance(p, DualPrice):
        p = p.values
    p = np.asarray(p, dtype=float)
    slack = prob.rewards - prob.consumption @ p
    return float(prob.d @ p + prob.scale * np.maximum(slack, 0.0).sum())


def _objective_batch(prob: DualProblem, P: np.ndarray) -> np.ndarray:
    """Objective at each row of P, vectorized over the grid."""
    slack = prob.rewards[None, :] - P @ prob.consumption.T
    np.maximum(slack, 0.0, out=slack)
    return P @ prob.d + prob.scale * slack.sum(axis=1)


def dual_subgradient(prob: DualProblem, p: np.ndarray | DualPrice) -> np.ndarray:
    """Subgradient with the right-continuous selection at breakpoints:
    an order contributes only while its reward strictly beats its priced
    consumption."""
    if isinstance(p, DualPrice):
        p = p.values
    p = np.asarray(p, dtype=float)
    active = prob.rewards - prob.consumption @ p > 0.0
    return prob.d - prob.scale * (prob.consumption.T @ active.astype(float))


def lipschitz_bound(prob: DualProblem) -> float:
    """sum(d) + scale * sum of row L1 norms bounds the objective's
    Lipschitz constant in the max-norm."""
    return float(prob.d.sum() + prob.scale * np.abs(prob.consumption).sum())


def _project(p: np.ndarray, cap: float) -> np.ndarray:
    np.maximum(p, 0.0, out=p)
    if math.isfinite(cap):
        total = p.sum()
        if total > cap and total > 0.0:
            p *= cap / total
    return p


def _solve_subgradient(prob: DualProblem, cfg: SolverConfig,
                       warm: np.ndarray | None) -> SolveResult:
    budget = cfg.iteration_budget(prob.k, prob.m)
    cap = prob.region_cap()
    p = np.zeros(prob.m) if warm is None else _project(warm.astype(float).copy(), cap)
    f0 = dual_objective(prob, p)
    g = dual_subgradient(prob, p)
    gnorm = float(np.linalg.norm(g))
    step_scale = max(f0, 1e-12) / max(gnorm, 1e-12)

    best_obj = f0
    best_p = p.copy()
    half = budget // 2
    avg = np.zeros(prob.m)
    navg = 0
    obj_at_half = f0
    for it in range(1, budget + 1):
        step = step_scale / math.sqrt(it)
        p = _project(p - step * g, cap)
        if it > half:
            avg += p
            navg += 1
        f = dual_objective(prob, p)
        if f < best_obj:
            best_obj = f
            best_p = p.copy()
        if it == half:
            obj_at_half = best_obj
        g = dual_subgradient(prob, p)
    if navg:
        p_avg = avg / navg
        f_avg = dual_objective(prob, p_avg)
        if f_avg < best_obj:
            best_obj = f_avg
            best_p = p_avg
    plateau = obj_at_half - best_obj
    converged = plateau <= cfg.objective_tolerance * (1.0 + abs(best_obj))
    return SolveResult(price=DualPrice(best_p), objective=best_obj,
                       iterations=budget, converged=converged,
                       method="projected_subgradient")


def _solve_highs(prob: DualProblem, cfg: SolverConfig) -> SolveResult:
    k, m = prob.k, prob.m
    c = np.concatenate([prob.d, np.full(k, prob.scale)])
    G = sparse.hstack(
        [sparse.csr_matrix(-prob.consumption), -sparse.eye(k, format="csr")],
        format="csr",
    )
    method = "highs-ds" if k <= _HIGHS_IPM_CUTOFF else "highs-ipm"
    res = linprog(c, A_ub=G, b_ub=-prob.rewards, bounds=(0, None), method=method)
    if res.status != 0:
        raise RuntimeError(f"epigraph LP failed: status={res.status} {res.message}")
    p = np.maximum(res.x[:m], 0.0)
    return SolveResult(price=DualPrice(p), objective=float(res.fun),
                       iterations=int(res.nit), converged=True,
                       method="epigraph_highs")


def _solve_simplex(prob: DualProblem, cfg: SolverConfig) -> SolveResult:
    if prob.k > cfg.simplex_size_cap:
        raise ValueError(
            f"dense simplex capped at {cfg.simplex_size_cap} orders, got {prob.k}"
        )
    value, p, pivots = solve_epigraph_lp(prob.rewards, prob.consumption, prob.d, prob.scale)
    return SolveResult(price=DualPrice(np.maximum(p, 0.0)), objective=value,
                       iterations=pivots, converged=True, method="epigraph_simplex")


def solve_dual(prob: DualProblem, cfg: SolverConfig = SolverConfig(),
               warm: np.ndarray | DualPrice | None = None) -> SolveResult:
    """Minimize the dual objective; route picked by ``cfg.method``.

    ``warm`` seeds the subgradient iteration when warm starts are
    enabled; the exact routes ignore it.  The returned price always lies
    in the nonnegative orthant, inside the region cap when one exists.
    """
    if isinstance(warm, DualPrice):
        warm = warm.values
    if not cfg.warm_start:
        warm = None
    method = cfg.method
    if method == "auto":
        method = "epigraph_highs"
    if method == "epigraph_highs":
        return _solve_highs(prob, cfg)
    if method == "epigraph_simplex":
        return _solve_simplex(prob, cfg)
    return _solve_subgradient(prob, cfg, warm)


def oracle_grid_min(prob: DualProblem, pitch: float,
                    sum_cap: float | None = None) -> tuple[float, DualPrice]:
    """Brute-force oracle: evaluate the objective on a grid of the region
    {p >= 0, sum(p) <= cap} and return the best point.

    Only m <= 2 is supported; the grid error is bounded by the objective
    Lipschitz constant times the pitch.  ``sum_cap`` defaults to the
    problem's own region cap and must be finite.
    """
    if prob.m > 2:
        raise ValueError("grid oracle supports m <= 2 only")
    if pitch <= 0:
        raise ValueError("pitch must be positive")
    cap = prob.region_cap() if sum_cap is None else float(sum_cap)
    if not math.isfinite(cap):
        raise ValueError("need a finite sum cap (some d entry is zero)")
    axis = np.arange(0.0, cap + pitch, pitch)
    axis = axis[axis <= cap + 1e-12]
    best_val = math.inf
    best_p = np.zeros(prob.m)
    if prob.m == 1:
        P = axis[:, None]
        for chunk in np.array_split(P, max(1, P.shape[0] // 200_000)):
            vals = _objective_batch(prob, chunk)
            i = int(np.argmin(vals))
            if vals[i] < best_val:
                best_val = float(vals[i])
                best_p = chunk[i].copy()
    else:
        for p1 in axis:
            p2 = axis[axis <= cap - p1 + 1e-12]
            if p2.size == 0:
                continue
            P = np.column_stack([np.full(p2.size, p1), p2])
            vals = _objective_batch(prob, P)
            i = int(np.argmin(vals))
            if vals[i] < best_val:
                best_val = float(vals[i])
                best_p = P[i].copy()
    return best_val, DualPrice(best_p)


def offline_dual(inst: Instance, cfg: SolverConfig = SolverConfig()) -> tuple[float, SolveResult]:
    """Hindsight optimum and the dual price certifying it.

    Solved on the un-normalized form (d = b, scale = 1); by LP duality
    the value equals the fractional packing optimum, and any inexactness
    in an iterative route only ever reports a value above the truth.
    """
    prob = DualProblem.hindsight(inst)
    res = solve_dual(prob, cfg)
    return res.objective, res


def offline_optimum(inst: Instance, cfg: SolverConfig = SolverConfig()) -> float:
    value, _ = offline_dual(inst, cfg)
    return value
