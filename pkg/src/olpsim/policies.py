"""Accept/reject policies driven by dual prices.

All five policies share one decision rule: accept an order exactly when
its reward strictly beats its consumption priced at the current dual
vector and enough capacity remains (ties reject).  They differ in how
the price is formed:

* alg1: one price from an independent training stream, held fixed,
* alg2: re-solved on the observed prefix at geometrically spaced steps,
* alg3: like alg2 with capacity shrunk by a safety margin that decays
  as the schedule progresses,
* alg4: re-solved after every arrival with leftover capacity spread
  over the remaining horizon,
* alg5: at schedule points, fits a linear trend to observed rewards,
  extrapolates the remaining stream, and prices the leftover horizon.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, replace
from typing import ClassVar, Union

import numpy as np

from ._kernels import history_policy_kernel
from .core import DualPrice, Instance, RunResult
from .dual_solver import DualProblem, SolverConfig, solve_dual
from .inputs import InputSpec, gen_instance

__all__ = [
    "Decision",
    "dual_decision",
    "geometric_schedule",
    "fit_trend",
    "Alg1",
    "Alg2",
    "Alg3",
    "Alg4",
    "Alg5",
    "PolicyKind",
    "POLICY_NAMES",
    "make_policy",
    "run_alg1",
    "run_alg2",
    "run_alg3",
    "run_alg4",
    "run_alg5",
    "run_policy",
    "replay_fixed_duals",
]

# fixed perturbation so the training stream never collides with the
# evaluation stream of the same seed
_TRAIN_SEED_XOR = 0x5EED1D


class Decision(enum.Enum):
    ACCEPT = "accept"
    REJECT_PRICE = "reject_price"
    REJECT_CAPACITY = "reject_capacity"


def dual_decision(reward: float, consumption: np.ndarray, price: np.ndarray | DualPrice,
                  leftover: np.ndarray) -> Decision:
    """Single-order rule: price test first (ties reject), then capacity."""
    if isinstance(price, DualPrice):
        price = price.values
    if not reward > float(consumption @ price):
        return Decision.REJECT_PRICE
    if np.all(leftover >= consumption):
        return Decision.ACCEPT
    return Decision.REJECT_CAPACITY


def geometric_schedule(n: int) -> list[int]:
    """Update steps floor(delta^k), k = 1..L-1, with delta = n^(1/L) in
    (1, 2] and L = ceil(log2 n); duplicates collapse.  Empty for n <= 2,
    where only the initial all-reject stretch exists."""
    if n < 1:
        raise ValueError("n must be >= 1")
    if n <= 2:
        return []
    L = math.ceil(math.log2(n))
    delta = n ** (1.0 / L)
    pts: list[int] = []
    for k in range(1, L):
        t = int(math.floor(delta**k + 1e-9))
        if t >= 1 and (not pts or t > pts[-1]):
            pts.append(t)
    return pts


def fit_trend(times: np.ndarray, values: np.ndarray) -> tuple[float, float]:
    """Least-squares line through (times, values); returns (slope,
    intercept).  Needs at least two points with distinct times."""
    t = np.asarray(times, dtype=float)
    v = np.asarray(values, dtype=float)
    if t.ndim != 1 or t.shape != v.shape:
        raise ValueError("times and values must be matching 1-d arrays")
    if t.shape[0] < 2:
        raise ValueError("need at least two points")
    t_mean = t.mean()
    var = float(((t - t_mean) ** 2).sum())
    if var <= 0.0:
        raise ValueError("times must not be constant")
    slope = float(((t - t_mean) * (v - v.mean())).sum()) / var
    intercept = float(v.mean() - slope * t_mean)
    return slope, intercept


# ---------------------------------------------------------------------------
# policy descriptors
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Alg1:
    """Fixed price learned from an independent training stream."""

    train_multiplier: int = 10
    name: ClassVar[str] = "alg1"

    def __post_init__(self):
        if self.train_multiplier < 1:
            raise ValueError("train_multiplier must be >= 1")


@dataclass(frozen=True)
class Alg2:
    """Prefix duals re-solved on the geometric schedule."""

    name: ClassVar[str] = "alg2"


@dataclass(frozen=True)
class Alg3:
    """Schedule duals with shrunken capacity; epsilon = 0 reduces to alg2."""

    epsilon: float = 0.1
    name: ClassVar[str] = "alg3"

    def __post_init__(self):
        if not 0.0 <= self.epsilon < 1.0:
            raise ValueError("epsilon must be in [0, 1)")


@dataclass(frozen=True)
class Alg4:
    """Per-step re-solving with leftover capacity over the remaining
    horizon; the per-step subgradient budget is capped."""

    step_iterations: int = 50
    name: ClassVar[str] = "alg4"

    def __post_init__(self):
        if self.step_iterations < 1:
            raise ValueError("step_iterations must be >= 1")


@dataclass(frozen=True)
class Alg5:
    """Trend extrapolation plus leftover-horizon pricing on the schedule."""

    name: ClassVar[str] = "alg5"


PolicyKind = Union[Alg1, Alg2, Alg3, Alg4, Alg5]

POLICY_NAMES: dict[str, type] = {
    "alg1": Alg1,
    "alg2": Alg2,
    "alg3": Alg3,
    "alg4": Alg4,
    "alg5": Alg5,
}


def make_policy(name: str, *, alg3_epsilon: float = 0.1, alg1_train_mult: int = 10,
                alg4_step_iterations: int = 50) -> PolicyKind:
    """Policy descriptor from its CLI name."""
    if name not in POLICY_NAMES:
        raise ValueError(f"unknown policy {name!r}; choose from {sorted(POLICY_NAMES)}")
    if name == "alg1":
        return Alg1(train_multiplier=alg1_train_mult)
    if name == "alg3":
        return Alg3(epsilon=alg3_epsilon)
    if name == "alg4":
        return Alg4(step_iterations=alg4_step_iterations)
    return POLICY_NAMES[name]()


# ---------------------------------------------------------------------------
# shared run plumbing
# ---------------------------------------------------------------------------

def _norm_threshold(inst: Instance) -> float:
    """Largest consumption row norm; a leftover below it marks depletion."""
    return float(np.linalg.norm(inst.consumption, axis=1).max())


def _scan_fixed(inst: Instance, price: np.ndarray, start: int, end: int,
                leftover: np.ndarray, decisions: np.ndarray,
                revenue_curve: np.ndarray, revenue: float,
                depletion: int, thresh: float) -> tuple[float, int]:
    """Apply the decision rule with a fixed price on 0-based steps
    [start, end); mutates leftover/decisions/revenue_curve."""
    if end > start:
        margins = inst.rewards[start:end] - inst.consumption[start:end] @ price
        for off in range(end - start):
            t0 = start + off
            if margins[off] > 0.0:
                row = inst.consumption[t0]
                if np.all(leftover >= row):
                    decisions[t0] = 1
                    revenue += float(inst.rewards[t0])
                    leftover -= row
            revenue_curve[t0] = revenue
            if depletion > t0 and float(leftover.min()) < thresh:
                depletion = t0 + 1
    return revenue, depletion


def _reject_stretch(revenue_curve: np.ndarray, start: int, end: int, revenue: float) -> None:
    revenue_curve[start:end] = revenue


def _result(name: str, inst: Instance, decisions, revenue_curve, leftover,
            depletion, dual_steps, dual_prices, dual_solves, nonconv,
            stalls: int = 0) -> RunResult:
    return RunResult(
        policy=name,
        decisions=decisions,
        revenue=float(revenue_curve[-1]) if inst.n else 0.0,
        leftover=leftover,
        depletion_time=int(depletion),
        dual_steps=np.asarray(dual_steps, dtype=np.int64),
        dual_prices=np.asarray(dual_prices, dtype=float).reshape(len(dual_steps), inst.m),
        revenue_curve=revenue_curve,
        dual_solves=int(dual_solves),
        solver_nonconverged=int(nonconv),
        solver_stalls=int(stalls),
    )


def run_alg1(inst: Instance, spec: InputSpec, cfg: SolverConfig, seed: int,
             train_multiplier: int = 10) -> RunResult:
    """Train a fixed price on an independent stream, then scan once.

    The training stream uses the same family spec at ``train_multiplier``
    times the horizon, seeded by the run seed XOR a fixed constant, and
    prices via the sample-average dual with the run's per-period
    capacities."""
    if spec.horizon != inst.n:
        raise ValueError("spec horizon must match the instance")
    train_spec = replace(spec, horizon=train_multiplier * inst.n)
    train = gen_instance(train_spec, int(seed) ^ _TRAIN_SEED_XOR)
    prob = DualProblem(rewards=train.rewards, consumption=train.consumption,
                       d=inst.d, scale=1.0 / train.n)
    res = solve_dual(prob, cfg)
    price = res.price.values

    n = inst.n
    decisions = np.zeros(n, dtype=np.uint8)
    revenue_curve = np.zeros(n)
    leftover = inst.b.copy()
    thresh = _norm_threshold(inst)
    depletion = 1 if float(leftover.min()) < thresh else n
    revenue, depletion = _scan_fixed(inst, price, 0, n, leftover, decisions,
                                     revenue_curve, 0.0, depletion, thresh)
    return _result("alg1", inst, decisions, revenue_curve, leftover, depletion,
                   [1], [price], 1, 0 if res.converged else 1)


def _run_scheduled(name: str, inst: Instance, cfg: SolverConfig,
                   shrink: float | None) -> RunResult:
    """Shared body of alg2/alg3: prefix duals at schedule points.

    ``shrink`` is the safety coefficient (None for alg2); capacity used
    in the dual at step t_k is d * max(0, 1 - shrink * sqrt(n / t_k)).
    """
    n = inst.n
    pts = geometric_schedule(n)
    decisions = np.zeros(n, dtype=np.uint8)
    revenue_curve = np.zeros(n)
    leftover = inst.b.copy()
    thresh = _norm_threshold(inst)
    depletion = 1 if float(leftover.min()) < thresh else n
    revenue = 0.0
    burn_end = pts[0] if pts else n
    _reject_stretch(revenue_curve, 0, burn_end, revenue)

    dual_steps: list[int] = []
    dual_prices: list[np.ndarray] = []
    nonconv = 0
    warm = None
    for k, tk in enumerate(pts):
        d_k = inst.d
        if shrink is not None:
            d_k = d_k * max(0.0, 1.0 - shrink * math.sqrt(n / tk))
        prob = DualProblem(rewards=inst.rewards[:tk], consumption=inst.consumption[:tk],
                           d=d_k, scale=1.0 / tk)
        res = solve_dual(prob, cfg, warm=warm)
        warm = res.price.values
        if not res.converged:
            nonconv += 1
        seg_end = pts[k + 1] if k + 1 < len(pts) else n
        dual_steps.append(tk + 1)
        dual_prices.append(warm)
        revenue, depletion = _scan_fixed(inst, warm, tk, seg_end, leftover, decisions,
                                         revenue_curve, revenue, depletion, thresh)
    return _result(name, inst, decisions, revenue_curve, leftover, depletion,
                   dual_steps, dual_prices, len(pts), nonconv)


def run_alg2(inst: Instance, cfg: SolverConfig = SolverConfig()) -> RunResult:
    """Reject through the first schedule point, then hold each prefix
    dual price until the next point."""
    return _run_scheduled("alg2", inst, cfg, shrink=None)


def run_alg3(inst: Instance, cfg: SolverConfig = SolverConfig(),
             epsilon: float = 0.1) -> RunResult:
    """alg2 with capacities shrunk by epsilon * sqrt(n / t_k) in each
    dual solve; prices start high and relax as the factor decays."""
    if not 0.0 <= epsilon < 1.0:
        raise ValueError("epsilon must be in [0, 1)")
    return _run_scheduled("alg3", inst, cfg, shrink=epsilon)


def run_alg4(inst: Instance, cfg: SolverConfig = SolverConfig(),
             step_iterations: int = 50) -> RunResult:
    """Per-step re-solving policy (compiled loop).

    The price for step t+1 minimizes the prefix dual with capacity
    leftover/(n-t); solves are warm-started, budgeted by
    ``step_iterations`` after the first.  A solve that keeps its warm
    point is recorded as a stall (usually the warm point was already
    optimal), never as a failure."""
    n, m = inst.n, inst.m
    iters_first = cfg.iteration_budget(1, m)
    decisions, prices, leftover, revenue_curve, depletion, stalls = history_policy_kernel(
        inst.rewards, inst.consumption, inst.b.copy(),
        _norm_threshold(inst), iters_first, int(step_iterations),
    )
    return _result("alg4", inst, decisions.astype(np.uint8), revenue_curve,
                   leftover, depletion, np.arange(1, n + 1), prices,
                   n - 1 if n > 1 else 0, 0, stalls)


def run_alg5(inst: Instance, cfg: SolverConfig = SolverConfig()) -> RunResult:
    """Trend-adaptive policy on the geometric schedule.

    At each schedule point the observed rewards are fit with a least
    squares line and the unseen tail is replaced by extrapolated rewards
    and mean consumption; the leftover-capacity dual over the remaining
    horizon (current order included) sets the next segment's price.
    When the prefix is too short to fit, the segment trades at price
    zero."""
    n, m = inst.n, inst.m
    pts = geometric_schedule(n)
    decisions = np.zeros(n, dtype=np.uint8)
    revenue_curve = np.zeros(n)
    leftover = inst.b.copy()
    thresh = _norm_threshold(inst)
    depletion = 1 if float(leftover.min()) < thresh else n
    revenue = 0.0
    burn_end = pts[0] if pts else n
    _reject_stretch(revenue_curve, 0, burn_end, revenue)

    dual_steps: list[int] = []
    dual_prices: list[np.ndarray] = []
    solves = 0
    nonconv = 0
    warm = None
    for k, tk in enumerate(pts):
        seg_end = pts[k + 1] if k + 1 < len(pts) else n
        try:
            slope, intercept = fit_trend(np.arange(1, tk + 1), inst.rewards[:tk])
        except ValueError:
            price = np.zeros(m)
        else:
            future = np.arange(tk + 1, n + 1, dtype=float)
            hat_rewards = np.concatenate([inst.rewards[tk - 1:tk], slope * future + intercept])
            mean_row = inst.consumption[:tk].mean(axis=0)
            hat_cons = np.vstack([inst.consumption[tk - 1:tk],
                                  np.broadcast_to(mean_row, (n - tk, m))])
            prob = DualProblem(rewards=hat_rewards, consumption=hat_cons,
                               d=leftover.copy(), scale=1.0)
            res = solve_dual(prob, cfg, warm=warm)
            solves += 1
            if not res.converged:
                nonconv += 1
            price = res.price.values
            warm = price
        dual_steps.append(tk + 1)
        dual_prices.append(price)
        revenue, depletion = _scan_fixed(inst, price, tk, seg_end, leftover, decisions,
                                         revenue_curve, revenue, depletion, thresh)
    return _result("alg5", inst, decisions, revenue_curve, leftover, depletion,
                   dual_steps, dual_prices, solves, nonconv)


def run_policy(policy: PolicyKind, inst: Instance, spec: InputSpec | None,
               cfg: SolverConfig, seed: int) -> RunResult:
    """Dispatch on the policy descriptor.  ``spec`` and ``seed`` feed the
    training stream of alg1 and are ignored by the others."""
    if isinstance(policy, Alg1):
        if spec is None:
            raise ValueError("alg1 needs the input spec for its training stream")
        return run_alg1(inst, spec, cfg, seed, policy.train_multiplier)
    if isinstance(policy, Alg2):
        return run_alg2(inst, cfg)
    if isinstance(policy, Alg3):
        return run_alg3(inst, cfg, policy.epsilon)
    if isinstance(policy, Alg4):
        return run_alg4(inst, cfg, policy.step_iterations)
    if isinstance(policy, Alg5):
        return run_alg5(inst, cfg)
    raise TypeError(f"unknown policy object {policy!r}")


def replay_fixed_duals(inst: Instance, dual_steps: np.ndarray, dual_prices: np.ndarray,
                       b: np.ndarray | None = None) -> tuple[np.ndarray, float, np.ndarray]:
    """Re-run the decision rule against a recorded price trajectory.

    Steps before the first trajectory entry reject unconditionally,
    mirroring the schedule policies' burn-in.  Capacity may be replaced
    to probe how decisions shift with more or less budget.  Returns
    (decisions, revenue, leftover)."""
    n = inst.n
    b = inst.b if b is None else np.asarray(b, dtype=float)
    leftover = b.copy()
    decisions = np.zeros(n, dtype=np.uint8)
    revenue_curve = np.zeros(n)
    thresh = _norm_threshold(inst)
    revenue = 0.0
    depletion = n
    steps = np.asarray(dual_steps, dtype=np.int64)
    if steps.size == 0:
        return decisions, 0.0, leftover
    for k in range(steps.size):
        start = int(steps[k]) - 1
        end = int(steps[k + 1]) - 1 if k + 1 < steps.size else n
        price = np.asarray(dual_prices[k], dtype=float)
        revenue, depletion = _scan_fixed(inst, price, start, end, leftover, decisions,
                                         revenue_curve, revenue, depletion, thresh)
    return decisions, revenue, leftover
