"""Shared data model for sequential resource allocation runs.

An instance is a finite sequence of orders, each carrying a scalar reward
and a nonnegative consumption row over ``m`` resources, plus an initial
capacity vector.  Policies walk the sequence once and decide accept or
reject per order; everything downstream (solvers, experiment harness,
statistics) speaks in terms of these containers.
"""

from __future__ import annotations

import io
from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "Order",
    "Instance",
    "Bounds",
    "DualPrice",
    "RunResult",
    "RegretReport",
    "validate_instance",
    "generation_bounds",
    "instance_to_text",
    "instance_from_text",
]


@dataclass(frozen=True)
class Order:
    """One arrival: a reward and the resource amounts it would consume.

    ``consumption`` may be a view into a shared instance array; treat it
    as read-only.
    """

    reward: float
    consumption: np.ndarray

    def __post_init__(self):
        cons = np.asarray(self.consumption, dtype=float)
        if cons.ndim != 1:
            raise ValueError("consumption must be a 1-d vector")
        if not np.all(np.isfinite(cons)) or np.any(cons < 0):
            raise ValueError("consumption entries must be finite and >= 0")
        if not np.isfinite(self.reward):
            raise ValueError("reward must be finite")
        object.__setattr__(self, "consumption", cons)


class _OrderView:
    """Sequence facade over the packed reward/consumption arrays."""

    __slots__ = ("_rewards", "_consumption")

    def __init__(self, rewards: np.ndarray, consumption: np.ndarray):
        self._rewards = rewards
        self._consumption = consumption

    def __len__(self) -> int:
        return self._rewards.shape[0]

    def __getitem__(self, j):
        if isinstance(j, slice):
            return [self[i] for i in range(*j.indices(len(self)))]
        return Order(float(self._rewards[j]), self._consumption[j])

    def __iter__(self):
        for j in range(len(self)):
            yield self[j]


@dataclass(frozen=True, eq=False)
class Instance:
    """A run's full input: n orders over m resources plus capacities.

    Rewards and consumption rows are stored packed (``rewards`` shape
    ``(n,)``, ``consumption`` shape ``(n, m)``) so large instances stay
    cheap; ``orders`` exposes the per-order view.  ``d`` is the
    per-period capacity ``b / n`` and is derived, never stored.
    """

    rewards: np.ndarray
    consumption: np.ndarray
    b: np.ndarray

    def __post_init__(self):
        rewards = np.ascontiguousarray(self.rewards, dtype=float)
        cons = np.ascontiguousarray(self.consumption, dtype=float)
        b = np.ascontiguousarray(self.b, dtype=float)
        if rewards.ndim != 1 or cons.ndim != 2 or b.ndim != 1:
            raise ValueError("rewards (n,), consumption (n, m), b (m,) required")
        n = rewards.shape[0]
        if n < 1:
            raise ValueError("need at least one order")
        if cons.shape != (n, b.shape[0]):
            raise ValueError(
                f"consumption shape {cons.shape} does not match "
                f"n={n}, m={b.shape[0]}"
            )
        if not (np.all(np.isfinite(rewards)) and np.all(np.isfinite(cons)) and np.all(np.isfinite(b))):
            raise ValueError("instance data must be finite")
        if np.any(cons < 0):
            raise ValueError("consumption entries must be >= 0")
        if np.any(b <= 0):
            raise ValueError("capacities must be positive")
        object.__setattr__(self, "rewards", rewards)
        object.__setattr__(self, "consumption", cons)
        object.__setattr__(self, "b", b)

    @property
    def n(self) -> int:
        return self.rewards.shape[0]

    @property
    def m(self) -> int:
        return self.b.shape[0]

    @property
    def d(self) -> np.ndarray:
        """Per-period capacity b / n."""
        return self.b / self.n

    @property
    def orders(self) -> _OrderView:
        return _OrderView(self.rewards, self.consumption)

    def order(self, j: int) -> Order:
        return self.orders[j]


@dataclass(frozen=True)
class Bounds:
    """Regime box an instance is validated against.

    ``reward_max`` caps rewards, ``row_norm_max`` caps the Euclidean norm
    of each consumption row, and per-period capacities must fall strictly
    inside ``(d_min, d_max)``.
    """

    reward_max: float = 5.0
    row_norm_max: float = float("inf")
    d_min: float = 0.05
    d_max: float = 1.0


def validate_instance(inst: Instance, bounds: Bounds) -> list[str]:
    """Check an instance against a bounds box; return violation strings.

    Violations are data, not errors: the list is empty iff the instance
    sits inside the box.  Each entry names the broken bound and the
    offending index.
    """
    report: list[str] = []
    if inst.n <= inst.m:
        report.append(f"n>m violated: n={inst.n}, m={inst.m}")
    d = inst.d
    for i in range(inst.m):
        if not (bounds.d_min < d[i] < bounds.d_max):
            report.append(
                f"per-period capacity bound violated at resource {i}: "
                f"d={d[i]!r} not in ({bounds.d_min!r}, {bounds.d_max!r})"
            )
    bad_reward = np.nonzero((inst.rewards < 0) | (inst.rewards > bounds.reward_max))[0]
    for j in bad_reward:
        report.append(f"reward bound violated at order {j}: r={inst.rewards[j]!r}")
    norms = np.linalg.norm(inst.consumption, axis=1)
    bad_norm = np.nonzero(norms > bounds.row_norm_max)[0]
    for j in bad_norm:
        report.append(f"consumption norm bound violated at order {j}: |a|={norms[j]!r}")
    return report


def generation_bounds(inst: Instance) -> Bounds:
    """Bounds box matched to a generated instance.

    The reward cap is the default 5.0 stretched to the observed maximum
    when the input family produces larger rewards (composite and trending
    prices do).  The row-norm cap is the observed maximum, since the
    consumption samplers are unbounded above.  Capacity bounds keep their
    defaults unless the instance's d falls outside, in which case they
    are widened symmetrically.
    """
    reward_max = max(5.0, float(inst.rewards.max()))
    row_norm_max = float(np.linalg.norm(inst.consumption, axis=1).max())
    d = inst.d
    d_min, d_max = 0.05, 1.0
    if float(d.min()) <= d_min:
        d_min = float(d.min()) / 2.0
    if float(d.max()) >= d_max:
        d_max = float(d.max()) * 2.0
    return Bounds(reward_max=reward_max, row_norm_max=row_norm_max, d_min=d_min, d_max=d_max)


@dataclass(frozen=True)
class DualPrice:
    """Nonnegative price vector over resources."""

    values: np.ndarray

    def __post_init__(self):
        vals = np.ascontiguousarray(self.values, dtype=float)
        if vals.ndim != 1:
            raise ValueError("price vector must be 1-d")
        if not np.all(np.isfinite(vals)) or np.any(vals < 0):
            raise ValueError("price entries must be finite and >= 0")
        object.__setattr__(self, "values", vals)

    @property
    def m(self) -> int:
        return self.values.shape[0]

    def in_price_region(self, bounds: Bounds) -> bool:
        """Membership in the compact region {p >= 0, sum(p) <= reward_max / d_min}."""
        return bool(self.values.sum() <= bounds.reward_max / bounds.d_min + 1e-12)


@dataclass(frozen=True, eq=False)
class RunResult:
    """Everything one policy run produced.

    ``dual_steps[k]`` is the first step index (1-based) at which
    ``dual_prices[k]`` was in force; prices are piecewise constant in
    between.  Policies that reject unconditionally before their first
    solve have no trajectory entry for that burn-in stretch.
    ``depletion_time`` is the first step after which some leftover
    capacity drops below the largest consumption row norm of the
    instance, or n if that never happens.  ``solver_nonconverged``
    counts solves whose method flagged failure; ``solver_stalls`` counts
    warm-started micro-solves that kept their warm point, which is
    diagnostic only.
    """

    policy: str
    decisions: np.ndarray
    revenue: float
    leftover: np.ndarray
    depletion_time: int
    dual_steps: np.ndarray
    dual_prices: np.ndarray
    revenue_curve: np.ndarray
    dual_solves: int = 0
    solver_nonconverged: int = 0
    solver_stalls: int = 0

    @property
    def n(self) -> int:
        return self.decisions.shape[0]

    @property
    def dual_trajectory(self) -> list[tuple[int, DualPrice]]:
        return [
            (int(t), DualPrice(self.dual_prices[k].copy()))
            for k, t in enumerate(self.dual_steps)
        ]


@dataclass(frozen=True, eq=False)
class RegretReport:
    """Aggregated paired regret across seeds for one policy.

    All arrays are indexed by the horizon grid.  ``mean_binding_leftover``
    sums leftover capacity over resources whose hindsight dual price
    exceeds the binding threshold, averaged over seeds.
    """

    policy: str
    horizon_grid: np.ndarray
    mean_regret: np.ndarray
    regret_std: np.ndarray
    mean_exit_gap: np.ndarray
    mean_binding_leftover: np.ndarray
    seeds: tuple[int, ...]


# ---------------------------------------------------------------------------
# plain-text round trip
# ---------------------------------------------------------------------------

def instance_to_text(inst: Instance) -> str:
    """Serialize: header line ``n m b_1 .. b_m``, then one ``r a_1 .. a_m``
    line per order.  Floats use repr so the round trip is exact."""
    out = io.StringIO()
    head = [str(inst.n), str(inst.m)] + [repr(float(x)) for x in inst.b]
    out.write(" ".join(head) + "\n")
    for j in range(inst.n):
        row = [repr(float(inst.rewards[j]))] + [repr(float(x)) for x in inst.consumption[j]]
        out.write(" ".join(row) + "\n")
    return out.getvalue()


def instance_from_text(text: str) -> Instance:
    """Inverse of :func:`instance_to_text`."""
    lines = [ln for ln in text.strip().splitlines() if ln.strip()]
    if not lines:
        raise ValueError("empty instance text")
    head = lines[0].split()
    if len(head) < 2:
        raise ValueError("header must be 'n m b_1 .. b_m'")
    n, m = int(head[0]), int(head[1])
    if len(head) != 2 + m:
        raise ValueError(f"header capacity count {len(head) - 2} does not match m={m}")
    b = np.array([float(x) for x in head[2:]])
    if len(lines) != 1 + n:
        raise ValueError(f"expected {n} order lines, found {len(lines) - 1}")
    rewards = np.empty(n)
    consumption = np.empty((n, m))
    for j, ln in enumerate(lines[1:]):
        parts = ln.split()
        if len(parts) != 1 + m:
            raise ValueError(f"order line {j} has {len(parts)} fields, expected {1 + m}")
        rewards[j] = float(parts[0])
        consumption[j] = [float(x) for x in parts[1:]]
    return Instance(rewards=rewards, consumption=consumption, b=b)
