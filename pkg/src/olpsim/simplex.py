"""Dense tableau simplex with Bland's rule.

Small exact LP core used for cross-checking the iterative dual solver
and for hindsight optima on modest instances.  Two wrappers are exposed:
the epigraph form of the piecewise-linear dual objective, and the boxed
packing LP it is dual to.  Bland's entering/leaving rule keeps the walk
cycle-free at the cost of speed, which is fine at these sizes.
"""

from __future__ import annotations

import numpy as np

__all__ = [
    "SimplexError",
    "UnboundedError",
    "simplex_min",
    "solve_epigraph_lp",
    "solve_packing_lp",
]

_PIVOT_TOL = 1e-9
_COST_TOL = 1e-10


class SimplexError(RuntimeError):
    pass


class UnboundedError(SimplexError):
    pass


def simplex_min(c: np.ndarray, A: np.ndarray, b: np.ndarray, basis: np.ndarray,
                max_pivots: int | None = None) -> tuple[float, np.ndarray, int]:
    """Minimize c.z subject to A z = b, z >= 0 from a given feasible basis.

    The starting basis columns must form a diagonal +-1 matrix (each row
    owns one basic variable), which covers every LP built in this module.
    Returns (objective, z, pivot count).
    """
    k, nv = A.shape
    basis = np.asarray(basis, dtype=np.int64).copy()
    if basis.shape != (k,):
        raise ValueError("need one basic variable per row")
    T = np.empty((k, nv + 1))
    T[:, :nv] = A
    T[:, nv] = b
    # normalize rows so each basic column is +1 on its own row
    for i in range(k):
        pivot = T[i, basis[i]]
        if abs(abs(pivot) - 1.0) > 1e-12 or np.count_nonzero(A[:, basis[i]]) != 1:
            raise ValueError("starting basis must be diagonal +-1")
        if pivot < 0:
            T[i] = -T[i]
    if np.any(T[:, nv] < -1e-9):
        raise ValueError("starting basis is infeasible")
    np.maximum(T[:, nv], 0.0, out=T[:, nv])

    cost = c.astype(float).copy()
    # reduced costs for the starting basis
    for i in range(k):
        ci = cost[basis[i]]
        if ci != 0.0:
            cost -= ci * T[i, :nv]
    if max_pivots is None:
        max_pivots = 2000 + 40 * (k + nv)

    pivots = 0
    while True:
        negatives = np.nonzero(cost < -_COST_TOL)[0]
        if negatives.size == 0:
            break
        enter = int(negatives[0])  # Bland: smallest index
        col = T[:, enter]
        rows = np.nonzero(col > _PIVOT_TOL)[0]
        if rows.size == 0:
            raise UnboundedError(f"column {enter} unbounded")
        ratios = T[rows, nv] / col[rows]
        best = ratios.min()
        tie = rows[ratios <= best + 1e-12]
        leave = int(tie[np.argmin(basis[tie])])  # Bland tie-break
        pivots += 1
        if pivots > max_pivots:
            raise SimplexError(f"pivot budget exhausted after {pivots} pivots")
        piv = T[leave, enter]
        T[leave] /= piv
        colvals = T[:, enter].copy()
        colvals[leave] = 0.0
        T -= np.outer(colvals, T[leave])
        cost_enter = cost[enter]
        if cost_enter != 0.0:
            cost -= cost_enter * T[leave, :nv]
        basis[leave] = enter

    z = np.zeros(nv)
    z[basis] = T[:, nv]
    value = float(c @ z)
    return value, z, pivots


def solve_epigraph_lp(rewards: np.ndarray, consumption: np.ndarray, d: np.ndarray,
                      scale: float) -> tuple[float, np.ndarray, int]:
    """Exact minimum of  d.p + scale * sum_j max(r_j - a_j.p, 0)  over p >= 0.

    Epigraph variables y_j >= r_j - a_j.p turn the objective into the LP
    min d.p + scale * sum y  with per-order rows  a_j.p + y_j - s_j = r_j.
    Rows whose reward is negative start with the surplus variable basic,
    so no phase-one pass is needed.  Returns (value, p, pivots).
    """
    r = np.asarray(rewards, dtype=float)
    A = np.asarray(consumption, dtype=float)
    k, m = A.shape
    nv = m + 2 * k
    M = np.zeros((k, nv))
    M[:, :m] = A
    idx = np.arange(k)
    M[idx, m + idx] = 1.0
    M[idx, m + k + idx] = -1.0
    c = np.zeros(nv)
    c[:m] = d
    c[m:m + k] = scale
    basis = np.where(r >= 0, m + idx, m + k + idx)
    value, z, pivots = simplex_min(c, M, r, basis)
    return value, z[:m], pivots


def solve_packing_lp(rewards: np.ndarray, consumption: np.ndarray,
                     b: np.ndarray) -> tuple[float, np.ndarray, int]:
    """Exact maximum of  r.x  s.t.  consumption.T x <= b, 0 <= x <= 1.

    Fractional acceptance levels are allowed; this is the hindsight
    allocation LP.  Returns (value, x, pivots).
    """
    r = np.asarray(rewards, dtype=float)
    A = np.asarray(consumption, dtype=float)
    n, m = A.shape
    nv = 2 * n + m
    rows = m + n
    M = np.zeros((rows, nv))
    M[:m, :n] = A.T
    M[:m, n:n + m] = np.eye(m)
    M[m:, :n] = np.eye(n)
    M[m:, n + m:] = np.eye(n)
    rhs = np.concatenate([b, np.ones(n)])
    c = np.zeros(nv)
    c[:n] = -r
    basis = np.concatenate([np.arange(n, n + m), np.arange(n + m, nv)])
    value, z, pivots = simplex_min(c, M, rhs, basis)
    return -value, z[:n], pivots
