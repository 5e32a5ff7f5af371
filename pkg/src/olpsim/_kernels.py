"""Compiled inner loop for the per-step re-solving policy.

The action-history-dependent policy re-solves a shrinking-horizon dual
after every arrival, which is quadratic work in the horizon; this module
keeps that loop in one jitted function.  The subgradient passes are
written branchless so LLVM can vectorize the resource dimension.  When
numba is unavailable the same code runs as plain Python, slow but
identical in shape.
"""

from __future__ import annotations

import numpy as np

try:  # pragma: no cover - exercised implicitly by import
    from numba import njit

    NUMBA_AVAILABLE = True
except ImportError:  # pragma: no cover
    NUMBA_AVAILABLE = False

    def njit(*args, **kwargs):
        if args and callable(args[0]):
            return args[0]

        def wrap(f):
            return f

        return wrap


@njit(cache=True, fastmath=True)
def _fg_prefix(rewards, A, t, d, scale, p, g):
    """Objective and subgradient of the prefix dual at p; g is written in
    place, the objective is returned."""
    m = d.shape[0]
    f = 0.0
    for i in range(m):
        g[i] = d[i]
        f += d[i] * p[i]
    for j in range(t):
        s = 0.0
        for i in range(m):
            s += A[j, i] * p[i]
        slack = rewards[j] - s
        w = scale if slack > 0.0 else 0.0
        f += w * slack
        for i in range(m):
            g[i] -= w * A[j, i]
    return f


@njit(cache=True, fastmath=True)
def _g_prefix(rewards, A, t, d, scale, p, g):
    m = d.shape[0]
    for i in range(m):
        g[i] = d[i]
    for j in range(t):
        s = 0.0
        for i in range(m):
            s += A[j, i] * p[i]
        w = scale if rewards[j] > s else 0.0
        for i in range(m):
            g[i] -= w * A[j, i]


@njit(cache=True, fastmath=True)
def _f_prefix(rewards, A, t, d, scale, p):
    m = d.shape[0]
    f = 0.0
    for i in range(m):
        f += d[i] * p[i]
    for j in range(t):
        s = 0.0
        for i in range(m):
            s += A[j, i] * p[i]
        slack = rewards[j] - s
        if slack > 0.0:
            f += scale * slack
    return f


@njit(cache=True)
def _project_cap(p, cap):
    m = p.shape[0]
    total = 0.0
    for i in range(m):
        if p[i] < 0.0:
            p[i] = 0.0
        total += p[i]
    if cap > 0.0 and total > cap:
        ratio = cap / total
        for i in range(m):
            p[i] *= ratio


@njit(cache=True)
def _prefix_subgrad_solve(rewards, A, t, d, scale, rplus, warm, iters, out):
    """One warm-started projected-subgradient solve of the prefix dual.

    Step sizes are c / sqrt(iter) with c set from the warm point; the
    candidate returned is the best of {warm, last iterate, tail average}.
    Writes the winner to ``out``; returns 1.0 when the warm point was
    never improved (a stall, usually meaning it was already optimal),
    else 0.0.
    """
    m = d.shape[0]
    dmin = d[0]
    for i in range(1, m):
        if d[i] < dmin:
            dmin = d[i]
    cap = scale * rplus / dmin if dmin > 0.0 else -1.0  # -1 disables the cap

    p = np.empty(m)
    g = np.empty(m)
    avg = np.zeros(m)
    for i in range(m):
        p[i] = warm[i]
    f_warm = _fg_prefix(rewards, A, t, d, scale, p, g)
    gnorm = 0.0
    for i in range(m):
        gnorm += g[i] * g[i]
    gnorm = np.sqrt(gnorm)
    c = (f_warm if f_warm > 1e-12 else 1e-12) / (gnorm if gnorm > 1e-12 else 1e-12)

    half = iters // 2
    navg = 0
    for it in range(1, iters + 1):
        step = c / np.sqrt(it)
        for i in range(m):
            p[i] -= step * g[i]
        _project_cap(p, cap)
        if it > half:
            navg += 1
            for i in range(m):
                avg[i] += p[i]
        _g_prefix(rewards, A, t, d, scale, p, g)

    best_f = f_warm
    for i in range(m):
        out[i] = warm[i]
    stalled = 1.0
    f_last = _f_prefix(rewards, A, t, d, scale, p)
    if f_last < best_f:
        best_f = f_last
        stalled = 0.0
        for i in range(m):
            out[i] = p[i]
    if navg > 0:
        for i in range(m):
            avg[i] /= navg
        f_avg = _f_prefix(rewards, A, t, d, scale, avg)
        if f_avg < best_f:
            best_f = f_avg
            stalled = 0.0
            for i in range(m):
                out[i] = avg[i]
    return stalled


@njit(cache=True)
def history_policy_kernel(rewards, A, b0, norm_thresh, iters_first, iters_rest):
    """Full run of the per-step re-solving policy.

    Price starts at zero; after each step t < n the prefix dual with
    leftover capacity spread over the remaining horizon is re-solved by
    warm-started subgradient steps.  Returns (decisions, prices used at
    each step, leftover, revenue curve, depletion step, stall count).
    A stall is a solve that kept its warm point; it is diagnostic, not a
    failure.
    """
    n, m = A.shape
    decisions = np.zeros(n, dtype=np.uint8)
    prices = np.zeros((n, m))
    revenue_curve = np.zeros(n)
    leftover = b0.copy()
    p = np.zeros(m)
    p_next = np.zeros(m)
    d_step = np.empty(m)
    revenue = 0.0
    depletion = n
    stalls = 0
    rplus = 0.0

    for t0 in range(n):
        t = t0 + 1
        for i in range(m):
            prices[t0, i] = p[i]
        s = 0.0
        for i in range(m):
            s += A[t0, i] * p[i]
        if rewards[t0] > s:
            fits = True
            for i in range(m):
                if leftover[i] < A[t0, i]:
                    fits = False
                    break
            if fits:
                decisions[t0] = 1
                revenue += rewards[t0]
                for i in range(m):
                    leftover[i] -= A[t0, i]
        revenue_curve[t0] = revenue
        if depletion == n:
            lo = leftover[0]
            for i in range(1, m):
                if leftover[i] < lo:
                    lo = leftover[i]
            if lo < norm_thresh:
                depletion = t
        if rewards[t0] > 0.0:
            rplus += rewards[t0]
        if t < n:
            for i in range(m):
                d_step[i] = leftover[i] / (n - t)
            iters = iters_first if t == 1 else iters_rest
            stalled = _prefix_subgrad_solve(
                rewards, A, t, d_step, 1.0 / t, rplus, p, iters, p_next
            )
            if stalled > 0.5:
                stalls += 1
            for i in range(m):
                p[i] = p_next[i]

    return decisions, prices, leftover, revenue_curve, depletion, stalls
