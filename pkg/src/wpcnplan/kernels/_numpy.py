"""Vectorized numpy implementations of the hot kernels.

Every function here has a loop-style twin in ``_numba``; both take and
return the same arrays so the test-suite can cross-check them.
"""

from __future__ import annotations

import numpy as np


def obstacle_height(obs, x, y):
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    out = np.zeros(x.shape, dtype=np.float64)
    for m in range(obs.shape[0]):
        cx, cy, h, sx, sy = obs[m]
        out += h * np.exp(-(((x - cx) / sx) ** 2 + ((y - cy) / sy) ** 2))
    return out


def hover_eval(points, pc, pt, dev_xy, dev_energy, dev_data,
               d_max, gamma, tau, beta0, alpha, kappa, c_los, d_los,
               bandwidth, noise, rate_th):
    P, M, _ = points.shape
    N = dev_xy.shape[0]
    dx = dev_xy[None, :, 0, None] - points[:, None, :, 0]
    dy = dev_xy[None, :, 1, None] - points[:, None, :, 1]
    z = points[:, None, :, 2]
    d = np.sqrt(dx * dx + dy * dy + z * z)  # (P, N, M)

    masked = np.where(d <= d_max, d, np.inf)
    nearest = np.argmin(masked, axis=2)
    dn = np.take_along_axis(masked, nearest[..., None], axis=2)[..., 0]
    covered = np.isfinite(dn)
    assign = np.where(covered, nearest, -1).astype(np.int64)

    tc = np.zeros((P, M))
    tdc = np.zeros((P, M))
    counts = np.zeros((P, M), dtype=np.int64)
    rate_short = np.zeros(P)

    p_idx, i_idx = np.nonzero(covered)
    if p_idx.size == 0:
        return assign, tc, tdc, counts, rate_short
    j_idx = nearest[p_idx, i_idx]
    dd = dn[p_idx, i_idx]
    zz = points[p_idx, j_idx, 2]

    mu = gamma / (dd + tau) ** 2
    t_charge = dev_energy[i_idx] / (mu * pc[p_idx, j_idx])

    theta = np.degrees(np.arcsin(np.minimum(zz / dd, 1.0)))
    p_los = 1.0 / (1.0 + c_los * np.exp(-d_los * (theta - c_los)))
    gain = (p_los + (1.0 - p_los) * kappa) * beta0 * dd ** (-alpha)
    rate = bandwidth * np.log2(1.0 + pt[p_idx, i_idx] * gain / noise)
    t_collect = dev_data[i_idx] / rate

    flat = p_idx * M + j_idx
    tc_flat = tc.reshape(-1)
    np.maximum.at(tc_flat, flat, t_charge)
    tdc[:] = np.bincount(flat, weights=t_collect, minlength=P * M).reshape(P, M)
    counts[:] = np.bincount(flat, minlength=P * M).reshape(P, M)
    short = np.maximum(rate_th - rate, 0.0) / rate_th
    rate_short[:] = np.bincount(p_idx, weights=short, minlength=P)
    return assign, tc, tdc, counts, rate_short


def dominance_matrix(F, viol):
    """``dom[a, b]`` is True when a constrained-dominates b."""
    feas = viol <= 0.0
    le = np.all(F[:, None, :] <= F[None, :, :], axis=2)
    lt = np.any(F[:, None, :] < F[None, :, :], axis=2)
    pareto = le & lt
    both_feas = feas[:, None] & feas[None, :]
    a_only = feas[:, None] & ~feas[None, :]
    both_inf = ~feas[:, None] & ~feas[None, :]
    less_viol = viol[:, None] < viol[None, :]
    return (both_feas & pareto) | a_only | (both_inf & less_viol)


def nondominated_ranks(F, viol):
    n = F.shape[0]
    dom = dominance_matrix(F, viol)
    ranks = np.zeros(n, dtype=np.int64)
    remaining = np.ones(n, dtype=bool)
    rank = 1
    while remaining.any():
        dominated = (dom & remaining[:, None]).any(axis=0)
        front = remaining & ~dominated
        ranks[front] = rank
        remaining &= ~front
        rank += 1
    return ranks


def polyline_penetration(polylines, obs, step):
    """Per polyline: (violating sample count, summed penetration depth)."""
    P, L, _ = polylines.shape
    a = polylines[:, :-1, :]
    b = polylines[:, 1:, :]
    seg = np.linalg.norm(b - a, axis=2)
    nseg = np.maximum(np.ceil(seg / step), 1).astype(np.int64)
    reps = (nseg + 1).reshape(-1)
    owner = np.repeat(np.arange(P * (L - 1)), reps)
    starts = np.cumsum(reps) - reps
    i = np.arange(owner.size) - starts[owner]
    t = i / nseg.reshape(-1)[owner]
    a_flat = a.reshape(-1, 3)[owner]
    b_flat = b.reshape(-1, 3)[owner]
    pts = a_flat + (b_flat - a_flat) * t[:, None]
    depth = obstacle_height(obs, pts[:, 0], pts[:, 1]) - pts[:, 2]
    bad = depth >= 0.0
    poly = owner // (L - 1)
    count = np.bincount(poly[bad], minlength=P).astype(np.int64)
    total = np.bincount(poly[bad], weights=depth[bad], minlength=P)
    return count, total


def escape_waypoints(pos, gbest, pbest, uniforms, vmax, lo, hi, lift_step, obs):
    pos = pos.copy()
    n, cap, _ = uniforms.shape
    iters = np.zeros(n, dtype=np.int64)
    active = obstacle_height(obs, pos[:, 0], pos[:, 1]) >= pos[:, 2]
    gap = np.abs(gbest - pbest)
    direction = np.sign(gbest - pos)
    ao = 0
    while active.any() and ao < cap:
        idx = np.flatnonzero(active)
        r4 = uniforms[idx, ao, 0:3]
        r5 = uniforms[idx, ao, 3:6]
        direction[idx] = np.sign(gbest[idx] - pos[idx])
        disp = direction[idx] * r4 * np.minimum(gap[idx], r5 * vmax)
        pos[idx] = np.clip(pos[idx] + disp, lo, hi)
        ao += 1
        iters[idx] = ao
        if ao % 10 == 0:
            pos[idx, 2] = np.minimum(pos[idx, 2] + lift_step * (ao // 10), hi[2])
        still = obstacle_height(obs, pos[idx, 0], pos[idx, 1]) >= pos[idx, 2]
        active[idx] = still
    if active.any():
        pos[active, 2] = hi[2]
    return pos, iters
