"""Loop-style kernels compiled with numba.

Signatures and return values mirror ``_numpy`` exactly.
"""

from __future__ import annotations

import math

import numpy as np
from numba import njit


@njit(cache=True)
def _height_at(obs, x, y):
    h = 0.0
    for m in range(obs.shape[0]):
        u = (x - obs[m, 0]) / obs[m, 3]
        v = (y - obs[m, 1]) / obs[m, 4]
        h += obs[m, 2] * math.exp(-(u * u + v * v))
    return h


@njit(cache=True)
def _obstacle_height_flat(obs, x, y):
    out = np.empty(x.size)
    for i in range(x.size):
        out[i] = _height_at(obs, x[i], y[i])
    return out


def obstacle_height(obs, x, y):
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    shape = np.broadcast(x, y).shape
    xf = np.ascontiguousarray(np.broadcast_to(x, shape)).reshape(-1)
    yf = np.ascontiguousarray(np.broadcast_to(y, shape)).reshape(-1)
    return _obstacle_height_flat(obs, xf, yf).reshape(shape)


@njit(cache=True)
def hover_eval(points, pc, pt, dev_xy, dev_energy, dev_data,
               d_max, gamma, tau, beta0, alpha, kappa, c_los, d_los,
               bandwidth, noise, rate_th):
    P, M = points.shape[0], points.shape[1]
    N = dev_xy.shape[0]
    assign = np.full((P, N), -1, dtype=np.int64)
    tc = np.zeros((P, M))
    tdc = np.zeros((P, M))
    counts = np.zeros((P, M), dtype=np.int64)
    rate_short = np.zeros(P)
    for p in range(P):
        for i in range(N):
            best = -1
            best_d = np.inf
            for j in range(M):
                dx = dev_xy[i, 0] - points[p, j, 0]
                dy = dev_xy[i, 1] - points[p, j, 1]
                z = points[p, j, 2]
                d = math.sqrt(dx * dx + dy * dy + z * z)
                if d <= d_max and d < best_d:
                    best = j
                    best_d = d
            if best < 0:
                continue
            assign[p, i] = best
            counts[p, best] += 1
            mu = gamma / (best_d + tau) ** 2
            t_charge = dev_energy[i] / (mu * pc[p, best])
            if t_charge > tc[p, best]:
                tc[p, best] = t_charge
            ratio = min(points[p, best, 2] / best_d, 1.0)
            theta = math.degrees(math.asin(ratio))
            p_los = 1.0 / (1.0 + c_los * math.exp(-d_los * (theta - c_los)))
            gain = (p_los + (1.0 - p_los) * kappa) * beta0 * best_d ** (-alpha)
            rate = bandwidth * math.log2(1.0 + pt[p, i] * gain / noise)
            tdc[p, best] += dev_data[i] / rate
            if rate < rate_th:
                rate_short[p] += (rate_th - rate) / rate_th
    return assign, tc, tdc, counts, rate_short


@njit(cache=True)
def _dominates(F, viol, a, b):
    fa = viol[a] <= 0.0
    fb = viol[b] <= 0.0
    if fa and not fb:
        return True
    if fb and not fa:
        return False
    if not fa:
        return viol[a] < viol[b]
    strict = False
    for k in range(F.shape[1]):
        if F[a, k] > F[b, k]:
            return False
        if F[a, k] < F[b, k]:
            strict = True
    return strict


@njit(cache=True)
def nondominated_ranks(F, viol):
    n = F.shape[0]
    dom_count = np.zeros(n, dtype=np.int64)
    dominated_by = np.zeros((n, n), dtype=np.bool_)
    for a in range(n):
        for b in range(n):
            if a != b and _dominates(F, viol, a, b):
                dominated_by[a, b] = True
                dom_count[b] += 1
    ranks = np.zeros(n, dtype=np.int64)
    current = np.empty(n, dtype=np.int64)
    size = 0
    for a in range(n):
        if dom_count[a] == 0:
            current[size] = a
            size += 1
            ranks[a] = 1
    rank = 1
    nxt = np.empty(n, dtype=np.int64)
    while size > 0:
        nsize = 0
        for t in range(size):
            a = current[t]
            for b in range(n):
                if dominated_by[a, b]:
                    dom_count[b] -= 1
                    if dom_count[b] == 0:
                        ranks[b] = rank + 1
                        nxt[nsize] = b
                        nsize += 1
        rank += 1
        current, nxt = nxt, current
        size = nsize
    return ranks


@njit(cache=True)
def _segment_ceiling(obs, ax, ay, bx, by):
    # Upper bound on terrain over the segment's xy bounding box.
    h = 0.0
    x0, x1 = min(ax, bx), max(ax, bx)
    y0, y1 = min(ay, by), max(ay, by)
    for m in range(obs.shape[0]):
        cx, cy = obs[m, 0], obs[m, 1]
        u = (max(x0 - cx, 0.0, cx - x1)) / obs[m, 3]
        v = (max(y0 - cy, 0.0, cy - y1)) / obs[m, 4]
        h += obs[m, 2] * math.exp(-(u * u + v * v))
    return h * (1.0 + 1e-12) + 1e-12


@njit(cache=True)
def polyline_penetration(polylines, obs, step):
    P, L = polylines.shape[0], polylines.shape[1]
    count = np.zeros(P, dtype=np.int64)
    total = np.zeros(P)
    for p in range(P):
        for s in range(L - 1):
            ax, ay, az = polylines[p, s, 0], polylines[p, s, 1], polylines[p, s, 2]
            bx, by, bz = polylines[p, s + 1, 0], polylines[p, s + 1, 1], polylines[p, s + 1, 2]
            seg = math.sqrt((bx - ax) ** 2 + (by - ay) ** 2 + (bz - az) ** 2)
            n = max(int(math.ceil(seg / step)), 1)
            # walk in chunks, skipping any whose bounding box clears the terrain
            for c0 in range(0, n + 1, 16):
                c1 = min(c0 + 15, n)
                t0, t1 = c0 / n, c1 / n
                px0, py0, pz0 = ax + (bx - ax) * t0, ay + (by - ay) * t0, az + (bz - az) * t0
                px1, py1, pz1 = ax + (bx - ax) * t1, ay + (by - ay) * t1, az + (bz - az) * t1
                if _segment_ceiling(obs, px0, py0, px1, py1) < min(pz0, pz1):
                    continue
                for i in range(c0, c1 + 1):
                    t = i / n
                    x = ax + (bx - ax) * t
                    y = ay + (by - ay) * t
                    z = az + (bz - az) * t
                    depth = _height_at(obs, x, y) - z
                    if depth >= 0.0:
                        count[p] += 1
                        total[p] += depth
    return count, total


@njit(cache=True)
def escape_waypoints(pos, gbest, pbest, uniforms, vmax, lo, hi, lift_step, obs):
    pos = pos.copy()
    n, cap = uniforms.shape[0], uniforms.shape[1]
    iters = np.zeros(n, dtype=np.int64)
    for w in range(n):
        ao = 0
        while _height_at(obs, pos[w, 0], pos[w, 1]) >= pos[w, 2] and ao < cap:
            for c in range(3):
                diff = gbest[w, c] - pos[w, c]
                sgn = 1.0 if diff > 0.0 else (-1.0 if diff < 0.0 else 0.0)
                gap = abs(gbest[w, c] - pbest[w, c])
                mag = min(gap, uniforms[w, ao, 3 + c] * vmax)
                v = pos[w, c] + sgn * uniforms[w, ao, c] * mag
                pos[w, c] = min(max(v, lo[c]), hi[c])
            ao += 1
            if ao % 10 == 0:
                pos[w, 2] = min(pos[w, 2] + lift_step * (ao // 10), hi[2])
        iters[w] = ao
        if _height_at(obs, pos[w, 0], pos[w, 1]) >= pos[w, 2]:
            pos[w, 2] = hi[2]
    return pos, iters
