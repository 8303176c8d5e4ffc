"""Naive pure-Python reference implementations.

Each function is the textbook double loop with no vectorization, kept
deliberately simple so the fast paths can be checked against it.
"""

from __future__ import annotations

import math


def _rows(P):
    return [tuple(float(v) for v in p) for p in P]


def sqdist(a, b) -> float:
    dx, dy, dz = a[0] - b[0], a[1] - b[1], a[2] - b[2]
    return dx * dx + dy * dy + dz * dz


def knn(P, query, k, exclude_self=False):
    P, query = _rows(P), _rows(query)
    out = []
    for i, q in enumerate(query):
        cand = [(sqdist(q, p), j) for j, p in enumerate(P) if not (exclude_self and j == i)]
        cand.sort()
        out.append([j for _, j in cand[:k]])
    return out


def fps(P, m, start=0):
    P = _rows(P)
    picked = [start]
    mind = [sqdist(p, P[start]) for p in P]
    while len(picked) < m:
        best, best_d = 0, -1.0
        for j, d in enumerate(mind):
            if d > best_d:
                best, best_d = j, d
        picked.append(best)
        mind = [min(d, sqdist(p, P[best])) for d, p in zip(mind, P)]
    return picked


def _nn_sq(src, dst):
    return [min(sqdist(a, b) for b in dst) for a in src]


def chamfer(P, Q) -> float:
    P, Q = _rows(P), _rows(Q)
    return sum(_nn_sq(P, Q)) / len(P) + sum(_nn_sq(Q, P)) / len(Q)


def hausdorff(P, Q) -> float:
    P, Q = _rows(P), _rows(Q)
    return math.sqrt(max(max(_nn_sq(P, Q)), max(_nn_sq(Q, P))))


def p2f(P, dense) -> float:
    P, dense = _rows(P), _rows(dense)
    return sum(math.sqrt(d) for d in _nn_sq(P, dense)) / len(P)


def l1_refinement(refined, Q) -> float:
    return p2f(refined, Q)


def fscore(P, Q, threshold) -> float:
    P, Q = _rows(P), _rows(Q)
    lo = [min(q[a] for q in Q) for a in range(3)]
    hi = [max(q[a] for q in Q) for a in range(3)]
    tau = threshold * math.sqrt(sum((h - l) ** 2 for h, l in zip(hi, lo)))
    precision = sum(1 for d in _nn_sq(P, Q) if math.sqrt(d) <= tau) / len(P)
    recall = sum(1 for d in _nn_sq(Q, P) if math.sqrt(d) <= tau) / len(Q)
    if precision + recall == 0:
        return 0.0
    return 2 * precision * recall / (precision + recall)


def selective_scan(x, delta, B, C, A, D):
    """Per-step recurrence with scalar loops over channels and state."""
    n, d = len(x), len(x[0])
    s = len(A[0])
    h = [[0.0] * s for _ in range(d)]
    y = []
    for t in range(n):
        row = []
        for c in range(d):
            acc = 0.0
            for j in range(s):
                h[c][j] = math.exp(delta[t][c] * A[c][j]) * h[c][j] + delta[t][c] * B[t][j] * x[t][c]
                acc += C[t][j] * h[c][j]
            row.append(acc + D[c] * x[t][c])
        y.append(row)
    return y


def render_depth(points, right, up, view, width, height, depth_bins, sigma, background=1.0):
    """Expected-depth image by explicit loops over pixels, bins and points.

    Pixel ``(y, x)`` and bin ``d`` have centers at integer grid positions; a
    point at grid coordinates ``(xp, yp, zp)`` contributes the product of three
    1D Gaussians, each cut to zero beyond three standard deviations.
    """
    def g(off):
        return math.exp(-0.5 * (off / sigma) ** 2) if abs(off) <= 3 * sigma else 0.0

    grid = []
    for p in _rows(points):
        u = sum(a * b for a, b in zip(p, right))
        v = sum(a * b for a, b in zip(p, up))
        depth = (sum(a * b for a, b in zip(p, view)) + 1) / 2
        grid.append(((u + 1) / 2 * width - 0.5, (1 - v) / 2 * height - 0.5, depth * depth_bins - 0.5))
    image = []
    for y in range(height):
        row = []
        for x in range(width):
            transmit, value, total = 1.0, 0.0, 0.0
            for d in range(depth_bins):
                rho = sum(g(x - xp) * g(y - yp) * g(d - zp) for xp, yp, zp in grid)
                occ = 1 - math.exp(-rho)
                r = occ * transmit
                value += r * (d + 0.5) / depth_bins
                total += r
                transmit *= 1 - occ
            row.append(value + (1 - total) * background)
        image.append(row)
    return image
