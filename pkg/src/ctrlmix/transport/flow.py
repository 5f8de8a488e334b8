"""Maximum flow on bipartite transport graphs with real capacities."""
from __future__ import annotations

from collections import deque

import numpy as np


def bipartite_max_flow(supply, demand, adjacency, tol: float = 1e-15):
    """Dinic max-flow for source -> left -> right -> sink networks.

    Parameters
    ----------
    supply : ndarray, shape (m,)
        Capacities of source-to-left arcs.
    demand : ndarray, shape (n,)
        Capacities of right-to-sink arcs.
    adjacency : ndarray of bool, shape (m, n)
        Left-right arcs, each of unbounded capacity.
    tol : float
        Residual capacities at or below ``tol`` count as saturated.

    Returns
    -------
    value : float
    flow : ndarray, shape (m, n)
        Flow on left-right arcs.

    Notes
    -----
    Arcs are scanned in atom index order, which fixes tie-breaking.
    """
    supply = np.asarray(supply, dtype=float)
    demand = np.asarray(demand, dtype=float)
    adj = np.asarray(adjacency, dtype=bool)
    m, n = adj.shape
    src, snk = m + n, m + n + 1
    nodes = m + n + 2
    # arc arrays: to, cap, and the index of the reverse arc
    head, cap, rev = [], [], []
    out = [[] for _ in range(nodes)]

    def add(a, b, c):
        out[a].append(len(head))
        head.append(b), cap.append(c), rev.append(len(head))
        out[b].append(len(head))
        head.append(a), cap.append(0.0), rev.append(len(head) - 2)

    for i in range(m):
        add(src, i, float(supply[i]))
    mid = {}
    inf = float(supply.sum() + demand.sum() + 1.0)
    for i in range(m):
        for j in np.flatnonzero(adj[i]):
            mid[(i, int(j))] = len(head)
            add(i, m + int(j), inf)
    for j in range(n):
        add(m + j, snk, float(demand[j]))

    total = 0.0
    while True:
        level = [-1] * nodes
        level[src] = 0
        dq = deque([src])
        while dq:
            a = dq.popleft()
            for e in out[a]:
                if cap[e] > tol and level[head[e]] < 0:
                    level[head[e]] = level[a] + 1
                    dq.append(head[e])
        if level[snk] < 0:
            break
        it = [0] * nodes

        def push(a, f):
            if a == snk:
                return f
            while it[a] < len(out[a]):
                e = out[a][it[a]]
                b = head[e]
                if cap[e] > tol and level[b] == level[a] + 1:
                    got = push(b, min(f, cap[e]))
                    if got > tol:
                        cap[e] -= got
                        cap[rev[e]] += got
                        return got
                it[a] += 1
            return 0.0

        while True:
            f = push(src, inf)
            if f <= tol:
                break
            total += f
    flow = np.zeros((m, n))
    for (i, j), e in mid.items():
        flow[i, j] = cap[rev[e]]
    return total, flow


def interval_matching_1d(x, wx, y, wy, eps: float) -> float:
    """Maximum fractional matching between points on a line.

    Points ``x_i`` (mass ``wx_i``) and ``y_j`` (mass ``wy_j``) may be matched
    when ``|x_i - y_j| <= eps``.  Neighbourhoods are equal-width intervals, so
    serving each ``x`` (in increasing order) from the leftmost ``y`` with mass
    left is optimal.  Runs in ``O((m + n) log(m + n))``.
    """
    ox, oy = np.argsort(x, kind="stable"), np.argsort(y, kind="stable")
    xs, ys = np.asarray(x, dtype=float)[ox], np.asarray(y, dtype=float)[oy]
    rx = np.asarray(wx, dtype=float)[ox].copy()
    ry = np.asarray(wy, dtype=float)[oy].copy()
    total = 0.0
    j = 0
    ny = ys.size
    for i in range(xs.size):
        while j < ny and (ys[j] < xs[i] - eps or ry[j] <= 0.0):
            j += 1
        k = j
        while rx[i] > 0.0 and k < ny and ys[k] <= xs[i] + eps:
            if ys[k] >= xs[i] - eps and ry[k] > 0.0:
                f = min(rx[i], ry[k])
                rx[i] -= f
                ry[k] -= f
                total += f
            k += 1
    return total
