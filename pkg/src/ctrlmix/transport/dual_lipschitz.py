"""Dual-Lipschitz distance between discrete measures.

The test functions satisfy ``||f||_inf + Lip(f) <= 1`` where the Lipschitz
quotient is taken over pairs at distance at most 1.  The measures live in a
convex ambient space (Euclidean space or a convex phase space), where that
restricted quotient equals the global Lipschitz constant: a far pair is
joined by a segment cut into short pieces.  Atom values obeying
``|f_i - f_j| <= L d_ij`` for all pairs extend to an ``L``-Lipschitz function
(McShane) which can be clipped to ``[-M, M]``, so the supremum is the linear
program

    maximise   sum_i f_i (mu1_i - mu2_i)
    subject to |f_i| <= M,  |f_i - f_j| <= L d_ij  (all pairs),  M + L <= 1.

Imposing the constraint only on atom pairs within distance 1 would measure
functions on the bare atom set instead, which breaks the triangle inequality
across measures with different supports.

In one dimension the pair constraints reduce to neighbours in sorted order.
In higher dimension the pair set is grown by constraint generation from
nearest neighbours until no pair is violated, which returns the optimum of
the full program.

A compiled ``O(n log n)`` recursion solves the one-dimensional program at
fixed ``M`` and a concave search over ``M`` finishes it; this is the route
for large one-dimensional samples.

For two uniform ensembles of equal size there is a faster exact route.  At
fixed ``M`` the inner supremum is a Kantorovich-Rubinstein dual for the
bounded metric ``min(2M, (1 - M) d)``, whose optimal transport between
uniform ensembles is an assignment problem.  The value is concave in ``M``
and is maximised by a bounded scalar search.
"""
from __future__ import annotations

import numpy as np
from scipy import optimize, sparse
from scipy.spatial import cKDTree
from scipy.spatial.distance import cdist

from ..errors import ConfigurationError, ConvergenceError, SizeError
from .measures import DiscreteMeasure

MAX_ATOMS = 2000
MAX_ATOMS_1D = 1_000_000
LINE_THRESHOLD = 2000
_HIGHS = {"primal_feasibility_tolerance": 1e-10, "dual_feasibility_tolerance": 1e-10}


def merged_support(mu1: DiscreteMeasure, mu2: DiscreteMeasure):
    """Union of atoms with the signed weight difference on each."""
    pts = np.vstack([mu1.atoms, mu2.atoms])
    uniq, inv = np.unique(pts, axis=0, return_inverse=True)
    inv = inv.reshape(-1)
    w1 = np.zeros(uniq.shape[0])
    w2 = np.zeros(uniq.shape[0])
    np.add.at(w1, inv[:mu1.size], mu1.weights)
    np.add.at(w2, inv[mu1.size:], mu2.weights)
    return uniq, w1 - w2


def _solve(diff, pairs, dists):
    """LP over variables ``(f_1..f_n, M, L)`` with the given pair set."""
    n = diff.size
    k = pairs.shape[0]
    # rows: f_i - f_j - L d <= 0, f_j - f_i - L d <= 0, f_i - M <= 0, -f_i - M <= 0, M + L <= 1
    rows, cols, vals = [], [], []
    r = np.arange(k)
    for sign, off in ((1.0, 0), (-1.0, k)):
        rows += [r + off, r + off, r + off]
        cols += [pairs[:, 0], pairs[:, 1], np.full(k, n + 1)]
        vals += [np.full(k, sign), np.full(k, -sign), -dists]
    i = np.arange(n)
    rows += [2 * k + i, 2 * k + i, 2 * k + n + i, 2 * k + n + i]
    cols += [i, np.full(n, n), i, np.full(n, n)]
    vals += [np.ones(n), -np.ones(n), -np.ones(n), -np.ones(n)]
    rows.append(np.array([2 * k + 2 * n] * 2))
    cols.append(np.array([n, n + 1]))
    vals.append(np.ones(2))
    A = sparse.csr_matrix((np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
                          shape=(2 * k + 2 * n + 1, n + 2))
    b = np.zeros(A.shape[0])
    b[-1] = 1.0
    c = np.concatenate([-diff, [0.0, 0.0]])
    bounds = [(None, None)] * n + [(0, 1), (0, 1)]
    res = optimize.linprog(c, A_ub=A, b_ub=b, bounds=bounds, method="highs-ds", options=_HIGHS)
    if res.status != 0:
        raise ConvergenceError(f"dual-Lipschitz LP failed: {res.message}")
    return -res.fun, res.x


def dual_lipschitz_with_witness(mu1: DiscreteMeasure, mu2: DiscreteMeasure):
    """Distance together with the optimal ``(f, M, L)``."""
    pts, diff = merged_support(mu1, mu2)
    n = pts.shape[0]
    limit = MAX_ATOMS_1D if pts.shape[1] == 1 else MAX_ATOMS
    if n > limit:
        raise SizeError(f"combined support has {n} atoms (limit {limit}); subsample first")
    if n == 1 or np.all(diff == 0):
        return 0.0, np.zeros(n), 0.0, 0.0
    # the program for -diff has the same value with f -> -f; solving one
    # canonical sign makes the distance exactly symmetric
    flip = -1.0 if diff[np.flatnonzero(diff)[0]] < 0 else 1.0
    diff = flip * diff
    if pts.shape[1] == 1:
        order = np.argsort(pts[:, 0], kind="stable")
        gaps = np.diff(pts[order, 0])
        pairs = np.stack([order[:-1], order[1:]], axis=1)
        value, x = _solve(diff, pairs, gaps)
        return float(np.clip(value, 0.0, 2.0)), flip * x[:n], x[n], x[n + 1]

    tree = cKDTree(pts)
    kn = min(n, 12)
    _, nbr = tree.query(pts, k=kn)
    cand = {(min(i, j), max(i, j)) for i in range(n) for j in nbr[i, 1:]}
    pairs = np.array(sorted(cand), dtype=int).reshape(-1, 2)
    dists = np.linalg.norm(pts[pairs[:, 0]] - pts[pairs[:, 1]], axis=1)
    ii, jj = np.triu_indices(n, k=1)
    all_pairs = np.stack([ii, jj], axis=1)
    all_d = np.linalg.norm(pts[ii] - pts[jj], axis=1)
    for _ in range(100):
        value, x = _solve(diff, pairs, dists)
        f, L = x[:n], x[n + 1]
        slack = np.abs(f[all_pairs[:, 0]] - f[all_pairs[:, 1]]) - L * all_d
        bad = slack > 1e-11
        if not np.any(bad):
            return float(np.clip(value, 0.0, 2.0)), flip * f, x[n], L
        pairs = np.vstack([pairs, all_pairs[bad]])
        dists = np.concatenate([dists, all_d[bad]])
    raise ConvergenceError("constraint generation did not settle")


def _maximise_concave(fn, xatol: float = 1e-12) -> float:
    """Maximum over ``[0, 1]`` of a concave piecewise-linear function.

    A bounded Brent search is followed by one kink refinement: the linear
    pieces on either side of the approximate maximiser are extended to
    their intersection, which is the exact kink when both pieces are hit.
    """
    res = optimize.minimize_scalar(lambda m: -fn(m), bounds=(0.0, 1.0), method="bounded",
                                   options={"xatol": xatol})
    x = float(res.x)
    best = max(-float(res.fun), fn(0.0), fn(1.0))
    h = 1e-6
    a0, a1 = max(x - 2 * h, 0.0), max(x - h, 0.0)
    b0, b1 = min(x + h, 1.0), min(x + 2 * h, 1.0)
    if a1 > a0 and b1 > b0:
        fa0, fa1, fb0, fb1 = fn(a0), fn(a1), fn(b0), fn(b1)
        sa = (fa1 - fa0) / (a1 - a0)
        sb = (fb1 - fb0) / (b1 - b0)
        best = max(best, fa0, fa1, fb0, fb1)
        if sa > sb:
            k = (fb0 - fa0 + sa * a0 - sb * b0) / (sa - sb)
            if 0.0 <= k <= 1.0:
                best = max(best, fn(k))
    return best


def dual_lipschitz_line(mu1: DiscreteMeasure, mu2: DiscreteMeasure) -> float:
    """Exact one-dimensional distance in ``O(n log n)`` per sup-bound ``M``.

    For fixed ``M`` the best function values on the sorted atoms come from
    a compiled slope-tracking recursion; the outer maximisation over ``M``
    is concave.
    """
    from ._line import line_value

    if mu1.dim != 1 or mu2.dim != 1:
        raise ConfigurationError("line route is one-dimensional")
    pts, diff = merged_support(mu1, mu2)
    if pts.shape[0] == 1 or np.all(diff == 0):
        return 0.0
    if diff[np.flatnonzero(diff)[0]] < 0:
        diff = -diff
    order = np.argsort(pts[:, 0], kind="stable")
    gaps = np.ascontiguousarray(np.diff(pts[order, 0]))
    w = np.ascontiguousarray(diff[order])
    return float(np.clip(_maximise_concave(lambda m: line_value(gaps, w, m)), 0.0, 2.0))


def _uniform_pair(mu1: DiscreteMeasure, mu2: DiscreteMeasure) -> bool:
    return (mu1.size == mu2.size and np.all(mu1.weights == mu1.weights[0])
            and np.all(mu2.weights == mu2.weights[0]))


def dual_lipschitz_assignment(mu1: DiscreteMeasure, mu2: DiscreteMeasure) -> float:
    """Exact distance between two uniform ensembles of equal size.

    Maximises over ``M`` the optimal assignment cost for the metric
    ``min(2M, (1 - M) d)``.
    """
    if not _uniform_pair(mu1, mu2):
        raise ConfigurationError("assignment route needs two uniform ensembles of equal size")
    a, b = mu1.atoms, mu2.atoms
    # fixed argument order makes the value exactly symmetric
    ka = a[np.lexsort(a.T[::-1])].tobytes()
    kb = b[np.lexsort(b.T[::-1])].tobytes()
    if kb < ka:
        a, b = b, a
    dist = cdist(a, b)
    n = a.shape[0]
    if ka == kb:
        return 0.0

    def value(m):
        cost = np.minimum(2.0 * m, (1.0 - m) * dist)
        r, c = optimize.linear_sum_assignment(cost)
        return float(np.sum(cost[r, c])) / n

    return float(np.clip(_maximise_concave(value), 0.0, 2.0))


def dual_lipschitz(mu1: DiscreteMeasure, mu2: DiscreteMeasure, method: str = "auto") -> float:
    """Dual-Lipschitz distance in ``[0, 2]``.

    Parameters
    ----------
    method : {"auto", "lp", "assignment", "line"}
        ``auto`` takes the line route in one dimension beyond
        ``LINE_THRESHOLD`` atoms, the assignment route for multi-dimensional
        uniform ensembles of equal size, and the linear program otherwise.
    """
    if method == "line" or (method == "auto" and mu1.dim == 1
                            and mu1.size + mu2.size > LINE_THRESHOLD):
        return dual_lipschitz_line(mu1, mu2)
    if method == "assignment" or (method == "auto" and mu1.dim > 1 and _uniform_pair(mu1, mu2)):
        return dual_lipschitz_assignment(mu1, mu2)
    if method not in ("auto", "lp"):
        raise ConfigurationError(f"unknown method {method!r}")
    return dual_lipschitz_with_witness(mu1, mu2)[0]
