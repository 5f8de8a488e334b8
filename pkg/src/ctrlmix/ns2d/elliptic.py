"""Node-based Laplace and clamped biharmonic solvers on the unit square."""
from __future__ import annotations

from functools import lru_cache

import numpy as np
from scipy import fft, sparse
from scipy.sparse.linalg import splu

from ..errors import ConvergenceError
from .grid import SquareDomain

LAPLACE_TOL = 1e-9
BIHARMONIC_TOL = 1e-8


def _boundary_grid(domain: SquareDomain, g) -> np.ndarray:
    out = np.zeros(domain.node_shape)
    j, i = domain.boundary_index()
    out[j, i] = np.asarray(g, dtype=float)
    return out


def laplacian_nodes(p: np.ndarray, h: float) -> np.ndarray:
    """Five-point Laplacian at interior nodes, shape ``(n - 1, n - 1)``."""
    return (p[1:-1, 2:] + p[1:-1, :-2] + p[2:, 1:-1] + p[:-2, 1:-1] - 4 * p[1:-1, 1:-1]) / h**2


@lru_cache(maxsize=16)
def _dirichlet_eigs(n: int) -> np.ndarray:
    k = np.arange(1, n)
    lam = -4 * n**2 * np.sin(k * np.pi / (2 * n)) ** 2
    return lam[:, None] + lam[None, :]


def solve_dirichlet_poisson(domain: SquareDomain, g, f=None) -> np.ndarray:
    """Discrete ``Delta p = f`` with ``p = g`` on boundary nodes (DST-I direct solve)."""
    n, h = domain.n, domain.h
    p = _boundary_grid(domain, g)
    rhs = np.zeros((n - 1, n - 1)) if f is None else np.array(f, dtype=float, copy=True)
    # move known boundary values to the right-hand side
    rhs[:, 0] -= p[1:-1, 0] / h**2
    rhs[:, -1] -= p[1:-1, -1] / h**2
    rhs[0, :] -= p[0, 1:-1] / h**2
    rhs[-1, :] -= p[-1, 1:-1] / h**2
    spec = fft.dstn(rhs, type=1, norm="ortho")
    p[1:-1, 1:-1] = fft.idstn(spec / _dirichlet_eigs(n), type=1, norm="ortho")
    target = np.zeros_like(rhs) if f is None else np.asarray(f, dtype=float)
    res = np.max(np.abs(laplacian_nodes(p, h) - target)) * h**2 / max(1.0, np.max(np.abs(p)))
    if not res <= LAPLACE_TOL:
        raise ConvergenceError(f"Laplace residual {res:.3e} above {LAPLACE_TOL}")
    return p


def solve_dirichlet_laplace(domain: SquareDomain, g) -> np.ndarray:
    """Discrete harmonic ``p`` with boundary values ``g`` (array over boundary nodes)."""
    return solve_dirichlet_poisson(domain, g)


_STENCIL = [((0, 0), 20.0), ((1, 0), -8.0), ((-1, 0), -8.0), ((0, 1), -8.0), ((0, -1), -8.0),
            ((1, 1), 2.0), ((1, -1), 2.0), ((-1, 1), 2.0), ((-1, -1), 2.0),
            ((2, 0), 1.0), ((-2, 0), 1.0), ((0, 2), 1.0), ((0, -2), 1.0)]


@lru_cache(maxsize=8)
def _biharmonic_system(n: int):
    """Sparse operator on interior nodes and the ghost bookkeeping.

    Interior node ``(j, i)`` with ``1 <= i, j <= n - 1`` is unknown number
    ``(j - 1)(n - 1) + (i - 1)``.  A stencil point one step outside the
    square is a ghost, eliminated with the clamped condition
    ``q_ghost = q_mirror + 2 h g`` where ``g`` is the outward normal
    derivative at the boundary node in between.
    """
    m = n - 1
    rows, cols, vals = [], [], []
    ghost_rows, ghost_nodes, ghost_vals = [], [], []
    j_b, i_b = SquareDomain(n).boundary_index()
    bnum = {(int(a), int(b)): k for k, (a, b) in enumerate(zip(j_b, i_b))}
    for j in range(1, n):
        for i in range(1, n):
            r = (j - 1) * m + (i - 1)
            for (dj, di), c in _STENCIL:
                jj, ii = j + dj, i + di
                if 1 <= jj <= n - 1 and 1 <= ii <= n - 1:
                    rows.append(r), cols.append((jj - 1) * m + (ii - 1)), vals.append(c)
                elif 0 <= jj <= n and 0 <= ii <= n:
                    continue  # boundary node, q = 0
                else:
                    # ghost: mirror through the adjacent boundary node
                    bj, bi = (jj + j) // 2, (ii + i) // 2
                    mj, mi = 2 * bj - jj, 2 * bi - ii
                    rows.append(r), cols.append((mj - 1) * m + (mi - 1)), vals.append(c)
                    ghost_rows.append(r), ghost_nodes.append(bnum[(bj, bi)]), ghost_vals.append(c)
    A = sparse.csc_matrix((vals, (rows, cols)), shape=(m * m, m * m))
    G = sparse.csr_matrix((ghost_vals, (ghost_rows, ghost_nodes)), shape=(m * m, 4 * n))
    return A, G, splu(A)


def biharmonic_nodes(q: np.ndarray, neumann, h: float) -> np.ndarray:
    """Thirteen-point biharmonic at interior nodes with clamped ghosts."""
    n = q.shape[0] - 1
    A, G, _ = _biharmonic_system(n)
    qi = q[1:-1, 1:-1].reshape(-1)
    return ((A @ qi + 2 * h * (G @ np.asarray(neumann, dtype=float))) / h**4).reshape(n - 1, n - 1)


def solve_clamped_biharmonic(domain: SquareDomain, neumann, source=None) -> np.ndarray:
    """Discrete ``Delta^2 q = source`` with ``q = 0`` and ``dq/dn = neumann`` on the boundary.

    ``neumann`` is given on boundary nodes; corner values are never used.
    """
    n, h = domain.n, domain.h
    A, G, lu = _biharmonic_system(n)
    g = np.asarray(neumann, dtype=float)
    rhs = -2 * h * (G @ g)
    if source is not None:
        rhs = rhs + h**4 * np.asarray(source, dtype=float).reshape(-1)
    qi = lu.solve(rhs)
    res = np.max(np.abs(A @ qi - rhs), initial=0.0) / max(1.0, np.max(np.abs(rhs), initial=0.0))
    if not res <= BIHARMONIC_TOL:
        raise ConvergenceError(f"biharmonic residual {res:.3e} above {BIHARMONIC_TOL}")
    q = np.zeros(domain.node_shape)
    q[1:-1, 1:-1] = qi.reshape(n - 1, n - 1)
    return q


def outward_derivative(p: np.ndarray, domain: SquareDomain) -> np.ndarray:
    """One-sided second-order outward normal derivative at boundary nodes."""
    j, i = domain.boundary_index()
    inward = -domain.normals().astype(int)
    dj, di = inward[:, 1], inward[:, 0]
    p0 = p[j, i]
    p1 = p[j + dj, i + di]
    p2 = p[j + 2 * dj, i + 2 * di]
    return (3 * p0 - 4 * p1 + p2) / (2 * domain.h)
