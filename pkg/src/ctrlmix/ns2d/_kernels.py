"""Compiled stencil kernels for the face-array operators."""
from __future__ import annotations

import numba
import numpy as np


@numba.njit(cache=True)
def advect_component(F, G, lo, hi, h):
    """Second-order upwind ``(u . grad) F`` at interior faces, batch ``(B, n, n + 1)``.

    Ghost values come from odd reflection about the wall-normal face values
    along the last axis and about the prescribed wall values ``lo``/``hi``
    along the other.
    """
    nb, n = F.shape[0], F.shape[1]
    out = np.empty((nb, n, n - 1))
    P = np.zeros((n + 4, n + 5))
    inv = 1.0 / (2.0 * h)
    for b in range(nb):
        for j in range(n):
            for i in range(n + 1):
                P[j + 2, i + 2] = F[b, j, i]
            P[j + 2, 1] = 2.0 * F[b, j, 0] - F[b, j, 1]
            P[j + 2, 0] = 2.0 * F[b, j, 0] - F[b, j, 2]
            P[j + 2, n + 3] = 2.0 * F[b, j, n] - F[b, j, n - 1]
            P[j + 2, n + 4] = 2.0 * F[b, j, n] - F[b, j, n - 2]
        for i in range(n + 1):
            P[1, i + 2] = 2.0 * lo[b, i] - F[b, 0, i]
            P[0, i + 2] = 2.0 * lo[b, i] - F[b, 1, i]
            P[n + 2, i + 2] = 2.0 * hi[b, i] - F[b, n - 1, i]
            P[n + 3, i + 2] = 2.0 * hi[b, i] - F[b, n - 2, i]
        for j in range(n):
            jp = j + 2
            for i in range(1, n):
                ip = i + 2
                c = P[jp, ip]
                gb = 0.25 * (G[b, j, i - 1] + G[b, j, i] + G[b, j + 1, i - 1] + G[b, j + 1, i])
                if c > 0:
                    dx = (3.0 * c - 4.0 * P[jp, ip - 1] + P[jp, ip - 2]) * inv
                else:
                    dx = (-3.0 * c + 4.0 * P[jp, ip + 1] - P[jp, ip + 2]) * inv
                if gb > 0:
                    dy = (3.0 * c - 4.0 * P[jp - 1, ip] + P[jp - 2, ip]) * inv
                else:
                    dy = (-3.0 * c + 4.0 * P[jp + 1, ip] - P[jp + 2, ip]) * inv
                out[b, j, i - 1] = c * dx + gb * dy
    return out
