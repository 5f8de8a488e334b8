"""Discrete Leray projection on the staggered grid."""
from __future__ import annotations

from functools import lru_cache

import numpy as np
from scipy import fft

from ..errors import ConvergenceError
from .grid import VelocityField, divergence

PROJECTION_TOL = 1e-10


@lru_cache(maxsize=16)
def _neumann_eigs(n: int) -> np.ndarray:
    k = np.arange(n)
    lam = -4 * n**2 * np.sin(k * np.pi / (2 * n)) ** 2
    out = lam[:, None] + lam[None, :]
    out[0, 0] = 1.0  # mean mode, zeroed separately
    return out


def _project_arrays(U: np.ndarray, V: np.ndarray, h: float):
    """Project face arrays in place onto discretely divergence-free fields tangent to the walls."""
    U[..., :, 0] = U[..., :, -1] = 0.0
    V[..., 0, :] = V[..., -1, :] = 0.0
    n = U.shape[-2]
    div = divergence(U, V, h)
    spec = fft.dctn(div, type=2, axes=(-2, -1), norm="ortho")
    spec = spec / _neumann_eigs(n)
    spec[..., 0, 0] = 0.0
    phi = fft.idctn(spec, type=2, axes=(-2, -1), norm="ortho")
    U[..., :, 1:-1] -= (phi[..., :, 1:] - phi[..., :, :-1]) / h
    V[..., 1:-1, :] -= (phi[..., 1:, :] - phi[..., :-1, :]) / h
    return U, V


def leray_project(field: VelocityField, check: bool = True) -> VelocityField:
    """Remove the gradient part of ``field`` with a Neumann Poisson solve.

    Wall-normal faces are set to zero, which imposes ``dphi/dn = field . n``;
    the cell Poisson problem is diagonalised by a type-II cosine transform.
    """
    h = field.domain.h
    U, V = _project_arrays(field.U.copy(), field.V.copy(), h)
    out = VelocityField(field.domain, U, V)
    if check:
        scale = max(1.0, float(np.max(np.abs(field.U), initial=0.0)), float(np.max(np.abs(field.V), initial=0.0)))
        err = out.max_divergence() * h / scale
        if not err <= PROJECTION_TOL:
            raise ConvergenceError(f"projected divergence {err:.3e} above tolerance")
    return out
