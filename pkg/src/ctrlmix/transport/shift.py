"""Near-identity noise maps and the total-variation cost of applying them.

A shift map is ``Psi(z) = z + Phi(z)`` where ``Phi`` is small and
``kappa``-Lipschitz with ``kappa < 1``, so ``Psi`` is a bi-Lipschitz
bijection.  Densities of ``Psi``-images are evaluated by Newton inversion
and the change-of-variables factor.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from ..errors import ConfigurationError, SingularMapError
from ..rng import as_generator
from .cost import transport_cost
from .measures import DensityGrid, DiscreteMeasure, tv_distance_grid

NEWTON_TOL = 1e-12
NEWTON_MAX_ITER = 50
FD_STEP = 1e-6


class ProductDensity:
    """Product of one-dimensional densities, evaluated on ``(..., d)`` points."""

    def __init__(self, factors: Sequence):
        self.factors = tuple(factors)

    @property
    def dim(self) -> int:
        return len(self.factors)

    def __call__(self, z) -> np.ndarray:
        z = np.asarray(z, dtype=float)
        out = np.ones(z.shape[:-1])
        for k, f in enumerate(self.factors):
            out = out * f.pdf(z[..., k])
        return out

    def sample(self, rng, size: int) -> np.ndarray:
        gen = as_generator(rng)
        return np.stack([f.sample(gen, size) for f in self.factors], axis=-1)


@dataclass(frozen=True)
class ShiftMap:
    """Perturbation ``Phi`` acting on a coordinate block.

    Attributes
    ----------
    phi : callable
        ``(..., d) -> (..., d)``; must vanish outside ``block``.
    kappa : float
        Declared bound on ``|Phi|`` and on its Lipschitz constant.
    jacobian : callable, optional
        ``(..., d) -> (..., d, d)`` derivative of ``phi``.
    block : tuple of int, optional
        Coordinates that ``phi`` may change; all by default.
    """

    phi: Callable
    kappa: float
    jacobian: Callable | None = None
    block: tuple | None = None

    def __call__(self, z) -> np.ndarray:
        z = np.asarray(z, dtype=float)
        return z + self.phi(z)

    def derivative(self, z) -> np.ndarray:
        z = np.asarray(z, dtype=float)
        if self.jacobian is not None:
            return np.asarray(self.jacobian(z), dtype=float)
        d = z.shape[-1]
        cols = []
        for k in range(d):
            e = np.zeros(d)
            e[k] = FD_STEP
            cols.append((self.phi(z + e) - self.phi(z - e)) / (2 * FD_STEP))
        return np.stack(cols, axis=-1)

    def check_budget(self, samples: np.ndarray, tol: float = 1e-9) -> dict:
        """Sampled sup of ``|Phi|`` and of difference quotients."""
        z = np.asarray(samples, dtype=float)
        size = float(np.max(np.linalg.norm(self.phi(z), axis=-1)))
        half = z.shape[0] // 2
        a, b = z[:half], z[half:2 * half]
        num = np.linalg.norm(self.phi(a) - self.phi(b), axis=-1)
        den = np.linalg.norm(a - b, axis=-1)
        lip = float(np.max(num / np.where(den > 0, den, np.inf)))
        return {"sup_norm": size, "lipschitz": lip,
                "pass": bool(size <= self.kappa + tol and lip <= self.kappa + tol)}


def invert_shift(psi: ShiftMap, y) -> np.ndarray:
    """Solve ``z + Phi(z) = y`` by Newton's method, vectorised over points."""
    y = np.asarray(y, dtype=float)
    z = y - psi.phi(y)
    for _ in range(NEWTON_MAX_ITER):
        res = z + psi.phi(z) - y
        if np.max(np.abs(res), initial=0.0) <= NEWTON_TOL:
            return z
        jac = psi.derivative(z) + np.eye(y.shape[-1])
        z = z - np.linalg.solve(jac, res[..., None])[..., 0]
    res = z + psi.phi(z) - y
    if np.max(np.abs(res), initial=0.0) <= NEWTON_TOL:
        return z
    raise SingularMapError(f"Newton inversion stalled at residual {np.max(np.abs(res)):.3e}")


def pushforward_density(density: Callable, psi: ShiftMap) -> Callable:
    """Evaluator of the density of ``Psi(Z)`` when ``Z`` has ``density``.

    ``density`` is any callable on ``(..., d)`` points (for instance a
    ``ProductDensity``).
    """
    if psi.kappa >= 1:
        raise ConfigurationError("shift maps need kappa < 1 to be invertible")

    def evaluate(y):
        y = np.asarray(y, dtype=float)
        z = invert_shift(psi, y)
        det = np.abs(np.linalg.det(psi.derivative(z) + np.eye(y.shape[-1])))
        return density(z) / det

    return evaluate


def _grid(fn, lower, upper, shape) -> DensityGrid:
    return DensityGrid.from_function(fn, lower, upper, shape)


def shift_tv(density: Callable, psi: ShiftMap, lower, upper, shape) -> float:
    """``TV(l, Psi_* l)`` by cell-centre quadrature on a box."""
    p = _grid(density, lower, upper, shape)
    q = _grid(pushforward_density(density, psi), lower, upper, shape)
    return tv_distance_grid(p, q)


def verify_shift_tv_bound(density: Callable, family: Callable[[float], ShiftMap], kappas,
                          lower, upper, shape, band: float = 3.0) -> dict:
    """Tabulate ``TV(l, Psi_kappa* l) / kappa`` over a grid of ``kappa``.

    The bound ``TV <= C kappa`` is certified in the weak sense that the
    ratios stay inside a band of width ``band`` (max/min); no specific
    constant is claimed.
    """
    rows = []
    for kappa in kappas:
        kappa = float(kappa)
        if kappa == 0.0:
            rows.append({"kappa": 0.0, "tv": 0.0, "ratio": None})
            continue
        tv = shift_tv(density, family(kappa), lower, upper, shape)
        rows.append({"kappa": kappa, "tv": tv, "ratio": tv / kappa})
    ratios = [r["ratio"] for r in rows if r["ratio"] is not None]
    spread = max(ratios) / min(ratios) if ratios and min(ratios) > 0 else float("inf")
    return {"table": rows, "constant": max(ratios) if ratios else 0.0,
            "spread": spread, "pass": bool(not ratios or spread < band)}


def cost_tv_inequality_check(base: ProductDensity, U1: Callable, U2: Callable, psi: ShiftMap,
                             eps: float, n: int, rng, lower, upper, shape,
                             tol: float = 0.02) -> dict:
    """Empirical check of ``C_eps(U1_* P, U2_* P) <= 2 TV(P, Psi_* P)``.

    The precondition ``|U1(w) - U2(Psi(w))| <= eps`` is checked on the
    samples used for the first measure.
    """
    gen = as_generator(rng)
    w1 = base.sample(gen, n)
    w2 = base.sample(gen, n)
    a1 = np.asarray(U1(w1), dtype=float).reshape(n, -1)
    a2 = np.asarray(U2(w2), dtype=float).reshape(n, -1)
    gap = np.linalg.norm(a1 - np.asarray(U2(psi(w1)), dtype=float).reshape(n, -1), axis=-1)
    pre_ok = bool(np.max(gap) <= eps * (1 + 1e-12))
    cost = transport_cost(DiscreteMeasure.empirical(a1), DiscreteMeasure.empirical(a2), eps)
    tv = shift_tv(base, psi, lower, upper, shape)
    return {"cost": cost, "tv": tv, "bound": 2 * tv, "precondition": pre_ok,
            "pass": bool(pre_ok and cost <= 2 * tv + tol)}
