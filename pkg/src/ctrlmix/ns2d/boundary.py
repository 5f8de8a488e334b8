"""Boundary data on the square: traces, antiderivatives and the noise basis."""
from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

from ..errors import ConfigurationError, FluxViolationError, GridMismatchError
from .grid import SquareDomain

FLUX_TOL = 1e-10


def boundary_flux(domain: SquareDomain, v_n) -> np.ndarray:
    """``oint v_n ds`` by the periodic trapezoid rule (last axis = boundary nodes)."""
    return domain.h * np.sum(np.asarray(v_n, dtype=float), axis=-1)


def tangential_antiderivative(domain: SquareDomain, v_n, tol: float = FLUX_TOL) -> np.ndarray:
    """Mean-zero ``w`` on boundary nodes with ``dw/ds = -v_n``.

    Cumulative trapezoid along arclength.  Raises ``FluxViolationError``
    when the net flux exceeds ``tol``, since ``w`` would not close up.
    """
    v = np.asarray(v_n, dtype=float)
    if v.shape[-1] != domain.n_boundary:
        raise GridMismatchError("boundary data must have 4 n entries")
    flux = boundary_flux(domain, v)
    if np.any(np.abs(flux) > tol):
        raise FluxViolationError(f"net boundary flux {np.max(np.abs(flux)):.3e} exceeds {tol:.1e}")
    inc = -0.5 * domain.h * (v + np.roll(v, -1, axis=-1))[..., :-1]
    w = np.concatenate([np.zeros(v.shape[:-1] + (1,)), np.cumsum(inc, axis=-1)], axis=-1)
    return w - w.mean(axis=-1, keepdims=True)


@dataclass(frozen=True)
class BoundaryTrace:
    """Boundary velocity ``(v_n, v_tau)`` on boundary nodes at sampled times.

    Attributes
    ----------
    times : ndarray, shape (T,)
    v_n, v_tau : ndarray, shape (T, 4 n)
    """

    domain: SquareDomain
    times: np.ndarray
    v_n: np.ndarray
    v_tau: np.ndarray

    def __post_init__(self):
        t = np.atleast_1d(np.asarray(self.times, dtype=float))
        shape = (t.size, self.domain.n_boundary)
        vn = np.broadcast_to(np.asarray(self.v_n, dtype=float), shape).copy()
        vt = np.broadcast_to(np.asarray(self.v_tau, dtype=float), shape).copy()
        if not (np.all(np.isfinite(vn)) and np.all(np.isfinite(vt))):
            raise ConfigurationError("boundary trace has non-finite entries")
        flux = boundary_flux(self.domain, vn)
        if np.any(np.abs(flux) > FLUX_TOL):
            raise FluxViolationError(f"boundary trace carries net flux {np.max(np.abs(flux)):.3e}")
        object.__setattr__(self, "times", t)
        object.__setattr__(self, "v_n", vn)
        object.__setattr__(self, "v_tau", vt)

    @classmethod
    def zero(cls, domain: SquareDomain, times) -> "BoundaryTrace":
        t = np.atleast_1d(times)
        return cls(domain, t, np.zeros((t.size, domain.n_boundary)), np.zeros((t.size, domain.n_boundary)))

    def at(self, k: int):
        return self.v_n[k], self.v_tau[k]

    def is_zero(self, k: int) -> bool:
        return not (np.any(self.v_n[k]) or np.any(self.v_tau[k]))

    def to_csv(self, path) -> None:
        """Rows ``(t, s, v_n, v_tau)``."""
        s = self.domain.arclength()
        with open(path, "w", newline="") as fh:
            out = csv.writer(fh)
            out.writerow(["t", "s", "v_n", "v_tau"])
            for k, t in enumerate(self.times):
                for j in range(s.size):
                    out.writerow([repr(float(t)), repr(float(s[j])), repr(float(self.v_n[k, j])),
                                  repr(float(self.v_tau[k, j]))])


def sine_squared_profile(t, start: float, stop: float) -> np.ndarray:
    """``sin^2(pi (t - start) / (stop - start))`` on ``[start, stop]``, zero elsewhere."""
    t = np.asarray(t, dtype=float)
    s = (t - start) / (stop - start)
    return np.where((s > 0) & (s < 1), np.sin(np.pi * s) ** 2, 0.0)


def sine_squared_derivative(t, start: float, stop: float) -> np.ndarray:
    t = np.asarray(t, dtype=float)
    s = (t - start) / (stop - start)
    return np.where((s > 0) & (s < 1), np.pi * np.sin(2 * np.pi * s) / (stop - start), 0.0)


@dataclass(frozen=True)
class NoiseBasis:
    """Tangential boundary forcing modes on a segment ``Gamma`` of the top edge.

    Spatial mode ``j`` is ``sin(pi s) sin(j pi s)`` in the rescaled
    coordinate ``s`` of ``Gamma = [x0, x1] x {1}``, orthonormalised in the
    discrete ``L^2(Gamma)`` inner product; it vanishes to second order at
    the ends of ``Gamma`` and away from the corners.  Every mode shares the
    temporal profile ``sin^2`` on ``[t_start, t_stop]``, which vanishes at
    ``t = 0`` and after ``t_stop``.
    """

    domain: SquareDomain
    n_modes: int = 4
    gamma: tuple = (0.2, 0.8)
    t_start: float = 0.1
    t_stop: float = 0.7

    def __post_init__(self):
        x0, x1 = self.gamma
        if not 0 < x0 < x1 < 1:
            raise ConfigurationError("Gamma must lie strictly inside the top edge")
        if not 0 <= self.t_start < self.t_stop < 1:
            raise ConfigurationError("need 0 <= t_start < t_stop < 1")
        if self.n_modes < 1:
            raise ConfigurationError("need at least one noise mode")
        dom = self.domain
        j, i = dom.boundary_index()
        top = dom.edge_of() == 2
        x = i * dom.h
        s = np.where(top, (x - x0) / (x1 - x0), -1.0)
        on = top & (s > 0) & (s < 1)
        raw = np.zeros((self.n_modes, dom.n_boundary))
        for m in range(self.n_modes):
            raw[m, on] = np.sin(np.pi * s[on]) * np.sin((m + 1) * np.pi * s[on])
        # Gram-Schmidt in the boundary inner product h * sum
        modes = np.zeros_like(raw)
        for m in range(self.n_modes):
            v = raw[m].copy()
            for k in range(m):
                v -= dom.h * np.dot(v, modes[k]) * modes[k]
            nrm = np.sqrt(dom.h * np.dot(v, v))
            if nrm < 1e-8:
                raise ConfigurationError("Gamma is too short for this many modes on this grid")
            modes[m] = v / nrm
        object.__setattr__(self, "modes", modes)

    def profile(self, t) -> np.ndarray:
        return sine_squared_profile(t, self.t_start, self.t_stop)

    def profile_derivative(self, t) -> np.ndarray:
        return sine_squared_derivative(t, self.t_start, self.t_stop)

    def tangential(self, coeffs) -> np.ndarray:
        """Spatial tangential datum ``sum_j c_j psi_j`` on boundary nodes."""
        return np.asarray(coeffs, dtype=float) @ self.modes

    def trace(self, coeffs, times) -> BoundaryTrace:
        t = np.atleast_1d(np.asarray(times, dtype=float))
        vt = self.profile(t)[:, None] * self.tangential(coeffs)[None, :]
        return BoundaryTrace(self.domain, t, np.zeros_like(vt), vt)
