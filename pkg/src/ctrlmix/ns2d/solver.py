"""Projection-method time stepping for the homogenised Navier-Stokes problem.

The velocity is split as ``u = zeta + v`` where ``zeta`` lifts the boundary
forcing into the square and ``v`` vanishes on the walls.  Each step takes
the advection of the full field ``zeta + v`` explicitly (second-order
upwind), the diffusion of ``v`` by Crank-Nicolson (diagonalised by sine
transforms), the forcing ``nu Lap zeta - d_t zeta`` explicitly, and ends
with a Leray projection.

Fields carry a leading batch axis; each member adapts its own CFL substeps
so results never depend on which other members share the batch.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
from scipy import fft

from ..errors import ConfigurationError, InstabilityError
from .boundary import NoiseBasis
from .extension import extend_boundary_field, hopf_extension
from .grid import SquareDomain, VelocityField
from ._kernels import advect_component
from .projection import _project_arrays


@dataclass(frozen=True)
class NSParams:
    """Physical and numerical parameters.

    Attributes
    ----------
    nu : float
        Viscosity.
    dt : float
        Base time step; members take ``dt / m`` with the smallest integer
        ``m`` keeping ``dt max|u| / h <= cfl``.
    cfl : float
    max_substeps : int
        Beyond this the step is declared unstable.
    """

    nu: float = 0.05
    dt: float = 1e-3
    cfl: float = 0.5
    max_substeps: int = 64

    def __post_init__(self):
        if not self.nu > 0:
            raise ConfigurationError("viscosity must be positive")
        if not 0 < self.dt <= 0.1:
            raise ConfigurationError("dt must lie in (0, 0.1]")
        if not 0 < self.cfl <= 1:
            raise ConfigurationError("CFL cap must lie in (0, 1]")
        if abs(round(1.0 / self.dt) * self.dt - 1.0) > 1e-9:
            raise ConfigurationError("dt must divide the unit interval")

    @property
    def steps_per_unit(self) -> int:
        return int(round(1.0 / self.dt))


# -- discrete operators on face arrays ---------------------------------------

def wall_tangential(domain: SquareDomain, v_tau) -> tuple:
    """Wall values of ``U`` on the bottom and top walls and of ``V`` on the left and right.

    Returns ``(Ub, Ut, Vl, Vr)``, each of length ``n + 1`` along its wall in
    increasing coordinate order.
    """
    v = np.asarray(v_tau, dtype=float)
    n = domain.n
    lead = v.shape[:-1]
    nodes = np.concatenate([v, v[..., :1]], axis=-1)  # close the loop
    Ub = nodes[..., 0:n + 1]
    Vr = nodes[..., n:2 * n + 1]
    Ut = -nodes[..., 2 * n:3 * n + 1][..., ::-1]
    Vl = -nodes[..., 3 * n:4 * n + 1][..., ::-1]
    return tuple(np.broadcast_to(a, lead + (n + 1,)) for a in (Ub, Ut, Vl, Vr))


def _pad(F, lo, hi):
    """Two ghost layers on each side by odd reflection about the wall values."""
    shape = F.shape[:-2] + (F.shape[-2] + 4, F.shape[-1] + 4)
    P = np.zeros(shape)
    P[..., 2:-2, 2:-2] = F
    P[..., 2:-2, 1] = 2 * F[..., :, 0] - F[..., :, 1]
    P[..., 2:-2, 0] = 2 * F[..., :, 0] - F[..., :, 2]
    P[..., 2:-2, -2] = 2 * F[..., :, -1] - F[..., :, -2]
    P[..., 2:-2, -1] = 2 * F[..., :, -1] - F[..., :, -3]
    P[..., 1, 2:-2] = 2 * lo - F[..., 0, :]
    P[..., 0, 2:-2] = 2 * lo - F[..., 1, :]
    P[..., -2, 2:-2] = 2 * hi - F[..., -1, :]
    P[..., -1, 2:-2] = 2 * hi - F[..., -2, :]
    return P


def _advect_component_reference(F, G, lo, hi, h):
    """``(u . grad) F`` at interior faces of a ``U``-like array ``F`` of shape ``(n, n + 1)``.

    ``G`` is the other component (shape ``(n + 1, n)``), averaged to the
    faces of ``F``; ``lo`` and ``hi`` are the wall values of ``F`` on the
    walls crossing axis -2.
    """
    P = _pad(F, lo, hi)
    c = P[..., 2:-2, 3:-3]
    a = c
    b = 0.25 * (G[..., :-1, :-1] + G[..., :-1, 1:] + G[..., 1:, :-1] + G[..., 1:, 1:])
    dxm = (3 * c - 4 * P[..., 2:-2, 2:-4] + P[..., 2:-2, 1:-5]) / (2 * h)
    dxp = (-3 * c + 4 * P[..., 2:-2, 4:-2] - P[..., 2:-2, 5:-1]) / (2 * h)
    dym = (3 * c - 4 * P[..., 1:-3, 3:-3] + P[..., 0:-4, 3:-3]) / (2 * h)
    dyp = (-3 * c + 4 * P[..., 3:-1, 3:-3] - P[..., 4:, 3:-3]) / (2 * h)
    return a * np.where(a > 0, dxm, dxp) + b * np.where(b > 0, dym, dyp)


def advection(U, V, walls, h):
    """Advection of the full field at interior faces: ``(n, n - 1)`` and ``(n - 1, n)`` arrays."""
    Ub, Ut, Vl, Vr = walls
    lead = U.shape[:-2]
    n = U.shape[-1] - 1

    def flat(a, tail):
        return np.ascontiguousarray(np.broadcast_to(a, lead + tail).reshape((-1,) + tail), dtype=float)

    Uf, Vf = flat(U, (n, n + 1)), flat(V, (n + 1, n))
    Ut_, Vt_ = np.ascontiguousarray(np.swapaxes(Vf, -1, -2)), np.ascontiguousarray(np.swapaxes(Uf, -1, -2))
    AU = advect_component(Uf, Vf, flat(Ub, (n + 1,)), flat(Ut, (n + 1,)), h)
    AV = advect_component(Ut_, Vt_, flat(Vl, (n + 1,)), flat(Vr, (n + 1,)), h)
    return AU.reshape(lead + (n, n - 1)), np.swapaxes(AV, -1, -2).reshape(lead + (n - 1, n))


def _laplace_component(F, lo, hi, h):
    P = _pad(F, lo, hi)
    c = P[..., 2:-2, 3:-3]
    return (P[..., 2:-2, 2:-4] + P[..., 2:-2, 4:-2] + P[..., 1:-3, 3:-3] + P[..., 3:-1, 3:-3] - 4 * c) / h**2


def laplacian(U, V, walls, h):
    """Five-point Laplacian at interior faces with ghost values reflected about the walls."""
    Ub, Ut, Vl, Vr = walls
    LU = _laplace_component(U, Ub, Ut, h)
    LV = _laplace_component(np.swapaxes(V, -1, -2), Vl, Vr, h)
    return LU, np.swapaxes(LV, -1, -2)


@lru_cache(maxsize=8)
def _diffusion_eigs(n: int):
    """Eigenvalues for the ``U`` interior block ``(n, n - 1)``: DST-II along y, DST-I along x."""
    h = 1.0 / n
    lam1 = -4 / h**2 * np.sin(np.arange(1, n) * np.pi / (2 * n)) ** 2
    lam2 = -4 / h**2 * np.sin(np.arange(1, n + 1) * np.pi / (2 * n)) ** 2
    return lam2[:, None] + lam1[None, :]


def _to_spec(F):
    return fft.dst(fft.dst(F, type=1, axis=-1, norm="ortho"), type=2, axis=-2, norm="ortho")


def _from_spec(S):
    return fft.idst(fft.idst(S, type=2, axis=-2, norm="ortho"), type=1, axis=-1, norm="ortho")


def crank_nicolson(Ui, Vi, rU, rV, a):
    """Solve ``(I - a L) x = (I + a L) v + r`` on the interior blocks (no-slip walls).

    ``a`` may be an array broadcasting against the batch axes.  The
    explicit half uses the five-point Laplacian, which the sine transforms
    diagonalise exactly.
    """
    n = Ui.shape[-2]
    lam = _diffusion_eigs(n)
    a = np.asarray(a, dtype=float)[..., None, None] if np.ndim(a) else a
    LU, LV = _interior_laplacian(Ui, Vi, n, 1.0 / n)
    sU = _to_spec(Ui + a * LU + rU) / (1 - a * lam)
    sV = _to_spec(np.swapaxes(Vi + a * LV + rV, -1, -2)) / (1 - a * lam)
    return _from_spec(sU), np.swapaxes(_from_spec(sV), -1, -2)


def _inner_interior(aU, aV, bU, bV, h):
    return h * h * (np.sum(aU * bU, axis=(-2, -1)) + np.sum(aV * bV, axis=(-2, -1)))


# -- boundary lift -----------------------------------------------------------

@dataclass(frozen=True)
class SeparableLift:
    """Lift ``zeta(t) = beta(t) sum_j c_j Z_j`` of boundary forcing built from a ``NoiseBasis``.

    ``Z_j`` extends the spatial mode ``psi_j``; the per-member coefficients
    ``c`` are supplied when stepping.  ``delta=None`` selects the plain
    extension, a float the boundary-layer one.
    """

    basis: NoiseBasis
    delta: float | None = None
    Z: VelocityField = field(init=False)
    LZ: tuple = field(init=False)
    walls: tuple = field(init=False)

    def __post_init__(self):
        dom = self.basis.domain
        zero = np.zeros(dom.n_boundary)
        ZU, ZV = [], []
        for m in range(self.basis.n_modes):
            vt = self.basis.modes[m]
            f = (extend_boundary_field(dom, zero, vt) if self.delta is None
                 else hopf_extension(dom, zero, vt, self.delta))
            ZU.append(f.U), ZV.append(f.V)
        Z = VelocityField(dom, np.array(ZU), np.array(ZV))
        walls = wall_tangential(dom, self.basis.modes)
        object.__setattr__(self, "Z", Z)
        object.__setattr__(self, "walls", walls)
        object.__setattr__(self, "LZ", laplacian(Z.U, Z.V, walls, dom.h))

    @property
    def n_modes(self) -> int:
        return self.basis.n_modes

    def combine(self, arr, c):
        """``sum_j c_j arr_j`` for coefficient rows ``c`` of shape ``(B, N)``."""
        return np.tensordot(np.asarray(c, dtype=float), arr, axes=([-1], [0]))

    def field(self, t, c):
        beta = np.asarray(self.basis.profile(t))[..., None, None]
        return beta * self.combine(self.Z.U, c), beta * self.combine(self.Z.V, c)

    def wall_values(self, t, c):
        beta = np.asarray(self.basis.profile(t))[..., None]
        return tuple(beta * self.combine(w, c) for w in self.walls)

    def forcing(self, t, c, nu: float, dt: float):
        """``nu Lap zeta - d_t zeta`` at interior faces; the time derivative by centred differences."""
        t = np.asarray(t, dtype=float)
        beta = self.basis.profile(t)[..., None, None]
        dbeta = ((self.basis.profile(t + dt) - self.basis.profile(t - dt)) / (2 * dt))[..., None, None]
        LU, LV = self.combine(self.LZ[0], c), self.combine(self.LZ[1], c)
        ZU, ZV = self.combine(self.Z.U[..., :, 1:-1], c), self.combine(self.Z.V[..., 1:-1, :], c)
        return nu * beta * LU - dbeta * ZU, nu * beta * LV - dbeta * ZV


# -- time stepping -----------------------------------------------------------

@dataclass
class Trajectory:
    """Output of ``solve_homogeneous``.

    Attributes
    ----------
    v : VelocityField
        Homogeneous part at the final time.
    u : VelocityField
        Full field ``zeta + v`` at the final time.
    records : dict
        Time -> full field, for the requested record times.
    audit : dict or None
        Per-step energy bookkeeping when requested.
    substeps : ndarray
        Substep count used by each member at each base step.
    """

    v: VelocityField
    u: VelocityField
    records: dict
    audit: dict | None
    substeps: np.ndarray


def _zero_walls(n, lead):
    z = np.zeros(lead + (n + 1,))
    return (z, z, z, z)


def solve_homogeneous(v0: VelocityField, params: NSParams, lift: SeparableLift | None = None,
                      coeffs=None, t0: float = 0.0, t1: float = 1.0, record=(),
                      audit: bool = False) -> Trajectory:
    """Advance ``v`` from ``t0`` to ``t1``.

    Parameters
    ----------
    v0 : VelocityField
        Initial homogeneous part with batch shape ``(B,)`` (or none).
    lift, coeffs : SeparableLift and ``(B, N)`` coefficients, optional
        Boundary forcing; omitted means ``zeta = 0``.
    record : sequence of float
        Base-grid times at which the full field is stored.
    audit : bool
        Store the terms of the discrete energy balance at every base step.
    """
    dom = v0.domain
    n, h = dom.n, dom.h
    single = v0.U.ndim == 2
    U = np.array(v0.U, dtype=float, ndmin=3)
    V = np.array(v0.V, dtype=float, ndmin=3)
    B = U.shape[0]
    if lift is not None:
        c = np.broadcast_to(np.asarray(coeffs, dtype=float), (B, lift.n_modes))
    steps = int(round((t1 - t0) / params.dt))
    if abs(steps * params.dt - (t1 - t0)) > 1e-9:
        raise ConfigurationError("time span must be a multiple of dt")
    rec_steps = {int(round((r - t0) / params.dt)): float(r) for r in record}
    records = {}
    log = {"E": [], "D": [], "F": [], "A": [], "t": []} if audit else None
    substeps = np.ones((steps, B), dtype=int)
    Ui, Vi = U[:, :, 1:-1], V[:, 1:-1, :]
    t = np.full(B, float(t0))

    def full(t_now, Ui, Vi):
        Uf = np.zeros((B,) + dom.u_shape)
        Vf = np.zeros((B,) + dom.v_shape)
        Uf[:, :, 1:-1], Vf[:, 1:-1, :] = Ui, Vi
        if lift is None:
            return Uf, Vf, _zero_walls(n, (B,))
        zU, zV = lift.field(t_now, c)
        return Uf + zU, Vf + zV, lift.wall_values(t_now, c)

    def rhs(t_now, Ui, Vi, dt_m):
        Uf, Vf, walls = full(t_now, Ui, Vi)
        AU, AV = advection(Uf, Vf, walls, h)
        if lift is None:
            return -AU, -AV, AU, AV, None
        fU, fV = lift.forcing(t_now, c, params.nu, params.dt)
        return fU - AU, fV - AV, AU, AV, (fU, fV)

    for k in range(steps + 1):
        if k in rec_steps:
            Uf, Vf, _ = full(t, Ui, Vi)
            records[rec_steps[k]] = VelocityField(dom, Uf[0] if single else Uf, Vf[0] if single else Vf)
        if k == steps:
            break
        Uf, Vf, _ = full(t, Ui, Vi)
        umax = np.maximum(np.max(np.abs(Uf), axis=(1, 2)), np.max(np.abs(Vf), axis=(1, 2)))
        m = np.maximum(1, np.ceil(umax * params.dt / (h * params.cfl) - 1e-12)).astype(int)
        if np.any(m > params.max_substeps) or not np.all(np.isfinite(umax)):
            raise InstabilityError("CFL substep limit exceeded; reduce dt or forcing",
                                   diagnostics={"step": k, "max_speed": float(np.nanmax(umax))})
        substeps[k] = m
        if audit:
            gU, gV, AU, AV, forcing = rhs(t, Ui, Vi, params.dt)
            LU, LV = _interior_laplacian(Ui, Vi, n, h)
            log["t"].append(t.copy())
            log["E"].append(_inner_interior(Ui, Vi, Ui, Vi, h))
            log["D"].append(-2 * params.nu * _inner_interior(LU, LV, Ui, Vi, h))
            log["A"].append(-2 * _inner_interior(AU, AV, Ui, Vi, h))
            log["F"].append(np.zeros(B) if forcing is None else 2 * _inner_interior(*forcing, Ui, Vi, h))
        for s in range(int(m.max())):
            active = s < m
            dt_m = params.dt / m
            gU, gV, _, _, _ = rhs(t, Ui, Vi, dt_m)
            before = np.sqrt(_inner_interior(Ui, Vi, Ui, Vi, h))
            nU, nV = crank_nicolson(Ui, Vi, dt_m[:, None, None] * gU, dt_m[:, None, None] * gV,
                                    0.5 * params.nu * dt_m)
            Pu = np.zeros((B,) + dom.u_shape)
            Pv = np.zeros((B,) + dom.v_shape)
            Pu[:, :, 1:-1], Pv[:, 1:-1, :] = nU, nV
            Pu, Pv = _project_arrays(Pu, Pv, h)
            nU, nV = Pu[:, :, 1:-1], Pv[:, 1:-1, :]
            after = np.sqrt(_inner_interior(nU, nV, nU, nV, h))
            push = dt_m * np.sqrt(_inner_interior(gU, gV, gU, gV, h))
            bad = active & ~((after <= 2 * before + 2 * push + 1e-300) & np.isfinite(after))
            if np.any(bad):
                raise InstabilityError("velocity norm more than doubled in one step; reduce dt",
                                       diagnostics={"step": k, "members": np.flatnonzero(bad).tolist()})
            sel = active[:, None, None]
            Ui = np.where(sel, nU, Ui)
            Vi = np.where(sel, nV, Vi)
            t = np.where(active, t + dt_m, t)
        t = t0 + (k + 1) * params.dt * np.ones(B)
    if audit:
        log = {key: np.array(val) for key, val in log.items()}
        log["E_end"] = _inner_interior(Ui, Vi, Ui, Vi, h)
        log["dt"] = params.dt
    Uv = np.zeros((B,) + dom.u_shape)
    Vv = np.zeros((B,) + dom.v_shape)
    Uv[:, :, 1:-1], Vv[:, 1:-1, :] = Ui, Vi
    Uf, Vf, _ = full(t, Ui, Vi)
    if single:
        Uv, Vv, Uf, Vf = Uv[0], Vv[0], Uf[0], Vf[0]
    return Trajectory(VelocityField(dom, Uv, Vv), VelocityField(dom, Uf, Vf), records, log, substeps)


def _interior_laplacian(Ui, Vi, n, h):
    lead = Ui.shape[:-2]
    Uf = np.zeros(lead + (n, n + 1))
    Vf = np.zeros(lead + (n + 1, n))
    Uf[..., :, 1:-1], Vf[..., 1:-1, :] = Ui, Vi
    return laplacian(Uf, Vf, _zero_walls(n, lead), h)


def energy_audit(traj: Trajectory) -> dict:
    """Residual of the discrete energy balance ``dE/dt + D = F + A`` per base step.

    ``E = |v|^2``, ``D = 2 nu |grad v|^2`` (as ``-2 nu (Lap v, v)``),
    ``F = 2 (forcing, v)`` and ``A = -2 (advection of zeta + v, v)``, all at
    the left end of the step.  Residuals are normalised by the largest term
    magnitude over the run (``0/0 := 0``).
    """
    log = traj.audit
    if log is None:
        raise ConfigurationError("trajectory was run without audit=True")
    E = np.concatenate([log["E"], log["E_end"][None]], axis=0)
    dE = np.diff(E, axis=0) / log["dt"]
    res = dE + log["D"] - log["F"] - log["A"]
    scale = max(np.max(np.abs(dE)), np.max(np.abs(log["D"])), np.max(np.abs(log["F"])),
                np.max(np.abs(log["A"])))
    norm = res / scale if scale > 0 else np.zeros_like(res)
    return {"residual": norm, "max_residual": float(np.max(np.abs(norm))) if norm.size else 0.0,
            "scale": float(scale)}


def resolve(u0: VelocityField, params: NSParams, lift: SeparableLift | None = None, coeffs=None,
            record=(), audit: bool = False) -> Trajectory:
    """Time-one map: ``u(1)`` from ``u(0) = u0`` under the boundary forcing.

    The lift vanishes at ``t = 0`` and ``t = 1`` (the temporal profile is
    supported inside the unit interval), so ``u = v`` at both ends.
    """
    return solve_homogeneous(u0, params, lift, coeffs, 0.0, 1.0, record, audit)
