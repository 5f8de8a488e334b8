"""The Navier-Stokes time-one map as a random dynamical system, and its probes."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..errors import ConfigurationError, InsufficientDataError
from ..rds import NoiseModel, SystemMap, density_from_name
from ..rng import as_state
from .boundary import NoiseBasis
from .grid import SquareDomain, VelocityField, inner
from .solver import NSParams, SeparableLift, _interior_laplacian, resolve

OBS_TIMES = (0.25, 0.5, 0.75, 1.0)
OBS_MODES = ((1, 1), (1, 2), (2, 1), (2, 2))


def h1_seminorm(field: VelocityField) -> np.ndarray:
    """Discrete ``|grad v|`` of a field vanishing on the walls, as ``sqrt(-(Lap v, v))``."""
    n, h = field.domain.n, field.domain.h
    Ui, Vi = field.U[..., :, 1:-1], field.V[..., 1:-1, :]
    LU, LV = _interior_laplacian(Ui, Vi, n, h)
    val = -h * h * (np.sum(LU * Ui, axis=(-2, -1)) + np.sum(LV * Vi, axis=(-2, -1)))
    return np.sqrt(np.maximum(val, 0.0))


def _fit_exponential(k, y):
    """Least-squares ``log y = log C - alpha k``; returns ``(alpha, C, R^2)``."""
    k = np.asarray(k, dtype=float)
    ly = np.log(np.asarray(y, dtype=float))
    slope, icpt = np.polyfit(k, ly, 1)
    pred = icpt + slope * k
    ss = np.sum((ly - ly.mean()) ** 2)
    r2 = 1.0 - np.sum((ly - pred) ** 2) / ss if ss > 0 else 1.0
    return float(-slope), float(np.exp(icpt)), float(r2)


@dataclass
class NSSystem:
    """Time-one Navier-Stokes map driven by boundary noise on part of the top edge.

    The state is the velocity at integer times, which vanishes on the walls
    because the forcing profile is supported inside each unit interval.
    Noise coefficients ``xi_j`` in ``[-1, 1]`` are scaled by ``b_j``.
    """

    n: int = 32
    nu: float = 0.05
    dt: float = 0.01
    n_modes: int = 4
    amplitudes: tuple = (1.0, 1.0, 1.0, 1.0)
    density: str = "uniform"
    gamma: tuple = (0.2, 0.8)
    window: tuple = (0.1, 0.7)
    delta: float | None = None
    domain: SquareDomain = field(init=False)
    params: NSParams = field(init=False)
    basis: NoiseBasis = field(init=False)
    lift: SeparableLift = field(init=False)
    noise: NoiseModel = field(init=False)
    system: SystemMap = field(init=False)

    def __post_init__(self):
        b = np.broadcast_to(np.asarray(self.amplitudes, dtype=float), (self.n_modes,)).copy()
        self.amplitudes = tuple(float(x) for x in b)
        self.domain = SquareDomain(self.n)
        self.params = NSParams(nu=self.nu, dt=self.dt)
        self.basis = NoiseBasis(self.domain, self.n_modes, tuple(self.gamma), *self.window)
        self.lift = SeparableLift(self.basis, self.delta)
        self.noise = NoiseModel(b, (density_from_name(self.density),) * self.n_modes, basis=self.basis)
        dim = self.domain.n * (self.domain.n + 1) * 2
        self.system = SystemMap(self.step, dim, norm_tag="h1", norm_fn=self.h1_norm,
                                meta={"kind": "navier-stokes", "n": self.n, "nu": self.nu})

    # -- state plumbing
    def field(self, u) -> VelocityField:
        return VelocityField.from_flat(self.domain, u)

    def h1_norm(self, u) -> np.ndarray:
        return h1_seminorm(self.field(u))

    def l2_norm(self, u) -> np.ndarray:
        return self.field(u).l2_norm()

    def run(self, u, xi, record=()):
        u = np.atleast_2d(np.asarray(u, dtype=float))
        xi = np.atleast_2d(np.asarray(xi, dtype=float))
        return resolve(self.field(u), self.params, self.lift, self.noise.realize(xi), record=record)

    def step(self, u, xi) -> np.ndarray:
        """``S(u, xi)`` on flat states, batch ``(B, D)``."""
        single = np.ndim(u) == 1
        out = self.run(u, xi).v.flat()
        return out[0] if single else out

    # -- observables
    def mode_fields(self) -> VelocityField:
        x, y = self.domain.node_coords()
        psi = np.array([np.sin(k * np.pi * x) * np.sin(l * np.pi * y) for k, l in OBS_MODES])
        f = VelocityField.from_stream(self.domain, psi)
        nrm = f.l2_norm()[:, None, None]
        return VelocityField(self.domain, f.U / nrm, f.V / nrm)

    def observe(self, records: dict, end: VelocityField) -> np.ndarray:
        """Energies at the quarter times of the step and four mode coefficients at its end."""
        modes = self.mode_fields()
        h = self.domain.h
        energies = [records[t].l2_norm() ** 2 for t in OBS_TIMES[:-1]] + [end.l2_norm() ** 2]
        coeffs = [inner(end.U, end.V, modes.U[m], modes.V[m], h) for m in range(len(OBS_MODES))]
        return np.stack(energies + coeffs, axis=-1)

    def observe_state(self, u) -> np.ndarray:
        f = self.field(np.atleast_2d(u))
        return self.observe({t: f for t in OBS_TIMES[:-1]}, f)

    def trajectory(self, u0, k_max: int, rng) -> np.ndarray:
        """Observables ``(k_max + 1, B, 8)`` along a noise path; step ``j`` uses ``rng.child(j)``."""
        state = as_state(rng)
        u = np.atleast_2d(np.asarray(u0, dtype=float))
        out = np.empty((k_max + 1, u.shape[0], 8))
        out[0] = self.observe_state(u)
        for j in range(1, k_max + 1):
            xi = self.noise.sample(state.child(j).generator(), u.shape[0])
            tr = self.run(u, xi, record=OBS_TIMES[:-1])
            out[j] = self.observe(tr.records, tr.v)
            u = tr.v.flat()
        return out

    def path(self, u0, k_max: int, rng, zero_noise: bool = False):
        """States ``(k_max + 1, B, D)`` and per-step sup of ``|u(t)|_1`` over quarter times."""
        state = as_state(rng)
        u = np.atleast_2d(np.asarray(u0, dtype=float))
        states = [u]
        sup = [self.h1_norm(u)]
        for j in range(1, k_max + 1):
            xi = (np.zeros((u.shape[0], self.n_modes)) if zero_noise
                  else self.noise.sample(state.child(j).generator(), u.shape[0]))
            tr = self.run(u, xi, record=OBS_TIMES[:-1])
            inside = [h1_seminorm(_homogeneous(tr.records[t], self, t, xi)) for t in OBS_TIMES[:-1]]
            u = tr.v.flat()
            states.append(u)
            sup.append(np.max(np.stack(inside + [self.h1_norm(u)]), axis=0))
        return np.array(states), np.array(sup)


def _homogeneous(full: VelocityField, ns: NSSystem, t: float, xi) -> VelocityField:
    """Strip the lift from a recorded full field."""
    zU, zV = ns.lift.field(np.full(np.shape(xi)[0], t), ns.noise.realize(xi))
    return VelocityField(ns.domain, full.U - zU, full.V - zV)


@dataclass(frozen=True)
class DecayFit:
    """``|S_k(v, 0)|_1 ~ C exp(-alpha k)``."""

    alpha: float
    C: float
    r2: float
    norms: np.ndarray

    def steps_to(self, eps: float) -> int:
        """Smallest ``k`` with ``C exp(-alpha k) <= eps``."""
        if self.alpha <= 0:
            raise ConfigurationError("no decay: the fitted rate is not positive")
        return max(0, int(np.ceil(np.log(self.C / eps) / self.alpha)))


def decay_probe(ns: NSSystem, u0, k_max: int = 20) -> DecayFit:
    """Unforced decay of ``|u|_1`` at integer times, fitted log-linearly over ``k = 1..k_max``.

    Pools all initial states in ``u0`` (rows) by fitting their mean log norm.
    """
    states, _ = ns.path(u0, k_max, 0, zero_noise=True)
    norms = np.array([ns.h1_norm(s) for s in states])
    if np.any(norms[1:] <= 0):
        raise InsufficientDataError("decay reached exact zero; start from a nonzero state")
    k = np.arange(1, k_max + 1)
    alpha, C, r2 = _fit_exponential(k, np.exp(np.mean(np.log(norms[1:]), axis=1)))
    return DecayFit(alpha, C, r2, norms)


@dataclass(frozen=True)
class DissipativityReport:
    alpha: float
    C1: float
    radius: float
    sup_norms: np.ndarray
    entry_times: np.ndarray | None
    entry_prediction: np.ndarray | None

    def summary(self) -> dict:
        return {"alpha": self.alpha, "C1": self.C1, "absorbing_radius": self.radius,
                "max_sup_norm": float(np.max(self.sup_norms))}


def dissipativity_probe(ns: NSSystem, u0, k_max: int, rng, alpha: float | None = None,
                        decay_start=None) -> DissipativityReport:
    """Fit ``|u(t)|_1 <= C1 (exp(-alpha t) |u0|_1 + 1)`` on noisy paths.

    ``alpha`` comes from the unforced decay fit (from ``decay_start``, or the
    first row of ``u0``) unless given; ``C1`` is the smallest constant
    making the bound hold on every sampled step.  The absorbing radius is
    ``2 C1``; for each path the first integer time inside it is compared
    with ``log(r + 1) / alpha`` where ``r = |u0|_1``.
    """
    u0 = np.atleast_2d(np.asarray(u0, dtype=float))
    if alpha is None:
        start = u0[:1] if decay_start is None else np.atleast_2d(decay_start)
        alpha = decay_probe(ns, start, min(k_max, 10)).alpha
    if alpha <= 0:
        raise ConfigurationError("system not dissipative at these parameters (alpha <= 0)")
    _, sup = ns.path(u0, k_max, rng)
    r0 = sup[0]
    k = np.arange(k_max + 1)[:, None]
    C1 = float(np.max(sup / (np.exp(-alpha * k) * r0[None, :] + 1.0)))
    radius = 2 * C1
    inside = sup <= radius
    entry = np.where(inside.any(axis=0), np.argmax(inside, axis=0), -1).astype(float)
    pred = np.log(r0 + 1.0) / alpha
    return DissipativityReport(float(alpha), C1, radius, sup, entry, pred)


def lipschitz_probe(ns: NSSystem, u0, perturbation, xi) -> float:
    """``|S(u0 + p, xi) - S(u0, xi)| / |p|`` in ``L^2``."""
    u0 = np.atleast_2d(u0)
    p = np.atleast_2d(perturbation)
    a = ns.step(u0, xi)
    b = ns.step(u0 + p, xi)
    return float(ns.l2_norm(b - a)[0] / ns.l2_norm(p)[0])


def random_initial_state(ns: NSSystem, rng, scale: float = 1.0, k_max: int = 3) -> np.ndarray:
    """Smooth divergence-free state vanishing on the walls, ``|u|_L2 = scale``."""
    gen = as_state(rng).generator()
    x, y = ns.domain.node_coords()
    c = gen.standard_normal((k_max, k_max))
    psi = sum(c[k - 1, l - 1] * np.sin(k * np.pi * x) * np.sin(l * np.pi * y)
              for k in range(1, k_max + 1) for l in range(1, k_max + 1))
    psi = psi * (x * (1 - x) * y * (1 - y))
    f = VelocityField.from_stream(ns.domain, psi)
    return (f * (scale / float(f.l2_norm()))).flat()
