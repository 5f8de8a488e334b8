"""Discrete-time random dynamical systems with bounded decomposable noise.

A system is a deterministic map ``u_k = S(u_{k-1}, eta_k)``.  The noise is
written in mode coordinates ``eta = sum_j b_j xi_j phi_j`` with independent
``xi_j`` in ``[-1, 1]``.  The hosting system owns the mode shapes ``phi_j``
and receives the raw coefficient vector ``xi``; it is built with the same
amplitudes ``b`` as the noise model and applies them itself.

All evaluators are vectorised over a leading batch axis: states have shape
``(..., dim)`` and noise vectors ``(..., N)``.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any, Callable, Sequence

import numpy as np
from scipy import integrate

from .errors import ConfigurationError, NumericalBlowupError
from .rng import as_generator

TABLE_NODES = 4096
NORMS = ("euclidean", "l2", "h1")


class Density1D:
    """C¹ probability density on ``[-1, 1]`` with an inverse-CDF sampler.

    Parameters
    ----------
    shape : callable
        Unnormalised non-negative density on ``[-1, 1]``.
    derivative : callable, optional
        Derivative of ``shape``; central differences are used otherwise.
    name : str
        Label used in reports and configs.
    """

    def __init__(self, shape: Callable, derivative: Callable | None = None, name: str = "custom"):
        self.name = name
        self._shape = shape
        self._dshape = derivative
        mass, _ = integrate.quad(lambda r: float(shape(np.asarray(r))), -1.0, 1.0,
                                 epsabs=1e-13, epsrel=1e-13, limit=200)
        if not np.isfinite(mass) or mass <= 0:
            raise ConfigurationError(f"density '{name}' is not normalizable (mass={mass})")
        self._scale = 1.0 / mass
        nodes = np.linspace(-1.0, 1.0, TABLE_NODES)
        vals = self._scale * np.asarray(shape(nodes), dtype=float)
        if np.any(vals < 0) or not np.all(np.isfinite(vals)):
            raise ConfigurationError(f"density '{name}' takes negative or non-finite values")
        if self.pdf(0.0) <= 0:
            raise ConfigurationError(f"density '{name}' vanishes at the origin")
        cdf = integrate.cumulative_trapezoid(vals, nodes, initial=0.0)
        if cdf[-1] <= 0:
            raise ConfigurationError(f"density '{name}' table is not normalizable")
        self._nodes = nodes
        self._cdf = cdf / cdf[-1]

    def pdf(self, x):
        x = np.asarray(x, dtype=float)
        inside = np.abs(x) <= 1.0
        out = np.zeros_like(x)
        out[inside] = self._scale * np.asarray(self._shape(x[inside]), dtype=float)
        return out if out.ndim else float(out)

    def dpdf(self, x):
        x = np.asarray(x, dtype=float)
        if self._dshape is not None:
            inside = np.abs(x) <= 1.0
            out = np.zeros_like(x)
            out[inside] = self._scale * np.asarray(self._dshape(x[inside]), dtype=float)
            return out
        step = 1e-6
        return (self.pdf(x + step) - self.pdf(x - step)) / (2 * step)

    def cdf(self, x):
        return np.interp(x, self._nodes, self._cdf, left=0.0, right=1.0)

    def ppf(self, q):
        return np.interp(q, self._cdf, self._nodes)

    def sample(self, gen: np.random.Generator, size) -> np.ndarray:
        return self.ppf(gen.random(size))

    def mass(self) -> float:
        """Integral of the normalised density (should be 1 within 1e-9)."""
        return integrate.quad(lambda r: float(self.pdf(r)), -1.0, 1.0,
                              epsabs=1e-13, epsrel=1e-13, limit=200)[0]


def uniform_density() -> Density1D:
    return Density1D(lambda r: np.ones_like(r), lambda r: np.zeros_like(r), "uniform")


def parabolic_density() -> Density1D:
    """Density proportional to ``1 - r²``."""
    return Density1D(lambda r: 1.0 - r**2, lambda r: -2.0 * r, "parabolic")


def bump_density() -> Density1D:
    """Density proportional to ``(1 - r²)²``; C¹ on the whole line."""
    return Density1D(lambda r: (1.0 - r**2) ** 2, lambda r: -4.0 * r * (1.0 - r**2), "bump")


def cosine_density() -> Density1D:
    """Density proportional to ``1 + cos(pi r)``; C¹ on the whole line."""
    return Density1D(lambda r: 1.0 + np.cos(np.pi * r), lambda r: -np.pi * np.sin(np.pi * r), "cosine")


DENSITY_FAMILIES = {
    "uniform": uniform_density,
    "parabolic": parabolic_density,
    "bump": bump_density,
    "cosine": cosine_density,
}


def density_from_name(name: str) -> Density1D:
    try:
        return DENSITY_FAMILIES[name]()
    except KeyError:
        raise ConfigurationError(f"unknown density family '{name}'") from None


@dataclass(frozen=True)
class NoiseModel:
    """Decomposable bounded noise ``sum_j b_j xi_j phi_j``.

    Attributes
    ----------
    b : ndarray
        Non-negative mode amplitudes, length ``N``.
    densities : tuple of Density1D
        Law of each coefficient ``xi_j`` on ``[-1, 1]``.
    basis : object
        Opaque handle to the mode shapes owned by the hosting system.
    """

    b: np.ndarray
    densities: tuple
    basis: Any = None

    def __post_init__(self):
        b = np.asarray(self.b, dtype=float).reshape(-1)
        if np.any(b < 0) or not np.all(np.isfinite(b)):
            raise ConfigurationError("noise amplitudes must be finite and non-negative")
        if len(self.densities) != b.size:
            raise ConfigurationError("one density per noise mode is required")
        object.__setattr__(self, "b", b)
        object.__setattr__(self, "densities", tuple(self.densities))

    @classmethod
    def iid(cls, b: Sequence[float], density: Density1D | str = "uniform", basis=None) -> "NoiseModel":
        dens = density_from_name(density) if isinstance(density, str) else density
        b = np.asarray(b, dtype=float).reshape(-1)
        return cls(b, (dens,) * b.size, basis)

    @property
    def basis_dim(self) -> int:
        return self.b.size

    @property
    def total_variance_budget(self) -> float:
        """Sum of squared amplitudes."""
        return float(np.sum(self.b**2))

    def sample(self, rng, size=None) -> np.ndarray:
        """Draw coefficient vectors; shape ``(N,)`` or ``(*size, N)``."""
        gen = as_generator(rng)
        shape = () if size is None else (size,) if np.isscalar(size) else tuple(size)
        cols = [d.sample(gen, shape) for d in self.densities]
        return np.stack(cols, axis=-1)

    def pdf(self, xi) -> np.ndarray:
        """Product density of coefficient vectors."""
        xi = np.asarray(xi, dtype=float)
        out = np.ones(xi.shape[:-1])
        for j, d in enumerate(self.densities):
            out = out * d.pdf(xi[..., j])
        return out

    def realize(self, xi) -> np.ndarray:
        """Amplitude-weighted coefficients ``b_j xi_j``."""
        return np.asarray(xi, dtype=float) * self.b


def _euclidean(x):
    return np.sqrt(np.sum(np.asarray(x, dtype=float) ** 2, axis=-1))


@dataclass(frozen=True)
class SystemMap:
    """Deterministic step map ``S(u, xi)`` with its phase-space descriptor.

    Attributes
    ----------
    step_fn : callable
        ``(u, xi) -> S(u, xi)``, vectorised over leading axes.
    dim : int
        Dimension of state coordinates.
    norm_tag : str
        One of ``euclidean``, ``l2``, ``h1``.
    norm_fn : callable, optional
        Norm of state coordinates; Euclidean by default.
    radius : float, optional
        Radius of the declared compact phase set ``X``.
    noise_derivative : callable, optional
        ``(u, xi, direction) -> D_xi S(u, xi) direction``.
    """

    step_fn: Callable
    dim: int
    norm_tag: str = "euclidean"
    norm_fn: Callable | None = None
    radius: float | None = None
    noise_derivative: Callable | None = None
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.norm_tag not in NORMS:
            raise ConfigurationError(f"unknown norm '{self.norm_tag}'")

    def norm(self, x) -> np.ndarray:
        return (self.norm_fn or _euclidean)(x)

    def distance(self, x, y) -> np.ndarray:
        return self.norm(np.asarray(x, dtype=float) - np.asarray(y, dtype=float))


@dataclass(frozen=True)
class StateVector:
    """A point of the phase space together with the norm it is measured in."""

    coords: np.ndarray
    norm_tag: str = "euclidean"

    def __post_init__(self):
        c = np.atleast_1d(np.asarray(self.coords, dtype=float))
        if not np.all(np.isfinite(c)):
            raise NumericalBlowupError("state has non-finite entries")
        if self.norm_tag not in NORMS:
            raise ConfigurationError(f"unknown norm '{self.norm_tag}'")
        object.__setattr__(self, "coords", c)

    def norm(self, system: SystemMap | None = None) -> float:
        fn = system.norm if system is not None else _euclidean
        return float(fn(self.coords))


def _coords(u) -> np.ndarray:
    return u.coords if isinstance(u, StateVector) else np.asarray(u, dtype=float)


def _checked(system: SystemMap, u, xi) -> np.ndarray:
    out = np.asarray(system.step_fn(u, xi), dtype=float)
    if not np.all(np.isfinite(out)):
        bad = ~np.all(np.isfinite(out.reshape(-1, out.shape[-1])), axis=-1)
        raise NumericalBlowupError(
            "step produced non-finite state",
            {"n_bad": int(bad.sum()), "max_abs_input": float(np.max(np.abs(u), initial=0.0))},
        )
    return out


def sample_noise(model: NoiseModel, rng) -> np.ndarray:
    """Draw one noise coefficient vector."""
    return model.sample(rng)


def step(system: SystemMap, u, xi):
    """Apply ``S(u, xi)``; returns the same container type as ``u``."""
    out = _checked(system, _coords(u), np.asarray(xi, dtype=float))
    return StateVector(out, system.norm_tag) if isinstance(u, StateVector) else out


def simulate_trajectory(system: SystemMap, u0, model: NoiseModel, k: int, rng) -> np.ndarray:
    """Trajectory ``u_0, ..., u_k`` with i.i.d. noise.

    ``u0`` may carry a batch axis, in which case the result has shape
    ``(k + 1, batch, dim)`` and each batch member gets its own noise.
    """
    if k < 0:
        raise ValueError("k must be non-negative")
    gen = as_generator(rng)
    u = np.asarray(_coords(u0), dtype=float)
    batch = u.shape[:-1]
    out = np.empty((k + 1, *u.shape))
    out[0] = u
    for i in range(1, k + 1):
        xi = model.sample(gen, batch if batch else None)
        u = _checked(system, u, xi)
        out[i] = u
    return out


def transition_ensemble(system: SystemMap, u, model: NoiseModel, n: int, rng):
    """Empirical one-step transition law from ``u`` with ``n`` atoms."""
    from .transport import DiscreteMeasure

    if n < 1:
        raise ValueError("n must be at least 1")
    u = np.asarray(_coords(u), dtype=float)
    xi = model.sample(rng, n)
    atoms = _checked(system, np.broadcast_to(u, (n, u.size)), xi)
    return DiscreteMeasure(atoms, np.full(n, 1.0 / n))


def affine_system(a, b=None, radius: float | None = None) -> SystemMap:
    """``S(u, xi) = A u + B xi`` in finite dimension (no clipping).

    ``b`` is the injection matrix including amplitudes; identity by default.
    """
    A = np.atleast_2d(np.asarray(a, dtype=float))
    dim = A.shape[0]
    Bm = np.eye(dim) if b is None else np.atleast_2d(np.asarray(b, dtype=float))
    if Bm.shape[0] != dim:
        Bm = Bm.T

    def step_fn(u, xi):
        return np.asarray(u) @ A.T + np.asarray(xi) @ Bm.T

    return SystemMap(step_fn, dim, radius=radius, meta={"A": A, "B": Bm})


def check_compactness(system: SystemMap, model: NoiseModel, sampler: Callable, n: int, rng) -> dict:
    """Sample ``(u, xi)`` in ``X x K`` and check the image stays in ``X``.

    ``sampler(gen, n)`` must return ``n`` states of ``X``.
    """
    gen = as_generator(rng)
    u = sampler(gen, n)
    xi = model.sample(gen, n)
    norms = system.norm(_checked(system, u, xi))
    worst = float(np.max(norms))
    ok = system.radius is None or worst <= system.radius * (1 + 1e-12)
    return {"max_norm": worst, "radius": system.radius, "pass": bool(ok)}
