"""Staggered grid on the unit square and discrete velocity fields.

Layout (``h = 1/n``):

* ``U`` (x-velocity) lives on vertical faces ``(i h, (j + 1/2) h)``, array
  shape ``(..., n, n + 1)`` indexed ``[j, i]``.
* ``V`` (y-velocity) lives on horizontal faces ``((i + 1/2) h, j h)``, shape
  ``(..., n + 1, n)``.
* Scalars such as stream functions live on nodes ``(i h, j h)``, shape
  ``(n + 1, n + 1)``.

Boundary nodes are numbered ``k = 0 .. 4n - 1`` counter-clockwise from the
origin, at arclength ``s = k h``.  Each node belongs to the edge it starts,
which fixes its outward normal and tangent (one-sided at corners).
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import ConfigurationError, GridMismatchError

MIN_CELLS = 16
# outward normal and counter-clockwise tangent of the bottom, right, top, left edges
EDGE_NORMALS = np.array([[0.0, -1.0], [1.0, 0.0], [0.0, 1.0], [-1.0, 0.0]])
EDGE_TANGENTS = np.array([[1.0, 0.0], [0.0, 1.0], [-1.0, 0.0], [0.0, -1.0]])


@dataclass(frozen=True)
class SquareDomain:
    """Unit square with ``n`` cells per side."""

    n: int

    def __post_init__(self):
        if int(self.n) != self.n or self.n < MIN_CELLS:
            raise ConfigurationError(f"need an integer n >= {MIN_CELLS}, got {self.n}")

    @property
    def h(self) -> float:
        return 1.0 / self.n

    @property
    def u_shape(self):
        return (self.n, self.n + 1)

    @property
    def v_shape(self):
        return (self.n + 1, self.n)

    @property
    def node_shape(self):
        return (self.n + 1, self.n + 1)

    @property
    def n_boundary(self) -> int:
        return 4 * self.n

    @property
    def perimeter(self) -> float:
        return 4.0

    def arclength(self) -> np.ndarray:
        return self.h * np.arange(self.n_boundary)

    def boundary_index(self):
        """Node indices ``(j, i)`` of the boundary nodes in arclength order."""
        n = self.n
        k = np.arange(n)
        j = np.concatenate([np.zeros(n, int), k, np.full(n, n), n - k])
        i = np.concatenate([k, np.full(n, n), n - k, np.zeros(n, int)])
        return j, i

    def boundary_points(self) -> np.ndarray:
        j, i = self.boundary_index()
        return np.stack([i * self.h, j * self.h], axis=-1)

    def edge_of(self) -> np.ndarray:
        return np.arange(self.n_boundary) // self.n

    def normals(self) -> np.ndarray:
        return EDGE_NORMALS[self.edge_of()]

    def tangents(self) -> np.ndarray:
        return EDGE_TANGENTS[self.edge_of()]

    def corner_mask(self) -> np.ndarray:
        return np.arange(self.n_boundary) % self.n == 0

    def node_coords(self):
        x = self.h * np.arange(self.n + 1)
        return np.meshgrid(x, x, indexing="xy")

    def u_coords(self):
        x = self.h * np.arange(self.n + 1)
        y = self.h * (np.arange(self.n) + 0.5)
        return np.meshgrid(x, y, indexing="xy")

    def v_coords(self):
        x = self.h * (np.arange(self.n) + 0.5)
        y = self.h * np.arange(self.n + 1)
        return np.meshgrid(x, y, indexing="xy")

    def cell_coords(self):
        c = self.h * (np.arange(self.n) + 0.5)
        return np.meshgrid(c, c, indexing="xy")

    @staticmethod
    def wall_distance(x, y) -> np.ndarray:
        return np.minimum(np.minimum(x, 1 - x), np.minimum(y, 1 - y))


def curl_of_stream(psi: np.ndarray, h: float):
    """Face velocities ``(-d psi/dy, d psi/dx)`` from node values.

    The discrete divergence of the result vanishes identically.
    """
    U = -(psi[..., 1:, :] - psi[..., :-1, :]) / h
    V = (psi[..., :, 1:] - psi[..., :, :-1]) / h
    return U, V


def divergence(U: np.ndarray, V: np.ndarray, h: float) -> np.ndarray:
    """Cell divergence, shape ``(..., n, n)``."""
    return (U[..., :, 1:] - U[..., :, :-1] + V[..., 1:, :] - V[..., :-1, :]) / h


@dataclass(frozen=True)
class VelocityField:
    """Face-normal velocity components on a ``SquareDomain``.

    ``U`` and ``V`` may carry leading batch axes.
    """

    domain: SquareDomain
    U: np.ndarray
    V: np.ndarray

    def __post_init__(self):
        U = np.asarray(self.U, dtype=float)
        V = np.asarray(self.V, dtype=float)
        if U.shape[-2:] != self.domain.u_shape or V.shape[-2:] != self.domain.v_shape:
            raise GridMismatchError("velocity arrays do not match the domain layout")
        object.__setattr__(self, "U", U)
        object.__setattr__(self, "V", V)

    @classmethod
    def zeros(cls, domain: SquareDomain, batch=()) -> "VelocityField":
        batch = tuple(np.atleast_1d(batch)) if batch != () else ()
        return cls(domain, np.zeros(batch + domain.u_shape), np.zeros(batch + domain.v_shape))

    @classmethod
    def from_stream(cls, domain: SquareDomain, psi) -> "VelocityField":
        return cls(domain, *curl_of_stream(np.asarray(psi, dtype=float), domain.h))

    def divergence(self) -> np.ndarray:
        return divergence(self.U, self.V, self.domain.h)

    def max_divergence(self) -> float:
        return float(np.max(np.abs(self.divergence()), initial=0.0))

    def flat(self) -> np.ndarray:
        lead = self.U.shape[:-2]
        return np.concatenate([self.U.reshape(lead + (-1,)), self.V.reshape(lead + (-1,))], axis=-1)

    @classmethod
    def from_flat(cls, domain: SquareDomain, x) -> "VelocityField":
        x = np.asarray(x, dtype=float)
        nu = domain.n * (domain.n + 1)
        lead = x.shape[:-1]
        return cls(domain, x[..., :nu].reshape(lead + domain.u_shape), x[..., nu:].reshape(lead + domain.v_shape))

    def __add__(self, other: "VelocityField") -> "VelocityField":
        return VelocityField(self.domain, self.U + other.U, self.V + other.V)

    def __sub__(self, other: "VelocityField") -> "VelocityField":
        return VelocityField(self.domain, self.U - other.U, self.V - other.V)

    def __mul__(self, c) -> "VelocityField":
        return VelocityField(self.domain, c * self.U, c * self.V)

    __rmul__ = __mul__

    def l2_norm(self) -> np.ndarray:
        return l2_norm(self.U, self.V, self.domain.h)

    def save(self, stem, time: float = 0.0) -> None:
        """Write ``stem.bin`` (U then V, float64) and a JSON header."""
        import json
        from pathlib import Path

        stem = Path(stem)
        np.concatenate([self.U.ravel(), self.V.ravel()]).astype("<f8").tofile(stem.with_suffix(".bin"))
        header = {"n": self.domain.n, "time": float(time), "u_shape": list(self.U.shape),
                  "v_shape": list(self.V.shape), "dtype": "float64", "layout": "staggered"}
        stem.with_suffix(".json").write_text(json.dumps(header, sort_keys=True, indent=1))

    @classmethod
    def load(cls, stem) -> "VelocityField":
        import json
        from pathlib import Path

        stem = Path(stem)
        header = json.loads(stem.with_suffix(".json").read_text())
        data = np.fromfile(stem.with_suffix(".bin"), dtype="<f8")
        nu = int(np.prod(header["u_shape"]))
        dom = SquareDomain(header["n"])
        return cls(dom, data[:nu].reshape(header["u_shape"]), data[nu:].reshape(header["v_shape"]))


def inner(U1, V1, U2, V2, h: float) -> np.ndarray:
    """Discrete ``L^2`` inner product over all faces."""
    return h * h * (np.sum(U1 * U2, axis=(-2, -1)) + np.sum(V1 * V2, axis=(-2, -1)))


def l2_norm(U, V, h: float) -> np.ndarray:
    return np.sqrt(inner(U, V, U, V, h))


def stream_modes(domain: SquareDomain, k: int, l: int) -> np.ndarray:
    """Node stream function ``(x(1-x) y(1-y))^2 sin(k pi x) sin(l pi y)``.

    Its curl is divergence free and vanishes on the walls to second order.
    """
    x, y = domain.node_coords()
    return (x * (1 - x) * y * (1 - y)) ** 2 * np.sin(k * np.pi * x) * np.sin(l * np.pi * y)
