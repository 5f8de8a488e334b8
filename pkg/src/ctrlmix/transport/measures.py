"""Finite-support and gridded probability measures with file IO."""
from __future__ import annotations

import csv
import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from ..errors import ConfigurationError, GridMismatchError


@dataclass(frozen=True)
class DiscreteMeasure:
    """Probability measure with finitely many atoms.

    Attributes
    ----------
    atoms : ndarray, shape (n, d)
    weights : ndarray, shape (n,)
    """

    atoms: np.ndarray
    weights: np.ndarray

    def __post_init__(self):
        atoms = np.asarray(self.atoms, dtype=float)
        if atoms.ndim == 1:
            atoms = atoms[:, None]
        w = np.asarray(self.weights, dtype=float).reshape(-1)
        if atoms.shape[0] < 1 or atoms.shape[0] != w.size:
            raise ConfigurationError("need at least one atom and one weight per atom")
        if np.any(w < 0) or abs(w.sum() - 1.0) > 1e-12:
            raise ConfigurationError(f"weights must be non-negative and sum to 1 (sum={w.sum()!r})")
        if not np.all(np.isfinite(atoms)):
            raise ConfigurationError("atoms must be finite")
        object.__setattr__(self, "atoms", atoms)
        object.__setattr__(self, "weights", w)

    @classmethod
    def empirical(cls, points) -> "DiscreteMeasure":
        pts = np.asarray(points, dtype=float)
        if pts.ndim == 1:
            pts = pts[:, None]
        return cls(pts, np.full(pts.shape[0], 1.0 / pts.shape[0]))

    @classmethod
    def dirac(cls, x) -> "DiscreteMeasure":
        return cls(np.atleast_1d(np.asarray(x, dtype=float))[None, :], np.ones(1))

    @property
    def size(self) -> int:
        return self.weights.size

    @property
    def dim(self) -> int:
        return self.atoms.shape[1]

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow([f"x{i}" for i in range(self.dim)] + ["weight"])
            for x, p in zip(self.atoms, self.weights):
                w.writerow([repr(float(v)) for v in x] + [repr(float(p))])

    @classmethod
    def from_csv(cls, path) -> "DiscreteMeasure":
        with open(path, newline="") as fh:
            rows = list(csv.reader(fh))
        data = np.array([[float(v) for v in r] for r in rows[1:]])
        return cls(data[:, :-1], data[:, -1])


@dataclass(frozen=True)
class CouplingPlan:
    """Joint weights ``plan[i, j]`` between atoms of two measures."""

    plan: np.ndarray

    def marginals(self):
        return self.plan.sum(axis=1), self.plan.sum(axis=0)

    def check(self, mu1: DiscreteMeasure, mu2: DiscreteMeasure, tol: float = 1e-9) -> bool:
        r, c = self.marginals()
        return bool(np.all(self.plan >= -tol)
                    and np.max(np.abs(r - mu1.weights)) <= tol
                    and np.max(np.abs(c - mu2.weights)) <= tol)


@dataclass(frozen=True)
class DensityGrid:
    """Density sampled at cell centres of an axis-aligned box.

    Attributes
    ----------
    lower, upper : ndarray, shape (d,)
    values : ndarray with ``d`` axes (axis ``k`` runs along coordinate ``k``)
    """

    lower: np.ndarray
    upper: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        lo = np.atleast_1d(np.asarray(self.lower, dtype=float))
        hi = np.atleast_1d(np.asarray(self.upper, dtype=float))
        vals = np.asarray(self.values, dtype=float)
        if lo.size != vals.ndim or hi.size != vals.ndim or np.any(hi <= lo):
            raise ConfigurationError("box and value array dimensions disagree")
        object.__setattr__(self, "lower", lo)
        object.__setattr__(self, "upper", hi)
        object.__setattr__(self, "values", vals)

    @property
    def shape(self):
        return self.values.shape

    @property
    def spacing(self) -> np.ndarray:
        return (self.upper - self.lower) / np.asarray(self.shape)

    @property
    def cell_volume(self) -> float:
        return float(np.prod(self.spacing))

    def axes(self):
        return [lo + (np.arange(n) + 0.5) * h
                for lo, n, h in zip(self.lower, self.shape, self.spacing)]

    def points(self) -> np.ndarray:
        """Cell centres, shape ``(*shape, d)``."""
        return np.stack(np.meshgrid(*self.axes(), indexing="ij"), axis=-1)

    def mass(self) -> float:
        return float(self.values.sum() * self.cell_volume)

    def is_normalized(self, tol: float = 1e-6) -> bool:
        return bool(np.all(self.values >= 0) and abs(self.mass() - 1.0) <= tol)

    @classmethod
    def from_function(cls, fn, lower, upper, shape, normalize: bool = False) -> "DensityGrid":
        tmp = cls(lower, upper, np.zeros(shape))
        vals = np.asarray(fn(tmp.points()), dtype=float)
        grid = cls(lower, upper, vals)
        if normalize:
            grid = cls(lower, upper, vals / grid.mass())
        return grid

    def same_layout(self, other: "DensityGrid") -> bool:
        return (self.shape == other.shape and np.allclose(self.lower, other.lower, rtol=0, atol=1e-14)
                and np.allclose(self.upper, other.upper, rtol=0, atol=1e-14))

    def save(self, stem) -> None:
        """Write ``stem.bin`` (float64, C order) and ``stem.json`` header."""
        stem = Path(stem)
        self.values.astype("<f8").tofile(stem.with_suffix(".bin"))
        header = {"lower": self.lower.tolist(), "upper": self.upper.tolist(),
                  "shape": list(self.shape), "dtype": "float64", "order": "C"}
        stem.with_suffix(".json").write_text(json.dumps(header, sort_keys=True, indent=1))

    @classmethod
    def load(cls, stem) -> "DensityGrid":
        stem = Path(stem)
        header = json.loads(stem.with_suffix(".json").read_text())
        vals = np.fromfile(stem.with_suffix(".bin"), dtype="<f8").reshape(header["shape"])
        return cls(header["lower"], header["upper"], vals)


def tv_distance_grid(p: DensityGrid, q: DensityGrid) -> float:
    """Total variation ``(1/2) sum |p - q| * cell volume`` on a shared grid."""
    if not p.same_layout(q):
        raise GridMismatchError("density grids differ in box or resolution")
    return float(0.5 * np.sum(np.abs(p.values - q.values)) * p.cell_volume)
