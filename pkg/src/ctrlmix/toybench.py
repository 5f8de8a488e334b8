"""Small systems with known answers and slow brute-force oracles.

The oracles here are deliberately simple and independent of the fast
solvers they check.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
from scipy.ndimage import maximum_filter1d

from .errors import ConfigurationError, SizeError
from .rds import Density1D, NoiseModel, SystemMap, density_from_name
from .transport.measures import DensityGrid, DiscreteMeasure
from .transport.dual_lipschitz import merged_support

KINDS = ("contracting-affine", "unstable-controlled")


@dataclass(frozen=True)
class ToySystem:
    """A toy random dynamical system with its noise law.

    Attributes
    ----------
    kind : str
        ``contracting-affine`` or ``unstable-controlled``.
    A : ndarray
        Linear part of the drift.
    B : ndarray
        Injection matrix applied to the raw noise coefficients (amplitudes
        included).
    system : SystemMap
    noise : NoiseModel
    gain : ndarray, optional
        Exact stabilising gain ``K``: replacing ``xi'`` by ``xi + K (u - u')``
        contracts differences by ``A - B K``.
    unstable_block : tuple of int
        Coordinates on which ``A`` expands.
    """

    kind: str
    A: np.ndarray
    B: np.ndarray
    system: SystemMap
    noise: NoiseModel
    gain: np.ndarray | None = None
    unstable_block: tuple = ()
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ConfigurationError(f"unknown toy kind '{self.kind}'")
        norm = np.linalg.norm(self.A, 2)
        if self.kind == "contracting-affine" and norm >= 1:
            raise ConfigurationError("contracting-affine needs spectral norm of A below 1")
        if self.kind == "unstable-controlled" and not self.unstable_block:
            raise ConfigurationError("unstable-controlled needs a declared unstable block")

    def stabilise(self, u, u2, xi) -> np.ndarray:
        """Noise for the second copy that contracts the pair, ``xi + K (u - u2)``."""
        if self.gain is None:
            raise ConfigurationError("this toy system has no stabilising gain")
        d = np.asarray(u, dtype=float) - np.asarray(u2, dtype=float)
        return np.asarray(xi, dtype=float) + d @ self.gain.T

    @property
    def contraction(self) -> float:
        """Spectral norm of the closed-loop difference map."""
        K = np.zeros((self.B.shape[1], self.A.shape[0])) if self.gain is None else self.gain
        return float(np.linalg.norm(self.A - self.B @ K, 2))


def contracting_affine(a=0.5, b=1.0, density: str | Density1D = "uniform") -> ToySystem:
    """``S(u, xi) = a u + b xi`` with ``xi`` i.i.d. on ``[-1, 1]``.

    ``a`` and ``b`` may be scalars (one dimension) or matrices.
    """
    A = np.atleast_2d(np.asarray(a, dtype=float))
    B = np.atleast_2d(np.asarray(b, dtype=float))
    if B.shape == (1, 1) and A.shape[0] > 1:
        B = B[0, 0] * np.eye(A.shape[0])
    dens = density_from_name(density) if isinstance(density, str) else density
    noise = NoiseModel((np.ones(B.shape[1])), (dens,) * B.shape[1])
    norm = np.linalg.norm(A, 2)
    radius = float(np.linalg.norm(B, 2) * np.sqrt(B.shape[1]) / (1 - norm)) if norm < 1 else None

    def step_fn(u, xi):
        return np.asarray(u) @ A.T + np.asarray(xi) @ B.T

    system = SystemMap(step_fn, A.shape[0], radius=radius, meta={"A": A, "B": B})
    return ToySystem("contracting-affine", A, B, system, noise, gain=np.zeros((B.shape[1], A.shape[0])))


def unstable_controlled(expansion: float = 1.2, damping: float = 0.3, b=(2.0, 0.1),
                        q: float = 0.5, density: str | Density1D = "bump") -> ToySystem:
    """``S(u, xi) = clip(A u + B xi, -1, 1)`` on the square ``[-1, 1]^2``.

    ``A = diag(expansion, damping)`` expands the first coordinate and
    ``B = diag(b)``.  Clipping is non-expansive coordinatewise, so the gain
    ``K = diag((expansion - q) / b_1, 0)`` makes every step contract
    differences by ``max(q, damping)``.
    """
    if expansion <= 1 or not 0 <= damping < 1:
        raise ConfigurationError("need expansion > 1 and damping in [0, 1)")
    if not 0 < q < 1:
        raise ConfigurationError("contraction target q must lie in (0, 1)")
    A = np.diag([float(expansion), float(damping)])
    B = np.diag(np.asarray(b, dtype=float))
    if np.any(np.diag(B) <= 0):
        raise ConfigurationError("noise amplitudes must be positive")
    dens = density_from_name(density) if isinstance(density, str) else density
    noise = NoiseModel(np.ones(2), (dens, dens))
    gain = np.zeros((2, 2))
    gain[0, 0] = (expansion - q) / B[0, 0]

    def step_fn(u, xi):
        return np.clip(np.asarray(u) @ A.T + np.asarray(xi) @ B.T, -1.0, 1.0)

    def noise_derivative(u, xi, direction):
        raw = np.asarray(u) @ A.T + np.asarray(xi) @ B.T
        inside = np.abs(raw) < 1.0
        return np.where(inside, np.asarray(direction) @ B.T, 0.0)

    system = SystemMap(step_fn, 2, radius=float(np.sqrt(2.0)), noise_derivative=noise_derivative,
                       meta={"A": A, "B": B})
    return ToySystem("unstable-controlled", A, B, system, noise, gain=gain, unstable_block=(0,),
                     meta={"q": float(q)})


def synchronous_coupling_bound(a: float, u0, u0p, k: int) -> float:
    """``min(2, |a|^k |u0 - u0'|)``: same-noise copies of ``a u + xi``.

    Feeding both copies the same noise gives ``|u_k - u_k'| = |a|^k |u0 - u0'|``,
    and the dual-Lipschitz distance of two laws is at most the expected
    distance of any coupling, capped at 2.
    """
    if abs(a) >= 1:
        raise ConfigurationError("need |a| < 1")
    gap = float(np.linalg.norm(np.atleast_1d(np.asarray(u0, dtype=float) - np.asarray(u0p, dtype=float))))
    return float(min(2.0, abs(a) ** k * gap))


def _cell_masses(noise: Density1D | None, scale: float, centres: np.ndarray, h: float) -> np.ndarray:
    """Probability of each grid cell under ``scale * xi``."""
    if noise is None or scale == 0.0:
        out = np.zeros(centres.size)
        out[np.argmin(np.abs(centres))] = 1.0
        return out
    s = abs(scale)
    lo = np.clip((centres - h / 2) / s, -1.0, 1.0)
    hi = np.clip((centres + h / 2) / s, -1.0, 1.0)
    m = noise.cdf(hi) - noise.cdf(lo)
    return m if scale > 0 else m[::-1]


def exact_stationary_density_1d(a: float, noise: Density1D | str | None, k_terms: int,
                                b: float = 1.0, h: float = 1e-3, return_bound: bool = False):
    """Density of ``sum_{j < k_terms} a^j b xi_j`` by direct grid convolution.

    Each term is discretised as exact cell masses on a grid of spacing
    ``h`` centred at 0, and the masses are convolved term by term.

    Parameters
    ----------
    noise : Density1D, str or None
        Law of ``xi`` on ``[-1, 1]``; ``None`` means a point mass at 0.
    return_bound : bool
        Also return the truncation bound ``|a|^k_terms * diam / (1 - |a|)``
        where ``diam = 2 b`` is the diameter of the noise support.
    """
    if abs(a) >= 1:
        raise ConfigurationError("need |a| < 1")
    if k_terms < 1:
        raise ConfigurationError("need at least one term")
    dens = density_from_name(noise) if isinstance(noise, str) else noise
    half = int(np.ceil(abs(b) / (1 - abs(a)) / h)) + 1
    centres = h * np.arange(-half, half + 1)
    total = np.zeros(centres.size)
    total[half] = 1.0
    for j in range(k_terms):
        scale = b * a**j
        w = int(np.ceil(abs(scale) / h)) + 1
        m = _cell_masses(dens, scale, h * np.arange(-w, w + 1), h)
        total = np.convolve(total, m)[w:w + centres.size]
    grid = DensityGrid([-h * (half + 0.5)], [h * (half + 0.5)], total / h)
    if return_bound:
        bound = abs(a) ** k_terms * 2 * abs(b) / (1 - abs(a))
        return grid, float(bound)
    return grid


def brute_force_bl_distance_1d(mu1: DiscreteMeasure, mu2: DiscreteMeasure, step: float = 1e-3) -> float:
    """Dual-Lipschitz distance of two small 1-D measures by exhaustive grid search.

    For each sup-bound ``M`` on a grid of spacing ``step`` the slope budget
    is ``L = 1 - M``; the best function values on the sorted atoms are found
    by dynamic programming over an ``f`` grid of spacing ``step``, moving
    between neighbouring atoms by at most ``L`` times their gap.
    """
    if mu1.dim != 1 or mu2.dim != 1:
        raise ConfigurationError("brute force oracle is one-dimensional")
    if mu1.size > 5 or mu2.size > 5:
        raise SizeError("brute force oracle takes at most 5 atoms per measure")
    pts, diff = merged_support(mu1, mu2)
    order = np.argsort(pts[:, 0])
    x, w = pts[order, 0], diff[order]
    gaps = np.diff(x)
    n_m = int(round(1.0 / step))
    best = 0.0
    for jm in range(n_m + 1):
        M = jm * step
        L = 1.0 - M
        f = step * np.arange(-jm, jm + 1)
        val = w[0] * f
        for i, g in enumerate(gaps):
            r = int(np.floor(L * g / step + 1e-9))
            if r >= jm * 2:
                val = np.full_like(val, val.max())
            elif r > 0:
                val = maximum_filter1d(val, size=2 * r + 1, mode="constant", cval=-np.inf)
            val = val + w[i + 1] * f
        best = max(best, float(val.max()))
    return best


@lru_cache(maxsize=None)
def _bases(m: int, n: int):
    """Pseudo-inverses of all basis matrices of the ``m x n`` transport polytope."""
    rows = []
    for i in range(m):
        r = np.zeros(m * n)
        r[i * n:(i + 1) * n] = 1
        rows.append(r)
    for j in range(n):
        r = np.zeros(m * n)
        r[j::n] = 1
        rows.append(r)
    A = np.array(rows)
    k = m + n - 1
    cells, pinvs = [], []
    for sub in itertools.combinations(range(m * n), k):
        Ab = A[:, sub]
        if np.linalg.matrix_rank(Ab) == k:
            cells.append(sub)
            pinvs.append(np.linalg.pinv(Ab))
    return A, np.array(cells, dtype=int), np.array(pinvs)


def brute_force_transport_cost(mu1: DiscreteMeasure, mu2: DiscreteMeasure, eps: float) -> float:
    """``C_eps`` by enumerating every vertex of the coupling polytope.

    Vertices are basic feasible solutions: each spanning-tree basis of the
    transportation constraints is solved, kept when non-negative, and its
    far-pair mass evaluated.  Intended for at most 4 atoms per measure.
    """
    m, n = mu1.size, mu2.size
    if m > 4 or n > 4:
        raise SizeError("polytope enumeration takes at most 4 atoms per measure")
    far = (np.linalg.norm(mu1.atoms[:, None, :] - mu2.atoms[None, :, :], axis=-1) > eps).reshape(-1)
    if m == 1 or n == 1:
        plan = np.outer(mu1.weights, mu2.weights).reshape(-1)
        return float(plan[far].sum())
    A, cells, pinvs = _bases(m, n)
    rhs = np.concatenate([mu1.weights, mu2.weights])
    x = pinvs @ rhs
    full = np.zeros((cells.shape[0], m * n))
    np.put_along_axis(full, cells, x, axis=1)
    resid = np.max(np.abs(full @ A.T - rhs), axis=1)
    ok = (np.min(x, axis=1) >= -1e-13) & (resid <= 1e-12)
    return float(np.min(full[ok] @ far.astype(float)))

