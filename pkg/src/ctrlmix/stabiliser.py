"""Local stabilisation maps: noise corrections that contract nearby pairs.

A stabiliser returns a correction ``Phi(u, u', xi)`` such that feeding
``xi + Phi`` to the second copy brings ``S(u, xi)`` and ``S(u', xi + Phi)``
closer by a factor ``q < 1``.  Corrections live on a finite block of noise
modes and vanish on the diagonal.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy import optimize

from .errors import ConfigurationError, InfeasibleError
from .rds import SystemMap

FD_STEP = 1e-5


@dataclass(frozen=True)
class Stabiliser:
    """Noise correction ``Phi(u, u', xi)`` on a block of modes.

    Attributes
    ----------
    phi : callable
        ``(u, u2, xi) -> correction`` vectorised over a leading batch axis;
        the result has the shape of ``xi``.
    noise_dim : int
        Number of noise coordinates ``N``.
    block : tuple of int
        Modes the correction may touch; entries elsewhere are forced to 0.
    C, delta, alpha, q : float
        Declared bound ``|Phi| <= C d(u, u')^alpha`` on pairs within
        ``delta`` and the promised contraction factor.
    jacobian : callable, optional
        ``(u, u2, xi) -> d Phi / d xi`` with shape ``(..., N, N)``.
    """

    phi: Callable
    noise_dim: int
    block: tuple
    C: float
    delta: float
    alpha: float = 1.0
    q: float = 0.5
    jacobian: Callable | None = None
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        if not 0 < self.q < 1:
            raise ConfigurationError("stabiliser contraction q must lie in (0, 1)")
        if self.delta <= 0 or not 0 < self.alpha <= 1:
            raise ConfigurationError("need delta > 0 and alpha in (0, 1]")
        mask = np.zeros(self.noise_dim, dtype=bool)
        mask[list(self.block)] = True
        object.__setattr__(self, "_mask", mask)

    def __call__(self, u, u2, xi) -> np.ndarray:
        out = np.asarray(self.phi(u, u2, xi), dtype=float)
        out = np.broadcast_to(out, np.shape(xi)).copy()
        out[..., ~self._mask] = 0.0
        return out

    def shift(self, u, u2, xi) -> np.ndarray:
        """``Psi(xi) = xi + Phi(u, u2, xi)``."""
        return np.asarray(xi, dtype=float) + self(u, u2, xi)

    def derivative(self, u, u2, xi) -> np.ndarray:
        """``d Phi / d xi`` with shape ``(..., N, N)``; central differences by default."""
        xi = np.asarray(xi, dtype=float)
        if self.jacobian is not None:
            return np.asarray(self.jacobian(u, u2, xi), dtype=float)
        cols = []
        for k in range(self.noise_dim):
            e = np.zeros(self.noise_dim)
            e[k] = FD_STEP
            cols.append((self(u, u2, xi + e) - self(u, u2, xi - e)) / (2 * FD_STEP))
        return np.stack(cols, axis=-1)


@dataclass(frozen=True)
class ControlWindow:
    """Times ``0 < a < b < c < tau < 1`` framing the control action.

    The cutoff ``chi`` equals 1 for ``t <= b``, 0 for ``t >= c`` and is a
    smooth monotone transition in between.
    """

    a: float = 0.1
    b: float = 0.5
    c: float = 0.7
    tau: float = 0.8

    def __post_init__(self):
        if not 0 < self.a < self.b < self.c < self.tau < 1:
            raise ConfigurationError("need 0 < a < b < c < tau < 1")

    def chi(self, t) -> np.ndarray:
        s = np.clip((np.asarray(t, dtype=float) - self.b) / (self.c - self.b), 0.0, 1.0)

        def bump(x):
            return np.where(x > 0, np.exp(-1.0 / np.where(x > 0, x, 1.0)), 0.0)

        return bump(1 - s) / (bump(1 - s) + bump(s))

    def chi_derivative(self, t, h: float = 1e-6) -> np.ndarray:
        t = np.asarray(t, dtype=float)
        return (self.chi(t + h) - self.chi(t - h)) / (2 * h)


def synthesise_gain(A, B, q: float, block=None) -> np.ndarray:
    """Smallest multiple of the least-squares gain reaching contraction ``q``.

    Returns ``K`` of shape ``(N, dim)`` with ``||A - B K||_2 <= q``, nonzero
    only in the rows of ``block``.  ``K = 0`` when ``A`` already contracts
    by ``q``.
    """
    A = np.atleast_2d(np.asarray(A, dtype=float))
    B = np.atleast_2d(np.asarray(B, dtype=float))
    if B.shape[0] != A.shape[0]:
        raise ConfigurationError("B must have as many rows as A")
    n_modes = B.shape[1]
    block = tuple(range(n_modes)) if block is None else tuple(block)
    K = np.zeros((n_modes, A.shape[0]))
    if np.linalg.norm(A, 2) <= q:
        return K
    K[list(block)] = np.linalg.pinv(B[:, list(block)]) @ A

    def closed(t):
        return np.linalg.norm(A - t * B @ K, 2)

    best = optimize.minimize_scalar(closed, bounds=(0.0, 2.0), method="bounded",
                                    options={"xatol": 1e-12})
    if best.fun > q:
        raise InfeasibleError(f"best closed-loop norm {best.fun:.4g} exceeds q = {q}")
    lo, hi = 0.0, float(best.x)
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if closed(mid) <= q:
            hi = mid
        else:
            lo = mid
    return hi * K


def toy_affine_stabiliser(A, B, q: float, delta: float = 0.2, block=None) -> Stabiliser:
    """Fixed-gain stabiliser ``Phi(u, u', xi) = K (u - u')`` for ``S = A u + B xi``.

    Also valid after a coordinatewise non-expansive map such as clipping.
    """
    K = synthesise_gain(A, B, q, block)
    n_modes = K.shape[0]
    rows = tuple(int(i) for i in np.flatnonzero(np.any(K != 0, axis=1)))
    block = tuple(range(n_modes)) if block is None else tuple(block)

    def phi(u, u2, xi):
        d = np.asarray(u, dtype=float) - np.asarray(u2, dtype=float)
        return d @ K.T

    def jac(u, u2, xi):
        return np.zeros(np.shape(xi) + (n_modes,))

    return Stabiliser(phi, n_modes, block, C=float(np.linalg.norm(K, 2)), delta=delta, alpha=1.0,
                      q=q, jacobian=jac, meta={"gain": K, "active_modes": rows})


def verify_stabilisability(stab: Stabiliser, system: SystemMap, u, u2, xi) -> dict:
    """Empirical stabilisation constants on sampled pairs and noise.

    Parameters
    ----------
    u, u2 : ndarray, shape (n, dim)
        Pairs of states, expected within ``stab.delta``.
    xi : ndarray, shape (n, N)
        Noise coefficient samples.

    Returns
    -------
    dict
        ``holder``: max ``|Phi| / d^alpha``; ``jacobian``: max operator norm
        of ``d Phi / d xi``; ``contraction``: max of
        ``d(S(u, xi), S(u', xi + Phi)) / d(u, u')`` with ``0/0 := 0``;
        ``pass`` when the contraction stays below 1.
    """
    u = np.atleast_2d(np.asarray(u, dtype=float))
    u2 = np.atleast_2d(np.asarray(u2, dtype=float))
    xi = np.atleast_2d(np.asarray(xi, dtype=float))
    d = system.distance(u, u2)
    corr = stab(u, u2, xi)
    size = np.linalg.norm(corr, axis=-1)
    pos = d > 0
    holder = float(np.max(size[pos] / d[pos] ** stab.alpha)) if np.any(pos) else 0.0
    jac = stab.derivative(u, u2, xi)
    jnorm = float(np.max(np.linalg.norm(jac, ord=2, axis=(-2, -1)))) if jac.size else 0.0
    after = system.distance(system.step_fn(u, xi), system.step_fn(u2, xi + corr))
    ratio = np.where(pos, after / np.where(pos, d, 1.0), 0.0)
    within = bool(np.all(d <= stab.delta * (1 + 1e-12)))
    contraction = float(np.max(ratio)) if ratio.size else 0.0
    return {"holder": holder, "jacobian": jnorm, "contraction": contraction,
            "declared_q": stab.q, "within_delta": within, "n": int(d.size),
            "pass": bool(contraction < 1.0)}


def ns_feedback_stabiliser(ns, window: ControlWindow | None = None, N: int | None = None,
                           eps_target: float = 0.5, budget: int = 4, delta: float = 0.05,
                           trace: list | None = None) -> Stabiliser:
    """Optimisation-based correction of the boundary noise for the Navier-Stokes map.

    For a pair ``(u, u')`` and noise ``xi`` the correction ``c`` on the
    first ``N`` noise coefficients minimises ``|S(u, xi) - S(u', xi + c)|^2``
    by Gauss-Newton from ``c = 0`` with a forward-difference Jacobian
    (step ``1e-5``) and a fixed iteration budget; the best iterate wins.
    The temporal profile of the noise basis already vanishes before the
    window start and after its end, so the correction acts only inside it.
    When zero correction already meets ``eps_target`` the result is 0.

    Parameters
    ----------
    ns : NSSystem
    window : ControlWindow, optional
        Recorded in ``meta``; the action window is the basis profile.
    trace : list, optional
        Receives ``(iteration, objective)`` rows of every optimisation.
    """
    window = window or ControlWindow()
    N = ns.n_modes if N is None else int(N)
    if not 1 <= N <= ns.n_modes:
        raise ConfigurationError("N must lie between 1 and the number of noise modes")
    dim = ns.n_modes

    def solve_one(u, u2, xi):
        d0 = float(ns.h1_norm(u - u2))
        if d0 == 0.0:
            return np.zeros(dim)
        target = ns.step(u[None], xi[None])[0]

        def resid(cs):
            xs = np.repeat(xi[None], len(cs), axis=0)
            xs[:, :N] += np.asarray(cs)
            return ns.step(np.repeat(u2[None], len(cs), axis=0), xs) - target

        c = np.zeros(N)
        r = resid([c])[0]
        obj = float(ns.h1_norm(r))
        best, best_obj = c.copy(), obj
        if trace is not None:
            trace.append((0, obj))
        if obj <= eps_target * d0:
            return np.zeros(dim)
        for it in range(1, budget + 1):
            probes = c[None, :] + FD_STEP * np.eye(N)
            J = ((resid(probes) - r[None]) / FD_STEP).T
            step, *_ = np.linalg.lstsq(J, -r, rcond=None)
            c = c + step
            r = resid([c])[0]
            obj = float(ns.h1_norm(r))
            if trace is not None:
                trace.append((it, obj))
            if obj < best_obj:
                best, best_obj = c.copy(), obj
        out = np.zeros(dim)
        out[:N] = best
        return out

    def phi(u, u2, xi):
        shape = np.shape(xi)
        u, u2, xi = (np.atleast_2d(np.asarray(a, dtype=float)) for a in (u, u2, xi))
        B = max(u.shape[0], u2.shape[0], xi.shape[0])
        u, u2 = np.broadcast_to(u, (B, u.shape[1])), np.broadcast_to(u2, (B, u2.shape[1]))
        xi = np.broadcast_to(xi, (B, dim))
        rows = [solve_one(u[b], u2[b], xi[b]) for b in range(B)]
        return np.array(rows).reshape(shape if len(shape) > 1 else (dim,))

    return Stabiliser(phi, dim, tuple(range(N)), C=float("inf"), delta=delta, alpha=1.0,
                      q=max(min(eps_target, 0.99), 1e-6),
                      meta={"window": window, "budget": budget, "eps_target": eps_target})
