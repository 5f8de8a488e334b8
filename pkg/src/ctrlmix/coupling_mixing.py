"""Coupled pairs of transitions, the paired Markov chain and its verifiers.

Two copies of a random dynamical system are driven so that far-apart pairs
move independently, while pairs within ``delta`` use the stabiliser: the
second copy's noise is maximally coupled with the stabilised shift of the
first copy's noise, so both copies land close with probability ``1 - TV``.
"""
from __future__ import annotations

from dataclasses import asdict, dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy import stats

from .errors import (
    ConfigurationError,
    InsufficientDataError,
    PathologicalDensityError,
    SingularMapError,
    StabiliserDomainError,
)
from .rds import NoiseModel, SystemMap
from .rng import RngState, as_state
from .stabiliser import Stabiliser
from .transport.dual_lipschitz import dual_lipschitz
from .transport.measures import DiscreteMeasure

INDEPENDENT, COALESCED, RESIDUAL = 0, 1, 2
MAX_ROUNDS = 10**6
NEWTON_TOL = 1e-12


@dataclass(frozen=True)
class CouplingConfig:
    """Parameters of the coupled pair.

    Attributes
    ----------
    delta : float
        Radius of the diagonal set ``{d(u, u') <= delta}``.
    r : float
        Target contraction used by the squeezing test, ``q < r < 1``.
    q : float
        Contraction promised by the stabiliser.
    alpha : float
        Hölder exponent of the stabiliser bound, in ``(0, 1]``.
    n_chains : int
        Default ensemble size.
    horizon : int
        Default squeezing horizon.
    """

    delta: float
    r: float
    q: float
    alpha: float = 1.0
    n_chains: int = 1000
    horizon: int = 50

    def __post_init__(self):
        if not 0 < self.q < self.r < 1:
            raise ConfigurationError(f"need 0 < q < r < 1 (q={self.q}, r={self.r})")
        if self.delta <= 0:
            raise ConfigurationError("delta must be positive")
        if not 0 < self.alpha <= 1:
            raise ConfigurationError("alpha must lie in (0, 1]")
        if self.n_chains < 1 or self.horizon < 1:
            raise ConfigurationError("ensemble size and horizon must be positive")

    def eps(self, u, u2, distance: Callable) -> np.ndarray:
        """Closeness radius ``r d(u, u')`` used for the on-diagonal cost."""
        return self.r * distance(u, u2)

    @property
    def delta2(self) -> float:
        """Exponential moment rate ``(alpha / 2) ln(1 / r)`` for the squeezing time."""
        return 0.5 * self.alpha * np.log(1.0 / self.r)


def _invert_rows(stab: Stabiliser, u, u2, y) -> np.ndarray:
    """Solve ``x + Phi(u, u2, x) = y`` row by row with Newton's method."""
    x = y - stab(u, u2, y)
    eye = np.eye(y.shape[-1])
    for _ in range(60):
        res = x + stab(u, u2, x) - y
        if np.max(np.abs(res), initial=0.0) <= NEWTON_TOL:
            return x
        jac = stab.derivative(u, u2, x) + eye
        x = x - np.linalg.solve(jac, res[..., None])[..., 0]
    res = x + stab(u, u2, x) - y
    if np.max(np.abs(res), initial=0.0) > NEWTON_TOL:
        raise SingularMapError(f"noise shift inversion stalled at {np.max(np.abs(res)):.3e}")
    return x


def _shift_density(stab: Stabiliser, model: NoiseModel, u, u2, y) -> np.ndarray:
    """Density at ``y`` of ``Psi(xi)`` with ``xi ~ model``."""
    x = _invert_rows(stab, u, u2, y)
    det = np.abs(np.linalg.det(stab.derivative(u, u2, x) + np.eye(y.shape[-1])))
    return model.pdf(x) / det


class PairBuilder:
    """One step of the coupled pair ``(u, u') -> (R, R')``.

    Parameters
    ----------
    system : SystemMap
    model : NoiseModel
    stabiliser : Stabiliser or None
        Without a stabiliser every pair moves independently.
    cfg : CouplingConfig
    mode : {"auto", "independent", "synchronous"}
        ``independent`` ignores the diagonal rule and ``synchronous`` feeds
        both copies the same noise; both exist as controls for tests.
    """

    def __init__(self, system: SystemMap, model: NoiseModel, stabiliser: Stabiliser | None,
                 cfg: CouplingConfig, mode: str = "auto"):
        if mode not in ("auto", "independent", "synchronous"):
            raise ConfigurationError(f"unknown pair mode '{mode}'")
        if stabiliser is not None and stabiliser.noise_dim != model.basis_dim:
            raise ConfigurationError("stabiliser and noise model disagree on the number of modes")
        self.system, self.model, self.stabiliser, self.cfg, self.mode = system, model, stabiliser, cfg, mode

    def __call__(self, u, u2, rng, force_coupling: bool = False):
        """Draw ``(R, R', regime)`` for a batch of pairs.

        ``regime`` is 0 for independent draws, 1 when the stabilised noise
        was kept (coalesced) and 2 when the residual was drawn.  Off the
        diagonal the two copies use disjoint random streams.
        """
        state = as_state(rng)
        u = np.asarray(u, dtype=float)
        u2 = np.asarray(u2, dtype=float)
        single = u.ndim == 1
        u, u2 = np.atleast_2d(u), np.atleast_2d(u2)
        n = u.shape[0]
        g1, g2, g3 = state.child(0).generator(), state.child(1).generator(), state.child(2).generator()
        xi = self.model.sample(g1, n)
        xi2 = self.model.sample(g2, n)
        regime = np.zeros(n, dtype=np.int8)
        if self.mode == "synchronous":
            xi2 = xi.copy()
        elif self.mode == "auto" and self.stabiliser is not None:
            near = self.system.distance(u, u2) <= self.cfg.delta
            if force_coupling and not np.all(near):
                raise StabiliserDomainError("cost coupling requested for a pair outside the diagonal set")
            idx = np.flatnonzero(near)
            if idx.size:
                xi2[idx], regime[idx] = self._couple(u[idx], u2[idx], xi[idx], g2, g3)
        elif force_coupling:
            raise StabiliserDomainError("cost coupling requested without a stabiliser")
        R = self.system.step_fn(u, xi)
        R2 = self.system.step_fn(u2, xi2)
        if single:
            return R[0], R2[0], regime[:1]
        return R, R2, regime

    def _couple(self, u, u2, xi, g_res, g_acc):
        """Maximal coupling of ``model`` with the law of ``Psi(xi)``."""
        stab, model = self.stabiliser, self.model
        y = stab.shift(u, u2, xi)
        det = np.abs(np.linalg.det(stab.derivative(u, u2, xi) + np.eye(xi.shape[-1])))
        p_y = model.pdf(xi) / det
        keep = g_acc.random(y.shape[0]) * p_y <= model.pdf(y)
        out = y.copy()
        regime = np.where(keep, COALESCED, RESIDUAL).astype(np.int8)
        todo = np.flatnonzero(~keep)
        rounds = 0
        while todo.size:
            rounds += 1
            if rounds > MAX_ROUNDS:
                raise PathologicalDensityError("residual rejection did not terminate")
            z = model.sample(g_res, todo.size)
            lz = model.pdf(z)
            pz = _shift_density(stab, model, u[todo], u2[todo], z)
            ok = g_acc.random(todo.size) * lz < lz - np.minimum(pz, lz)
            out[todo[ok]] = z[ok]
            todo = todo[~ok]
        return out, regime


def build_pair(system, model, stabiliser, cfg, u, u2, rng, force_coupling: bool = False):
    """Functional form of ``PairBuilder(...)(u, u2, rng)``."""
    return PairBuilder(system, model, stabiliser, cfg)(u, u2, rng, force_coupling)


def extension_chain(builder: Callable, u0, u0p, k: int, rng):
    """Run the paired chain for ``k`` steps with a fresh stream per step.

    Returns
    -------
    R, R2 : ndarray, shape (k + 1, batch, dim)
    regimes : ndarray, shape (k, batch)
    """
    if k < 0:
        raise ValueError("k must be non-negative")
    state = as_state(rng)
    u = np.atleast_2d(np.asarray(u0, dtype=float))
    u2 = np.atleast_2d(np.asarray(u0p, dtype=float))
    u, u2 = np.broadcast_arrays(u, u2)
    R = np.empty((k + 1, *u.shape))
    R2 = np.empty((k + 1, *u.shape))
    regimes = np.empty((k, u.shape[0]), dtype=np.int8)
    R[0], R2[0] = u, u2
    for j in range(1, k + 1):
        R[j], R2[j], regimes[j - 1] = builder(R[j - 1], R2[j - 1], state.child(j))
    return R, R2, regimes


def _fit_line(k, y):
    res = stats.linregress(k, y)
    return res.slope, res.intercept, res.rvalue**2, res.stderr


@dataclass
class HittingReport:
    """Hitting-time statistics of the diagonal set."""

    tau: np.ndarray
    beta: float | None
    C1: float | None
    r2: float | None
    moment: float | None
    never_hit: float
    inconclusive: bool
    note: str = ""

    def summary(self) -> dict:
        d = asdict(self)
        d.pop("tau")
        d["n"] = int(self.tau.size)
        return d


def hitting_time_fit(tau, horizon: int, min_count: int = 20) -> HittingReport:
    """Fit ``log P{tau > k} = log C1 - beta k`` from hitting-time samples.

    ``tau`` holds ``inf`` for chains that never hit within ``horizon``.
    Survival points are used while at least ``min_count`` chains survive.
    The reported moment is ``E exp(beta tau / 2)`` over chains that hit.
    """
    tau = np.asarray(tau, dtype=float)
    n = tau.size
    if n == 0:
        raise InsufficientDataError("no hitting times")
    never = float(np.mean(~np.isfinite(tau)))
    ks = np.arange(horizon + 1)
    surv_counts = np.array([(tau > k).sum() for k in ks])
    use = surv_counts >= min_count
    if np.all(tau == 0):
        return HittingReport(tau, None, None, None, 1.0, never, False, "all chains start on the diagonal")
    if use.sum() < 3:
        return HittingReport(tau, None, None, None, None, never, True, "too few survival points")
    slope, icpt, r2, _ = _fit_line(ks[use], np.log(surv_counts[use] / n))
    beta = -slope
    hit = tau[np.isfinite(tau)]
    moment = float(np.mean(np.exp(beta * hit / 2))) if hit.size else None
    inconclusive = never > 0.05 or beta <= 0
    return HittingReport(tau, float(beta), float(np.exp(icpt)), float(r2), moment, never, bool(inconclusive),
                         "more than 5% never hit" if never > 0.05 else "")


def hitting_times(R, R2, delta: float, distance: Callable) -> np.ndarray:
    """First index ``k`` with ``d(R_k, R'_k) <= delta``; ``inf`` if none."""
    d = distance(R, R2)
    inside = d <= delta
    first = np.argmax(inside, axis=0).astype(float)
    first[~np.any(inside, axis=0)] = np.inf
    return first


def hitting_time_stats(R, R2, delta: float, distance: Callable, min_count: int = 20) -> HittingReport:
    """Hitting times of the diagonal set from paired chains and their fit."""
    if R.shape[1] < 1000:
        raise InsufficientDataError(f"need at least 1000 chains, got {R.shape[1]}")
    tau = hitting_times(R, R2, delta, distance)
    return hitting_time_fit(tau, R.shape[0] - 1, min_count)


@dataclass
class SqueezingReport:
    """Squeezing-time statistics for chains started on the diagonal set."""

    sigma: np.ndarray
    p_never: float
    p_never_stderr: float
    p_never_lower: float
    moment: float
    moment_stderr: float
    late_share: float
    censoring: float
    delta2: float
    finite_moment: bool
    inconclusive: bool

    def summary(self) -> dict:
        d = asdict(self)
        d.pop("sigma")
        d["n"] = int(self.sigma.size)
        return d


def squeezing_from_sigma(sigma, horizon: int, delta2: float) -> SqueezingReport:
    """Summaries of squeezing times ``sigma`` (``inf`` = never within horizon).

    ``censoring`` estimates the horizon bias: among chains alive at
    ``horizon / 2`` the fraction that fails in the second half.  A value
    above 0.2 flags the horizon as too short.
    """
    sigma = np.asarray(sigma, dtype=float)
    n = sigma.size
    if n == 0:
        raise InsufficientDataError("no squeezing samples")
    never = ~np.isfinite(sigma)
    p = float(never.mean())
    se = float(np.sqrt(max(p * (1 - p), 1.0 / n) / n))
    contrib = np.where(never, 0.0, np.exp(delta2 * np.where(never, 0.0, sigma)))
    moment = float(contrib.mean())
    m_se = float(contrib.std(ddof=1) / np.sqrt(n)) if n > 1 else 0.0
    half = horizon / 2
    late = np.isfinite(sigma) & (sigma > half)
    late_share = float(contrib[late].sum() / contrib.sum()) if contrib.sum() > 0 else 0.0
    alive = sigma > half
    censoring = float(late.sum() / alive.sum()) if alive.any() else 0.0
    finite = late_share < 0.1
    return SqueezingReport(sigma, p, se, max(0.0, p - 3 * se), moment, m_se, late_share, censoring,
                           float(delta2), bool(finite), bool(censoring > 0.2))


def squeezing_stats(builder: Callable, u, u2, cfg: CouplingConfig, rng, horizon: int | None = None,
                    distance: Callable | None = None) -> SqueezingReport:
    """Squeezing time ``sigma = min{k : d(R_k, R'_k) > r^k delta}`` from diagonal starts."""
    horizon = cfg.horizon if horizon is None else int(horizon)
    dist = distance or builder.system.distance
    u = np.atleast_2d(np.asarray(u, dtype=float))
    u2 = np.atleast_2d(np.asarray(u2, dtype=float))
    if np.any(dist(u, u2) > cfg.delta * (1 + 1e-12)):
        raise StabiliserDomainError("squeezing starts must lie in the diagonal set")
    R, R2, _ = extension_chain(builder, u, u2, horizon, rng)
    return squeezing_from_chains(R, R2, cfg, dist)


def squeezing_from_chains(R, R2, cfg: CouplingConfig, distance: Callable) -> SqueezingReport:
    horizon = R.shape[0] - 1
    d = distance(R, R2)
    limits = cfg.r ** np.arange(horizon + 1) * cfg.delta
    fail = d > limits[:, None] * (1 + 1e-12)
    sigma = np.argmax(fail, axis=0).astype(float)
    sigma[~np.any(fail, axis=0)] = np.inf
    return squeezing_from_sigma(sigma, horizon, cfg.delta2)


def all_step_contraction(R, R2, r: float, distance: Callable) -> dict:
    """Fraction of chains with ``d(R_k, R'_k) <= r^k d(R_0, R'_0)`` at every step."""
    d = distance(R, R2)
    limits = r ** np.arange(d.shape[0])[:, None] * d[0][None, :]
    ok = np.all(d <= limits * (1 + 1e-12), axis=0)
    p = float(ok.mean())
    return {"p": p, "stderr": float(np.sqrt(max(p * (1 - p), 1.0 / ok.size) / ok.size)), "n": int(ok.size)}


def independence_on_Tm_test(R, R2, m: int, delta: float, distance: Callable, bins: int = 4,
                            regimes=None) -> float:
    """Chi-square p-value for independence of ``R_m`` and ``R'_m`` on ``T_m``.

    ``T_m`` is the set of chains whose pair stayed off the diagonal before
    step ``m`` (or, when ``regimes`` is given, drew independently at every
    step up to ``m``).  The first coordinates at step ``m`` are binned by
    quantiles.  The conditioning event can itself induce weak dependence
    for ``m > 1``; ``m = 1`` from a fixed far pair is an exact test.
    """
    if m == 0:
        return 1.0
    if regimes is not None:
        on = np.all(np.asarray(regimes)[:m] == INDEPENDENT, axis=0)
    else:
        on = np.all(distance(R[:m], R2[:m]) > delta, axis=0)
    a = np.asarray(R)[m, on, 0]
    b = np.asarray(R2)[m, on, 0]
    if a.size < 5 * bins * bins:
        raise InsufficientDataError(f"only {a.size} chains on the conditioning set")
    qa = np.quantile(a, np.linspace(0, 1, bins + 1)[1:-1])
    qb = np.quantile(b, np.linspace(0, 1, bins + 1)[1:-1])
    ia, ib = np.searchsorted(qa, a), np.searchsorted(qb, b)
    table = np.zeros((bins, bins))
    np.add.at(table, (ia, ib), 1)
    table = table[table.sum(axis=1) > 0][:, table.sum(axis=0) > 0]
    if min(table.shape) < 2:
        return 1.0
    return float(stats.chi2_contingency(table, correction=False)[1])


@dataclass
class MixingReport:
    """Per-lag distances between laws from two initial conditions and their fit."""

    lags: np.ndarray
    distance: np.ndarray
    stderr: np.ndarray
    floor: np.ndarray
    stationary: np.ndarray | None
    gamma: float | None
    C: float | None
    r2: float | None
    gamma_ci: tuple | None
    fit_lags: tuple | None
    inconclusive: bool
    note: str = ""

    def rows(self):
        for i, k in enumerate(self.lags):
            yield int(k), float(self.distance[i]), float(self.stderr[i])

    def summary(self) -> dict:
        return {"gamma": self.gamma, "C": self.C, "r2": self.r2,
                "gamma_ci": list(self.gamma_ci) if self.gamma_ci else None,
                "fit_lags": list(self.fit_lags) if self.fit_lags else None,
                "inconclusive": self.inconclusive, "note": self.note,
                "k_max": int(self.lags[-1]) if self.lags.size else 0}


def fit_decay(lags, distance, floor, min_points: int = 3):
    """Least-squares fit of ``log d_k = log C - gamma k`` above the floor.

    Uses the leading run of lags whose distance exceeds its floor.
    Returns ``(gamma, C, r2, ci95, (k_first, k_last))`` or ``None``.
    """
    lags = np.asarray(lags)
    above = np.asarray(distance) > np.asarray(floor)
    if not above[0]:
        return None
    stop = int(np.argmin(above)) if not np.all(above) else above.size
    if stop < min_points:
        return None
    k, y = lags[:stop], np.log(np.asarray(distance)[:stop])
    slope, icpt, r2, se = _fit_line(k, y)
    t = stats.t.ppf(0.975, max(stop - 2, 1))
    return -slope, float(np.exp(icpt)), r2, (-slope - t * se, -slope + t * se), (int(k[0]), int(k[-1]))


def _observe(observable, states):
    obs = np.asarray(observable(states), dtype=float)
    return obs.reshape(states.shape[0], -1) if obs.ndim != 2 else obs


def mixing_rate(system: SystemMap, model: NoiseModel, u0_list: Sequence, observable: Callable | None,
                k_max: int, n: int, rng, batches: int = 4, stationary: bool = False,
                k_burn: int | None = None, metric: Callable = dual_lipschitz,
                trajectory: Callable | None = None) -> MixingReport:
    """Exponential mixing fit from two initial conditions.

    The two ensembles share their noise (common random numbers): each
    ensemble still has the exact law of the chain from its own start, and
    the shared noise removes most of the sampling noise from the
    difference.  The statistical floor at each lag is twice the standard
    error of the distance across ``batches`` disjoint sub-ensembles, scaled
    to the full ensemble.

    Parameters
    ----------
    u0_list : sequence of two states
    observable : callable or None
        Maps ``(n, dim)`` states to ``(n, p)`` features with ``p <= 8``;
        identity when omitted.
    trajectory : callable, optional
        ``(u0 batch, k_max, rng) -> (k_max + 1, n, dim)`` replacing the
        default step-by-step simulation (used for expensive systems).
    stationary : bool
        Also compare each lag with a pooled law from a third ensemble
        (reported, never fitted).
    """
    if len(u0_list) != 2:
        raise ConfigurationError("mixing_rate compares exactly two initial conditions")
    if n < 2 * batches:
        raise ConfigurationError("ensemble too small for the batch floor estimate")
    state = as_state(rng)
    obs_fn = observable or (lambda x: x)

    def run(u0, stream):
        start = np.broadcast_to(np.asarray(u0, dtype=float), (n, system.dim)).copy()
        if trajectory is not None:
            return trajectory(start, k_max, stream)
        gen = stream.generator()
        traj = np.empty((k_max + 1, n, system.dim))
        traj[0] = start
        for j in range(1, k_max + 1):
            traj[j] = system.step_fn(traj[j - 1], model.sample(gen, n))
        return traj

    shared = state.child(0)
    t1, t2 = run(u0_list[0], shared), run(u0_list[1], shared)
    lags = np.arange(1, k_max + 1)
    dist = np.empty(k_max)
    se = np.empty(k_max)
    split = np.array_split(np.arange(n), batches)
    for i, k in enumerate(lags):
        a, b = _observe(obs_fn, t1[k]), _observe(obs_fn, t2[k])
        if a.shape[1] > 8:
            raise ConfigurationError("observable must map to at most 8 coordinates")
        dist[i] = metric(DiscreteMeasure.empirical(a), DiscreteMeasure.empirical(b))
        parts = np.array([metric(DiscreteMeasure.empirical(a[s]), DiscreteMeasure.empirical(b[s]))
                          for s in split])
        se[i] = parts.std(ddof=1) / np.sqrt(batches)
    floor = np.maximum(2 * se, 1e-10)
    stat = None
    if stationary:
        burn = k_max if k_burn is None else int(k_burn)
        t3 = run(u0_list[0], state.child(1)) if burn <= k_max else None
        if t3 is None:
            raise ConfigurationError("k_burn must not exceed k_max")
        pool = np.concatenate([_observe(obs_fn, t3[j]) for j in range(burn, k_max + 1)])
        pick = state.child(2).generator().choice(pool.shape[0], size=min(n, pool.shape[0]), replace=False)
        ref = DiscreteMeasure.empirical(pool[np.sort(pick)])
        stat = np.array([metric(DiscreteMeasure.empirical(_observe(obs_fn, t1[k])), ref) for k in lags])
    fit = fit_decay(lags, dist, floor)
    if fit is None:
        return MixingReport(lags, dist, se, floor, stat, None, None, None, None, None, True,
                            "floor-limited, no fit")
    gamma, C, r2, ci, span = fit
    return MixingReport(lags, dist, se, floor, stat, float(gamma), C, float(r2),
                        (float(ci[0]), float(ci[1])), span, bool(gamma <= 0))


def approx_controllability_probe(system: SystemMap, target, eps: float, starts, max_steps: int = 200,
                                 zero_noise=None, rng=None, budget: int = 0, controls=None) -> dict:
    """Smallest ``m`` bringing every sampled start within ``eps`` of ``target``.

    The zero-control route iterates ``S(., 0)``.  When it fails within
    ``max_steps`` and ``budget > 0``, random shooting over control
    sequences drawn by ``controls(gen, m)`` is tried.  ``found = False``
    does not imply the system is not controllable.
    """
    starts = np.atleast_2d(np.asarray(starts, dtype=float))
    target = np.asarray(target, dtype=float)
    if zero_noise is None:
        B = system.meta.get("B")
        zero = np.zeros(system.meta.get("noise_dim", B.shape[1] if B is not None else system.dim))
    else:
        zero = np.asarray(zero_noise, dtype=float)
    u = starts.copy()
    for m in range(max_steps + 1):
        if np.max(system.distance(u, target)) <= eps:
            return {"found": True, "m": m, "route": "zero-control", "controls": None}
        u = system.step_fn(u, np.broadcast_to(zero, (u.shape[0], zero.size)))
    if budget and controls is not None and rng is not None:
        gen = as_state(rng).generator()
        for m in range(1, max_steps + 1):
            for _ in range(budget):
                seq = controls(gen, m)
                v = starts.copy()
                for c in seq:
                    v = system.step_fn(v, np.broadcast_to(c, (v.shape[0], np.size(c))))
                if np.max(system.distance(v, target)) <= eps:
                    return {"found": True, "m": m, "route": "shooting", "controls": np.asarray(seq)}
    return {"found": False, "m": None, "route": "exhausted", "controls": None}
