"""Subcommand implementations.  Each returns an exit code."""
from __future__ import annotations

import csv
import json
import math
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np
from scipy import integrate

from ..rng import RngState
from .config import ExperimentConfig
from .svg import log_plot

PASS, FAIL = 0, 1


def clean(obj):
    """JSON-safe copy: numpy scalars to Python, non-finite floats to strings."""
    if isinstance(obj, dict):
        return {str(k): clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple, np.ndarray)):
        return [clean(v) for v in obj]
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        v = float(obj)
        return v if math.isfinite(v) else repr(v)
    return obj


def write_json(path: Path, obj) -> None:
    path.write_text(json.dumps(clean(obj), sort_keys=True, indent=1) + "\n")


def write_csv(path: Path, header, rows) -> None:
    with open(path, "w", newline="") as fh:
        out = csv.writer(fh, lineterminator="\n")
        out.writerow(header)
        for row in rows:
            out.writerow([repr(float(v)) if isinstance(v, (float, np.floating)) else v for v in row])


def _prepare(cfg: ExperimentConfig, out: Path) -> Path:
    out.mkdir(parents=True, exist_ok=True)
    write_json(out / "config.resolved.json", cfg.resolved())
    return out


# -- system construction ---------------------------------------------------

def toy_from_config(cfg: ExperimentConfig):
    from ..toybench import contracting_affine, unstable_controlled

    t = cfg.toy
    if cfg.system == "toy-affine":
        return contracting_affine(t.a, t.b, t.density)
    return unstable_controlled(t.expansion, t.damping, t.injection, cfg.coupling.q, t.density)


def ns_kwargs(cfg: ExperimentConfig) -> dict:
    c = cfg.ns
    return {"n": c.n, "nu": c.nu, "dt": c.dt, "n_modes": c.n_modes, "amplitudes": tuple(c.amplitudes),
            "density": c.density, "gamma": tuple(c.gamma), "window": tuple(c.window)}


def ns_initials(cfg: ExperimentConfig, ns, count: int = 2):
    """Configured initial states, or ``+-`` a random smooth state of norm ``init_scale``."""
    from ..ns2d import random_initial_state

    if cfg.initial is not None:
        u = np.array(cfg.initial, dtype=float)
        if u.shape[1] != ns.system.dim:
            raise ValueError("initial states do not match the grid")
        return list(u)
    if cfg.ns.init_scale == 0:
        return [np.zeros(ns.system.dim)] * count
    base = random_initial_state(ns, RngState(cfg.seed).child(10), scale=cfg.ns.init_scale)
    return [base, -base][:count]


def _ns_chunk(kwargs, u0, k_max, state):
    from ..ns2d import NSSystem

    return NSSystem(**kwargs).trajectory(u0, k_max, state)


def ns_trajectory_hook(cfg: ExperimentConfig, jobs: int):
    """Observable paths computed in fixed-size chunks; chunk ``c`` owns stream ``child(c)``.

    Chunk boundaries depend only on the configuration, so the result is the
    same for any number of worker processes.
    """
    kwargs = ns_kwargs(cfg)
    chunk = cfg.ensemble.chunk

    def hook(u0, k_max, stream):
        parts = [(u0[i:i + chunk], stream.child(c)) for c, i in enumerate(range(0, u0.shape[0], chunk))]
        if jobs > 1 and len(parts) > 1:
            with ProcessPoolExecutor(max_workers=jobs) as pool:
                res = list(pool.map(_ns_chunk, [kwargs] * len(parts), [p[0] for p in parts],
                                    [k_max] * len(parts), [p[1] for p in parts]))
        else:
            res = [_ns_chunk(kwargs, p[0], k_max, p[1]) for p in parts]
        return np.concatenate(res, axis=1)

    return hook


# -- commands ----------------------------------------------------------------

def cmd_simulate(cfg: ExperimentConfig, out: Path, jobs: int = 1) -> int:
    out = _prepare(cfg, out)
    state = RngState(cfg.seed)
    if cfg.system == "navier-stokes":
        from ..ns2d import NSSystem

        ns = NSSystem(**ns_kwargs(cfg))
        u = ns_initials(cfg, ns, 1)[0][None]
        rows = [(0, 0.0, float(ns.l2_norm(u)[0]), float(ns.h1_norm(u)[0]))]
        xi_rows = []
        for k in range(1, cfg.steps + 1):
            xi = (np.zeros((1, ns.n_modes)) if cfg.zero_noise
                  else ns.noise.sample(state.child(k).generator(), 1))
            u = ns.step(u, xi)
            xi_rows.append([k] + list(xi[0]))
            rows.append((k, float(k), float(ns.l2_norm(u)[0]), float(ns.h1_norm(u)[0])))
        write_csv(out / "energies.csv", ["k", "t", "l2", "h1"], rows)
        write_csv(out / "noise.csv", ["k"] + [f"xi_{j}" for j in range(ns.n_modes)], xi_rows)
        last = np.zeros(ns.n_modes) if not xi_rows else np.array(xi_rows[-1][1:], dtype=float)
        trace = ns.basis.trace(ns.noise.realize(last), np.linspace(0, 1, 11))
        trace.to_csv(out / "boundary_trace_last_step.csv")
        ns.field(u[0]).save(out / "field_final", time=float(cfg.steps))
        return PASS
    from ..rds import simulate_trajectory

    toy = toy_from_config(cfg)
    u0 = np.zeros(toy.system.dim) if cfg.initial is None else np.array(cfg.initial[0], dtype=float)
    if cfg.zero_noise:
        traj = [u0]
        for _ in range(cfg.steps):
            traj.append(toy.system.step_fn(traj[-1], np.zeros(toy.noise.basis_dim)))
        traj = np.array(traj)
    else:
        traj = simulate_trajectory(toy.system, u0, toy.noise, cfg.steps, state)
    write_csv(out / "trajectory.csv", ["k"] + [f"u_{j}" for j in range(toy.system.dim)],
              [[k] + [float(x) for x in row] for k, row in enumerate(traj)])
    return PASS


def cmd_mix_rate(cfg: ExperimentConfig, out: Path, jobs: int = 1) -> int:
    from ..coupling_mixing import mixing_rate

    out = _prepare(cfg, out)
    e = cfg.ensemble
    if cfg.system == "navier-stokes":
        from ..ns2d import NSSystem

        ns = NSSystem(**ns_kwargs(cfg))
        u0 = ns_initials(cfg, ns)
        rep = mixing_rate(ns.system, ns.noise, u0, None, e.k_max, e.size, RngState(cfg.seed),
                          batches=e.batches, trajectory=ns_trajectory_hook(cfg, jobs))
    else:
        toy = toy_from_config(cfg)
        dim = toy.system.dim
        u0 = ([np.full(dim, -1.0), np.full(dim, 1.0)] if cfg.initial is None
              else [np.array(x, dtype=float) for x in cfg.initial])
        rep = mixing_rate(toy.system, toy.noise, u0, None, e.k_max, e.size, RngState(cfg.seed),
                          batches=e.batches)
    write_csv(out / "mixing.csv", ["lag", "distance", "stderr", "floor"],
              [[int(k), float(d), float(s), float(f)] for k, d, s, f in
               zip(rep.lags, rep.distance, rep.stderr, rep.floor)])
    summary = rep.summary()
    write_json(out / "mixing_report.json", summary)
    series = {"distance": (rep.lags, rep.distance), "floor": (rep.lags, rep.floor)}
    if rep.gamma is not None:
        series["fit"] = (rep.lags, rep.C * np.exp(-rep.gamma * rep.lags))
    log_plot(out / "mixing.svg", series, title="distance between observable laws by lag")
    return FAIL if rep.inconclusive else PASS


def cmd_verify(cfg: ExperimentConfig, suite: str, out: Path, jobs: int = 1) -> int:
    from .suites import SUITES

    out = _prepare(cfg, out)
    checks = SUITES[suite](cfg.seed)
    verdict = {"suite": suite, "pass": all(c["pass"] for c in checks), "checks": checks}
    write_json(out / f"verify_{suite}.json", verdict)
    return PASS if verdict["pass"] else FAIL


def cmd_toy_oracle(cfg: ExperimentConfig, out: Path, jobs: int = 1) -> int:
    """Oracle cross-checks: stationary density variance and small-instance brute force."""
    from ..rds import density_from_name
    from ..toybench import exact_stationary_density_1d
    from .suites import transport_suite

    out = _prepare(cfg, out)
    t = cfg.toy
    grid, bound = exact_stationary_density_1d(t.a, t.density, 40, b=t.b, return_bound=True)
    x = grid.axes()[0]
    m = grid.values * grid.cell_volume
    mean = float(np.sum(m * x))
    var = float(np.sum(m * (x - mean) ** 2))
    s = np.linspace(-1, 1, 200001)
    noise_var = float(integrate.trapezoid(s**2 * density_from_name(t.density).pdf(s), s))
    expected = t.b**2 * noise_var / (1 - t.a**2)
    checks = [{"name": "stationary_variance", "pass": abs(var - expected) <= 1e-3,
               "variance": var, "expected": expected, "truncation_bound": bound,
               "mass": float(m.sum())}]
    checks += transport_suite(cfg.seed)[:2]
    verdict = {"pass": all(c["pass"] for c in checks), "checks": checks}
    write_json(out / "toy_oracle.json", verdict)
    return PASS if verdict["pass"] else FAIL
