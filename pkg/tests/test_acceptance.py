"""Acceptance criteria 1-11.  Each test prints one PASS/FAIL line.

Run with ``pytest tests/test_acceptance.py -v`` (lines are repeated in the
terminal summary) or directly with ``python tests/test_acceptance.py``.
"""
from __future__ import annotations

import json
import shutil
import sys
import tempfile
import time
from pathlib import Path

import numpy as np
import pytest
from scipy import integrate, stats

from ctrlmix.cli import main as cli_main
from ctrlmix.cli.commands import cmd_mix_rate
from ctrlmix.cli.config import load_config
from ctrlmix.cli.suites import ns_operators_suite, random_small_measure
from ctrlmix.coupling_mixing import (CouplingConfig, PairBuilder, all_step_contraction, extension_chain,
                                     hitting_time_stats, mixing_rate, squeezing_stats)
from ctrlmix.ns2d import (NSSystem, decay_probe, dissipativity_probe, random_initial_state)
from ctrlmix.rds import density_from_name
from ctrlmix.rng import RngState
from ctrlmix.stabiliser import toy_affine_stabiliser
from ctrlmix.toybench import (brute_force_bl_distance_1d, brute_force_transport_cost, contracting_affine,
                              synchronous_coupling_bound, unstable_controlled)
from ctrlmix.transport import (DiscreteMeasure, ProductDensity, ShiftMap, dual_lipschitz,
                               maximal_coupling_densities, transport_cost, verify_shift_tv_bound)

CONFIGS = Path(__file__).resolve().parent.parent / "configs"
LOG: list[str] = []


def report(number: int, ok: bool, detail: str) -> None:
    line = f"{'PASS' if ok else 'FAIL'} criterion {number}: {detail}"
    LOG.append(line)
    print(line)
    assert ok, line


# -- 1: transport cost against coupling-polytope enumeration ----------------------

def test_criterion_01_transport_cost_oracle():
    gen = RngState(101).generator()
    t0 = time.perf_counter()
    errs = []
    for _ in range(100):
        dim = int(gen.integers(1, 3))
        a, b = random_small_measure(gen, 4, dim), random_small_measure(gen, 4, dim)
        eps = float(gen.uniform(0.1, 2.0))
        errs.append(abs(transport_cost(a, b, eps) - brute_force_transport_cost(a, b, eps)))
    dt = time.perf_counter() - t0
    report(1, max(errs) <= 1e-9 and dt < 10,
           f"max |cost - enumeration| = {max(errs):.2e} over 100 instances in {dt:.1f} s")


# -- 2: dual-Lipschitz against grid search, metric axioms ---------------------------

def test_criterion_02_dual_lipschitz_oracle_and_axioms():
    gen = RngState(102).generator()
    errs = [abs(dual_lipschitz(a, b) - brute_force_bl_distance_1d(a, b))
            for a, b in ((random_small_measure(gen, 5), random_small_measure(gen, 5)) for _ in range(100))]
    sym, tri = 0.0, -np.inf
    for _ in range(200):
        a, b, c = (random_small_measure(gen, 4, 2) for _ in range(3))
        ab = dual_lipschitz(a, b)
        sym = max(sym, abs(ab - dual_lipschitz(b, a)))
        tri = max(tri, ab - dual_lipschitz(a, c) - dual_lipschitz(c, b))
    report(2, max(errs) <= 1.5e-2 and sym == 0.0 and tri <= 1e-7,
           f"max |LP - grid| = {max(errs):.2e}; symmetry gap {sym:.1e}; triangle excess {tri:.1e}")


# -- 3: maximal-coupling coalescence frequency ----------------------------------------

def _pairs():
    n1, n2 = stats.norm(0, 1), stats.norm(1, 1)
    e1, e2 = stats.expon(scale=1.0), stats.expon(scale=0.5)
    w1, w2 = stats.norm(0, 1), stats.norm(0, 2)
    x = np.sqrt(8 * np.log(2) / 3)
    return [
        ("uniform shift 0.3", stats.uniform(0, 1), stats.uniform(0.3, 1), 0.3),
        ("normal mean shift 1", n1, n2, 2 * stats.norm.cdf(0.5) - 1),
        ("exponential rates 1 and 2", e1, e2, 0.25),
        ("triangular 2x vs 2(1-x)", stats.triang(1.0), stats.triang(0.0), 0.5),
        ("normal scales 1 and 2", w1, w2, (2 * stats.norm.cdf(x) - 1) - (2 * stats.norm.cdf(x / 2) - 1)),
    ]


def test_criterion_03_maximal_coupling_coalescence():
    state = RngState(103)
    rows, ok = [], True
    for i, (name, p, q, tv) in enumerate(_pairs()):
        _, _, co = maximal_coupling_densities(
            lambda z, p=p: p.pdf(z[..., 0]), lambda z, q=q: q.pdf(z[..., 0]),
            lambda g, n, p=p: p.rvs(size=(n, 1), random_state=g),
            lambda g, n, q=q: q.rvs(size=(n, 1), random_state=g), state.child(i), size=100_000)
        f = co.mean()
        se = np.sqrt((1 - tv) * tv / co.size)
        z = abs(f - (1 - tv)) / se
        ok &= z <= 3
        rows.append(f"{name}: {f:.4f} vs {1 - tv:.4f} ({z:.1f} se)")
    report(3, ok, "; ".join(rows))


# -- 4: TV cost of near-identity noise shifts scales like kappa -----------------------------

def _shift_families():
    return {
        "translation": lambda k: ShiftMap(lambda z: np.broadcast_to(k * np.array([0.6, 0.8]), z.shape), k),
        "rotation": lambda k: ShiftMap(lambda z: (k / np.sqrt(2)) * np.stack([z[..., 1], -z[..., 0]], -1), k),
        "nonlinear": lambda k: ShiftMap(
            lambda z: k * np.stack([np.sin(z[..., 1]), 0.5 * np.cos(z[..., 0])], -1), k),
    }


def test_criterion_04_shift_tv_scaling():
    bump = density_from_name("bump")
    dens = ProductDensity([bump, bump])
    kappas = [0.01, 0.02, 0.05, 0.1, 0.2]
    t0 = time.perf_counter()
    ok, rows = True, []
    tables = {}
    for name, fam in _shift_families().items():
        rep = verify_shift_tv_bound(dens, fam, kappas, [-1.3, -1.3], [1.3, 1.3], (400, 400), band=3.0)
        for kappa in kappas:
            psi = fam(kappa)
            chk = psi.check_budget(RngState(104).generator().uniform(-1, 1, (2000, 2)))
            ok &= chk["pass"]
        tables[name] = rep
        ok &= rep["pass"]
        rows.append(f"{name} spread {rep['spread']:.2f}")
    # independent quadrature of the translated product density at one kappa
    shift = 0.1 * np.array([0.6, 0.8])
    quad, _ = integrate.dblquad(lambda y, x: abs(dens(np.array([x, y])) - dens(np.array([x, y]) - shift)),
                                -1.3, 1.3, -1.3, 1.3, epsabs=1e-7)
    grid_tv = tables["translation"]["table"][3]["tv"]
    ok &= abs(0.5 * quad - grid_tv) <= 2e-3
    dt = time.perf_counter() - t0
    ok &= dt < 120
    report(4, ok, ", ".join(rows) + f"; grid vs quadrature TV {grid_tv:.4f}/{0.5 * quad:.4f}; {dt:.0f} s")


# -- 5: toy mixing rate ------------------------------------------------------------------

def test_criterion_05_toy_mixing_rate():
    cfg = load_config(CONFIGS / "toy_mixing.json")
    toy = contracting_affine(0.5)
    t0 = time.perf_counter()
    rep = mixing_rate(toy.system, toy.noise, [[-1.0], [1.0]], None, 12, 100_000, RngState(cfg.seed),
                      batches=4)
    dt = time.perf_counter() - t0
    dominated = all(d <= synchronous_coupling_bound(0.5, -1.0, 1.0, int(k)) + f
                    for k, d, f in zip(rep.lags, rep.distance, rep.floor))
    rel = abs(rep.gamma - np.log(2)) / np.log(2) if rep.gamma is not None else np.inf
    report(5, rel <= 0.15 and dominated and dt < 300,
           f"gamma = {rep.gamma:.4f} (ln 2 = {np.log(2):.4f}, {100 * rel:.1f}% off) over lags "
           f"{rep.fit_lags}; bound dominates every lag: {dominated}; {dt:.0f} s")


# -- 6: all-step contraction probability on the toy controlled system --------------------

def test_criterion_06_all_step_contraction():
    toy = unstable_controlled()
    cfg = CouplingConfig(delta=0.2, r=0.8, q=0.5)
    pb = PairBuilder(toy.system, toy.noise, toy_affine_stabiliser(toy.A, toy.B, 0.5, delta=0.2, block=(0,)), cfg)
    state = RngState(106)
    dists, ps, ses = [0.01, 0.05, 0.1], [], []
    for i, d in enumerate(dists):
        gen = state.child(i).generator()
        u = gen.uniform(-0.5, 0.5, (20000, 2))
        ang = gen.uniform(0, 2 * np.pi, 20000)
        u2 = u + d * np.stack([np.cos(ang), np.sin(ang)], axis=1)
        R, R2, _ = extension_chain(pb, u, u2, 30, state.child(10 + i))
        rep = all_step_contraction(R, R2, cfg.r, toy.system.distance)
        ps.append(rep["p"])
        ses.append(rep["stderr"])
    d, fail = np.array(dists), 1 - np.array(ps)
    C1 = float(d @ fail / (d @ d))
    ok = all(p >= 1 - C1 * x - 3 * s for x, p, s in zip(dists, ps, ses))
    report(6, ok, f"C1 = {C1:.3f}; P(all-step contraction) = "
           + ", ".join(f"{p:.4f} at {x}" for x, p in zip(dists, ps)))


# -- 7: hitting and squeezing hypotheses on the toy controlled system --------------------

def test_criterion_07_hitting_and_squeezing():
    toy = unstable_controlled()
    cfg = CouplingConfig(delta=0.2, r=0.8, q=0.5)
    pb = PairBuilder(toy.system, toy.noise, toy_affine_stabiliser(toy.A, toy.B, 0.5, delta=0.2, block=(0,)), cfg)
    state = RngState(107)
    t0 = time.perf_counter()
    n = 4000
    R, R2, _ = extension_chain(pb, np.tile([0.9, 0.5], (n, 1)), np.tile([-0.9, -0.5], (n, 1)), 50, state.child(0))
    hit = hitting_time_stats(R, R2, cfg.delta, toy.system.distance)
    gen = state.child(1).generator()
    u = gen.uniform(-0.8, 0.8, (n, 2))
    ang = gen.uniform(0, 2 * np.pi, n)
    u2 = u + cfg.delta * np.stack([np.cos(ang), np.sin(ang)], axis=1)
    sq = squeezing_stats(pb, u, u2, cfg, state.child(2))
    dt = time.perf_counter() - t0
    ok = (hit.beta is not None and hit.beta > 0 and hit.r2 >= 0.95 and sq.p_never >= 0.5
          and sq.finite_moment and dt < 600)
    report(7, ok, f"beta = {hit.beta:.4f}, survival R2 = {hit.r2:.4f}; P(sigma = inf) = {sq.p_never:.3f}, "
           f"E exp(delta2 sigma) 1{{sigma<inf}} = {sq.moment:.3f} at delta2 = {sq.delta2:.4f}; {dt:.0f} s")


# -- 8: Navier-Stokes operator checks ----------------------------------------------------

def test_criterion_08_ns_operators():
    t0 = time.perf_counter()
    checks = {c["name"]: c for c in ns_operators_suite(108, n=64)}
    ns = NSSystem(n=32)
    u = random_initial_state(ns, 108, scale=2.0)[None]
    out = ns.field(ns.step(u, np.array([[1.0, -1.0, 1.0, -1.0]])))
    div = max(checks["extension_divergence"]["max_divergence"], checks["leray_idempotent"]["divergence"],
              out.max_divergence())
    dt = time.perf_counter() - t0
    tr, au, hp = checks["trace_refinement"], checks["energy_audit"], checks["hopf_ratio_decreasing"]
    ok = div <= 1e-10 and all(c["pass"] for c in checks.values()) and dt < 900
    report(8, ok, f"max divergence {div:.1e}; trace ratios {tr['ratios'][0]:.2f}, {tr['ratios'][1]:.2f}; "
           f"audit residual {au['residuals'][1]:.4f} at dt=1e-3, ratio {au['ratio']:.2f}; Hopf sup ratios "
           + ", ".join(f"{v:.2e}" for v in hp["sup_ratios"]) + f"; {dt:.0f} s")


# -- 9: dissipativity -------------------------------------------------------------------

def test_criterion_09_ns_dissipativity():
    ns = NSSystem(n=64, nu=0.05)
    state = RngState(109)
    fit = decay_probe(ns, random_initial_state(ns, state.child(0), scale=2.0)[None], k_max=20)
    starts = np.stack([random_initial_state(ns, state.child(1, i), scale=float(s))
                       for i, s in enumerate(np.linspace(0.5, 4.0, 32))])
    rep = dissipativity_probe(ns, starts, 30, state.child(2), alpha=fit.alpha)
    sup = rep.sup_norms
    early, late = float(np.max(sup[:16])), float(np.max(sup[16:]))
    ok = fit.alpha > 0 and fit.r2 >= 0.95 and np.all(np.isfinite(sup)) and late <= early
    report(9, ok, f"decay alpha = {fit.alpha:.3f} (R2 {fit.r2:.4f}); sup |u|_1 over k <= 15: {early:.2f}, "
           f"over 16..30: {late:.2f}; C1 = {rep.C1:.2f}, absorbing radius {rep.radius:.2f}")


# -- 10: end-to-end Navier-Stokes mixing --------------------------------------------------

@pytest.mark.slow
def test_criterion_10_ns_mixing(tmp_path):
    cfg = load_config(CONFIGS / "ns_mixing.json")
    assert cfg.ensemble.size >= 512 and cfg.ns.n_modes == 4
    t0 = time.perf_counter()
    code = cmd_mix_rate(cfg, tmp_path)
    dt = time.perf_counter() - t0
    rep = json.loads((tmp_path / "mixing_report.json").read_text())
    d0 = 2 * cfg.ns.init_scale  # the two initial states are +u and -u with |u|_L2 = init_scale
    ok = (code == 0 and rep["gamma"] is not None and rep["gamma"] > 0 and rep["r2"] >= 0.9 and dt <= 45 * 60)
    report(10, ok, f"gamma = {rep['gamma']}, R2 = {rep['r2']}, fit lags {rep['fit_lags']}, "
           f"initial L2 distance {d0:.1f}, {cfg.ensemble.size} per condition, {dt / 60:.1f} min")


# -- 11: byte-identical reruns -------------------------------------------------------------

def _artifacts(root: Path) -> dict:
    return {p.relative_to(root).as_posix(): p.read_bytes()
            for p in sorted(root.rglob("*")) if p.suffix in (".csv", ".json")}


def test_criterion_11_reproducibility(tmp_path):
    ns_cfg = tmp_path / "ns_small.json"
    ns_cfg.write_text(json.dumps({"system": "navier-stokes", "steps": 3, "ns": {"n": 32},
                                  "ensemble": {"size": 16, "k_max": 3, "batches": 2, "chunk": 8},
                                  "seed": 111}))
    runs = [("mix-rate", CONFIGS / "toy_mixing.json", 1), ("simulate", ns_cfg, 1),
            ("mix-rate", ns_cfg, 1), ("verify transport", None, 1)]
    same, names = True, []
    for tag, (cmd, cfg, jobs) in enumerate(runs):
        outs = []
        for rep in range(2):
            out = tmp_path / f"{tag}_{rep}"
            args = cmd.split() + ["--out", str(out), "--jobs", str(jobs if rep == 0 else 2)]
            if cfg is not None:
                args += ["--config", str(cfg)]
            cli_main(args)
            outs.append(_artifacts(out))
        same &= outs[0] == outs[1] and len(outs[0]) > 0
        names += list(outs[0])
    report(11, same, f"{len(names)} CSV/JSON artifacts from {len(runs)} commands identical across reruns "
           "(second run with --jobs 2)")


if __name__ == "__main__":
    failures = 0
    for name, fn in sorted((k, v) for k, v in globals().items() if k.startswith("test_criterion_")):
        tmp = Path(tempfile.mkdtemp())
        try:
            fn(tmp) if fn.__code__.co_argcount else fn()
        except AssertionError:
            failures += 1
        finally:
            shutil.rmtree(tmp, ignore_errors=True)
    sys.exit(1 if failures else 0)
