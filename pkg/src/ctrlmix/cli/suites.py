"""Invariant suites run by ``ctrlmix verify``; each returns named checks with a verdict."""
from __future__ import annotations

import numpy as np
from scipy import stats

from ..rng import RngState


def _check(name, ok, **values):
    return {"name": name, "pass": bool(ok), **{k: _plain(v) for k, v in values.items()}}


def _plain(v):
    if isinstance(v, (np.floating, float)):
        return float(v)
    if isinstance(v, (np.integer, int)) and not isinstance(v, bool):
        return int(v)
    if isinstance(v, (np.bool_, bool)):
        return bool(v)
    if isinstance(v, (list, tuple, np.ndarray)):
        return [_plain(x) for x in v]
    return v


def random_small_measure(gen, max_atoms, dim=1, scale=2.0):
    from ..transport import DiscreteMeasure

    m = int(gen.integers(1, max_atoms + 1))
    atoms = np.round(gen.uniform(-scale, scale, (m, dim)), 2)
    w = gen.integers(1, 6, m).astype(float)
    return DiscreteMeasure(atoms, w / w.sum())


def transport_suite(seed: int = 0) -> list:
    from ..toybench import brute_force_bl_distance_1d, brute_force_transport_cost
    from ..transport import DiscreteMeasure, dual_lipschitz, transport_cost

    gen = RngState(seed).child(1).generator()
    errs = []
    for _ in range(100):
        dim = int(gen.integers(1, 3))
        a, b = random_small_measure(gen, 4, dim), random_small_measure(gen, 4, dim)
        eps = float(gen.uniform(0.1, 2.0))
        errs.append(abs(transport_cost(a, b, eps) - brute_force_transport_cost(a, b, eps)))
    out = [_check("cost_vs_polytope_enumeration", max(errs) <= 1e-9, max_error=max(errs))]
    errs = []
    for _ in range(100):
        a, b = random_small_measure(gen, 5), random_small_measure(gen, 5)
        errs.append(abs(dual_lipschitz(a, b) - brute_force_bl_distance_1d(a, b)))
    out.append(_check("dual_lipschitz_vs_grid_search", max(errs) <= 1.5e-2, max_error=max(errs)))
    sym, tri = 0.0, -np.inf
    for _ in range(200):
        a, b, c = (random_small_measure(gen, 4, 2) for _ in range(3))
        ab, ba = dual_lipschitz(a, b), dual_lipschitz(b, a)
        sym = max(sym, abs(ab - ba))
        tri = max(tri, ab - dual_lipschitz(a, c) - dual_lipschitz(c, b))
    out.append(_check("metric_axioms", sym == 0.0 and tri <= 1e-7, symmetry_gap=sym, triangle_excess=tri))
    v = dual_lipschitz(DiscreteMeasure.dirac([0.0]), DiscreteMeasure.dirac([0.5]))
    out.append(_check("two_atom_value", abs(v - 0.4) <= 1e-9, value=v))
    return out


def coupling_suite(seed: int = 0) -> list:
    from ..coupling_mixing import (CouplingConfig, PairBuilder, extension_chain, hitting_time_stats,
                                   squeezing_stats)
    from ..stabiliser import toy_affine_stabiliser
    from ..toybench import unstable_controlled
    from ..transport import maximal_coupling_densities

    state = RngState(seed).child(2)
    out = []
    for shift in (0.1, 0.5):
        p = stats.uniform(0, 1)
        q = stats.uniform(shift, 1)
        _, _, co = maximal_coupling_densities(
            lambda x: p.pdf(x[..., 0]), lambda x: q.pdf(x[..., 0]),
            lambda g, n: g.uniform(0, 1, (n, 1)), lambda g, n: g.uniform(shift, 1 + shift, (n, 1)),
            state.child(int(shift * 10)), size=100000)
        f = co.mean()
        se = np.sqrt(f * (1 - f) / co.size)
        out.append(_check(f"coalescence_shift_{shift}", abs(f - (1 - shift)) <= 3 * se, frequency=f,
                          expected=1 - shift))
    toy = unstable_controlled()
    st = toy_affine_stabiliser(toy.A, toy.B, 0.5, delta=0.2, block=(0,))
    cfg = CouplingConfig(delta=0.2, r=0.8, q=0.5)
    pb = PairBuilder(toy.system, toy.noise, st, cfg)
    n = 1000
    R, R2, _ = extension_chain(pb, np.tile([0.9, 0.5], (n, 1)), np.tile([-0.9, -0.5], (n, 1)), 50,
                               state.child(3))
    h = hitting_time_stats(R, R2, cfg.delta, toy.system.distance)
    out.append(_check("hitting_time_fit", h.beta is not None and h.beta > 0 and h.r2 >= 0.95,
                      beta=h.beta, r2=h.r2, never_hit=h.never_hit))
    v = np.zeros((n, 2))
    v2 = v.copy()
    v2[:, 0] = 0.1
    sq = squeezing_stats(pb, v, v2, cfg, state.child(4))
    out.append(_check("squeezing", sq.p_never >= 0.5 and sq.finite_moment, p_never=sq.p_never,
                      moment=sq.moment))
    return out


def stabiliser_suite(seed: int = 0) -> list:
    from ..rds import SystemMap
    from ..stabiliser import Stabiliser, toy_affine_stabiliser, verify_stabilisability
    from ..toybench import unstable_controlled

    gen = RngState(seed).child(3).generator()
    toy = unstable_controlled()
    st = toy_affine_stabiliser(toy.A, toy.B, 0.5, delta=0.2, block=(0,))
    u = gen.uniform(-0.5, 0.5, (1000, 2))
    d = gen.normal(size=(1000, 2))
    d *= (gen.uniform(0, 0.2, 1000) / np.linalg.norm(d, axis=1))[:, None]
    xi = gen.uniform(-1, 1, (1000, 2))
    rep = verify_stabilisability(st, toy.system, u, u + d, xi)
    out = [_check("toy_contraction", rep["contraction"] <= 0.5 + 1e-12, **rep)]
    out.append(_check("zero_on_diagonal", np.all(st(u, u, xi) == 0.0)))
    bad = Stabiliser(lambda a, b, x: -st(a, b, x), 2, (0,), C=st.C, delta=0.2, q=0.5)
    rep_bad = verify_stabilisability(bad, toy.system, u, u + d, xi)
    out.append(_check("negative_control_fails", not rep_bad["pass"], contraction=rep_bad["contraction"]))
    zero = SystemMap(lambda a, x: np.zeros_like(a), 2)
    rep0 = verify_stabilisability(st, zero, u, u + d, xi)
    out.append(_check("zero_system", rep0["pass"] and rep0["contraction"] == 0.0))
    return out


def ns_operators_suite(seed: int = 0, n: int = 64) -> list:
    from ..ns2d import (NoiseBasis, NSParams, SquareDomain, VelocityField, energy_audit,
                        extend_boundary_field, hopf_trilinear_ratio, leray_project, resolve,
                        stream_modes, trace_error)

    out = []
    errs, divs = [], []
    for m in (n // 2, n, 2 * n):
        dom = SquareDomain(m)
        vn, vt = smooth_boundary_datum(dom)
        f = extend_boundary_field(dom, vn, vt)
        errs.append(trace_error(f, vn, vt))
        divs.append(f.max_divergence())
    ratios = [errs[0] / errs[1], errs[1] / errs[2]]
    out.append(_check("extension_divergence", max(divs) <= 1e-10, max_divergence=max(divs)))
    out.append(_check("trace_refinement", min(ratios) >= 1.8 and errs[1] <= 0.05, errors=errs,
                      ratios=ratios))
    dom = SquareDomain(n)
    gen = RngState(seed).child(4).generator()
    raw = VelocityField(dom, gen.normal(size=dom.u_shape), gen.normal(size=dom.v_shape))
    p1 = leray_project(raw)
    p2 = leray_project(p1)
    idem = float(np.max(np.abs(p2.flat() - p1.flat())))
    out.append(_check("leray_idempotent", idem <= 1e-10 and p1.max_divergence() <= 1e-10,
                      idempotence=idem, divergence=p1.max_divergence()))
    basis = NoiseBasis(dom)
    vt = basis.tangential([1.0, 0.5, -0.3, 0.2])
    sups = [hopf_trilinear_ratio(dom, vt, d, rng=seed)["sup_ratio"] for d in (0.3, 0.2, 0.1)]
    out.append(_check("hopf_ratio_decreasing", sups[0] > sups[1] > sups[2], sup_ratios=sups))
    small = SquareDomain(32)
    v0 = VelocityField.from_stream(small, 20 * stream_modes(small, 1, 1))
    res = [energy_audit(resolve(v0, NSParams(dt=dt), audit=True))["max_residual"] for dt in (2e-3, 1e-3)]
    out.append(_check("energy_audit", res[1] <= 0.05 and 1.7 <= res[0] / res[1] <= 2.3, residuals=res,
                      ratio=res[0] / res[1]))
    return out


def smooth_boundary_datum(domain):
    """Zero-flux datum: normal bumps on the side walls, one tangential bump on the top."""
    P = domain.boundary_points()
    e = domain.edge_of()

    def bump(s):
        return np.where((s > 0.2) & (s < 0.8), np.sin(np.pi * (s - 0.2) / 0.6) ** 2, 0.0)

    vn = np.where(e == 1, bump(P[:, 1]), 0.0) - np.where(e == 3, bump(P[:, 1]), 0.0)
    vt = np.where(e == 2, bump(P[:, 0]), 0.0)
    return vn, vt


SUITES = {"transport": transport_suite, "coupling": coupling_suite,
          "stabiliser": stabiliser_suite, "ns-operators": ns_operators_suite}
