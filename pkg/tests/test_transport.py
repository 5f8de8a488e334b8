import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import stats

from ctrlmix.errors import ConfigurationError, GridMismatchError
from ctrlmix.rds import density_from_name
from ctrlmix.rng import RngState
from ctrlmix.toybench import brute_force_bl_distance_1d, brute_force_transport_cost
from ctrlmix.transport import (DensityGrid, DiscreteMeasure, ProductDensity, ShiftMap, d_eps,
                               dual_lipschitz, dual_lipschitz_assignment, dual_lipschitz_line,
                               dual_lipschitz_with_witness, invert_shift, merged_support, maximal_coupling_densities,
                               optimal_plan, plan_cost, pushforward_density, shift_tv, transport_cost,
                               tv_distance_grid, verify_shift_tv_bound)


def measures(max_atoms=4, dim=1):
    def build(draw):
        m = draw(st.integers(1, max_atoms))
        atoms = draw(st.lists(st.lists(st.integers(-200, 200), min_size=dim, max_size=dim),
                              min_size=m, max_size=m))
        w = draw(st.lists(st.integers(1, 5), min_size=m, max_size=m))
        w = np.array(w, dtype=float)
        return DiscreteMeasure(np.array(atoms, dtype=float) / 100, w / w.sum())
    return st.composite(lambda draw: build(draw))()


# -- measures and costs ------------------------------------------------------

def test_measure_validation():
    with pytest.raises(ConfigurationError):
        DiscreteMeasure([[0.0], [1.0]], [0.7, 0.7])
    with pytest.raises(ConfigurationError):
        DiscreteMeasure([[np.nan]], [1.0])


def test_measure_csv_roundtrip(tmp_path):
    mu = DiscreteMeasure([[0.1, 0.2], [0.3, -1.0]], [0.25, 0.75])
    mu.to_csv(tmp_path / "m.csv")
    back = DiscreteMeasure.from_csv(tmp_path / "m.csv")
    assert np.array_equal(back.atoms, mu.atoms) and np.array_equal(back.weights, mu.weights)


def test_d_eps_boundary_is_near():
    assert d_eps(0.0, 0.5, 0.5) == 0
    assert d_eps(0.0, 0.5001, 0.5) == 1


def test_cost_known_values():
    a = DiscreteMeasure.dirac([0.0])
    assert transport_cost(a, DiscreteMeasure.dirac([0.3]), 0.5) == 0.0
    assert transport_cost(a, DiscreteMeasure.dirac([1.0]), 0.5) == 1.0
    b = DiscreteMeasure([[0.0], [2.0]], [0.5, 0.5])
    assert transport_cost(a, b, 0.5) == pytest.approx(0.5)


@settings(max_examples=60, deadline=None)
@given(measures(4), measures(4), st.floats(0.05, 2.0))
def test_cost_equals_polytope_enumeration(a, b, eps):
    assert transport_cost(a, b, eps) == pytest.approx(brute_force_transport_cost(a, b, eps), abs=1e-9)


@settings(max_examples=40, deadline=None)
@given(measures(5), measures(5), st.floats(0.05, 1.0))
def test_optimal_plan_is_feasible_and_optimal(a, b, eps):
    plan = optimal_plan(a, b, eps)
    assert plan.check(a, b)
    assert plan_cost(plan, a, b, eps) == pytest.approx(transport_cost(a, b, eps), abs=1e-9)


def test_interval_sweep_matches_flow_in_1d():
    gen = RngState(3).generator()
    x = DiscreteMeasure.empirical(gen.normal(size=(600, 1)))
    y = DiscreteMeasure.empirical(gen.normal(0.3, 1, size=(600, 1)))
    from ctrlmix.transport.flow import bipartite_max_flow, interval_matching_1d
    from scipy.spatial.distance import cdist

    flow, _ = bipartite_max_flow(x.weights, y.weights, cdist(x.atoms, y.atoms) <= 0.1)
    sweep = interval_matching_1d(x.atoms[:, 0], x.weights, y.atoms[:, 0], y.weights, 0.1)
    assert sweep == pytest.approx(flow, abs=1e-12)


# -- dual-Lipschitz ------------------------------------------------------------

@pytest.mark.parametrize("x, expected", [(0.5, 0.4), (1.0, 2 / 3), (2.0, 1.0), (3.0, 1.2)])
def test_two_dirac_closed_form(x, expected):
    v = dual_lipschitz(DiscreteMeasure.dirac([0.0]), DiscreteMeasure.dirac([x]))
    assert v == pytest.approx(expected, abs=1e-9)
    assert v == pytest.approx(2 * x / (2 + x), abs=1e-9)


@settings(max_examples=40, deadline=None)
@given(measures(5), measures(5))
def test_dual_lipschitz_vs_grid_search(a, b):
    assert abs(dual_lipschitz(a, b) - brute_force_bl_distance_1d(a, b)) <= 1.5e-2


@settings(max_examples=40, deadline=None)
@given(measures(4, 2), measures(4, 2), measures(4, 2))
def test_metric_axioms(a, b, c):
    ab = dual_lipschitz(a, b)
    assert ab == dual_lipschitz(b, a)
    assert ab <= dual_lipschitz(a, c) + dual_lipschitz(c, b) + 1e-7
    assert dual_lipschitz(a, a) == pytest.approx(0.0, abs=1e-12)
    assert 0 <= ab <= 2 + 1e-12


def test_witness_is_admissible():
    gen = RngState(1).generator()
    a = DiscreteMeasure.empirical(gen.normal(size=(12, 2)))
    b = DiscreteMeasure.empirical(gen.normal(0.5, 1, size=(12, 2)))
    value, f, M, L = dual_lipschitz_with_witness(a, b)
    pts, diff = merged_support(a, b)
    sup = np.max(np.abs(f))
    jump = np.abs(f[:, None] - f[None, :])
    dist = np.linalg.norm(pts[:, None] - pts[None, :], axis=-1)
    lip = np.max(jump[dist > 0] / dist[dist > 0])
    assert sup <= M + 1e-9 and lip <= L + 1e-9 and M + L <= 1 + 1e-9
    assert float(diff @ f) == pytest.approx(value, abs=1e-9)
    assert value == pytest.approx(dual_lipschitz(a, b), abs=1e-9)


def test_exact_routes_agree():
    gen = RngState(2).generator()
    a1 = DiscreteMeasure.empirical(gen.normal(size=(40, 1)))
    b1 = DiscreteMeasure.empirical(gen.normal(0.2, 1.3, size=(40, 1)))
    lp = dual_lipschitz(a1, b1, method="lp")
    assert dual_lipschitz_line(a1, b1) == pytest.approx(lp, abs=1e-9)
    a2 = DiscreteMeasure.empirical(gen.normal(size=(30, 3)))
    b2 = DiscreteMeasure.empirical(gen.normal(0.2, 1.0, size=(30, 3)))
    assert dual_lipschitz_assignment(a2, b2) == pytest.approx(dual_lipschitz(a2, b2, method="lp"), abs=1e-8)


def test_line_route_scales_to_large_ensembles():
    gen = RngState(4).generator()
    a = DiscreteMeasure.empirical(gen.uniform(-1, 1, (100000, 1)))
    b = DiscreteMeasure.empirical(gen.uniform(-1, 1, (100000, 1)) + 0.1)
    v = dual_lipschitz(a, b)
    # a ramp across the joint support gives about 2t / (4 + t) for a shift t
    assert v == pytest.approx(0.2 / 4.1, abs=3e-3)


# -- maximal coupling and shift maps -------------------------------------------

def test_maximal_coupling_marginals_and_overlap():
    p, q = stats.norm(0, 1), stats.norm(1, 1)
    x, y, co = maximal_coupling_densities(lambda z: p.pdf(z[..., 0]), lambda z: q.pdf(z[..., 0]),
                                          lambda g, n: g.normal(0, 1, (n, 1)),
                                          lambda g, n: g.normal(1, 1, (n, 1)), 0, size=40000)
    tv = 2 * stats.norm.cdf(0.5) - 1
    assert abs(co.mean() - (1 - tv)) < 4 * np.sqrt(tv * (1 - tv) / co.size)
    assert np.all(x[co] == y[co])
    assert stats.kstest(y[:, 0], q.cdf).pvalue > 1e-3
    assert stats.kstest(x[:, 0], p.cdf).pvalue > 1e-3


def test_single_draw_shape():
    x, y, c = maximal_coupling_densities(lambda z: np.ones(z.shape[:-1]), lambda z: np.ones(z.shape[:-1]),
                                         lambda g, n: g.random((n, 1)), lambda g, n: g.random((n, 1)), 1)
    assert c and x.shape == (1,)


def test_shift_inversion_roundtrip():
    psi = ShiftMap(lambda z: 0.3 * np.sin(z[..., ::-1]), 0.3)
    z = RngState(5).generator().uniform(-1, 1, (100, 2))
    assert np.allclose(invert_shift(psi, psi(z)), z, atol=1e-10)


def test_pushforward_conserves_mass_and_tv_scales():
    bump = density_from_name("bump")
    dens = ProductDensity([bump, bump])
    psi = ShiftMap(lambda z: np.broadcast_to([0.05, 0.0], z.shape), 0.05)
    grid = DensityGrid.from_function(pushforward_density(dens, psi), [-1.2, -1.2], [1.2, 1.2], (300, 300))
    assert grid.mass() == pytest.approx(1.0, abs=1e-3)
    rep = verify_shift_tv_bound(dens, lambda k: ShiftMap(lambda z: np.broadcast_to([k, 0.0], z.shape), k),
                                [0.02, 0.05, 0.1], [-1.2, -1.2], [1.2, 1.2], (200, 200))
    assert rep["pass"]
    assert shift_tv(dens, psi, [-1.2, -1.2], [1.2, 1.2], (200, 200)) > 0


def test_tv_grid_requires_same_layout():
    a = DensityGrid.from_function(lambda z: np.ones(z.shape[:-1]), [0.0], [1.0], (10,))
    b = DensityGrid.from_function(lambda z: np.ones(z.shape[:-1]), [0.0], [2.0], (10,))
    with pytest.raises(GridMismatchError):
        tv_distance_grid(a, b)
