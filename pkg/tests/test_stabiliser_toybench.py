import numpy as np
import pytest

from ctrlmix.errors import ConfigurationError, InfeasibleError
from ctrlmix.rng import RngState
from ctrlmix.stabiliser import (ControlWindow, Stabiliser, synthesise_gain, toy_affine_stabiliser,
                                verify_stabilisability)
from ctrlmix.toybench import (brute_force_bl_distance_1d, brute_force_transport_cost,
                              contracting_affine, exact_stationary_density_1d,
                              synchronous_coupling_bound, unstable_controlled)
from ctrlmix.transport import DiscreteMeasure


def test_gain_reaches_target_contraction():
    A, B = np.diag([1.2, 0.3]), np.diag([2.0, 0.1])
    K = synthesise_gain(A, B, 0.5, block=(0,))
    assert np.linalg.norm(A - B @ K, 2) <= 0.5 + 1e-9
    assert np.all(K[1] == 0)


def test_gain_is_zero_for_contracting_drift():
    assert np.all(synthesise_gain(np.eye(2) * 0.3, np.eye(2), 0.5) == 0)


def test_infeasible_block_raises():
    with pytest.raises(InfeasibleError):
        synthesise_gain(np.diag([1.2, 1.5]), np.eye(2), 0.5, block=(0,))


def test_toy_stabiliser_contracts_and_vanishes_on_diagonal():
    toy = unstable_controlled()
    st = toy_affine_stabiliser(toy.A, toy.B, 0.5, block=(0,))
    gen = RngState(0).generator()
    u = gen.uniform(-1, 1, (500, 2))
    u2 = u + gen.uniform(-0.1, 0.1, (500, 2))
    xi = gen.uniform(-1, 1, (500, 2))
    rep = verify_stabilisability(st, toy.system, u, u2, xi)
    assert rep["pass"] and rep["contraction"] <= 0.5 + 1e-12
    assert np.all(st(u, u, xi) == 0)
    assert rep["holder"] <= st.C + 1e-12


def test_block_mask_is_enforced():
    st = Stabiliser(lambda u, v, x: np.ones_like(x), 3, (1,), C=1.0, delta=0.1)
    assert np.array_equal(st(np.zeros(2), np.zeros(2), np.zeros(3)), [0.0, 1.0, 0.0])


def test_stabiliser_validation():
    with pytest.raises(ConfigurationError):
        Stabiliser(lambda u, v, x: x, 1, (0,), C=1.0, delta=0.1, q=1.0)


def test_control_window_cutoff():
    w = ControlWindow()
    t = np.array([0.0, 0.5, 0.6, 0.7, 0.9])
    chi = w.chi(t)
    assert chi[0] == 1 and chi[1] == 1 and chi[3] == 0 and chi[4] == 0 and 0 < chi[2] < 1
    assert np.all(np.diff(w.chi(np.linspace(0, 1, 200))) <= 0)
    with pytest.raises(ConfigurationError):
        ControlWindow(0.1, 0.05, 0.7, 0.8)


def test_toy_constructors():
    toy = unstable_controlled()
    assert toy.contraction == pytest.approx(0.5)
    out = toy.system.step_fn(np.array([[1.0, 1.0]]), np.array([[1.0, 1.0]]))
    assert np.all(np.abs(out) <= 1)
    with pytest.raises(ConfigurationError):
        contracting_affine(1.5)
    with pytest.raises(ConfigurationError):
        unstable_controlled(expansion=0.9)


def test_synchronous_bound():
    assert synchronous_coupling_bound(0.5, -1, 1, 0) == 2.0
    assert synchronous_coupling_bound(0.5, -1, 1, 3) == pytest.approx(0.25)


def test_stationary_density_moments():
    grid, bound = exact_stationary_density_1d(0.5, "uniform", 40, return_bound=True)
    x = grid.axes()[0]
    m = grid.values * grid.cell_volume
    assert m.sum() == pytest.approx(1.0, abs=1e-12)
    assert np.sum(m * x) == pytest.approx(0.0, abs=1e-12)
    assert np.sum(m * x**2) == pytest.approx((1 / 3) / (1 - 0.25), abs=1e-5)
    assert bound < 1e-10


def test_stationary_density_point_mass_noise():
    grid = exact_stationary_density_1d(0.5, None, 5)
    assert grid.values.max() * grid.cell_volume == pytest.approx(1.0)


def test_brute_force_oracles_on_hand_cases():
    a, b = DiscreteMeasure.dirac([0.0]), DiscreteMeasure.dirac([0.5])
    assert brute_force_bl_distance_1d(a, b) == pytest.approx(0.4, abs=2e-3)
    c = DiscreteMeasure([[0.0], [1.0]], [0.5, 0.5])
    assert brute_force_transport_cost(a, c, 0.5) == pytest.approx(0.5)


def test_ns_feedback_correction_reduces_mismatch():
    from ctrlmix.ns2d import NSSystem, random_initial_state
    from ctrlmix.stabiliser import ns_feedback_stabiliser

    ns = NSSystem(n=16, nu=0.05)
    u = random_initial_state(ns, 1, scale=2.0)
    u2 = u + random_initial_state(ns, 2, scale=0.05)
    xi = np.array([0.3, -0.2, 0.1, 0.0])
    rows = []
    st = ns_feedback_stabiliser(ns, eps_target=1e-9, budget=2, trace=rows)
    c = st(u, u2, xi)
    assert c.shape == (4,)
    assert min(obj for _, obj in rows) <= rows[0][1]
    assert np.all(st(u, u, xi) == 0)
    plain = ns_feedback_stabiliser(ns, eps_target=0.99)
    assert np.all(plain(u, u2, xi) == 0)
