import numpy as np
import pytest

from ctrlmix.errors import ConfigurationError
from ctrlmix.rds import (NoiseModel, SystemMap, affine_system, check_compactness, density_from_name,
                         simulate_trajectory, transition_ensemble)
from ctrlmix.rng import RngState, as_generator, as_state


def test_same_state_same_draws():
    a = RngState(5, 3).generator().random(10)
    b = RngState(5, 3).generator().random(10)
    assert np.array_equal(a, b)


def test_children_are_distinct_and_deterministic():
    s = RngState(11)
    x = s.child(0).generator().random(4)
    y = s.child(1).generator().random(4)
    assert not np.array_equal(x, y)
    assert np.array_equal(x, RngState(11).child(0).generator().random(4))
    assert s.child(1, 2) != s.child(2, 1)


def test_counter_advance_skips_blocks():
    s = RngState(1)
    full = s.generator().integers(0, 2**63, 8)
    later = s.generator(counter=1).integers(0, 2**63, 8)
    assert not np.array_equal(full, later)


def test_as_state_rejects_generators():
    assert as_state(3) == RngState(3)
    with pytest.raises(TypeError):
        as_state(np.random.default_rng(0))
    with pytest.raises(TypeError):
        as_generator(None)


@pytest.mark.parametrize("name", ["uniform", "parabolic", "bump", "cosine"])
def test_density_families_normalised_and_bounded(name):
    d = density_from_name(name)
    x = np.linspace(-1, 1, 20001)
    assert abs(np.trapezoid(d.pdf(x), x) - 1) < 1e-4
    s = d.sample(RngState(0).generator(), 20000)
    assert s.min() >= -1 and s.max() <= 1
    assert abs(s.mean()) < 0.03
    assert np.all(d.pdf(np.array([-1.5, 1.5])) == 0)


def test_unknown_density_rejected():
    with pytest.raises(ConfigurationError):
        density_from_name("cauchy")


def test_noise_model_validation_and_shapes():
    m = NoiseModel.iid([1.0, 0.5], "uniform")
    assert m.sample(0, 7).shape == (7, 2)
    assert m.sample(0).shape == (2,)
    assert m.total_variance_budget == pytest.approx(1.25)
    assert np.allclose(m.realize([1.0, 1.0]), [1.0, 0.5])
    assert m.pdf(np.array([0.0, 0.0])) == pytest.approx(0.25)
    with pytest.raises(ConfigurationError):
        NoiseModel.iid([-1.0])


def test_affine_trajectory_matches_recursion():
    sys_ = affine_system([[0.5]])
    model = NoiseModel.iid([1.0])
    traj = simulate_trajectory(sys_, np.array([1.0]), model, 5, RngState(2))
    xi = model.sample(RngState(2).generator(), None)
    assert traj.shape == (6, 1)
    assert traj[1, 0] == pytest.approx(0.5 + xi[0])


def test_transition_ensemble_and_compactness():
    sys_ = affine_system([[0.5]], radius=2.0)
    model = NoiseModel.iid([1.0])
    mu = transition_ensemble(sys_, np.array([0.0]), model, 100, 3)
    assert mu.size == 100 and np.isclose(mu.weights.sum(), 1)
    rep = check_compactness(sys_, model, lambda g, n: g.uniform(-2, 2, (n, 1)), 1000, 4)
    assert rep["pass"] and rep["max_norm"] <= 2


def test_system_map_rejects_unknown_norm():
    with pytest.raises(ConfigurationError):
        SystemMap(lambda u, x: u, 1, norm_tag="sup")
