import numpy as np
import pytest

from ctrlmix.coupling_mixing import (CouplingConfig, PairBuilder, all_step_contraction, extension_chain,
                                     fit_decay, hitting_time_fit, hitting_time_stats, hitting_times,
                                     independence_on_Tm_test, mixing_rate, squeezing_from_sigma,
                                     squeezing_stats)
from ctrlmix.errors import ConfigurationError, InsufficientDataError, StabiliserDomainError
from ctrlmix.rng import RngState
from ctrlmix.stabiliser import toy_affine_stabiliser
from ctrlmix.toybench import contracting_affine, synchronous_coupling_bound, unstable_controlled

CFG = CouplingConfig(delta=0.2, r=0.8, q=0.5)


@pytest.fixture(scope="module")
def toy():
    return unstable_controlled()


@pytest.fixture(scope="module")
def builder(toy):
    st = toy_affine_stabiliser(toy.A, toy.B, 0.5, delta=0.2, block=(0,))
    return PairBuilder(toy.system, toy.noise, st, CFG)


def test_config_validation():
    with pytest.raises(ConfigurationError):
        CouplingConfig(delta=0.2, r=0.4, q=0.5)
    with pytest.raises(ConfigurationError):
        CouplingConfig(delta=0.0, r=0.8, q=0.5)
    assert CFG.delta2 == pytest.approx(0.5 * np.log(1 / 0.8))


def test_pair_marginals_are_exact(toy, builder):
    """Each copy of the coupled step has the law of the single-copy step."""
    n = 40000
    u = np.tile([0.2, 0.1], (n, 1))
    u2 = np.tile([0.15, 0.05], (n, 1))
    R, R2, regime = builder(u, u2, RngState(1))
    ref = toy.system.step_fn(u2, toy.noise.sample(RngState(9).generator(), n))
    from scipy import stats

    assert stats.ks_2samp(R2[:, 0], ref[:, 0]).pvalue > 1e-3
    assert stats.ks_2samp(R2[:, 1], ref[:, 1]).pvalue > 1e-3
    assert np.mean(regime == 1) > 0.5


def test_far_pairs_move_independently(builder):
    u = np.tile([0.9, 0.5], (4000, 1))
    u2 = np.tile([-0.9, -0.5], (4000, 1))
    R, R2, regime = builder(u, u2, RngState(2))
    assert np.all(regime == 0)
    assert abs(np.corrcoef(R[:, 0], R2[:, 0])[0, 1]) < 0.05


def test_force_coupling_outside_diagonal_raises(builder):
    with pytest.raises(StabiliserDomainError):
        builder(np.array([[0.9, 0.0]]), np.array([[-0.9, 0.0]]), 0, force_coupling=True)


def test_synchronous_mode_shares_noise(toy):
    pb = PairBuilder(toy.system, toy.noise, None, CFG, mode="synchronous")
    u = np.zeros((10, 2))
    R, R2, _ = pb(u, u, 3)
    assert np.array_equal(R, R2)


def test_extension_chain_shapes_and_determinism(builder):
    a = extension_chain(builder, [0.3, 0.0], [0.2, 0.0], 5, 4)
    b = extension_chain(builder, [0.3, 0.0], [0.2, 0.0], 5, 4)
    assert a[0].shape == (6, 1, 2) and a[2].shape == (5, 1)
    assert all(np.array_equal(x, y) for x, y in zip(a, b))


def test_hitting_time_fit_recovers_geometric_rate():
    gen = RngState(5).generator()
    tau = gen.geometric(0.2, 20000) - 1.0
    rep = hitting_time_fit(tau, 60)
    assert rep.beta == pytest.approx(-np.log(0.8), rel=0.05)
    assert rep.r2 > 0.99 and not rep.inconclusive


def test_hitting_times_and_minimum_chain_count(toy):
    R = np.zeros((3, 5, 2))
    R2 = np.array([1.0, 0.1, 0.0])[:, None, None] * np.ones((3, 5, 2))
    assert np.all(hitting_times(R, R2, 0.2, toy.system.distance) == 1)
    with pytest.raises(InsufficientDataError):
        hitting_time_stats(R, R2, 0.2, toy.system.distance)


def test_squeezing_summary_of_known_sigma():
    sigma = np.r_[np.full(600, np.inf), np.arange(400) % 5]
    rep = squeezing_from_sigma(sigma, 50, 0.1)
    assert rep.p_never == pytest.approx(0.6)
    assert rep.finite_moment and not rep.inconclusive
    assert rep.moment == pytest.approx(np.mean(np.exp(0.1 * (np.arange(400) % 5))) * 0.4)


def test_squeezing_requires_diagonal_starts(builder):
    with pytest.raises(StabiliserDomainError):
        squeezing_stats(builder, np.zeros((2, 2)), np.ones((2, 2)), CFG, 0)


def test_squeezing_mostly_never_fails(builder):
    u = np.zeros((2000, 2))
    u2 = u + [0.1, 0.0]
    rep = squeezing_stats(builder, u, u2, CFG, RngState(6))
    assert rep.p_never >= 0.5 and rep.finite_moment


def test_all_step_contraction_on_exact_contraction(toy):
    R = 0.5 ** np.arange(6)[:, None, None] * np.ones((6, 4, 2))
    rep = all_step_contraction(R, np.zeros_like(R), 0.8, toy.system.distance)
    assert rep["p"] == 1.0


def test_independence_test_off_diagonal(builder):
    u = np.tile([0.9, 0.5], (3000, 1))
    R, R2, reg = extension_chain(builder, u, -u, 1, RngState(7))
    p = independence_on_Tm_test(R, R2, 1, 0.2, builder.system.distance, regimes=reg)
    assert p > 1e-3


def test_fit_decay_uses_leading_run_above_floor():
    lags = np.arange(1, 11)
    d = 2 * 0.5**lags
    floor = np.full(10, 2 * 0.5**6.5)
    gamma, C, r2, ci, span = fit_decay(lags, d, floor)
    assert gamma == pytest.approx(np.log(2)) and span == (1, 6)
    assert fit_decay(lags, d, np.full(10, 10.0)) is None


def test_mixing_rate_toy_and_identical_initials():
    toy = contracting_affine(0.5)
    rep = mixing_rate(toy.system, toy.noise, [[-1.0], [1.0]], None, 8, 20000, RngState(8))
    assert rep.gamma == pytest.approx(np.log(2), rel=0.15) and not rep.inconclusive
    for k, d, f in zip(rep.lags, rep.distance, rep.floor):
        assert d <= synchronous_coupling_bound(0.5, -1.0, 1.0, int(k)) + f
    same = mixing_rate(toy.system, toy.noise, [[0.0], [0.0]], None, 4, 2000, RngState(8))
    assert same.inconclusive and same.note == "floor-limited, no fit"


def test_mixing_rate_validates_inputs():
    toy = contracting_affine(0.5)
    with pytest.raises(ConfigurationError):
        mixing_rate(toy.system, toy.noise, [[0.0]], None, 4, 100, 0)
    with pytest.raises(ConfigurationError):
        mixing_rate(toy.system, toy.noise, [[0.0], [1.0]], None, 4, 4, 0)
