"""Numeric oracles: finite-difference saltation, Monte Carlo covariance,
brute-force rollout costs, and the comparison helpers."""

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

import saltlib as sl


def _nonlinear_two_mode():
    f0 = sl.VectorFieldSpec(dim=2, f=lambda t, x: np.stack(
        [x[..., 1], -np.sin(x[..., 0])], axis=-1))
    f1 = sl.VectorFieldSpec(dim=2, f=lambda t, x: np.stack(
        [x[..., 1], -0.5 * np.sin(x[..., 0]) - 0.3 * x[..., 1]], axis=-1))
    guard = sl.linear_guard(np.array([1.0, 0.0]), offset=-0.2)
    reset = sl.affine_reset(np.array([[1.0, 0.0], [0.0, 0.8]]), np.array([0.1, 0.0]))
    tr = sl.TransitionSpec(from_mode=0, to_mode=1, guard=guard, reset=reset)
    return sl.HybridSystem(modes=(f0, f1), transitions=(tr,))


def _constant_flow():
    return sl.constant_flow_two_mode(np.array([1.0, -1.0]), np.array([1.0, 0.3]),
                                     np.array([0.0, 1.0]), 0.0)


def test_matrix_rel_err_scales_by_analytic_magnitude():
    analytic = np.array([[2.0, 0.0], [0.0, 2.0]])
    numeric = np.array([[2.1, 0.0], [0.0, 2.0]])
    assert sl.matrix_rel_err(numeric, analytic) == pytest.approx(0.05, abs=1e-15)
    small = np.array([[0.01, 0.0], [0.0, 0.01]])
    assert sl.matrix_rel_err(small + 0.001, small) == pytest.approx(0.001, abs=1e-15)


def test_compare_sets_pass_flag_and_serializes():
    analytic = np.eye(2)
    report = sl.compare("shift", analytic, analytic + 1e-3, rtol=1e-2)
    assert report.passed
    assert report.max_rel_err == pytest.approx(1e-3, rel=1e-10)
    tight = sl.compare("shift", analytic, analytic + 1e-3, rtol=1e-4)
    assert not tight.passed
    doc = report.to_dict()
    assert set(doc) == {"name", "analytic", "numeric", "max_rel_err", "pass"}
    assert doc["pass"] is True


@settings(max_examples=25, deadline=None)
@given(st.integers(min_value=0, max_value=2**32 - 1))
def test_compare_is_exact_on_identical_inputs(seed):
    rng = np.random.default_rng(seed)
    m = rng.normal(size=(3, 3))
    assert sl.matrix_rel_err(m, m) == 0.0
    assert sl.compare("same", m, m, rtol=0.0).passed


def test_numeric_saltation_matches_analytic_on_nonlinear_transition():
    sys_ = _nonlinear_two_mode()
    traj = sl.simulate(sys_, 0, np.array([1.0, 0.0]), (0.0, 3.0))
    ev = traj.events[0]
    analytic = sl.saltation_matrix(sys_, ev).xi
    numeric = sl.numeric_saltation(sys_, 0, ev.x_minus, ev.t_event, h=1e-6)
    assert sl.matrix_rel_err(numeric, analytic) <= 1e-4


def test_numeric_saltation_error_contracts_quadratically_in_h():
    sys_ = _nonlinear_two_mode()
    traj = sl.simulate(sys_, 0, np.array([1.0, 0.0]), (0.0, 3.0))
    ev = traj.events[0]
    analytic = sl.saltation_matrix(sys_, ev).xi
    errs = []
    for h in (2e-3, 1e-3, 5e-4):
        numeric = sl.numeric_saltation(sys_, 0, ev.x_minus, ev.t_event, h=h)
        errs.append(float(np.abs(numeric - analytic).max()))
    for big, small in zip(errs, errs[1:]):
        assert 3.2 <= big / small <= 4.8


def test_numeric_saltation_matches_restitution_closed_form():
    sys_ = sl.bouncing_ball(e=0.5)
    traj = sl.simulate(sys_, 0, np.array([1.0, 0.0]), (0.0, 0.6))
    ev = traj.events[0]
    analytic = sl.saltation_matrix(sys_, ev).xi
    numeric = sl.numeric_saltation(sys_, 0, ev.x_minus, ev.t_event)
    assert sl.matrix_rel_err(numeric, analytic) <= 1e-4


def test_numeric_saltation_rejects_wrong_state_size():
    sys_ = sl.bouncing_ball(e=0.5)
    with pytest.raises(ValueError):
        sl.numeric_saltation(sys_, 0, np.array([1.0, 0.0, 0.0]), 0.1)


def test_numeric_saltation_detects_perturbed_event_reordering():
    # two guards racing 1e-7 apart: a 1e-6 nudge flips which fires first
    zero = np.zeros((2, 2))
    race = sl.HybridSystem(
        modes=(sl.affine_field(zero, np.array([1.0, -1.0])),
               sl.affine_field(zero, np.array([0.5, 0.0])),
               sl.affine_field(zero, np.array([-0.5, 0.0]))),
        transitions=(
            sl.TransitionSpec(from_mode=0, to_mode=1,
                              guard=sl.linear_guard(np.array([-1.0, 0.0]), offset=1.0),
                              reset=sl.identity_reset(2)),
            sl.TransitionSpec(from_mode=0, to_mode=2,
                              guard=sl.linear_guard(np.array([0.0, 1.0]), offset=1e-7),
                              reset=sl.identity_reset(2)),
        ),
    )
    traj = sl.simulate(race, 0, np.array([0.0, 1.0]), (0.0, 1.5))
    ev = traj.events[0]
    assert ev.transition_index == 0
    with pytest.raises(sl.EventOrderChanged):
        sl.numeric_saltation(race, 0, ev.x_minus, ev.t_event)


def test_numeric_saltation_requires_an_event_near_the_anchor():
    sys_ = sl.bouncing_ball(e=0.5)
    with pytest.raises(sl.EventOrderChanged):
        sl.numeric_saltation(sys_, 0, np.array([1.0, 0.0]), 0.0)


def test_numeric_saltation_checks_expected_transition():
    sys_ = sl.bouncing_ball(e=0.5)
    traj = sl.simulate(sys_, 0, np.array([1.0, 0.0]), (0.0, 0.6))
    ev = traj.events[0]
    with pytest.raises(sl.EventOrderChanged):
        sl.numeric_saltation(sys_, 0, ev.x_minus, ev.t_event, expected_transition=3)


def test_monte_carlo_matches_linear_pushforward():
    sys_ = _constant_flow()
    opts = sl.SimOptions(step=5e-3)
    mean0 = np.array([0.0, 0.1])
    sigma0 = 1e-4 * np.eye(2)
    span = (0.0, 0.2)
    nominal = sl.simulate(sys_, 0, mean0, span, opts)
    xi = sl.saltation_matrix(sys_, nominal.events[0]).xi
    analytic = xi @ sigma0 @ xi.T
    sampled = sl.monte_carlo_covariance(sys_, 0, mean0, sigma0, span,
                                        n_samples=50_000, seed=0, options=opts)
    gap = np.linalg.norm(sampled - analytic) / np.linalg.norm(analytic)
    assert gap <= 0.05


def test_monte_carlo_is_reproducible_from_seed():
    sys_ = _constant_flow()
    opts = sl.SimOptions(step=5e-3)
    kw = dict(n_samples=5_000, seed=42, options=opts)
    a = sl.monte_carlo_covariance(sys_, 0, np.array([0.0, 0.1]), 1e-4 * np.eye(2),
                                  (0.0, 0.2), **kw)
    b = sl.monte_carlo_covariance(sys_, 0, np.array([0.0, 0.1]), 1e-4 * np.eye(2),
                                  (0.0, 0.2), **kw)
    np.testing.assert_array_equal(a, b)


def test_monte_carlo_loop_and_vectorized_paths_agree():
    sys_ = _constant_flow()
    opts = sl.SimOptions(step=5e-3)
    kw = dict(n_samples=200, seed=3, options=opts)
    vec = sl.monte_carlo_covariance(sys_, 0, np.array([0.0, 0.1]), 1e-4 * np.eye(2),
                                    (0.0, 0.2), **kw)
    loop = sl.monte_carlo_covariance(sys_, 0, np.array([0.0, 0.1]), 1e-4 * np.eye(2),
                                     (0.0, 0.2), vectorized=False, **kw)
    assert float(np.abs(vec - loop).max()) <= 2e-15


def test_monte_carlo_gap_shrinks_like_root_n():
    # mean Frobenius gap over independent seeds; 25x the samples should cut
    # the sampling error by ~5x, well under the 0.5 threshold
    sys_ = _constant_flow()
    opts = sl.SimOptions(step=5e-3)
    mean0 = np.array([0.0, 0.1])
    sigma0 = 1e-4 * np.eye(2)
    span = (0.0, 0.2)
    nominal = sl.simulate(sys_, 0, mean0, span, opts)
    xi = sl.saltation_matrix(sys_, nominal.events[0]).xi
    analytic = xi @ sigma0 @ xi.T
    gaps_small, gaps_big = [], []
    for seed in range(6):
        small = sl.monte_carlo_covariance(sys_, 0, mean0, sigma0, span,
                                          n_samples=2_000, seed=seed, options=opts)
        big = sl.monte_carlo_covariance(sys_, 0, mean0, sigma0, span,
                                        n_samples=50_000, seed=seed + 1000,
                                        options=opts)
        gaps_small.append(np.linalg.norm(small - analytic))
        gaps_big.append(np.linalg.norm(big - analytic))
    assert np.mean(gaps_big) <= 0.5 * np.mean(gaps_small)


def test_monte_carlo_flags_diverging_event_sequences():
    # nominal crossing sits 1e-3 before the horizon, so about half the
    # samples never cross: a single covariance summary would be meaningless
    sys_ = _constant_flow()
    opts = sl.SimOptions(step=5e-3)
    with pytest.raises(sl.SplitDistribution) as info:
        sl.monte_carlo_covariance(sys_, 0, np.array([0.0, 0.199]), 1e-4 * np.eye(2),
                                  (0.0, 0.2), n_samples=2_000, seed=0, options=opts)
    assert info.value.fraction > 0.01


def test_monte_carlo_zero_spread_gives_exactly_zero_covariance():
    sys_ = _constant_flow()
    opts = sl.SimOptions(step=5e-3)
    sigma = sl.monte_carlo_covariance(sys_, 0, np.array([0.0, 0.1]), np.zeros((2, 2)),
                                      (0.0, 0.2), n_samples=16, seed=0, options=opts)
    assert np.all(sigma == 0.0)


def _damped_reference():
    sys_ = sl.HybridSystem(
        modes=(sl.affine_field(np.array([[0.0, 1.0], [-1.0, -0.4]]), np.zeros(2)),),
        transitions=(),
    )
    ref = sl.simulate(sys_, 0, np.array([1.0, 0.0]), (0.0, 1.0))
    return sys_, ref


def test_brute_force_cost_is_zero_without_perturbation():
    sys_, ref = _damped_reference()
    cost = sl.brute_force_cost(sys_, ref, np.eye(2), np.array([[1.0]]),
                               np.array([[0.0], [1.0]]), np.eye(2),
                               perturbations=np.zeros((1, 2)))
    assert cost == 0.0


def test_brute_force_cost_is_linear_in_the_weights():
    sys_, ref = _damped_reference()
    rows = 1e-3 * np.array([[1.0, -0.5], [0.3, 0.8]])
    B = np.array([[0.0], [1.0]])
    V = np.array([[1.0]])
    c_q = sl.brute_force_cost(sys_, ref, np.eye(2), V, B, np.zeros((2, 2)),
                              perturbations=rows)
    c_2q = sl.brute_force_cost(sys_, ref, 2.0 * np.eye(2), V, B, np.zeros((2, 2)),
                               perturbations=rows)
    assert c_2q == 2.0 * c_q
    c_p = sl.brute_force_cost(sys_, ref, np.zeros((2, 2)), V, B, np.eye(2),
                              perturbations=rows)
    c_2p = sl.brute_force_cost(sys_, ref, np.zeros((2, 2)), V, B, 2.0 * np.eye(2),
                               perturbations=rows)
    assert c_2p == 2.0 * c_p
    assert c_q > 0.0 and c_p > 0.0


def test_brute_force_cost_default_draws_are_seeded():
    sys_, ref = _damped_reference()
    args = (sys_, ref, np.eye(2), np.array([[1.0]]), np.array([[0.0], [1.0]]),
            np.eye(2))
    a = sl.brute_force_cost(*args, n_rollouts=3, seed=11)
    b = sl.brute_force_cost(*args, n_rollouts=3, seed=11)
    c = sl.brute_force_cost(*args, n_rollouts=3, seed=12)
    assert a == b
    assert a != c
