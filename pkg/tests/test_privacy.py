"""Clipping, noising, subsampling, and the RDP accountant."""

import numpy as np
import pytest

from privforge.privacy import (
    DEFAULT_ORDERS,
    DpConfig,
    EmptyBatch,
    NonFiniteGradient,
    RdpCurve,
    SigmaZero,
    Unreachable,
    calibrate_sigma,
    clip_gradient,
    compute_epsilon,
    dp_sgd_step,
    noisy_aggregate,
    poisson_sample,
    rdp_subsampled_gaussian,
    rdp_to_eps,
)


# --- clipping ---


def test_clip_shrinks_to_norm():
    g = np.array([3.0, 4.0])  # norm 5
    clipped = clip_gradient(g, 1.0)
    assert np.linalg.norm(clipped) == pytest.approx(1.0, abs=1e-12)
    assert np.allclose(clipped, [0.6, 0.8])


def test_clip_within_norm_is_same_object():
    g = np.array([0.3, 0.4])  # norm 0.5
    assert clip_gradient(g, 1.0) is g


def test_clip_boundary():
    g = np.array([1.0, 0.0])
    assert clip_gradient(g, 1.0) is g


def test_clip_rejects_non_finite():
    with pytest.raises(NonFiniteGradient):
        clip_gradient(np.array([np.nan, 1.0]), 1.0)
    with pytest.raises(NonFiniteGradient):
        clip_gradient(np.array([np.inf, 1.0]), 1.0)


# --- subsampling ---


def test_poisson_sample_deterministic():
    a = poisson_sample(100, 0.3, np.random.default_rng(4))
    b = poisson_sample(100, 0.3, np.random.default_rng(4))
    assert np.array_equal(a, b)


def test_poisson_sample_rate():
    rng = np.random.default_rng(5)
    total = sum(len(poisson_sample(1000, 0.25, rng)) for _ in range(200))
    assert total / (1000 * 200) == pytest.approx(0.25, abs=0.01)


def test_poisson_sample_q_one_takes_everything():
    idx = poisson_sample(50, 1.0, np.random.default_rng(0))
    assert sorted(idx.tolist()) == list(range(50))


# --- aggregation and the step ---


def test_noisy_aggregate_sigma_zero_is_mean():
    grads = [np.array([1.0, 0.0]), np.array([0.0, 1.0])]
    out = noisy_aggregate(grads, clip_norm=1.0, sigma=0.0, rng=np.random.default_rng(0))
    assert np.allclose(out, [0.5, 0.5])


def test_noisy_aggregate_rejects_empty():
    with pytest.raises(EmptyBatch):
        noisy_aggregate([], clip_norm=1.0, sigma=1.0, rng=np.random.default_rng(0))


def test_noisy_aggregate_noise_scale():
    """With zero gradients the output is exactly the N(0, (sigma C)^2) draw / n."""
    dim = 4
    grads = [np.zeros(dim), np.zeros(dim)]
    out = noisy_aggregate(grads, clip_norm=2.0, sigma=3.0, rng=np.random.default_rng(9))
    expected = np.random.default_rng(9).normal(0.0, 3.0 * 2.0, size=dim) / 2
    assert np.allclose(out, expected)


def test_dp_sgd_step_empty_batch_is_pure_noise():
    """Divisor 1, one Gaussian draw, applied to the parameters."""
    params = np.array([1.0, 2.0, 3.0])
    cfg = DpConfig(clip_norm=2.0, noise_scale=0.5)
    out = dp_sgd_step(params, [], cfg, lr=0.1, rng=np.random.default_rng(3))
    expected = params - 0.1 * np.random.default_rng(3).normal(
        0.0, 0.5 * 2.0, size=params.shape
    )
    assert np.allclose(out, expected)


def test_dp_sgd_step_sigma_zero():
    params = np.array([1.0, 1.0, 1.0])
    grads = [np.array([0.2, 0.0, 0.0]), np.array([0.0, 0.2, 0.0])]
    cfg = DpConfig(clip_norm=1.0, noise_scale=0.0)
    out = dp_sgd_step(params, grads, cfg, lr=1.0, rng=np.random.default_rng(0))
    assert np.allclose(out, params - np.array([0.1, 0.1, 0.0]))


def test_dp_sgd_step_clips_before_averaging():
    params = np.zeros(2)
    grads = [np.array([30.0, 40.0])]  # norm 50, clipped to norm 1
    cfg = DpConfig(clip_norm=1.0, noise_scale=0.0)
    out = dp_sgd_step(params, grads, cfg, lr=1.0, rng=np.random.default_rng(0))
    assert np.linalg.norm(out) == pytest.approx(1.0, abs=1e-12)


# --- the accountant ---


def test_rdp_q_one_closed_form():
    """At q=1 the subsampled mechanism is the plain Gaussian: alpha/(2 sigma^2)."""
    for sigma in (0.5, 1.0, 2.0):
        curve = rdp_subsampled_gaussian(1.0, sigma, steps=1)
        for alpha, value in zip(curve.orders, curve.rdp_values):
            assert value == pytest.approx(alpha / (2 * sigma**2), rel=1e-9)


def test_rdp_linear_in_steps():
    one = rdp_subsampled_gaussian(0.1, 1.2, steps=1)
    ten = rdp_subsampled_gaussian(0.1, 1.2, steps=10)
    assert np.allclose(np.array(ten.rdp_values), 10 * np.array(one.rdp_values))


def test_rdp_monotone_in_q():
    lo = rdp_subsampled_gaussian(0.01, 1.0, steps=1)
    hi = rdp_subsampled_gaussian(0.2, 1.0, steps=1)
    assert all(a <= b + 1e-12 for a, b in zip(lo.rdp_values, hi.rdp_values))


def test_default_orders():
    assert DEFAULT_ORDERS == tuple(range(2, 257))


def test_published_mnist_anchor():
    """Classic conversion reproduces the widely published value for
    (N=60000, batch 256, sigma=1.1, 60 epochs, delta=1e-5): epsilon ~ 3.0."""
    report = compute_epsilon(256 / 60000, 1.1, int(60 * 60000 / 256), 1e-5)
    assert report.epsilon == pytest.approx(3.0091, abs=0.01)


def test_improved_conversion_is_tighter():
    for q, sigma, steps in ((0.01, 1.0, 1000), (0.1, 2.0, 500)):
        classic = compute_epsilon(q, sigma, steps, 1e-5, conversion="classic")
        improved = compute_epsilon(q, sigma, steps, 1e-5, conversion="improved")
        assert improved.epsilon <= classic.epsilon + 1e-9


def test_epsilon_monotone_in_sigma():
    eps = [
        compute_epsilon(0.05, sigma, 500, 1e-5).epsilon for sigma in (0.8, 1.2, 2.0)
    ]
    assert eps[0] > eps[1] > eps[2]


def test_compute_epsilon_rejects_sigma_zero():
    with pytest.raises(SigmaZero):
        compute_epsilon(0.1, 0.0, 100, 1e-5)


def test_rdp_to_eps_picks_best_order():
    curve = rdp_subsampled_gaussian(0.02, 1.0, 2000)
    report = rdp_to_eps(curve, 1e-5)
    all_eps = [
        rdp + np.log(1 / 1e-5) / (alpha - 1)
        for alpha, rdp in zip(curve.orders, curve.rdp_values)
    ]
    assert report.epsilon == pytest.approx(min(all_eps), rel=1e-12)
    assert report.best_order == curve.orders[int(np.argmin(all_eps))]


def test_calibrate_round_trip():
    q, steps, delta, target = 0.1, 100, 1e-5, 4.0
    sigma = calibrate_sigma(q, steps, delta, target)
    achieved = compute_epsilon(q, sigma, steps, delta).epsilon
    assert achieved == pytest.approx(target, abs=5e-3)


def test_calibrate_known_desk_value():
    sigma = calibrate_sigma(0.1, 100, 1e-5, 4.0)
    assert sigma == pytest.approx(1.6301, abs=2e-3)


def test_calibrate_unreachable():
    with pytest.raises(Unreachable):
        calibrate_sigma(0.5, 100000, 1e-5, 1e-4)


def test_config_validation():
    with pytest.raises(ValueError):
        DpConfig(sampling_rate=0.0)
    with pytest.raises(ValueError):
        DpConfig(sampling_rate=1.5)
    with pytest.raises(ValueError):
        DpConfig(delta=0.0)
    with pytest.raises(ValueError):
        DpConfig(noise_scale=-1.0)
    with pytest.raises(ValueError):
        DpConfig(max_steps=-1)


def test_curve_validation():
    with pytest.raises(ValueError):
        RdpCurve(orders=(2, 3), rdp_values=(0.1,))
