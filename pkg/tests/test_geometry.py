import numpy as np
import pytest
from numpy.testing import assert_allclose

from maxentplace.geometry import (
    RHO_MIN,
    DomainBox,
    NoiseModel,
    bearing,
    log_likelihood,
    simulate_measurement,
    wrap_angle,
)


def test_bearing_axis_cases():
    assert bearing([0.0, 0.0], [1.0, 0.0]) == 0.0
    assert_allclose(bearing([0.0, 0.0], [0.0, 1.0]), np.pi / 2, rtol=0, atol=1e-15)
    # hand evaluation of atan2(-1, -1)
    assert_allclose(bearing([1.0, 1.0], [0.0, 0.0]), -3 * np.pi / 4, rtol=0, atol=1e-15)


def test_wrap_angle_examples():
    assert wrap_angle(0.3) == 0.3
    assert_allclose(wrap_angle(3 * np.pi / 2), -np.pi / 2, atol=1e-12)
    assert_allclose(wrap_angle(-3 * np.pi / 2), np.pi / 2, atol=1e-12)


def test_wrap_angle_range_and_congruence():
    rng = np.random.default_rng(0)
    theta = np.concatenate([
        rng.uniform(-50, 50, 2000),
        np.array([np.pi, -np.pi, 3 * np.pi, -3 * np.pi, 0.0, -0.0]),
    ])
    wrapped = wrap_angle(theta)
    assert np.all(wrapped <= np.pi)
    assert np.all(wrapped > -np.pi)
    # result is congruent to the input mod 2 pi
    turns = (theta - wrapped) / (2 * np.pi)
    assert_allclose(turns, np.round(turns), atol=1e-9)


def test_wrap_angle_idempotent():
    rng = np.random.default_rng(1)
    theta = rng.uniform(-40, 40, 5000)
    once = wrap_angle(theta)
    assert np.array_equal(wrap_angle(once), once)


def test_wrap_angle_pi_convention():
    # exactly +pi stays +pi; -pi is never produced
    assert wrap_angle(np.pi) == np.pi
    assert wrap_angle(-np.pi) == np.pi


def test_bearing_antisymmetry():
    rng = np.random.default_rng(2)
    for _ in range(200):
        a = rng.uniform(0, 20, 2)
        b = rng.uniform(0, 20, 2)
        if np.hypot(*(a - b)) < RHO_MIN:
            continue
        assert_allclose(bearing(a, b), wrap_angle(bearing(b, a) + np.pi), atol=1e-12)


def test_bearing_translation_invariance():
    rng = np.random.default_rng(3)
    for _ in range(100):
        s = rng.uniform(0, 20, 2)
        t = rng.uniform(0, 20, 2)
        shift = rng.uniform(-100, 100, 2)
        assert_allclose(bearing(s + shift, t + shift), bearing(s, t), atol=1e-9)


def test_log_likelihood_examples():
    noise = NoiseModel(0.2)
    b = bearing([0.0, 0.0], [3.0, 4.0])
    assert log_likelihood([3.0, 4.0], b, [0.0, 0.0], noise) == 0.0
    # one-sigma deviation
    assert_allclose(
        log_likelihood([3.0, 4.0], wrap_angle(b + noise.sigma), [0.0, 0.0], noise),
        -0.5,
        atol=1e-12,
    )
    # dtheta = pi/2 with sigma = pi/4 gives -2
    assert_allclose(
        log_likelihood([1.0, 0.0], np.pi / 2, [0.0, 0.0], NoiseModel(np.pi / 4)),
        -2.0,
        atol=1e-12,
    )


def test_log_likelihood_peak_and_monotone():
    noise = NoiseModel(0.3)
    sensor = np.array([0.0, 0.0])
    particle = np.array([5.0, 1.0])
    b = bearing(sensor, particle)
    offsets = np.linspace(0.0, np.pi, 200)
    values = np.array(
        [log_likelihood(particle, wrap_angle(b + d), sensor, noise) for d in offsets]
    )
    assert values[0] == 0.0
    assert np.all(values <= 0.0)
    assert np.all(np.diff(values) < 0.0)


def test_simulate_measurement_zero_noise_limit():
    rng = np.random.default_rng(4)
    sensor = np.array([1.0, 2.0])
    target = np.array([7.0, 5.0])
    drawn = simulate_measurement(rng, target, sensor, NoiseModel(1e-300))
    assert drawn == bearing(sensor, target)


def test_simulate_measurement_moments():
    rng = np.random.default_rng(5)
    sensor = np.array([0.0, 0.0])
    target = np.array([5.0, 2.0])
    noise = NoiseModel(0.2)
    n = 10**5
    draws = np.array([simulate_measurement(rng, target, sensor, noise) for _ in range(n)])
    residuals = wrap_angle(draws - bearing(sensor, target))
    assert abs(residuals.mean()) < 5 * noise.sigma / np.sqrt(n)
    assert abs(residuals.std() - noise.sigma) < 0.03 * noise.sigma


def test_noise_model_validation():
    with pytest.raises(ValueError):
        NoiseModel(0.0)
    with pytest.raises(ValueError):
        NoiseModel(-0.1)


def test_domain_box():
    box = DomainBox(0.0, 20.0, -5.0, 5.0)
    assert box.width == 20.0 and box.height == 10.0
    assert_allclose(box.center, [10.0, 0.0])
    assert box.contains([[0.0, -5.0], [20.0, 5.0]])
    assert not box.contains([[21.0, 0.0]])
    rng = np.random.default_rng(6)
    pts = box.sample_uniform(rng, 500)
    assert pts.shape == (500, 2)
    assert box.contains(pts)
    with pytest.raises(ValueError):
        DomainBox(1.0, 1.0, 0.0, 2.0)
