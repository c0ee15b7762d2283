"""Tests für den synthetischen Generator und das kinematische Orakel."""

import numpy as np
import pytest

from airwriting import data
from airwriting.exceptions import DatasetError
from airwriting.synth import SynthConfig, kinematic_oracle, resample, synth_generate

DT = 1.0 / 60.0


def _trajectory(values):
    return data.Sample("t", "trajectory", 0, 60.0, np.asarray(values, dtype=float))


def _circle(radius=1.0, omega=np.pi, length=120):
    t = np.arange(length) * DT
    return np.stack([radius * np.cos(omega * t), radius * np.sin(omega * t), np.zeros(length)])


def test_resample_identity(rng):
    values = rng.normal(size=(3, 40))
    np.testing.assert_allclose(resample(values, 40), values, atol=1e-12)


@pytest.mark.parametrize("target", [2, 17, 64, 300])
def test_resample_linear_ramp(target):
    ramp = np.stack([np.linspace(0, 1, 25), np.linspace(5, -5, 25)])
    out = resample(ramp, target)
    np.testing.assert_allclose(out[0], np.linspace(0, 1, target), atol=1e-12)
    np.testing.assert_allclose(out[1], np.linspace(5, -5, target), atol=1e-12)


def test_resample_roundtrip_bounded_by_variation(rng):
    values = np.cumsum(rng.normal(size=(2, 100)), axis=1)
    back = resample(resample(values, 60), 100)
    variation = np.abs(np.diff(values, axis=1)).sum(axis=1)
    assert np.all(np.abs(back - values).max(axis=1) <= variation / 100 * 10)


def test_resample_too_short():
    with pytest.raises(DatasetError):
        resample(np.zeros((3, 1)), 10)


def test_oracle_constant_velocity_line():
    """Gleichförmige Bewegung ergibt keine Beschleunigung."""
    t = np.arange(50)
    line = np.stack([0.02 * t, -0.01 * t, 0.005 * t])
    out = kinematic_oracle(_trajectory(line), DT)
    assert out.values.shape == (6, 50)
    np.testing.assert_allclose(out.values[:3], 0.0, atol=1e-8)


def test_oracle_circle_acceleration_and_turn_rate():
    """Kreis: |a| ≈ rω², gz ≈ ω."""
    radius, omega = 0.5, np.pi
    out = kinematic_oracle(_trajectory(_circle(radius, omega)), DT)
    magnitude = np.linalg.norm(out.values[:3], axis=0)
    np.testing.assert_allclose(magnitude, radius * omega ** 2, rtol=1e-3)
    np.testing.assert_allclose(out.values[5, 2:-2], omega, rtol=1e-6)
    np.testing.assert_array_equal(out.values[3:5], 0.0)


def test_oracle_superposition_on_acceleration(rng):
    """Ohne Rauschen ist die Beschleunigung linear in der Trajektorie."""
    a = rng.normal(size=(3, 40))
    b = rng.normal(size=(3, 40))
    out_a = kinematic_oracle(_trajectory(a), DT).values[:3]
    out_b = kinematic_oracle(_trajectory(b), DT).values[:3]
    out_sum = kinematic_oracle(_trajectory(2.0 * a - b), DT).values[:3]
    np.testing.assert_allclose(out_sum, 2.0 * out_a - out_b, atol=1e-10 * np.abs(out_sum).max())


def test_oracle_stationary_heading():
    """Stillstand übernimmt die letzte Bewegungsrichtung."""
    still = np.zeros((3, 30))
    out = kinematic_oracle(_trajectory(still), DT)
    assert np.all(np.isfinite(out.values))
    np.testing.assert_array_equal(out.values[5], 0.0)


def test_oracle_resamples_to_target_length():
    out = kinematic_oracle(_trajectory(_circle(length=200)), DT, target_len=60)
    assert out.values.shape == (6, 60)
    assert out.domain == "inertia"


def test_oracle_rejects_short_input():
    with pytest.raises(DatasetError):
        kinematic_oracle(_trajectory(np.zeros((3, 2))), DT)


def test_synth_generate_structure(tiny_data):
    trajectories, inertials, manifest = tiny_data
    assert len(trajectories) == len(inertials) == 30
    assert sorted(manifest.pairs) == sorted(
        (t.id, i.id) for t, i in zip(trajectories.samples, inertials.samples)
    )
    assert len({t for t, _ in manifest.pairs}) == 30
    assert np.bincount(trajectories.labels).tolist() == [10, 10, 10]
    trajectories.validate()
    inertials.validate()
    assert all(s.length >= 16 for s in inertials.samples)
    assert inertials.rate_hz == 60.0 and trajectories.rate_hz == 200.0


def test_synth_lengths_follow_rate_ratio(tiny_data):
    trajectories, inertials, _ = tiny_data
    for t, i in zip(trajectories.samples, inertials.samples):
        assert i.length == round(t.length * 60.0 / 200.0)


def test_synth_deterministic():
    cfg = dict(class_count=2, samples_per_class=3, min_length=54, max_length=60, seed=11)
    first = synth_generate(SynthConfig(**cfg))
    second = synth_generate(SynthConfig(**cfg))
    for a, b in zip(first[1].samples, second[1].samples):
        np.testing.assert_array_equal(a.values, b.values)


def test_synth_same_class_shares_shape():
    """Proben einer Klasse korrelieren nach Umtasten stark."""
    trajectories, _, _ = synth_generate(
        SynthConfig(class_count=2, samples_per_class=4, noise_std=0.0, seed=3)
    )
    shapes = [
        resample(s.values[:2] - s.values[:2].mean(axis=1, keepdims=True), 64).ravel()
        for s in trajectories.samples if s.label == 0
    ]
    assert np.corrcoef(shapes[0], shapes[1])[0, 1] > 0.7


def test_synth_minority_class():
    cfg = SynthConfig(class_count=3, samples_per_class=20, minority_class=1, seed=0)
    trajectories, _, _ = synth_generate(cfg)
    assert np.bincount(trajectories.labels).tolist() == [20, 2, 20]


def test_synth_length_bound_raised():
    cfg = SynthConfig(min_length=16)
    low, _ = cfg.trajectory_length_range
    assert round(low * cfg.rate_ratio) >= 16


def test_synth_config_validation():
    with pytest.raises(DatasetError):
        SynthConfig(class_count=1).validate()
    with pytest.raises(DatasetError):
        SynthConfig(min_length=8).validate()
