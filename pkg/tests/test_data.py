"""Tests für Datensatz-I/O, Vorverarbeitung, Standardisierung und Split."""

import json

import numpy as np
import pandas as pd
import pytest

from airwriting import data
from airwriting.exceptions import DatasetError

from tests.conftest import make_sample


def _dataset(rng, domain="inertia", per_class=10, classes=2, length=20):
    samples = [
        make_sample(rng, domain, length + (i % 5), label=i % classes, sample_id=f"{domain[0]}{i}")
        for i in range(per_class * classes)
    ]
    rate = samples[0].rate_hz
    return data.Dataset(samples, {k: f"k{k}" for k in range(classes)}, rate, domain)


def test_moving_average_constant():
    values = np.full((2, 9), 3.5)
    np.testing.assert_allclose(data.moving_average(values), values)


def test_moving_average_impulse_boundaries():
    """Randfenster der Breiten 3, 4, 5, 4, 3."""
    out = data.moving_average(np.array([[0.0, 0.0, 1.0, 0.0, 0.0]]))
    np.testing.assert_allclose(out[0], [1 / 3, 1 / 4, 1 / 5, 1 / 4, 1 / 3])


def test_moving_average_ramp_interior():
    ramp = np.arange(12, dtype=float)[None, :]
    out = data.moving_average(ramp)
    np.testing.assert_allclose(out[0, 2:-2], ramp[0, 2:-2])


def test_preprocess_inertial_keeps_length(rng):
    sample = make_sample(rng, "inertia", 30)
    assert data.preprocess_inertial(sample).values.shape == (6, 30)


def test_preprocess_wrong_domain(rng):
    with pytest.raises(DatasetError):
        data.preprocess_inertial(make_sample(rng, "trajectory", 20))
    with pytest.raises(DatasetError):
        data.preprocess_trajectory(make_sample(rng, "inertia", 20))


def test_preprocess_trajectory_origin():
    sample = data.Sample("t", "trajectory", 0, 200.0, np.array([[3.0, 4.0], [5.0, 6.0], [1.0, 1.0]]))
    out = data.preprocess_trajectory(sample)
    np.testing.assert_array_equal(out.values, [[0.0, 1.0], [0.0, 1.0], [0.0, 0.0]])
    np.testing.assert_array_equal(data.preprocess_trajectory(out).values, out.values)


def test_standardize_zero_mean_unit_std(rng):
    dataset, stats = data.standardize(_dataset(rng))
    stacked = np.concatenate([s.values for s in dataset.samples], axis=1)
    np.testing.assert_allclose(stacked.mean(axis=1), 0.0, atol=1e-6)
    np.testing.assert_allclose(stacked.std(axis=1), 1.0, atol=1e-6)


def test_standardize_constant_channel(rng):
    dataset = _dataset(rng)
    for s in dataset.samples:
        s.values[2] = 4.0
    standardized, stats = data.standardize(dataset)
    assert stats.std[2] == 1.0
    assert np.all(standardized.samples[0].values[2] == 0.0)


def test_standardize_inverse_restores_trajectory(rng):
    """Nullpunkt-Trajektorien überstehen Standardisierung und Rücktransformation."""
    dataset = data.preprocess_dataset(_dataset(rng, "trajectory"))
    standardized, stats = data.standardize(dataset)
    for original, scaled in zip(dataset.samples, standardized.samples):
        np.testing.assert_allclose(stats.inverse(scaled.values), original.values, atol=1e-6)


def test_channel_stats_dict_roundtrip(rng):
    _, stats = data.standardize(_dataset(rng))
    restored = data.ChannelStats.from_dict(json.loads(json.dumps(stats.to_dict())))
    np.testing.assert_array_equal(restored.mean, stats.mean)


def test_split_sizes_and_disjoint(rng):
    dataset = _dataset(rng, per_class=50)
    train, test = data.split(dataset, 0.8, seed=3)
    assert (len(train), len(test)) == (80, 20)
    assert not {s.id for s in train.samples} & {s.id for s in test.samples}
    for label in range(2):
        assert abs(int(np.sum(train.labels == label)) - 40) <= 1


def test_split_deterministic(rng):
    dataset = _dataset(rng, per_class=20)
    first = [s.id for s in data.split(dataset, seed=5)[1].samples]
    second = [s.id for s in data.split(dataset, seed=5)[1].samples]
    assert first == second


def test_split_rejects_singleton_class(rng):
    dataset = _dataset(rng, per_class=3)
    dataset.samples = [s for s in dataset.samples if s.label == 0] + dataset.samples[-1:]
    with pytest.raises(DatasetError):
        data.split(dataset)


def test_save_load_roundtrip(tmp_path, rng):
    """Speichern und Laden erhält jeden Wert bitgenau."""
    dataset = _dataset(rng)
    path = tmp_path / "inertia.jsonl"
    data.save_dataset(dataset, str(path))
    loaded = data.load_dataset(str(path), "inertia")
    assert [s.id for s in loaded.samples] == [s.id for s in dataset.samples]
    for a, b in zip(loaded.samples, dataset.samples):
        np.testing.assert_array_equal(a.values, b.values)
    assert loaded.class_map == dataset.class_map


def _write_lines(path, records):
    path.write_text("".join(json.dumps(r) + "\n" for r in records), encoding="utf-8")


def _record(sample_id, domain, channels, length=20, label=0):
    return {
        "id": sample_id, "domain": domain, "label": label, "class_name": "a",
        "rate_hz": 60.0, "data": [[0.1] * channels for _ in range(length)],
    }


def test_load_channel_mismatch(tmp_path):
    path = tmp_path / "bad.jsonl"
    _write_lines(path, [_record("x", "inertia", 3)])
    with pytest.raises(DatasetError, match="Kanäle"):
        data.load_dataset(str(path), "inertia")


def test_load_empty_file(tmp_path):
    path = tmp_path / "empty.jsonl"
    path.write_text("", encoding="utf-8")
    with pytest.raises(DatasetError):
        data.load_dataset(str(path), "inertia")


def test_load_reports_line_number(tmp_path):
    path = tmp_path / "broken.jsonl"
    path.write_text(json.dumps(_record("x", "inertia", 6)) + "\n{kaputt\n", encoding="utf-8")
    with pytest.raises(DatasetError, match=":2:"):
        data.load_dataset(str(path), "inertia")


def test_load_invalid_utf8_reports_line_number(tmp_path):
    """Ungültige Bytes werden als DatasetError mit Zeilennummer gemeldet."""
    path = tmp_path / "bytes.jsonl"
    good = (json.dumps(_record("x", "inertia", 6)) + "\n").encode("utf-8")
    path.write_bytes(good + good.replace(b'"x"', b'"\xff\xfe"'))
    with pytest.raises(DatasetError, match=":2:.*UTF-8"):
        data.load_dataset(str(path), "inertia")


def test_load_non_dense_labels(tmp_path):
    path = tmp_path / "labels.jsonl"
    records = [_record("x", "inertia", 6, label=0), _record("y", "inertia", 6, label=2)]
    records[1]["class_name"] = "c"
    _write_lines(path, records)
    with pytest.raises(DatasetError, match="dicht"):
        data.load_dataset(str(path), "inertia")


def test_load_missing_file(tmp_path):
    with pytest.raises(DatasetError):
        data.load_dataset(str(tmp_path / "fehlt.jsonl"), "trajectory")


def test_manifest_roundtrip(tmp_path):
    manifest = data.PairingManifest([("T1", "I1"), ("T2", "I2")])
    path = tmp_path / "pairs.json"
    data.save_manifest(manifest, str(path))
    loaded = data.load_manifest(str(path))
    assert loaded.pairs == manifest.pairs
    assert loaded.trajectory_for()["I2"] == "T2"


def test_check_class_maps(rng):
    first = _dataset(rng, "inertia")
    second = _dataset(rng, "trajectory")
    data.check_class_maps(first, second)
    second.class_map[1] = "anders"
    with pytest.raises(DatasetError):
        data.check_class_maps(first, second)


def test_import_csv_samples(tmp_path, rng):
    paths = []
    for name in ("b_01", "a_01", "a_02"):
        frame = pd.DataFrame(rng.normal(size=(20, 3)), columns=["x", "y", "z"])
        path = tmp_path / f"{name}.csv"
        frame.to_csv(path, index=False)
        paths.append(str(path))
    dataset = data.import_csv_samples(paths, "trajectory", 200.0)
    assert dataset.class_map == {0: "a", 1: "b"}
    assert sorted(s.label for s in dataset.samples) == [0, 0, 1]
    assert dataset.samples[0].values.shape == (3, 20)


def test_prepare_split_uses_train_statistics(rng):
    dataset = _dataset(rng, per_class=20)
    train, test, stats = data.prepare_split(dataset, seed=0)
    stacked = np.concatenate([s.values for s in train.samples], axis=1)
    np.testing.assert_allclose(stacked.mean(axis=1), 0.0, atol=1e-6)
    assert len(test) == 8
