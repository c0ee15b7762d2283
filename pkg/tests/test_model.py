"""Tests für Encoder, Decoder, Übersetzung und Checkpoints."""

import joblib
import numpy as np
import pytest

from airwriting import model as model_lib
from airwriting.data import ChannelStats
from airwriting.exceptions import DatasetError, ShapeError
from airwriting.model import (
    classify_latent,
    decode,
    discriminate_latent,
    encode,
    encode_batch,
    feature_length,
    init_model,
    reconstruct,
    reconstruct_batch,
    translate,
    translate_samples,
)
from airwriting.training import pad_and_mask

from tests.conftest import make_sample


@pytest.mark.parametrize("length, expected", [(120, 15), (121, 16), (16, 2), (17, 3)])
def test_feature_length(length, expected):
    assert feature_length(length) == expected


def test_init_model_same_shapes_different_values():
    a, b = init_model(4, seed=0), init_model(4, seed=1)
    assert a.parameter_count() == b.parameter_count()
    assert [blk.shape for blk in a.all_blocks()] == [blk.shape for blk in b.all_blocks()]
    assert not np.array_equal(a.groups["cls"]["cls_w"].data, b.groups["cls"]["cls_w"].data)


def test_init_model_group_shapes(model):
    assert model.groups["enc_inertia"]["conv0_w"].shape == (32, 6, 7)
    assert model.groups["enc_trajectory"]["conv0_w"].shape == (32, 3, 7)
    assert model.groups["enc_inertia"]["gru_u"].shape == (192, 64)
    assert model.groups["dec_trajectory"]["deconv2_w"].shape == (32, 3, 4)
    assert model.groups["dec_inertia"]["smooth_w"].shape == (6, 6, 5)
    assert model.groups["cls"]["cls_w"].shape == (3, 64)
    assert model.groups["disc"]["out_w"].shape == (64, 128)


def test_init_model_rejects_single_class():
    with pytest.raises(ShapeError):
        init_model(1)


def test_encode_latent_dimension(model, rng):
    for domain, length in (("inertia", 16), ("trajectory", 133)):
        latent = encode(model, make_sample(rng, domain, length))
        assert latent.shape == (64,)
        assert np.all(np.isfinite(latent))


def test_encode_padding_invariance(model, rng):
    """Gleiche Probe, zwei Polsterlängen: identischer Latent-Vektor."""
    sample = make_sample(rng, "inertia", 21)
    alone = encode(model, sample)
    short = encode_batch(model, pad_and_mask([sample, make_sample(rng, "inertia", 30)])).data[0]
    long = encode_batch(model, pad_and_mask([sample, make_sample(rng, "inertia", 90)])).data[0]
    np.testing.assert_allclose(short, alone, atol=1e-6)
    np.testing.assert_allclose(long, alone, atol=1e-6)


def test_encode_distinct_samples_differ(model, rng):
    a = encode(model, make_sample(rng, "trajectory", 40))
    b = encode(model, make_sample(rng, "trajectory", 40))
    assert np.abs(a - b).max() > 1e-6


def test_encode_too_short(model, rng):
    sample = make_sample(rng, "inertia", 10)
    with pytest.raises(DatasetError):
        encode(model, sample)


def test_decode_length_and_determinism(model, rng):
    latent = rng.normal(size=64)
    out = decode(model, latent, "trajectory", 15)
    assert out.shape == (3, 120)
    np.testing.assert_array_equal(out, decode(model, latent, "trajectory", 15))
    assert np.all(np.isfinite(out))


def test_decode_rejects_zero_steps(model):
    with pytest.raises(ShapeError):
        decode(model, np.zeros(64), "inertia", 0)


@pytest.mark.parametrize("length, expected", [(120, 120), (121, 128)])
def test_reconstruct_length(model, rng, length, expected):
    out = reconstruct(model, make_sample(rng, "inertia", length))
    assert out.shape == (6, expected)


def test_reconstruct_batch_matches_single(model, rng):
    samples = [make_sample(rng, "trajectory", n) for n in (33, 48, 20)]
    batch = pad_and_mask(samples)
    recon = reconstruct_batch(model, batch).data
    assert recon.shape == batch.values.shape
    for i, sample in enumerate(samples):
        single = reconstruct(model, sample)
        np.testing.assert_allclose(recon[i, :, :sample.length], single[:, :sample.length], atol=1e-10)
        assert np.all(recon[i, :, batch.lengths[i] + 8:] == 0.0)


def test_translate_rate_scaled(model, rng):
    """L=120 bei 60 Hz → 200 Hz: L* = 400, t = 50."""
    out = translate(model, make_sample(rng, "inertia", 120), "rate-scaled", 200.0)
    assert out.values.shape == (3, 400)
    assert out.domain == "trajectory"
    assert out.rate_hz == 200.0


def test_translate_source_length(model, rng):
    out = translate(model, make_sample(rng, "inertia", 120), "source-length")
    assert out.values.shape == (3, 120)


def test_translate_trajectory_to_inertia(model, rng):
    sample = make_sample(rng, "trajectory", 181)
    out = translate(model, sample)
    assert out.values.shape[0] == 6
    assert abs(out.length - 181 * 60 / 200) <= 8


def test_translate_is_pure(model, rng):
    sample = make_sample(rng, "trajectory", 70)
    np.testing.assert_array_equal(translate(model, sample).values, translate(model, sample).values)


def test_translate_samples_matches_single(model, rng):
    samples = [make_sample(rng, "inertia", n, sample_id=f"s{n}") for n in (20, 45, 31)]
    batched = translate_samples(model, samples)
    for sample, out in zip(samples, batched):
        single = translate(model, sample)
        assert out.id == sample.id
        np.testing.assert_allclose(out.values, single.values, atol=1e-10)


def test_duration_steps_minimum():
    assert model_lib.duration_steps(16, 200.0, 60.0, "rate-scaled") == 1
    with pytest.raises(ValueError):
        model_lib.duration_steps(16, 200.0, 60.0, "doppelt")


@pytest.mark.parametrize("length, expected", [(20, 3), (36, 5), (44, 6), (19, 2)])
def test_duration_steps_rounds_half_up(length, expected):
    """20/8 = 2.5 ergibt 3, nicht die gerade Zahl 2."""
    assert model_lib.duration_steps(length, 60.0, 60.0, "source-length") == expected


def test_duration_steps_rate_scaled_half_up():
    # 5 · 60/200 = 1.5 → 2, dann 2/8 → 1
    assert model_lib.duration_steps(5, 200.0, 60.0) == 1
    # 50 · 60/200 = 15 → 15/8 = 1.875 → 2
    assert model_lib.duration_steps(50, 200.0, 60.0) == 2


def test_classify_latent_probabilities(model, rng):
    probs = classify_latent(model, rng.normal(size=(5, 64)))
    np.testing.assert_allclose(probs.sum(axis=1), 1.0, atol=1e-6)
    model.groups["cls"]["cls_w"].data[:] = 0.0
    model.groups["cls"]["cls_b"].data[:] = 0.0
    np.testing.assert_allclose(classify_latent(model, rng.normal(size=64)), 1.0 / 3.0)


def test_discriminate_latent_zero_weights(model, rng):
    for block in model.groups["disc"].values():
        block.data[:] = 0.0
    scores = discriminate_latent(model, rng.normal(size=64))
    assert scores.shape == (64,)
    np.testing.assert_array_equal(scores, 0.0)


def test_discriminate_latent_deterministic(model, rng):
    latent = rng.normal(size=(2, 64))
    first = discriminate_latent(model, latent)
    assert first.shape == (2, 64)
    np.testing.assert_array_equal(first, discriminate_latent(model, latent))


def _stats():
    return {
        "inertia": ChannelStats(np.zeros(6), np.ones(6)),
        "trajectory": ChannelStats(np.arange(3.0), np.full(3, 2.0)),
    }


def test_checkpoint_roundtrip(tmp_path, model, rng):
    """Gespeichert und geladen: identische Übersetzungen."""
    path = tmp_path / "ckpt.joblib"
    model_lib.save_checkpoint(str(path), model, _stats(), {0: "a", 1: "b", 2: "c"}, {"seed": 0})
    loaded = model_lib.load_checkpoint(str(path))
    sample = make_sample(rng, "inertia", 50)
    np.testing.assert_allclose(translate(loaded.params, sample).values,
                               translate(model, sample).values, atol=1e-12)
    assert loaded.class_map == {0: "a", 1: "b", 2: "c"}
    np.testing.assert_array_equal(loaded.stats["trajectory"].mean, [0.0, 1.0, 2.0])
    assert loaded.train_config == {"seed": 0}


def test_checkpoint_bytes_deterministic(tmp_path):
    paths = [tmp_path / "a.joblib", tmp_path / "b.joblib"]
    for path in paths:
        model_lib.save_checkpoint(str(path), init_model(3, seed=5), _stats(),
                                  {0: "a", 1: "b", 2: "c"})
    assert paths[0].read_bytes() == paths[1].read_bytes()


def test_load_checkpoint_rejects_foreign_file(tmp_path):
    path = tmp_path / "x.joblib"
    joblib.dump({"format": "etwas anderes"}, str(path))
    with pytest.raises(DatasetError):
        model_lib.load_checkpoint(str(path))


def test_checkpoint_keeps_adam_slots(tmp_path, model):
    """Die Momente jedes Optimierer-Slots überstehen Speichern und Laden."""
    from airwriting.numerics.optim import Adam

    block = model.groups["cls"]["cls_b"]
    block.grad = np.linspace(-1.0, 1.0, block.data.size)
    Adam(slot="cls").step([block])
    path = tmp_path / "ckpt.joblib"
    model_lib.save_checkpoint(str(path), model, _stats(), {0: "a", 1: "b", 2: "c"})
    loaded = model_lib.load_checkpoint(str(path)).params.groups["cls"]["cls_b"]
    assert sorted(loaded.moments) == ["cls"]
    np.testing.assert_array_equal(loaded.moments["cls"].m, block.moments["cls"].m)
    np.testing.assert_array_equal(loaded.moments["cls"].v, block.moments["cls"].v)
    assert loaded.moments["cls"].t == 1
