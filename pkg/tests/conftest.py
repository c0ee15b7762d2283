"""Gemeinsame Fixtures: Zufallsquelle, kleine synthetische Datensätze, frisches Modell."""

import numpy as np
import pytest

from airwriting import data
from airwriting.model import init_model
from airwriting.synth import SynthConfig, synth_generate


TINY_SYNTH = dict(class_count=3, samples_per_class=10, min_length=54, max_length=72)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture(scope="session")
def tiny_data():
    """(trajectory, inertia, manifest) mit 3 Klassen à 10 Proben."""
    return synth_generate(SynthConfig(seed=7, **TINY_SYNTH))


@pytest.fixture(scope="session")
def tiny_prepared(tiny_data):
    """Vorverarbeitet und standardisiert, ohne Split: (inertia, trajectory)."""
    trajectories, inertials, _ = tiny_data
    dataset_i, _ = data.standardize(data.preprocess_dataset(inertials))
    dataset_t, _ = data.standardize(data.preprocess_dataset(trajectories))
    return dataset_i, dataset_t


@pytest.fixture
def model():
    return init_model(class_count=3, seed=0)


def make_sample(rng, domain="inertia", length=32, label=0, sample_id="s0"):
    channels = 6 if domain == "inertia" else 3
    rate = 60.0 if domain == "inertia" else 200.0
    return data.Sample(sample_id, domain, label, rate, rng.normal(size=(channels, length)))


@pytest.fixture(scope="session")
def tiny_splits(tiny_data):
    """80/20-Split beider Domänen, vorverarbeitet und standardisiert."""
    from airwriting.evaluation import EvalSplits

    trajectories, inertials, _ = tiny_data
    train_i, test_i, _ = data.prepare_split(inertials, seed=0)
    train_t, test_t, _ = data.prepare_split(trajectories, seed=0)
    return EvalSplits(train_i, test_i, train_t, test_t)


def snapshot(blocks):
    return [block.data.copy() for block in blocks]
