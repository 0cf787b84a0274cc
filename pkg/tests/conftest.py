"""Shared fixtures: small synthetic datasets, reusable across test modules."""

import numpy as np
import pytest

import realbogus.preprocess as preprocess
import realbogus.synth as synth


@pytest.fixture(scope="session")
def small_dataset():
    """60 synthetic DIA-sets, half real, seed 5."""
    return synth.generate_dataset(60, 0.5, synth.SceneConfig(seed=5), seed=5)


@pytest.fixture(scope="session")
def small_triplets(small_dataset):
    return [preprocess.preprocess_dia_set(s, "dia") for s in small_dataset]


@pytest.fixture(scope="session")
def small_pairs(small_dataset):
    return [preprocess.preprocess_dia_set(s, "nodia") for s in small_dataset]


@pytest.fixture()
def rng():
    return np.random.default_rng(1234)
