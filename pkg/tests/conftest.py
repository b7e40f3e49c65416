import numpy as np
import pytest

from vsm_probe.collection import ExperimentSet, ResponseVector
from vsm_probe.protocol import ExperimentConfig, identity_grid
from vsm_probe.questionnaire import Locale


def make_set(rows, label="synthetic", model="synthetic", shuffle=False):
    """ExperimentSet from 54 raw 24-d rows given in identity-grid order."""
    rows = np.asarray(rows, dtype=float)
    assert rows.shape == (54, 24)
    config = ExperimentConfig(model_name=model, prompt_locale=Locale.ENGLISH, shuffle=shuffle, label=label)
    vectors = [
        ResponseVector(identity=ident, scores=tuple(float(x) for x in row), seed_count=10)
        for ident, row in zip(identity_grid(), rows)
    ]
    return ExperimentSet(config=config, vectors=vectors, recognizability_rate=1.0)


def random_rows(rng, low=1.0, high=5.0):
    rows = rng.uniform(low, high, size=(54, 24))
    rows[:, [14, 17]] = 3.0
    return rows


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)
