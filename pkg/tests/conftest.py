import pathlib
import tempfile

import numpy as np
import pytest

from acrec.domain import Split
from acrec.embed import HashEmbedder
from acrec.model import ModelConfig
from acrec.pipeline import build_bank, run_ingest
from acrec.synthetic import SyntheticConfig, write_synthetic_corpus
from acrec.train import build_train_samples

# toy dims used by all full-model gradient checks
TOY_CONFIG = ModelConfig(
    d_raw=16, d_proj=4, d_rating=4, d_hidden=16, blocks=2, heads=4, m=4,
    dropout=0.2, fcn_hidden=(16, 8), use_cosine=False, d_ac=4,
)

SMALL_SYNTH = SyntheticConfig(
    n_users=8,
    n_books=140,
    steps_per_user=24,
    n_outside_reviewers=3,
    outside_reviews_each=10,
    vocab_size=400,
    seed=11,
)

SMALL_DIM = 64


@pytest.fixture(scope="session")
def small_corpus_dir():
    tmp = pathlib.Path(tempfile.mkdtemp(prefix="acrec-small-"))
    write_synthetic_corpus(SMALL_SYNTH, tmp)
    return tmp


@pytest.fixture(scope="session")
def small_prepared(small_corpus_dir):
    return run_ingest(
        small_corpus_dir / "books.jsonl",
        small_corpus_dir / "interactions.jsonl",
        per_band=100,
        seed=0,
    )


@pytest.fixture(scope="session")
def small_bank(small_prepared):
    return build_bank(small_prepared, HashEmbedder(dim=SMALL_DIM, seed=0))


@pytest.fixture(scope="session")
def small_model_config():
    return ModelConfig(d_raw=SMALL_DIM, m=30)


@pytest.fixture(scope="session")
def small_samples(small_prepared, small_bank):
    def by_split(split: Split, m: int = 30):
        return build_train_samples(
            small_bank, small_prepared.histories, small_prepared.steps_for(split), m
        )

    return {
        "train": by_split(Split.TRAIN),
        "validation": by_split(Split.VALIDATION),
        "test": by_split(Split.TEST),
    }


@pytest.fixture()
def rng():
    return np.random.default_rng(0)
