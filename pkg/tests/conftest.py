import os
from importlib import resources

import pytest
import torch

from javagen.corpus import load_split
from javagen.tokenizer import train_vocab

torch.set_num_threads(1)

FIXTURE = str(resources.files("javagen.data").joinpath("concode_sample.jsonl"))


@pytest.fixture(scope="session")
def fixture_path():
    assert os.path.isfile(FIXTURE)
    return FIXTURE


@pytest.fixture(scope="session")
def samples(fixture_path):
    return load_split(fixture_path)


@pytest.fixture(scope="session")
def vocab(samples):
    return train_vocab([s.nl for s in samples] + [s.code for s in samples], 512)


@pytest.fixture(scope="session")
def codes(samples):
    return [s.code for s in samples]
