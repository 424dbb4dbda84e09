import json

import numpy as np
import pytest

from core.noise import Alphabet, ConfusionModel, uniform_noise
from core.state_models import Document


@pytest.fixture
def write_jsonl(tmp_path):
    """Write (id, text) pairs as a JSONL corpus and return its path."""
    def _write(name, docs):
        path = tmp_path / name
        path.write_text("".join(json.dumps({"id": doc_id, "text": text}) + "\n" for doc_id, text in docs),
                        encoding="utf-8")
        return str(path)
    return _write


@pytest.fixture
def toy_docs():
    return [Document(id="d1", text="cat 42"), Document(id="d2", text="cat")]


@pytest.fixture
def ab_model():
    """Uniform noise with epsilon 0.2 over {a, b}."""
    return uniform_noise(Alphabet(("a", "b")), 0.2)


def identity_model(chars: str) -> ConfusionModel:
    alphabet = Alphabet(tuple(sorted(set(chars))))
    return ConfusionModel(alphabet, np.eye(len(alphabet)))


def random_model(rng: np.random.Generator, chars: str, diagonal_boost: float = 2.0) -> ConfusionModel:
    """Random row-stochastic substitution model leaning towards the identity."""
    size = len(chars)
    sub = rng.dirichlet(np.ones(size), size=size) + diagonal_boost * np.eye(size)
    sub /= sub.sum(axis=1, keepdims=True)
    return ConfusionModel(Alphabet(tuple(chars)), sub)
