from __future__ import annotations

import pytest

from tokenmark import corpus
from tokenmark.embedder import EmbedConfig
from tokenmark.vocab import Vocabulary


@pytest.fixture(scope="session")
def demo_vocab() -> Vocabulary:
    return corpus.build_demo_vocab()


@pytest.fixture(scope="session")
def small_vocab() -> Vocabulary:
    return Vocabulary(["a", "b", "ab", "\n", "cd", "ef", "gh", "ij"])


@pytest.fixture()
def default_config() -> EmbedConfig:
    return EmbedConfig(max_new_tokens=400, x=24, seed=987654321)
