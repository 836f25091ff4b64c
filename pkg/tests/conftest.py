import pytest

from hybridrag.providers import HashedBagOfWordsEmbedder


@pytest.fixture(scope="session")
def embedder():
    return HashedBagOfWordsEmbedder()


@pytest.fixture(scope="session")
def fixtures_dir():
    from pathlib import Path

    return Path(__file__).parent / "fixtures"
