import pytest

from matchlattice import Market, Matching
from matchlattice.cli import load_bundle


def bundle_market(name):
    b = load_bundle(name)
    m = Market.from_json(b["market"])
    named = {k: Matching.from_json(v) for k, v in b["matchings"].items()}
    for mu in named.values():
        mu.validate_for(m)
    return m, named


@pytest.fixture(scope="session")
def example1():
    return bundle_market("example1")


@pytest.fixture(scope="session")
def example2():
    return bundle_market("example2")
