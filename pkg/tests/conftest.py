import numpy as np
import pytest

from logistic_chain import ChainParams, Variant


@pytest.fixture
def params_small() -> ChainParams:
    return ChainParams(b=2.0, mu=1.0, gamma=1.0, L=50)


@pytest.fixture
def params_tiny() -> ChainParams:
    return ChainParams(b=2.0, mu=1.0, gamma=1.0, L=10)


# (b, mu, gamma) triples used across the oracle-equality tests; the middle
# one makes (b-mu)*L/gamma non-integral for L not divisible by 2.
RATE_TRIPLES = [(2.0, 1.0, 1.0), (1.5, 0.5, 2.0), (3.0, 1.0, 0.5)]


def make_params(b, mu, gamma, L, variant=Variant.MODIFIED) -> ChainParams:
    return ChainParams(b=b, mu=mu, gamma=gamma, L=L, variant=variant)


def assert_log_close(actual, expected, rel, msg=""):
    __tracebackhide__ = True
    err = abs(actual - expected) / max(1.0, abs(expected))
    assert err < rel, f"{msg} log values differ: {actual} vs {expected} (rel {err:.3g} >= {rel})"


@pytest.fixture(autouse=True)
def _seed_guard():
    """Tests must not depend on global numpy RNG state; scramble it."""
    np.random.seed(None)
    yield
