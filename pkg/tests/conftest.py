import numpy as np
import pytest

from sailx.experiments import build_demo_corpus, make_task


@pytest.fixture(scope="session")
def task():
    return make_task()


@pytest.fixture(scope="session")
def demos20():
    return build_demo_corpus(n=20, seed=0)


@pytest.fixture(scope="session")
def demos50():
    return build_demo_corpus(n=50, seed=0)


@pytest.fixture()
def rng():
    return np.random.default_rng(12345)
