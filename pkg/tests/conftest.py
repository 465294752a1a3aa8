import os
import sys

import pytest
from hypothesis import HealthCheck, settings

sys.path.insert(0, os.path.dirname(__file__))

settings.register_profile("default", deadline=None, max_examples=100,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")


@pytest.fixture(scope="session")
def corpus():
    from skypesiem.synth import synthetic_corpus
    return synthetic_corpus(1292, seed=0)


@pytest.fixture(scope="session")
def trained(corpus):
    """(train split, test split, models) on the synthetic corpus."""
    from skypesiem.classifiers import train_all
    from skypesiem.learnkit import stratified_split
    train, test = stratified_split(corpus, 2 / 3, seed=0)
    return train, test, train_all(train)


def pytest_terminal_summary(terminalreporter):
    results = getattr(sys.modules.get("test_acceptance"), "RESULTS", None)
    if results:
        terminalreporter.section("acceptance criteria")
        for line in results:
            terminalreporter.write_line(line)
