"""Shared fixtures: small instances and trace builders."""

import pytest

from grouplearn import RoundRecord, threshold_interval_instance
from grouplearn.oracles import reset_call_counts


@pytest.fixture(autouse=True)
def _fresh_call_counters():
    reset_call_counts()
    yield
    reset_call_counts()


@pytest.fixture
def inst4():
    """m=4 thresholds-and-intervals family: |H| = 10, |G| = 10."""
    return threshold_interval_instance(4)


@pytest.fixture
def inst8():
    return threshold_interval_instance(8)


def make_trace(instance, triples):
    """RoundRecords from (context index, y_hat, y) triples, t = 1, 2, ..."""
    return [
        RoundRecord(
            t=t,
            x=instance.context(x),
            y_hat=y_hat,
            y=y,
            bernoulli_p=1.0,
            lp_value=float("nan"),
        )
        for t, (x, y_hat, y) in enumerate(triples, start=1)
    ]


@pytest.fixture
def trace3(inst4):
    """Shared 3-round hand trace: learner right at x=0, wrong at x=1 and x=2."""
    return make_trace(inst4, [(0, 1, 1), (1, 1, -1), (2, -1, 1)])
