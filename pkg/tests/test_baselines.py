"""Follow-the-leader and the online batch wrapper."""

import numpy as np
import pytest

from grouplearn import (
    ConstantBatchLearner,
    ErmBatchLearner,
    count_oracle_calls,
    eval_hypothesis,
    ftl_predict,
    history_samples,
    online_batch_wrapper,
)
from grouplearn.oracles import LabeledExample

from conftest import make_trace


def test_empty_history_falls_back_to_first_hypothesis(inst4):
    # First hypothesis is the constant +1 threshold.
    for x in range(4):
        assert ftl_predict(inst4, [], inst4.context(x)) == 1


def test_perfect_fit_recovers_unique_concept(inst8):
    concept = inst8.hypotheses[3]  # +1 iff x >= 3
    hist = make_trace(
        inst8, [(x, 1, eval_hypothesis(concept, x)) for x in range(8)]
    )
    for x in range(8):
        assert ftl_predict(inst8, hist, inst8.context(x)) == eval_hypothesis(
            concept, x
        )


def test_hand_trace_tie_break(inst4):
    # Risks over the 10 threshold hypotheses have exactly two minimizers
    # (indices 1 and 3); the oracle returns the smaller, which predicts +1
    # at x=2 while the runner-up predicts -1 there.
    hist = make_trace(inst4, [(0, 1, -1), (3, 1, 1), (1, 1, 1), (2, 1, -1)])
    assert ftl_predict(inst4, hist, inst4.context(2)) == 1
    assert ftl_predict(inst4, hist, inst4.context(0)) == -1


def test_ftl_costs_one_erm_call(inst4, trace3):
    ftl_predict(inst4, trace3, inst4.context(0))
    assert count_oracle_calls("opt_h") == 1
    assert count_oracle_calls("opt_gh") == 0


def test_history_samples_fields(inst4, trace3):
    samples = history_samples(trace3)
    assert [s.x for s in samples] == [0, 1, 2]
    assert [s.y for s in samples] == [1, -1, 1]
    assert all(s.weight == 1.0 for s in samples)
    assert all(isinstance(s, LabeledExample) for s in samples)


def test_erm_wrapper_reproduces_ftl(inst8):
    rng = np.random.default_rng(13)
    hist = make_trace(
        inst8,
        [
            (int(rng.integers(0, 8)), 1, int(rng.choice([1, -1])))
            for _ in range(40)
        ],
    )
    learner = ErmBatchLearner()
    for t in range(len(hist) + 1):
        prefix = hist[:t]
        x = inst8.context(t % 8)
        assert online_batch_wrapper(inst8, learner, prefix, x) == ftl_predict(
            inst8, prefix, x
        )


def test_wrapper_counts_retrains(inst4, trace3):
    learner = ErmBatchLearner()
    for t in range(len(trace3) + 1):
        online_batch_wrapper(inst4, learner, trace3[:t], inst4.context(0))
    assert learner.retrain_count == 4


def test_constant_learner(inst4, trace3):
    plus = ConstantBatchLearner(label=1)
    minus = ConstantBatchLearner(label=-1)
    assert online_batch_wrapper(inst4, plus, trace3, inst4.context(2)) == 1
    assert online_batch_wrapper(inst4, minus, trace3, inst4.context(2)) == -1
    assert count_oracle_calls("opt_h") == 0  # stub never touches the oracle
    bad = ConstantBatchLearner(label=3)
    with pytest.raises(ValueError):
        online_batch_wrapper(inst4, bad, trace3, inst4.context(0))


def test_risk_profile_is_inert_metadata(inst4, trace3):
    profile = {"per-group-excess-risk": 0.05}
    learner = ErmBatchLearner(risk_profile=profile)
    assert learner.risk_profile == profile
    before = dict(learner.risk_profile)
    online_batch_wrapper(inst4, learner, trace3, inst4.context(1))
    assert learner.risk_profile == before
    assert learner.name == "erm"
    assert ConstantBatchLearner().name == "constant"
