"""Exact oracle behavior: ERM, joint maximization, counters, and the reference route."""

import numpy as np
import pytest

from grouplearn import (
    CorrelationRecord,
    Group,
    Hypothesis,
    LabeledExample,
    OracleQuery,
    RegretRecord,
    brute_force_opt_gh,
    count_oracle_calls,
    group_access_scope,
    opt_gh,
    opt_h,
    query_objective,
    table_instance,
    threshold_interval_instance,
)
from grouplearn.oracles import RegretArrays, history_query, opt_gh_value, singleton_example


def test_opt_h_singleton_realizability(inst4):
    h = opt_h(inst4, singleton_example(2, 1))
    assert h in inst4.hypotheses
    # both-polarity thresholds realize +1 at every context
    from grouplearn.core import eval_hypothesis

    assert eval_hypothesis(h, 2) == 1


def test_opt_h_empty_returns_first_hypothesis(inst4):
    assert opt_h(inst4, []) == inst4.hypotheses[0]


def test_opt_h_hand_example(inst4):
    examples = [
        LabeledExample(x=0, y=-1),
        LabeledExample(x=1, y=-1),
        LabeledExample(x=2, y=1),
        LabeledExample(x=3, y=1),
    ]
    best = opt_h(inst4, examples)
    assert best == Hypothesis(kind="threshold", theta=2, polarity=1)
    assert inst4.hypotheses.index(best) == 2


def test_opt_gh_zero_weights_tie_break(inst4):
    query = OracleQuery(
        regret_records=(RegretRecord(x=1, y_pred=1, y_true=-1, weight=0.0),)
    )
    pair = opt_gh(inst4, query)
    assert (pair.group_index, pair.hypothesis_index) == (0, 0)


def test_opt_gh_single_record_value_one(inst4):
    query = OracleQuery(
        regret_records=(RegretRecord(x=1, y_pred=1, y_true=-1, weight=1.0),)
    )
    pair, value = opt_gh_value(inst4, query)
    assert value == 1.0
    from grouplearn.core import eval_hypothesis, group_indicator

    assert group_indicator(pair.group, 1) == 1
    assert eval_hypothesis(pair.hypothesis, 1) == -1  # disagrees with y_pred


def test_opt_gh_dominant_correlation_record(inst4):
    query = OracleQuery(
        regret_records=(RegretRecord(x=0, y_pred=1, y_true=-1, weight=0.1),),
        correlation_records=(CorrelationRecord(z=2, weight=5.0),),
    )
    pair = opt_gh(inst4, query)
    from grouplearn.core import eval_hypothesis, group_indicator

    assert group_indicator(pair.group, 2) * eval_hypothesis(pair.hypothesis, 2) == 1


def test_opt_gh_two_by_two_hand_argmax():
    inst = table_instance(
        universe_size=2,
        action_count=2,
        hypothesis_tables=[(1, -1), (-1, 1)],
        groups=[
            Group(kind="interval", lo=0, hi=1),
            Group(kind="interval", lo=0, hi=0),
        ],
    )
    query = OracleQuery(
        regret_records=(RegretRecord(x=0, y_pred=1, y_true=-1, weight=2.0),),
        correlation_records=(CorrelationRecord(z=1, weight=0.5),),
    )
    pair, value = opt_gh_value(inst, query)
    assert (pair.group_index, pair.hypothesis_index) == (0, 1)
    assert value == 2.5


def test_opt_gh_matches_brute_force_and_definition(inst8):
    rng = np.random.default_rng(11)
    for _ in range(60):
        n_r = int(rng.integers(0, 8))
        n_c = int(rng.integers(0, 6))
        records = tuple(
            RegretRecord(
                x=int(rng.integers(8)),
                y_pred=int(rng.choice([1, -1])),
                y_true=int(rng.choice([1, -1])),
                weight=float(rng.uniform(-2, 2)),
            )
            for _ in range(n_r)
        )
        corr = tuple(
            CorrelationRecord(z=int(rng.integers(8)), weight=float(rng.uniform(-2, 2)))
            for _ in range(n_c)
        )
        query = OracleQuery(regret_records=records, correlation_records=corr)
        pair, value = opt_gh_value(inst8, query)
        ref_pair, ref_value = brute_force_opt_gh(inst8, query)
        assert abs(value - ref_value) < 1e-12
        assert (pair.group_index, pair.hypothesis_index) == (
            ref_pair.group_index,
            ref_pair.hypothesis_index,
        )
        assert abs(query_objective(inst8, query, pair) - value) < 1e-12


def test_returned_pair_dominates_every_other_pair(inst4):
    rng = np.random.default_rng(3)
    records = tuple(
        RegretRecord(
            x=int(rng.integers(4)),
            y_pred=int(rng.choice([1, -1])),
            y_true=int(rng.choice([1, -1])),
            weight=float(rng.uniform(-1, 1)),
        )
        for _ in range(5)
    )
    query = history_query(records)
    pair, value = opt_gh_value(inst4, query)
    with group_access_scope("test-oracle"):
        n_h = len(inst4.hypotheses)
        for gi in range(inst4.group_count):
            for hi in range(n_h):
                other = inst4.pair(gi, hi)
                assert query_objective(inst4, query, other) <= value + 1e-12


def test_regret_arrays_append_and_views(inst4):
    arrs = RegretArrays(capacity=1)
    arrs.append(0, 0, 1, 1.0)
    arrs.append(3, 1, 1, 0.5)
    arrs.append(2, 0, 0, -1.0)  # growth beyond initial capacity
    assert len(arrs) == 3
    xa, ypa, yta, wa = arrs.views()
    assert xa.tolist() == [0, 3, 2]
    assert ypa.tolist() == [0, 1, 0]
    assert yta.tolist() == [1, 1, 0]
    assert wa.tolist() == [1.0, 0.5, -1.0]


def test_regret_arrays_query_matches_record_query(inst4):
    records = (
        RegretRecord(x=0, y_pred=1, y_true=-1, weight=1.0),
        RegretRecord(x=2, y_pred=-1, y_true=-1, weight=2.0),
    )
    arrs = RegretArrays()
    for r in records:
        arrs.append(r.x, inst4.label_index(r.y_pred), inst4.label_index(r.y_true), r.weight)
    p1, v1 = opt_gh_value(inst4, OracleQuery(regret_records=records))
    p2, v2 = opt_gh_value(inst4, OracleQuery(regret_records=arrs))
    assert (p1.group_index, p1.hypothesis_index) == (p2.group_index, p2.hypothesis_index)
    assert v1 == v2


def test_call_counters_key_on_scope_and_kind(inst4):
    assert count_oracle_calls("opt_gh") == 0
    opt_gh(inst4, OracleQuery())
    opt_h(inst4, [])
    assert count_oracle_calls("opt_gh") == 1
    assert count_oracle_calls("opt_h") == 1
    with group_access_scope("evaluation"):
        opt_gh(inst4, OracleQuery())
    assert count_oracle_calls("opt_gh") == 1
    assert count_oracle_calls("opt_gh", scope="evaluation") == 1
    brute_force_opt_gh(inst4, OracleQuery())
    assert count_oracle_calls("brute_force_opt_gh") == 1


def test_negative_alpha_rejected():
    with pytest.raises(ValueError):
        OracleQuery(alpha=-0.1)


def test_oracle_calls_do_not_enumerate_in_learner_scope():
    inst = threshold_interval_instance(8)
    opt_gh(inst, OracleQuery(regret_records=(RegretRecord(x=1, y_pred=1, y_true=-1),)))
    opt_h(inst, singleton_example(0, 1))
    assert inst.group_access_counts.get("learner", 0) == 0
    assert inst.group_access_counts.get("oracle", 0) >= 1
