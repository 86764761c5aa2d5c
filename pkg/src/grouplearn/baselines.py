"""Reference learners: follow-the-leader and the online batch wrapper.

These baselines ignore group structure while predicting. Follow-the-leader
retrains an exact empirical risk minimizer on the full history each round.
The online batch wrapper runs any pluggable batch multi-group learner in the
same retrain-every-round loop; the shipped plug-ins are an ERM adapter
(which reproduces follow-the-leader exactly) and a constant stub.
"""

from __future__ import annotations

from typing import Callable, Sequence

from .core import Context, ProblemInstance, RoundRecord, eval_hypothesis
from .oracles import LabeledExample, opt_h

Predictor = Callable[["Context | int"], int]


class BatchMultiGroupLearner:
    """Pluggable batch learner interface for the online wrapper.

    fit consumes a labeled sample list and returns a total predictor over the
    universe. risk_profile carries the learner's claimed per-group
    excess-risk guarantees as inert metadata for reports; nothing in the
    wrapper interprets it. retrain_count is maintained by the wrapper.
    """

    name = "abstract"

    def __init__(self, risk_profile: dict | None = None) -> None:
        self.risk_profile = dict(risk_profile or {})
        self.retrain_count = 0

    def fit(
        self, instance: ProblemInstance, samples: Sequence[LabeledExample]
    ) -> Predictor:
        raise NotImplementedError


class ErmBatchLearner(BatchMultiGroupLearner):
    """Exact weighted empirical risk minimization over the hypothesis list.

    Under the online wrapper this reproduces follow-the-leader exactly,
    including the empty-sample fallback to the first hypothesis.
    """

    name = "erm"

    def fit(
        self, instance: ProblemInstance, samples: Sequence[LabeledExample]
    ) -> Predictor:
        h = opt_h(instance, samples)
        return lambda x: eval_hypothesis(h, x)


class ConstantBatchLearner(BatchMultiGroupLearner):
    """Stub that predicts one fixed label everywhere."""

    name = "constant"

    def __init__(self, label: int = 1, risk_profile: dict | None = None) -> None:
        super().__init__(risk_profile)
        self.label = label

    def fit(
        self, instance: ProblemInstance, samples: Sequence[LabeledExample]
    ) -> Predictor:
        del samples
        if self.label not in instance.action_values:
            raise ValueError(f"label {self.label} is not a valid action")
        return lambda x: self.label


def history_samples(history: Sequence[RoundRecord]) -> list[LabeledExample]:
    """Weight-1 (context, true label) samples from past rounds."""
    return [LabeledExample(x=rec.x.index, y=rec.y, weight=1.0) for rec in history]


def ftl_predict(
    instance: ProblemInstance, history: Sequence[RoundRecord], x: Context
) -> int:
    """Label of the exact empirical risk minimizer on the full history.

    Costs one opt_h call; an empty history falls back to the first
    hypothesis through the oracle's own empty-dataset rule.
    """
    h = opt_h(instance, history_samples(history))
    return eval_hypothesis(h, x)


def online_batch_wrapper(
    instance: ProblemInstance,
    learner: BatchMultiGroupLearner,
    history: Sequence[RoundRecord],
    x: Context,
) -> int:
    """Retrain the batch learner on rounds so far and predict at x.

    One fit per call (so one per round when driven by the harness); the
    label of the current round is never visible here because only completed
    rounds appear in history.
    """
    predictor = learner.fit(instance, history_samples(history))
    learner.retrain_count += 1
    return predictor(x)
