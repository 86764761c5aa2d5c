"""Offline optimization oracles.

Three routes compute the same objective so tests can cross-check them:

* ``opt_gh`` aggregates records into per-context tables and runs the scan
  backend (the production path).
* ``brute_force_opt_gh`` forms the full (group, hypothesis) objective matrix
  straight from the per-record definition with dense matrix products.
* ``query_objective`` evaluates the definition for one candidate pair.

``opt_h`` is an exact weighted empirical-risk minimizer. Both oracles break
ties canonically: smallest group index first, then smallest hypothesis index
(``opt_h``: smallest hypothesis index). Oracle invocations are counted per
calling scope so run protocols can assert their per-round oracle budgets.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from . import _backend
from .core import (
    Context,
    GroupHypothesisPair,
    Hypothesis,
    LossTable,
    ProblemInstance,
    current_access_scope,
    eval_hypothesis,
    group_access_scope,
    group_indicator,
)


@dataclass(frozen=True)
class RegretRecord:
    """One weighted comparison record: w * l~_x((g, h), (y_pred, y_true))."""

    x: int
    y_pred: int
    y_true: int
    weight: float = 1.0


@dataclass(frozen=True)
class CorrelationRecord:
    """One weighted agreement record: w * g(z) * h(z)."""

    z: int
    weight: float


@dataclass(frozen=True)
class LabeledExample:
    """One weighted example for empirical risk minimization."""

    x: int
    y: int
    weight: float = 1.0


class RegretArrays:
    """Columnar regret-record buffer with cheap append, for long histories."""

    __slots__ = ("_x", "_yp", "_yt", "_w", "_len")

    def __init__(self, capacity: int = 64) -> None:
        self._x = np.empty(capacity, dtype=np.int64)
        self._yp = np.empty(capacity, dtype=np.int64)
        self._yt = np.empty(capacity, dtype=np.int64)
        self._w = np.empty(capacity, dtype=np.float64)
        self._len = 0

    def __len__(self) -> int:
        return self._len

    def _grow(self) -> None:
        cap = max(64, 2 * self._x.shape[0])
        for name in ("_x", "_yp", "_yt", "_w"):
            old = getattr(self, name)
            new = np.empty(cap, dtype=old.dtype)
            new[: self._len] = old[: self._len]
            setattr(self, name, new)

    def append(self, x: int, y_pred_idx: int, y_true_idx: int, weight: float = 1.0) -> None:
        """Append one record; label arguments are action indices, not values."""
        if self._len == self._x.shape[0]:
            self._grow()
        i = self._len
        self._x[i] = x
        self._yp[i] = y_pred_idx
        self._yt[i] = y_true_idx
        self._w[i] = weight
        self._len = i + 1

    @classmethod
    def from_arrays(
        cls,
        x: np.ndarray,
        y_pred_idx: np.ndarray,
        y_true_idx: np.ndarray,
        weight: np.ndarray,
    ) -> "RegretArrays":
        """Adopt existing index arrays without copying."""
        n = x.shape[0]
        if not (y_pred_idx.shape[0] == y_true_idx.shape[0] == weight.shape[0] == n):
            raise ValueError("record arrays must have equal length")
        out = cls(capacity=0)
        out._x = np.ascontiguousarray(x, dtype=np.int64)
        out._yp = np.ascontiguousarray(y_pred_idx, dtype=np.int64)
        out._yt = np.ascontiguousarray(y_true_idx, dtype=np.int64)
        out._w = np.ascontiguousarray(weight, dtype=np.float64)
        out._len = n
        return out

    def views(self) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
        n = self._len
        return self._x[:n], self._yp[:n], self._yt[:n], self._w[:n]


@dataclass(frozen=True)
class OracleQuery:
    """Weighted records defining one joint-optimization objective.

    alpha is the approximation slack an oracle is allowed; the shipped
    implementations are exact, so they achieve alpha = 0 regardless, but the
    field travels with the query so plug-in approximate oracles have a
    contract to honor.
    """

    regret_records: Sequence[RegretRecord] | RegretArrays = ()
    correlation_records: Sequence[CorrelationRecord] = ()
    alpha: float = 0.0

    def __post_init__(self) -> None:
        if self.alpha < 0:
            raise ValueError(f"alpha must be >= 0, got {self.alpha}")


_CALL_COUNTS: dict[tuple[str, str], int] = {}


def _count_call(kind: str) -> None:
    key = (current_access_scope(), kind)
    _CALL_COUNTS[key] = _CALL_COUNTS.get(key, 0) + 1


def call_counts() -> dict[tuple[str, str], int]:
    """Snapshot of (scope, oracle kind) -> invocation count."""
    return dict(_CALL_COUNTS)


def reset_call_counts() -> None:
    _CALL_COUNTS.clear()


def count_oracle_calls(kind: str, scope: str = "learner") -> int:
    return _CALL_COUNTS.get((scope, kind), 0)


def regret_arrays(
    instance: ProblemInstance,
    records: Sequence[RegretRecord] | RegretArrays,
) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    """Normalize records to (x, y_pred_idx, y_true_idx, weight) arrays."""
    if isinstance(records, RegretArrays):
        return records.views()
    n = len(records)
    xa = np.empty(n, dtype=np.int64)
    ypa = np.empty(n, dtype=np.int64)
    yta = np.empty(n, dtype=np.int64)
    wa = np.empty(n, dtype=np.float64)
    for i, r in enumerate(records):
        xa[i] = r.x
        ypa[i] = instance.label_index(r.y_pred)
        yta[i] = instance.label_index(r.y_true)
        wa[i] = r.weight
    return xa, ypa, yta, wa


def base_table(
    instance: ProblemInstance,
    xa: np.ndarray,
    ypa: np.ndarray,
    yta: np.ndarray,
    wa: np.ndarray,
) -> np.ndarray:
    """Aggregate regret records into the (hypothesis, context) score table.

    base[h, x] = sum over records at x of w * (loss(y_pred, y_true)
    - loss(h(x), y_true)).
    """
    tabs = instance.tables()
    m = instance.universe_size
    loss = tabs.loss
    agg_pred = np.bincount(xa, weights=wa * loss[ypa, yta], minlength=m)
    n_actions = instance.action_count
    agg_hyp = np.empty((m, n_actions), dtype=np.float64)
    for a in range(n_actions):
        agg_hyp[:, a] = np.bincount(xa, weights=wa * loss[a, yta], minlength=m)
    gathered = agg_hyp[np.arange(m)[None, :], tabs.label_idx]
    return agg_pred[None, :] - gathered


def correlation_table(
    instance: ProblemInstance, records: Sequence[CorrelationRecord]
) -> np.ndarray:
    """Aggregate correlation records into per-context weight sums."""
    m = instance.universe_size
    if not records:
        return np.zeros(m, dtype=np.float64)
    za = np.fromiter((r.z for r in records), dtype=np.int64, count=len(records))
    cwa = np.fromiter((r.weight for r in records), dtype=np.float64, count=len(records))
    return np.bincount(za, weights=cwa, minlength=m)


def scan_structure(instance: ProblemInstance) -> tuple:
    """Group-structure arguments consumed by the scan backend."""
    tabs = instance.tables()
    return (
        tabs.interval_bounds,
        tabs.interval_gidx,
        tabs.set_indptr,
        tabs.set_indices,
        tabs.set_gidx,
        tabs.all_intervals_lex,
        instance.group_count,
    )


def opt_h(
    instance: ProblemInstance,
    examples: Sequence[LabeledExample],
    loss: LossTable | None = None,
) -> Hypothesis:
    """Exact weighted ERM over the hypothesis list.

    Returns the hypothesis minimizing sum_i w_i * loss(h(x_i), y_i); ties go
    to the smallest hypothesis index, and an empty example list returns the
    first hypothesis.
    """
    _count_call("opt_h")
    with group_access_scope("oracle"):
        tabs = instance.tables()
        if not examples:
            return instance.hypotheses[0]
        loss_arr = tabs.loss if loss is None else loss.as_array()
        n = len(examples)
        xa = np.empty(n, dtype=np.int64)
        ya = np.empty(n, dtype=np.int64)
        wa = np.empty(n, dtype=np.float64)
        for i, ex in enumerate(examples):
            xa[i] = ex.x
            ya[i] = instance.label_index(ex.y)
            wa[i] = ex.weight
        per_ex = loss_arr[tabs.label_idx[:, xa], ya[None, :]]
        risks = per_ex @ wa
        return instance.hypotheses[int(np.argmin(risks))]


def opt_gh(instance: ProblemInstance, query: OracleQuery) -> GroupHypothesisPair:
    """Exact joint maximizer of the weighted record objective.

    Maximizes sum over regret records of w * l~_x((g, h), (y_pred, y_true))
    plus sum over correlation records of w * g(z) * h(z), with the canonical
    tie rule (smallest group index, then smallest hypothesis index).
    """
    pair, _ = opt_gh_value(instance, query)
    return pair


def opt_gh_value(
    instance: ProblemInstance, query: OracleQuery
) -> tuple[GroupHypothesisPair, float]:
    """opt_gh plus the objective the maximizer achieves.

    Counts as one oracle call; the extra return is used by schedules and
    tests that need the optimum's value, not just its identity.
    """
    _count_call("opt_gh")
    with group_access_scope("oracle"):
        xa, ypa, yta, wa = regret_arrays(instance, query.regret_records)
        base = base_table(instance, xa, ypa, yta, wa)
        corr = correlation_table(instance, query.correlation_records)
        tabs = instance.tables()
        g_arr, h_arr, v_arr = _backend.scan_corr(
            base, tabs.label_val, corr[None, :], *scan_structure(instance)
        )
        return instance.pair(int(g_arr[0]), int(h_arr[0])), float(v_arr[0])


def brute_force_opt_gh(
    instance: ProblemInstance, query: OracleQuery
) -> tuple[GroupHypothesisPair, float]:
    """Reference maximizer built from the per-record definition.

    Forms the dense (group, hypothesis) objective matrix with one BLAS
    product per record block and takes the row-major argmax, which matches
    the canonical tie rule. Returns the pair and its objective value.
    """
    _count_call("brute_force_opt_gh")
    with group_access_scope("test-oracle"):
        tabs = instance.tables()
        member = tabs.member_matrix()
        n_h = len(instance.hypotheses)
        obj = np.zeros((instance.group_count, n_h), dtype=np.float64)
        xa, ypa, yta, wa = regret_arrays(instance, query.regret_records)
        if xa.shape[0]:
            loss = tabs.loss
            pred_loss = loss[ypa, yta]
            hyp_loss = loss[tabs.label_idx[:, xa], yta[None, :]]
            contrib = wa[None, :] * (pred_loss[None, :] - hyp_loss)
            obj += member[:, xa] @ contrib.T
        if query.correlation_records:
            za = np.array([r.z for r in query.correlation_records], dtype=np.int64)
            cwa = np.array(
                [r.weight for r in query.correlation_records], dtype=np.float64
            )
            contrib_c = cwa[None, :] * tabs.label_val[:, za]
            obj += member[:, za] @ contrib_c.T
        flat = int(np.argmax(obj))
        gi, hi = divmod(flat, n_h)
        return instance.pair(gi, hi), float(obj[gi, hi])


def query_objective(
    instance: ProblemInstance, query: OracleQuery, pair: GroupHypothesisPair
) -> float:
    """Objective value of one candidate pair, straight from the definition."""
    total = 0.0
    table = instance.loss.entries
    g = pair.group
    h = pair.hypothesis
    if isinstance(query.regret_records, RegretArrays):
        xa, ypa, yta, wa = query.regret_records.views()
        for i in range(xa.shape[0]):
            x = int(xa[i])
            if not group_indicator(g, x):
                continue
            ti = int(yta[i])
            hi = instance.label_index(eval_hypothesis(h, x))
            total += float(wa[i]) * (table[int(ypa[i])][ti] - table[hi][ti])
    else:
        for r in query.regret_records:
            if not group_indicator(g, r.x):
                continue
            ti = instance.label_index(r.y_true)
            total += r.weight * (
                table[instance.label_index(r.y_pred)][ti]
                - table[instance.label_index(eval_hypothesis(h, r.x))][ti]
            )
    for c in query.correlation_records:
        if group_indicator(g, c.z):
            total += c.weight * float(eval_hypothesis(h, c.z))
    return total


def history_query(
    records: Iterable[RegretRecord] | RegretArrays,
    correlation: Sequence[CorrelationRecord] = (),
) -> OracleQuery:
    """Convenience constructor for the common history-plus-noise query."""
    if isinstance(records, RegretArrays):
        return OracleQuery(regret_records=records, correlation_records=tuple(correlation))
    return OracleQuery(
        regret_records=tuple(records), correlation_records=tuple(correlation)
    )


def singleton_example(x: int | Context, y: int) -> list[LabeledExample]:
    """The one-example dataset used to probe realizable predictions."""
    idx = x.index if isinstance(x, Context) else int(x)
    return [LabeledExample(x=idx, y=y, weight=1.0)]
