"""Problem primitives: contexts, hypotheses, groups, losses, instances, round records.

Everything here is immutable and side-effect free. A ``ProblemInstance`` bundles
a finite context universe ``{0..m-1}``, a finite hypothesis class, a finite
collection of context groups, and a bounded loss table. The group list is
deliberately guarded: learner code must reach groups only through oracle
calls, and the guard counter (`group_access_counts`) proves it after a run.
"""

from __future__ import annotations

import contextlib
import contextvars
import json
from dataclasses import dataclass
from typing import Iterable, Iterator, Sequence

import numpy as np

__all__ = [
    "Context",
    "Hypothesis",
    "Group",
    "LossTable",
    "ProblemInstance",
    "GroupHypothesisPair",
    "RoundRecord",
    "eval_hypothesis",
    "group_indicator",
    "instant_group_regret",
    "group_access_scope",
    "current_access_scope",
    "instance_to_dict",
    "instance_from_dict",
    "save_instance",
    "load_instance",
]


# ---------------------------------------------------------------------------
# Group-list access guard.
#
# Scope labels tag who is reading the group list. Anything not wrapped in a
# scope counts as "learner", which is the bucket that must stay at zero during
# a run. Oracles, the evaluation ledger, diagnostics, and serialization each
# declare themselves.
# ---------------------------------------------------------------------------

_ACCESS_SCOPE: contextvars.ContextVar[str] = contextvars.ContextVar(
    "grouplearn_group_access_scope", default="learner"
)


@contextlib.contextmanager
def group_access_scope(label: str) -> Iterator[None]:
    """Tag group-list reads inside the block with `label` (e.g. "oracle")."""
    token = _ACCESS_SCOPE.set(label)
    try:
        yield
    finally:
        _ACCESS_SCOPE.reset(token)


def current_access_scope() -> str:
    return _ACCESS_SCOPE.get()


# ---------------------------------------------------------------------------
# Value types
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Context:
    """One element of the finite universe. `embedding` is index/m in [0, 1)."""

    index: int
    embedding: float

    def __post_init__(self) -> None:
        if self.index < 0:
            raise ValueError(f"context index must be >= 0, got {self.index}")


def _context_index(x: "Context | int") -> int:
    return x.index if isinstance(x, Context) else int(x)


@dataclass(frozen=True)
class Hypothesis:
    """A predictor over the universe.

    kind="threshold": binary, predicts `polarity` when index >= theta and
    -polarity below (theta may equal m, giving the constant -polarity).
    kind="table": arbitrary lookup table of label values, one per context.
    """

    kind: str
    theta: int | None = None
    polarity: int | None = None
    table: tuple[int, ...] | None = None

    def __post_init__(self) -> None:
        if self.kind == "threshold":
            if self.theta is None or self.polarity is None:
                raise ValueError("threshold hypothesis needs theta and polarity")
            if self.polarity not in (-1, 1):
                raise ValueError(f"polarity must be +1 or -1, got {self.polarity}")
            if self.table is not None:
                raise ValueError("threshold hypothesis must not carry a table")
        elif self.kind == "table":
            if not self.table:
                raise ValueError("table hypothesis needs a nonempty label table")
            if self.theta is not None or self.polarity is not None:
                raise ValueError("table hypothesis must not carry theta/polarity")
        else:
            raise ValueError(f"unknown hypothesis kind {self.kind!r}")


@dataclass(frozen=True)
class Group:
    """A subset of the universe: an inclusive index interval or an explicit set."""

    kind: str
    lo: int | None = None
    hi: int | None = None
    members: frozenset[int] | None = None

    def __post_init__(self) -> None:
        if self.kind == "interval":
            if self.lo is None or self.hi is None:
                raise ValueError("interval group needs lo and hi")
            if not (0 <= self.lo <= self.hi):
                raise ValueError(f"bad interval [{self.lo}, {self.hi}]")
            if self.members is not None:
                raise ValueError("interval group must not carry members")
        elif self.kind == "set":
            if not self.members:
                raise ValueError("set group needs nonempty members")
            if any(i < 0 for i in self.members):
                raise ValueError("set group members must be >= 0")
            if self.lo is not None or self.hi is not None:
                raise ValueError("set group must not carry lo/hi")
        else:
            raise ValueError(f"unknown group kind {self.kind!r}")


@dataclass(frozen=True)
class LossTable:
    """Square loss table, entries[pred_index][true_index] in [0, 1]."""

    entries: tuple[tuple[float, ...], ...]
    preset: str | None = None

    def __post_init__(self) -> None:
        k = len(self.entries)
        if k == 0:
            raise ValueError("loss table must be nonempty")
        for row in self.entries:
            if len(row) != k:
                raise ValueError("loss table must be square")
            for v in row:
                if not (0.0 <= float(v) <= 1.0) or not np.isfinite(v):
                    raise ValueError(f"loss entries must lie in [0, 1], got {v}")

    @classmethod
    def zero_one(cls, action_count: int) -> "LossTable":
        rows = tuple(
            tuple(0.0 if p == t else 1.0 for t in range(action_count))
            for p in range(action_count)
        )
        return cls(entries=rows, preset="zero_one")

    @property
    def action_count(self) -> int:
        return len(self.entries)

    def as_array(self) -> np.ndarray:
        return np.asarray(self.entries, dtype=np.float64)


@dataclass(frozen=True)
class GroupHypothesisPair:
    """One element of the group x hypothesis grid, with its enumeration indices."""

    group_index: int
    hypothesis_index: int
    group: Group
    hypothesis: Hypothesis


@dataclass(frozen=True)
class RoundRecord:
    """What one protocol round leaves behind.

    bernoulli_p is the mixing weight the action player put on the first
    action (+1 in binary mode); lp_value is that round's game value lambda_t.
    Deterministic baselines record a degenerate p and lp_value = nan.
    """

    t: int
    x: Context
    y_hat: int
    y: int
    bernoulli_p: float
    lp_value: float


# ---------------------------------------------------------------------------
# Problem instance
# ---------------------------------------------------------------------------


def _default_action_values(action_count: int) -> tuple[int, ...]:
    # Binary mode keeps the (+1, -1) order so action index 0 means "predict +1".
    if action_count == 2:
        return (1, -1)
    return tuple(range(action_count))


class ProblemInstance:
    """Finite universe + hypothesis class + group collection + loss.

    The enumeration order of `hypotheses` and `groups` is part of the contract:
    it is the canonical tie-break order used by every argmax/argmin in the
    package. Instances are immutable after construction.
    """

    def __init__(
        self,
        universe_size: int,
        action_count: int,
        hypotheses: Sequence[Hypothesis],
        groups: Sequence[Group],
        loss: LossTable,
        vc_hint: int | None = None,
    ) -> None:
        if universe_size < 1:
            raise ValueError("universe_size must be >= 1")
        if action_count < 2:
            raise ValueError("action_count must be >= 2")
        if loss.action_count != action_count:
            raise ValueError(
                f"loss table is {loss.action_count}x{loss.action_count}, "
                f"instance has {action_count} actions"
            )
        if not hypotheses:
            raise ValueError("hypothesis class must be nonempty")
        if not groups:
            raise ValueError("group collection must be nonempty")
        if vc_hint is not None and vc_hint < 1:
            raise ValueError("vc_hint must be >= 1 when given")

        self.universe_size = int(universe_size)
        self.action_count = int(action_count)
        self.action_values = _default_action_values(action_count)
        self._value_to_index = {v: i for i, v in enumerate(self.action_values)}
        self.hypotheses: tuple[Hypothesis, ...] = tuple(hypotheses)
        self._group_list: tuple[Group, ...] = tuple(groups)
        self.loss = loss
        self.vc_hint = vc_hint
        self.group_access_counts: dict[str, int] = {}
        self._tables: "_InstanceTables | None" = None

        m = self.universe_size
        for h in self.hypotheses:
            if h.kind == "threshold":
                if action_count != 2:
                    raise ValueError("threshold hypotheses are binary-only")
                if not (0 <= h.theta <= m):
                    raise ValueError(f"theta must lie in [0, {m}], got {h.theta}")
            else:
                if len(h.table) != m:
                    raise ValueError(
                        f"table hypothesis has {len(h.table)} entries, universe is {m}"
                    )
                for v in h.table:
                    if v not in self._value_to_index:
                        raise ValueError(f"table label {v} is not an action value")
        covers_all = False
        for g in self._group_list:
            if g.kind == "interval":
                if g.hi >= m:
                    raise ValueError(f"interval [{g.lo}, {g.hi}] exceeds universe {m}")
                covers_all = covers_all or (g.lo == 0 and g.hi == m - 1)
            else:
                if max(g.members) >= m:
                    raise ValueError("set group member out of range")
                covers_all = covers_all or (len(g.members) == m)
        if not covers_all:
            raise ValueError("the group collection must contain the all-of-X group")

    # -- guarded group list -------------------------------------------------

    @property
    def groups(self) -> tuple[Group, ...]:
        """The group list. Every read is counted against the active scope."""
        scope = _ACCESS_SCOPE.get()
        self.group_access_counts[scope] = self.group_access_counts.get(scope, 0) + 1
        return self._group_list

    @property
    def group_count(self) -> int:
        # Size is not structure: knowing |G| does not let a learner enumerate.
        return len(self._group_list)

    # -- conveniences --------------------------------------------------------

    def context(self, index: int) -> Context:
        if not (0 <= index < self.universe_size):
            raise ValueError(f"context index {index} outside universe")
        return Context(index=index, embedding=index / self.universe_size)

    def label_index(self, value: int) -> int:
        try:
            return self._value_to_index[value]
        except KeyError:
            raise ValueError(f"{value} is not an action value of this instance") from None

    def pair(self, group_index: int, hypothesis_index: int) -> GroupHypothesisPair:
        # Single-element lookup by an index the oracle already returned is not
        # enumeration, so it does not touch the guarded property.
        return GroupHypothesisPair(
            group_index=group_index,
            hypothesis_index=hypothesis_index,
            group=self._group_list[group_index],
            hypothesis=self.hypotheses[hypothesis_index],
        )

    def pair_order_key(self, pair: GroupHypothesisPair) -> int:
        """Canonical enumeration index of a pair: group-major, hypothesis-minor."""
        return pair.group_index * len(self.hypotheses) + pair.hypothesis_index

    def tables(self) -> "_InstanceTables":
        """Precomputed dense views used by oracles and evaluators (cached)."""
        if self._tables is None:
            self._tables = _InstanceTables(self, self.groups)
        return self._tables


# ---------------------------------------------------------------------------
# Dense cached views (hypothesis label tables, group structure, loss array)
# ---------------------------------------------------------------------------


class _InstanceTables:
    def __init__(self, inst: ProblemInstance, group_list: tuple[Group, ...]) -> None:
        m = inst.universe_size
        n_h = len(inst.hypotheses)
        xs = np.arange(m)
        label_idx = np.empty((n_h, m), dtype=np.int64)
        label_val = np.empty((n_h, m), dtype=np.float64)
        for j, h in enumerate(inst.hypotheses):
            if h.kind == "threshold":
                vals = np.where(xs >= h.theta, h.polarity, -h.polarity)
            else:
                vals = np.asarray(h.table, dtype=np.int64)
            label_val[j] = vals
            label_idx[j] = [inst.label_index(int(v)) for v in vals]
        self.label_idx = label_idx
        self.label_val = label_val
        self.loss = inst.loss.as_array()
        self.action_values = np.asarray(inst.action_values, dtype=np.float64)

        iv_bounds: list[tuple[int, int]] = []
        iv_gidx: list[int] = []
        set_rows: list[np.ndarray] = []
        set_gidx: list[int] = []
        for gi, g in enumerate(group_list):
            if g.kind == "interval":
                iv_bounds.append((g.lo, g.hi))
                iv_gidx.append(gi)
            else:
                set_rows.append(np.fromiter(sorted(g.members), dtype=np.int64))
                set_gidx.append(gi)
        self.interval_bounds = np.asarray(iv_bounds, dtype=np.int64).reshape(-1, 2)
        self.interval_gidx = np.asarray(iv_gidx, dtype=np.int64)
        self.set_gidx = np.asarray(set_gidx, dtype=np.int64)
        if set_rows:
            self.set_indptr = np.cumsum([0] + [len(r) for r in set_rows]).astype(np.int64)
            self.set_indices = np.concatenate(set_rows).astype(np.int64)
        else:
            self.set_indptr = np.zeros(1, dtype=np.int64)
            self.set_indices = np.zeros(0, dtype=np.int64)

        # Fast-path flag: the group list is exactly all intervals in (lo, hi)
        # lexicographic order. The scan kernels then run in O(m) per hypothesis.
        self.all_intervals_lex = False
        if len(self.set_gidx) == 0 and len(group_list) == m * (m + 1) // 2:
            expect = [(lo, hi) for lo in range(m) for hi in range(lo, m)]
            self.all_intervals_lex = iv_bounds == expect

        self._member_matrix: np.ndarray | None = None
        self._m = m
        self._n_groups = len(group_list)

    def member_matrix(self) -> np.ndarray:
        """(G, m) float 0/1 membership. Built on demand (evaluators, brute force)."""
        if self._member_matrix is None:
            mat = np.zeros((self._n_groups, self._m), dtype=np.float64)
            for (lo, hi), gi in zip(self.interval_bounds, self.interval_gidx):
                mat[gi, lo : hi + 1] = 1.0
            for k, gi in enumerate(self.set_gidx):
                idx = self.set_indices[self.set_indptr[k] : self.set_indptr[k + 1]]
                mat[gi, idx] = 1.0
            self._member_matrix = mat
        return self._member_matrix


# ---------------------------------------------------------------------------
# Pure evaluation helpers
# ---------------------------------------------------------------------------


def eval_hypothesis(h: Hypothesis, x: "Context | int") -> int:
    """Label value h(x)."""
    i = _context_index(x)
    if h.kind == "threshold":
        return h.polarity if i >= h.theta else -h.polarity
    return h.table[i]


def group_indicator(g: Group, x: "Context | int") -> int:
    """1 if x belongs to g else 0."""
    i = _context_index(x)
    if g.kind == "interval":
        return 1 if g.lo <= i <= g.hi else 0
    return 1 if i in g.members else 0


def instant_group_regret(
    inst: ProblemInstance,
    group: Group,
    hypothesis: Hypothesis,
    x: "Context | int",
    y_pred: int,
    y_true: int,
) -> float:
    """Instantaneous group regret of the pair at (x, y_pred, y_true).

    g(x) * (loss(y_pred, y_true) - loss(h(x), y_true)), always in [-1, 1]
    because losses live in [0, 1].
    """
    if not group_indicator(group, x):
        return 0.0
    table = inst.loss.entries
    ti = inst.label_index(y_true)
    return float(
        table[inst.label_index(y_pred)][ti]
        - table[inst.label_index(eval_hypothesis(hypothesis, x))][ti]
    )


# ---------------------------------------------------------------------------
# JSON serialization (lossless round-trip)
# ---------------------------------------------------------------------------


def _hypothesis_to_dict(h: Hypothesis) -> dict:
    if h.kind == "threshold":
        return {"kind": "threshold", "theta": h.theta, "polarity": h.polarity}
    return {"kind": "table", "labels": list(h.table)}


def _hypothesis_from_dict(d: dict) -> Hypothesis:
    if d["kind"] == "threshold":
        return Hypothesis(kind="threshold", theta=int(d["theta"]), polarity=int(d["polarity"]))
    if d["kind"] == "table":
        return Hypothesis(kind="table", table=tuple(int(v) for v in d["labels"]))
    raise ValueError(f"unknown hypothesis kind {d.get('kind')!r}")


def _group_to_dict(g: Group) -> dict:
    if g.kind == "interval":
        return {"kind": "interval", "lo": g.lo, "hi": g.hi}
    return {"kind": "set", "members": sorted(g.members)}


def _group_from_dict(d: dict) -> Group:
    if d["kind"] == "interval":
        return Group(kind="interval", lo=int(d["lo"]), hi=int(d["hi"]))
    if d["kind"] == "set":
        return Group(kind="set", members=frozenset(int(i) for i in d["members"]))
    raise ValueError(f"unknown group kind {d.get('kind')!r}")


def instance_to_dict(inst: ProblemInstance) -> dict:
    if inst.loss.preset == "zero_one":
        loss_doc: dict = {"kind": "zero_one"}
    else:
        loss_doc = {"kind": "table", "entries": [list(row) for row in inst.loss.entries]}
    with group_access_scope("serialization"):
        group_list = inst.groups
    doc = {
        "universe_size": inst.universe_size,
        "action_count": inst.action_count,
        "hypotheses": [_hypothesis_to_dict(h) for h in inst.hypotheses],
        "groups": [_group_to_dict(g) for g in group_list],
        "loss": loss_doc,
    }
    if inst.vc_hint is not None:
        doc["vc_hint"] = inst.vc_hint
    return doc


def instance_from_dict(doc: dict) -> ProblemInstance:
    required = ("universe_size", "action_count", "hypotheses", "groups", "loss")
    for key in required:
        if key not in doc:
            raise ValueError(f"instance document is missing {key!r}")
    action_count = int(doc["action_count"])
    loss_doc = doc["loss"]
    if loss_doc.get("kind") == "zero_one":
        loss = LossTable.zero_one(action_count)
    else:
        loss = LossTable(entries=tuple(tuple(float(v) for v in row) for row in loss_doc["entries"]))
    return ProblemInstance(
        universe_size=int(doc["universe_size"]),
        action_count=action_count,
        hypotheses=[_hypothesis_from_dict(h) for h in doc["hypotheses"]],
        groups=[_group_from_dict(g) for g in doc["groups"]],
        loss=loss,
        vc_hint=doc.get("vc_hint"),
    )


def save_instance(inst: ProblemInstance, path: str) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(instance_to_dict(inst), fh, indent=2)
        fh.write("\n")


def load_instance(path: str) -> ProblemInstance:
    with open(path, "r", encoding="utf-8") as fh:
        return instance_from_dict(json.load(fh))
