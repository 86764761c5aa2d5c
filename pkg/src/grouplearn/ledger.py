"""Per-group regret accounting and CSV export for experiment runs.

The ledger ingests one record per round, maintains every group's appearance
count and cumulative learner loss incrementally, and computes each group's
best-in-hindsight benchmark at finalize time with a vectorized exact sweep
over the hypothesis list. A definitional slow path (one weighted
empirical-risk-minimizer call per group) is kept alongside so the two
routes can be cross-checked in tests. All group enumeration here runs under
the evaluation access scope; the learner never sees any of it.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .core import (
    Group,
    ProblemInstance,
    RoundRecord,
    eval_hypothesis,
    group_access_scope,
    group_indicator,
)
from .oracles import LabeledExample, opt_h

ROUNDS_SCHEMA_VERSION = "rounds-v1"
GROUPS_SCHEMA_VERSION = "groups-v1"

_ROUNDS_HEADER = ("t", "x", "y_hat", "y", "p", "lp_value", "opt_gh_calls", "opt_h_calls")
_ROUNDS_DIAG_HEADER = _ROUNDS_HEADER + ("amf_value", "epsilon_estimate")
_GROUPS_HEADER = ("group_id", "t_g", "learner_loss", "best_loss", "regret", "regret_per_sqrt")


@dataclass(frozen=True)
class GroupLedgerEntry:
    """Final accounting for one group."""

    group_id: int
    t_g: int
    learner_loss: float
    best_loss: float
    regret: float
    regret_per_sqrt: float


class RunLedger:
    """Incremental per-round and per-group bookkeeping for one run."""

    def __init__(
        self, instance: ProblemInstance, run_id: str, diagnostics: bool = False
    ) -> None:
        self.instance = instance
        self.run_id = run_id
        self.diagnostics = diagnostics
        self.rounds: list[RoundRecord] = []
        self._round_rows: list[tuple] = []
        n_groups = instance.group_count
        self._t_g = np.zeros(n_groups, dtype=np.int64)
        self._learner_loss = np.zeros(n_groups, dtype=np.float64)
        self._entries: list[GroupLedgerEntry] | None = None

    def record_round(
        self,
        record: RoundRecord,
        opt_gh_calls: int,
        opt_h_calls: int,
        amf_value: float | None = None,
        epsilon_estimate: float | None = None,
    ) -> None:
        """Append one completed round and update every group's tallies."""
        expected = len(self.rounds) + 1
        if record.t != expected:
            raise ValueError(f"round {record.t} out of order, expected {expected}")
        x = record.x.index
        loss_val = self.instance.loss.entries[
            self.instance.label_index(record.y_hat)
        ][self.instance.label_index(record.y)]
        with group_access_scope("evaluation"):
            col = self.instance.tables().member_matrix()[:, x]
        self._t_g += col.astype(np.int64)
        self._learner_loss += col * loss_val
        self.rounds.append(record)
        row = (
            record.t,
            x,
            record.y_hat,
            record.y,
            record.bernoulli_p,
            record.lp_value,
            opt_gh_calls,
            opt_h_calls,
        )
        if self.diagnostics:
            row = row + (
                float("nan") if amf_value is None else amf_value,
                float("nan") if epsilon_estimate is None else epsilon_estimate,
            )
        self._round_rows.append(row)
        self._entries = None

    @property
    def horizon(self) -> int:
        return len(self.rounds)

    def appearance_counts(self) -> np.ndarray:
        return self._t_g.copy()

    def entries(self) -> list[GroupLedgerEntry]:
        """Finalized per-group accounting (cached until the next round)."""
        if self._entries is None:
            best = best_hindsight_losses(self.instance, self.rounds)
            out = []
            for gi in range(self.instance.group_count):
                t_g = int(self._t_g[gi])
                learner = float(self._learner_loss[gi])
                bench = float(best[gi])
                regret = learner - bench
                per_sqrt = regret / math.sqrt(t_g) if t_g > 0 else 0.0
                out.append(
                    GroupLedgerEntry(
                        group_id=gi,
                        t_g=t_g,
                        learner_loss=learner,
                        best_loss=bench,
                        regret=regret,
                        regret_per_sqrt=per_sqrt,
                    )
                )
            self._entries = out
        return self._entries

    def worst_group(self) -> tuple[Group, float]:
        """Group with the largest regret (ties to the smallest index)."""
        entries = self.entries()
        best_idx = 0
        best_val = -math.inf
        for e in entries:
            if e.regret > best_val:
                best_val = e.regret
                best_idx = e.group_id
        with group_access_scope("evaluation"):
            group = self.instance.groups[best_idx]
        return group, best_val

    def export_csv(self, out_dir: str) -> tuple[str, str]:
        """Write {run_id}_rounds.csv and {run_id}_groups.csv; returns paths."""
        import os

        rounds_path = os.path.join(out_dir, f"{self.run_id}_rounds.csv")
        groups_path = os.path.join(out_dir, f"{self.run_id}_groups.csv")
        header = _ROUNDS_DIAG_HEADER if self.diagnostics else _ROUNDS_HEADER
        with open(rounds_path, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(",".join(header) + "\n")
            for row in self._round_rows:
                fh.write(",".join(_cell(v) for v in row) + "\n")
        with open(groups_path, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(",".join(_GROUPS_HEADER) + "\n")
            for e in self.entries():
                fh.write(
                    ",".join(
                        (
                            str(e.group_id),
                            str(e.t_g),
                            _cell(e.learner_loss),
                            _cell(e.best_loss),
                            _cell(e.regret),
                            _cell(e.regret_per_sqrt),
                        )
                    )
                    + "\n"
                )
        return rounds_path, groups_path


def _cell(v) -> str:
    """CSV cell: repr for floats so round-trips are bit-exact.

    Floats are canonicalized through the builtin type first so numpy
    scalars never leak their wrapper into the file.
    """
    if isinstance(v, float):
        return repr(float(v))
    return str(v)


def import_rounds_csv(path: str) -> list[dict]:
    """Parse a rounds file back into typed dicts."""
    with open(path, "r", encoding="utf-8") as fh:
        lines = [ln.rstrip("\n") for ln in fh]
    header = lines[0].split(",")
    out = []
    int_cols = {"t", "x", "y_hat", "y", "opt_gh_calls", "opt_h_calls"}
    for ln in lines[1:]:
        cells = ln.split(",")
        row = {}
        for key, cell in zip(header, cells):
            row[key] = int(cell) if key in int_cols else float(cell)
        out.append(row)
    return out


def import_groups_csv(path: str) -> list[GroupLedgerEntry]:
    with open(path, "r", encoding="utf-8") as fh:
        lines = [ln.rstrip("\n") for ln in fh]
    if lines[0] != ",".join(_GROUPS_HEADER):
        raise ValueError(f"unexpected groups header: {lines[0]}")
    out = []
    for ln in lines[1:]:
        gid, t_g, learner, best, regret, per_sqrt = ln.split(",")
        out.append(
            GroupLedgerEntry(
                group_id=int(gid),
                t_g=int(t_g),
                learner_loss=float(learner),
                best_loss=float(best),
                regret=float(regret),
                regret_per_sqrt=float(per_sqrt),
            )
        )
    return out


def best_hindsight_losses(
    instance: ProblemInstance, trace: Sequence[RoundRecord]
) -> np.ndarray:
    """Vectorized best-in-hindsight loss per group.

    Builds the per-hypothesis per-context cumulative loss table with one
    label-count pass, then reduces interval groups through prefix sums and
    set groups through index gathers. Exact because each group's benchmark
    is a minimum over the finite hypothesis list.
    """
    with group_access_scope("evaluation"):
        tabs = instance.tables()
        m = instance.universe_size
        k = instance.action_count
        n_groups = instance.group_count
        if not trace:
            return np.zeros(n_groups, dtype=np.float64)
        xa = np.array([rec.x.index for rec in trace], dtype=np.int64)
        ya = np.array(
            [instance.label_index(rec.y) for rec in trace], dtype=np.int64
        )
        loss = tabs.loss
        agg = np.empty((k, m), dtype=np.float64)
        for a in range(k):
            agg[a] = np.bincount(xa, weights=loss[a, ya], minlength=m)
        per_hx = agg[tabs.label_idx, np.arange(m)[None, :]]  # (H, m)
        prefix = np.zeros((per_hx.shape[0], m + 1), dtype=np.float64)
        np.cumsum(per_hx, axis=1, out=prefix[:, 1:])
        best = np.empty(n_groups, dtype=np.float64)
        iv = tabs.interval_bounds
        if iv.shape[0]:
            sums = prefix[:, iv[:, 1] + 1] - prefix[:, iv[:, 0]]  # (H, n_iv)
            best[tabs.interval_gidx] = sums.min(axis=0)
        for s_i, gi in enumerate(tabs.set_gidx):
            idx = tabs.set_indices[tabs.set_indptr[s_i] : tabs.set_indptr[s_i + 1]]
            best[gi] = per_hx[:, idx].sum(axis=1).min()
    return best


def group_regret(
    instance: ProblemInstance, group: Group, trace: Sequence[RoundRecord]
) -> float:
    """Definitional single-group regret via the weighted minimizer.

    Restricts the trace to rounds where the group is active, asks opt_h for
    the benchmark hypothesis there, and differences the cumulative losses.
    Slow path used for spot checks against the ledger's vectorized sweep.
    """
    with group_access_scope("evaluation"):
        table = instance.loss.entries
        active = [rec for rec in trace if group_indicator(group, rec.x.index)]
        if not active:
            return 0.0
        samples = [
            LabeledExample(x=rec.x.index, y=rec.y, weight=1.0) for rec in active
        ]
        h_star = opt_h(instance, samples)
        learner = 0.0
        bench = 0.0
        for rec in active:
            ti = instance.label_index(rec.y)
            learner += table[instance.label_index(rec.y_hat)][ti]
            bench += table[instance.label_index(eval_hypothesis(h_star, rec.x.index))][ti]
        return learner - bench


def worst_group_regret(
    instance: ProblemInstance, trace: Sequence[RoundRecord]
) -> tuple[Group, float]:
    """Largest-regret group over a complete trace, computed from scratch."""
    with group_access_scope("evaluation"):
        best = best_hindsight_losses(instance, trace)
        tabs = instance.tables()
        member = tabs.member_matrix()
        if trace:
            xa = np.array([rec.x.index for rec in trace], dtype=np.int64)
            ya = np.array(
                [instance.label_index(rec.y) for rec in trace], dtype=np.int64
            )
            yha = np.array(
                [instance.label_index(rec.y_hat) for rec in trace], dtype=np.int64
            )
            per_round = tabs.loss[yha, ya]
            per_ctx = np.bincount(xa, weights=per_round, minlength=instance.universe_size)
            learner = member @ per_ctx
        else:
            learner = np.zeros(instance.group_count, dtype=np.float64)
        regrets = learner - best
        gi = int(np.argmax(regrets))
        group = instance.groups[gi]
    return group, float(regrets[gi])
