"""Adversary-moves-first (AMF) evaluators and the empirical-play gap probe.

These are test-oracle routines used to validate the online players, not
learner machinery. `amf_value` computes the per-round game value when the
adversary commits to a label distribution first; `amf_regret` compares a
realized trace against those values by enumerating every (group, hypothesis)
pair; `epsilon_gap` measures how far a finite empirical play sits from a much
larger one at a fixed payoff query.

All group enumeration here runs under the evaluation access scope, so none
of it counts against the learner and none of it perturbs the per-round
oracle-call budget asserts.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Sequence

import numpy as np

from .core import (
    Context,
    ProblemInstance,
    RoundRecord,
    group_access_scope,
)
from .ftpl import FtplConfig, empirical_play

__all__ = [
    "AMF_VALUE_CEILING",
    "AmfRoundDiagnostic",
    "amf_value",
    "amf_regret",
    "epsilon_gap",
]

# The one-step adversary-moves-first value is nonpositive on every valid
# instance; anything above this ceiling indicates a broken evaluator.
AMF_VALUE_CEILING = 1e-9


@dataclass(frozen=True)
class AmfRoundDiagnostic:
    """Per-round diagnostic row: game values and the empirical-play gap.

    `epsilon_estimate` may be NaN when the gap probe was not run that round.
    """

    t: int
    amf_value: float
    lp_value: float
    epsilon_estimate: float

    def __post_init__(self) -> None:
        if self.t < 1:
            raise ValueError(f"round index must be >= 1, got {self.t}")
        if not (self.amf_value <= AMF_VALUE_CEILING):
            raise ValueError(
                f"amf_value {self.amf_value} exceeds the nonpositivity ceiling "
                f"{AMF_VALUE_CEILING}"
            )


def _context_index(instance: ProblemInstance, x: "Context | int") -> int:
    idx = x.index if isinstance(x, Context) else int(x)
    if not (0 <= idx < instance.universe_size):
        raise ValueError(f"context index {idx} outside universe")
    return idx


def amf_value(
    x: "Context | int", instance: ProblemInstance, grid_points: int = 1000
) -> float:
    """Exact adversary-moves-first value at context x.

    The adversary commits to a label distribution (gamma on the first action
    value, 1-gamma on the second); the learner then mixes over the actions
    achievable at x; finally the adversary picks the worst (group,
    hypothesis) pair. For a fixed gamma the payoff of every pair is the
    learner's expected loss minus the pair's benchmark loss, which is linear
    in the learner's mixture, so the exact inner solve is a vertex minimum
    over achievable actions of the column maximum. Gamma is searched on a
    uniform grid plus every crossing point where two actions' expected
    losses swap order, which covers every point where the inner solution can
    change. Pairs whose group excludes x contribute a zero payoff column.
    """
    if instance.action_count != 2:
        raise ValueError(
            "amf_value parameterizes the adversary by a scalar, which needs "
            f"exactly 2 actions; instance has {instance.action_count}"
        )
    xi = _context_index(instance, x)
    loss = instance.loss.as_array()  # (2, 2): loss[pred_idx, true_idx]
    with group_access_scope("evaluation"):
        tabs = instance.tables()
        image = np.unique(tabs.label_idx[:, xi])  # achievable action indices
        member_col = tabs.member_matrix()[:, xi]
    any_excluded = bool(np.any(member_col == 0.0))

    candidates = [np.linspace(0.0, 1.0, grid_points)]
    crossings = []
    k = loss.shape[0]
    for i in range(k):
        for j in range(i + 1, k):
            den = (loss[i, 0] - loss[j, 0]) - (loss[i, 1] - loss[j, 1])
            if den != 0.0:
                g_star = (loss[j, 1] - loss[i, 1]) / den
                if 0.0 < g_star < 1.0:
                    crossings.append(g_star)
    if crossings:
        candidates.append(np.asarray(crossings, dtype=np.float64))
    gam = np.concatenate(candidates)

    # expected loss of each action under every candidate gamma: (k, n_gamma)
    c = loss[:, 0][:, None] * gam[None, :] + loss[:, 1][:, None] * (1.0 - gam[None, :])
    # per candidate: rows are achievable actions, one payoff column per
    # benchmark value in the hypothesis image (their max is the row's
    # expected loss minus the image minimum), plus a zero column when some
    # group excludes x; the game value is the row minimum of column maxima
    bench_min = c[image].min(axis=0)
    row_worst = c[image] - bench_min[None, :]
    if any_excluded:
        row_worst = np.maximum(row_worst, 0.0)
    vals = row_worst.min(axis=0)
    return float(vals.max())


def amf_regret(
    instance: ProblemInstance,
    trace: Sequence[RoundRecord],
    amf_values: Sequence[float],
) -> float:
    """Worst pair's cumulative payoff minus the summed per-round AMF values.

    Enumerates every (group, hypothesis) pair: the payoff of a pair at round
    t is its group indicator at x_t times the learner's realized loss minus
    the hypothesis's loss. The AMF values are subtracted round by round and
    do not depend on the pair, so the result is the enumerated maximum of
    the cumulative payoffs minus the total of the values.
    """
    if len(amf_values) != len(trace):
        raise ValueError(
            f"need one amf value per round: {len(amf_values)} values for "
            f"{len(trace)} rounds"
        )
    total_v = math.fsum(amf_values)
    if not trace:
        return -total_v
    with group_access_scope("evaluation"):
        tabs = instance.tables()
        m = instance.universe_size
        loss = tabs.loss
        xa = np.array([rec.x.index for rec in trace], dtype=np.int64)
        ya = np.array([instance.label_index(rec.y) for rec in trace], dtype=np.int64)
        yha = np.array(
            [instance.label_index(rec.y_hat) for rec in trace], dtype=np.int64
        )
        learner_per_ctx = np.bincount(xa, weights=loss[yha, ya], minlength=m)
        agg = np.empty((instance.action_count, m), dtype=np.float64)
        for a in range(instance.action_count):
            agg[a] = np.bincount(xa, weights=loss[a, ya], minlength=m)
        per_hx = agg[tabs.label_idx, np.arange(m)[None, :]]  # (H, m)
        diff = learner_per_ctx[None, :] - per_hx  # (H, m)
        member = tabs.member_matrix()  # (G, m)
        totals = diff @ member.T  # (H, G)
    return float(totals.max()) - total_v


def epsilon_gap(
    instance: ProblemInstance,
    history: Sequence[RoundRecord],
    config: FtplConfig,
    m_small: int,
    m_large: int,
    x: "Context | int",
    y_pred: int,
    y_true: int,
    rng: np.random.Generator,
) -> float:
    """Two-sample proxy for the empirical-play approximation error.

    Draws one empirical play of m_small samples and one of m_large samples
    from the same smoothed player on the same history, evaluates every
    pair's payoff at the fixed (x, y_pred, y_true), and returns the absolute
    difference of the two means. A deterministic player collapses both plays
    to one pair and the gap is exactly zero.
    """
    if m_large < 10 * m_small:
        raise ValueError(
            f"m_large must be at least 10 * m_small, got {m_large} < {10 * m_small}"
        )
    xi = _context_index(instance, x)
    pi = instance.label_index(y_pred)
    ti = instance.label_index(y_true)
    with group_access_scope("evaluation"):
        play_small = empirical_play(
            instance, history, replace(config, M=m_small), rng, draw="block"
        )
        play_large = empirical_play(
            instance, history, replace(config, M=m_large), rng, draw="block"
        )
        tabs = instance.tables()
        member = tabs.member_matrix()
        loss = tabs.loss

        def play_mean(play) -> float:
            n_h = len(instance.hypotheses)
            keys, counts = np.unique(
                play.group_indices * n_h + play.hypothesis_indices,
                return_counts=True,
            )
            g_arr = keys // n_h
            h_arr = keys % n_h
            gx = member[g_arr, xi]
            hv = tabs.label_idx[h_arr, xi]
            vals = gx * (loss[pi, ti] - loss[hv, ti])
            weights = counts / float(len(play))
            return float(np.dot(weights, vals))

        gap = abs(play_mean(play_small) - play_mean(play_large))
    return gap
