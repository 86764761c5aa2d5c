"""The action player's per-round machinery.

Each round the learner probes which labels are realizable (one weighted-ERM
call per action on a singleton dataset, always under zero-one loss), builds
the payoff matrix of the empirical play against those realizers, solves the
small zero-sum game exactly, and samples its action from the minimax mixed
strategy.

The minimax solve is exact: 2x2 games use the closed form over the candidate
set {p=0, p=1, column intersection}, larger games run a pivoting solve on the
standard positive-shift program. Among optimal strategies the solver returns
the one closest to uniform in Euclidean distance, then the lexicographically
smallest, so ties are deterministic.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .core import (
    Context,
    GroupHypothesisPair,
    Hypothesis,
    LossTable,
    ProblemInstance,
    eval_hypothesis,
    group_indicator,
)
from .oracles import opt_h, singleton_example

__all__ = [
    "GameMatrix",
    "MixedStrategy",
    "realizable_actions",
    "build_game_matrix",
    "solve_zero_sum",
    "act",
]


@dataclass(frozen=True, eq=False)
class GameMatrix:
    """Payoff matrix of the empirical play.

    entries[k][y] sums, over every pair (g, h) in the play, the value
    g(x) * (loss(a_k, y) - loss(h(x), y)) where a_k is what the k-th realizer
    predicts at x. Rows follow the instance's action-value order; the sum is
    unnormalized (one term per play element).
    """

    entries: np.ndarray
    action_values: tuple[int, ...]

    def __post_init__(self) -> None:
        e = np.asarray(self.entries, dtype=np.float64)
        if e.ndim != 2 or e.shape[0] != e.shape[1]:
            raise ValueError(f"game matrix must be square, got shape {e.shape}")
        if e.shape[0] != len(self.action_values):
            raise ValueError("matrix size must match the action count")


@dataclass(frozen=True)
class MixedStrategy:
    """A distribution over action indices plus the game value it certifies."""

    probs: tuple[float, ...]
    value: float

    def __post_init__(self) -> None:
        if any(p < 0.0 or p > 1.0 for p in self.probs):
            raise ValueError(f"probabilities must lie in [0, 1], got {self.probs}")
        if abs(sum(self.probs) - 1.0) > 1e-12:
            raise ValueError(f"probabilities must sum to 1, got {sum(self.probs)}")


def realizable_actions(
    instance: ProblemInstance, x: Context | int
) -> tuple[Hypothesis, ...]:
    """One ERM probe per action: which hypothesis best realizes each label at x.

    Always uses zero-one loss for the probes, regardless of the instance
    loss: the probe asks "can some hypothesis output this label here", which
    is a pure agreement question. The returned hypothesis for an
    unrealizable action still predicts something, just not the asked label.
    """
    probe_loss = LossTable.zero_one(instance.action_count)
    return tuple(
        opt_h(instance, singleton_example(x, a), loss=probe_loss)
        for a in instance.action_values
    )


def build_game_matrix(
    instance: ProblemInstance,
    play: "Sequence[GroupHypothesisPair] | object",
    x: Context | int,
    realizers: Sequence[Hypothesis],
    loss: LossTable | None = None,
) -> GameMatrix:
    """Sum the per-pair payoff rows of the play at context x.

    Accepts either a sequence of pairs or an empirical-play object carrying
    group_indices / hypothesis_indices arrays (the fast path: duplicated
    pairs collapse to one evaluation with a count).
    """
    loss_arr = (loss or instance.loss).as_array()
    k_actions = instance.action_count
    if len(realizers) != k_actions:
        raise ValueError("need one realizer per action")
    realizer_idx = np.array(
        [instance.label_index(eval_hypothesis(h, x)) for h in realizers],
        dtype=np.int64,
    )

    g_idx = getattr(play, "group_indices", None)
    if g_idx is not None:
        h_idx = play.hypothesis_indices
    else:
        pairs: Sequence[GroupHypothesisPair] = play  # type: ignore[assignment]
        if len(pairs) == 0:
            raise ValueError("empirical play must be nonempty")
        g_idx = np.array([p.group_index for p in pairs], dtype=np.int64)
        h_idx = np.array([p.hypothesis_index for p in pairs], dtype=np.int64)

    n_h = len(instance.hypotheses)
    keys, counts = np.unique(g_idx * n_h + h_idx, return_counts=True)
    entries = np.zeros((k_actions, k_actions), dtype=np.float64)
    realizer_rows = loss_arr[realizer_idx, :]  # (K, K): row k = loss(a_k, .)
    for key, cnt in zip(keys, counts):
        pair = instance.pair(int(key) // n_h, int(key) % n_h)
        if not group_indicator(pair.group, x):
            continue
        h_at_x = instance.label_index(eval_hypothesis(pair.hypothesis, x))
        entries += float(cnt) * (realizer_rows - loss_arr[h_at_x, :][None, :])
    return GameMatrix(entries=entries, action_values=instance.action_values)


# ---------------------------------------------------------------------------
# Exact zero-sum solve
# ---------------------------------------------------------------------------


def _solve_2x2(a: np.ndarray) -> tuple[tuple[float, float], float]:
    """Closed-form minimax for a 2-row game: candidates are the endpoints and
    the column intersection; the optimal set is an interval, and we return
    the point of it closest to 1/2."""
    candidates = [0.0, 1.0]
    den = (a[0, 0] - a[1, 0]) - (a[0, 1] - a[1, 1])
    if den != 0.0:
        p_cross = (a[1, 1] - a[1, 0]) / den
        if 0.0 < p_cross < 1.0:
            candidates.append(p_cross)

    def worst(p: float) -> float:
        return max(
            p * a[0, 0] + (1.0 - p) * a[1, 0],
            p * a[0, 1] + (1.0 - p) * a[1, 1],
        )

    value = min(worst(p) for p in candidates)
    p_lo, p_hi = 0.0, 1.0
    for j in (0, 1):
        slope = a[0, j] - a[1, j]
        intercept = a[1, j]
        if slope > 0.0:
            p_hi = min(p_hi, (value - intercept) / slope)
        elif slope < 0.0:
            p_lo = max(p_lo, (value - intercept) / slope)
    if p_lo > p_hi:
        # Numerically empty interval: fall back to the best candidate point.
        p_lo = p_hi = min(candidates, key=worst)
    p = min(max(0.5, p_lo), p_hi)
    p = float(min(max(p, 0.0), 1.0))
    return (p, 1.0 - p), float(value)


def _simplex_max(bt: np.ndarray) -> np.ndarray:
    """Maximize sum(u) subject to bt @ u <= 1, u >= 0 (all entries of the
    constraint matrix positive). Dense tableau with Bland's rule; returns u.
    """
    n_cons, n_var = bt.shape
    tab = np.zeros((n_cons + 1, n_var + n_cons + 1), dtype=np.float64)
    tab[:n_cons, :n_var] = bt
    tab[:n_cons, n_var : n_var + n_cons] = np.eye(n_cons)
    tab[:n_cons, -1] = 1.0
    tab[-1, :n_var] = -1.0  # maximize sum(u)
    basis = list(range(n_var, n_var + n_cons))
    for _ in range(10000):
        enter = -1
        for j in range(n_var + n_cons):
            if tab[-1, j] < -1e-12:
                enter = j
                break
        if enter < 0:
            break
        leave, best_ratio = -1, np.inf
        for i in range(n_cons):
            if tab[i, enter] > 1e-12:
                ratio = tab[i, -1] / tab[i, enter]
                if ratio < best_ratio - 1e-15 or (
                    abs(ratio - best_ratio) <= 1e-15
                    and (leave < 0 or basis[i] < basis[leave])
                ):
                    best_ratio = ratio
                    leave = i
        if leave < 0:
            raise RuntimeError("unbounded game program (constraints not positive?)")
        pivot = tab[leave, enter]
        tab[leave] /= pivot
        for i in range(n_cons + 1):
            if i != leave and tab[i, enter] != 0.0:
                tab[i] -= tab[i, enter] * tab[leave]
        basis[leave] = enter
    else:
        raise RuntimeError("pivot limit exceeded in game solve")
    u = np.zeros(n_var, dtype=np.float64)
    for i, b in enumerate(basis):
        if b < n_var:
            u[b] = tab[i, -1]
    return u


def _closest_to_uniform(
    a: np.ndarray, value: float, feas_tol: float = 1e-9
) -> np.ndarray:
    """Among strategies certifying the given game value, find the feasible
    point minimizing distance to uniform (exact active-set enumeration).

    Constraints: sum(p) = 1 (always equality), p_i >= 0, and column payoffs
    <= value. Every subset of inequality constraints is tried as the active
    set; the true projection's active set is among them, and any feasible
    candidate that beats it in distance would contradict optimality, so the
    minimum-distance feasible candidate is the projection.
    """
    k, n_cols = a.shape
    uniform = np.full(k, 1.0 / k)
    n_ineq = k + n_cols
    best: np.ndarray | None = None
    best_dist = np.inf
    ones = np.ones((1, k))
    for mask in range(1 << n_ineq):
        rows = [ones[0]]
        rhs = [1.0]
        for i in range(k):
            if mask & (1 << i):
                e = np.zeros(k)
                e[i] = 1.0
                rows.append(e)
                rhs.append(0.0)
        for j in range(n_cols):
            if mask & (1 << (k + j)):
                rows.append(a[:, j].copy())
                rhs.append(value)
        c_mat = np.vstack(rows)
        d_vec = np.asarray(rhs)
        n_eq = c_mat.shape[0]
        kkt = np.zeros((k + n_eq, k + n_eq))
        kkt[:k, :k] = np.eye(k)
        kkt[:k, k:] = c_mat.T
        kkt[k:, :k] = c_mat
        target = np.concatenate([uniform, d_vec])
        sol, *_ = np.linalg.lstsq(kkt, target, rcond=None)
        p = sol[:k]
        if np.max(np.abs(c_mat @ p - d_vec)) > 1e-8:
            continue
        if np.min(p) < -1e-9:
            continue
        if n_cols and np.max(a.T @ p) > value + feas_tol:
            continue
        dist = float(np.sum((p - uniform) ** 2))
        if dist < best_dist - 1e-12:
            best, best_dist = p, dist
        elif best is not None and abs(dist - best_dist) <= 1e-12:
            if tuple(np.round(p, 12)) < tuple(np.round(best, 12)):
                best = p
    if best is None:
        raise RuntimeError("no feasible strategy found at the solved value")
    return best


def solve_zero_sum(gm: GameMatrix) -> MixedStrategy:
    """Exact minimax strategy of the row player.

    Minimizes, over mixed strategies p, the worst column payoff of
    p @ entries. Returns the optimal strategy closest to uniform (then
    lexicographically smallest) and the game value.
    """
    a = np.asarray(gm.entries, dtype=np.float64)
    k = a.shape[0]
    if k == 2:
        (p0, p1), value = _solve_2x2(a)
        return MixedStrategy(probs=(p0, p1), value=value)
    shift = 1.0 - float(a.min())
    b = a + shift  # entrywise >= 1
    u = _simplex_max(b.T)
    total = float(u.sum())
    if total <= 0.0:
        raise RuntimeError("degenerate game solve (zero mass)")
    lam = 1.0 / total
    value = lam - shift
    p = _closest_to_uniform(b, lam)
    p = np.clip(p, 0.0, None)
    p = p / p.sum()
    return MixedStrategy(probs=tuple(float(v) for v in p), value=value)


def act(
    strategy: MixedStrategy,
    realizers: Sequence[Hypothesis],
    x: Context | int,
    rng: np.random.Generator,
) -> tuple[int, Hypothesis]:
    """Sample an action index from the strategy; return (label, hypothesis).

    The returned label is what the chosen realizer actually predicts at x,
    which may differ from the action sampled when that action is
    unrealizable.
    """
    if len(realizers) != len(strategy.probs):
        raise ValueError("need one realizer per strategy component")
    u = float(rng.random())
    acc = 0.0
    k = len(strategy.probs) - 1
    for i, p in enumerate(strategy.probs):
        acc += p
        if u < acc:
            k = i
            break
    chosen = realizers[k]
    return eval_hypothesis(chosen, x), chosen
