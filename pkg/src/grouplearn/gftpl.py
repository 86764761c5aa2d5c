"""Perturbation-matrix follow-the-perturbed-leader with a small-loss rate.

The player perturbs the cumulative history objective through a matrix whose
columns are implementable: each column carries a small weighted fake-example
dataset whose regret contribution reproduces inner products with that column.
Scaling the column datasets by Laplace noise over the adaptive learning rate
realizes the perturbation with ordinary oracle calls, so the learner never
materializes matrix entries or enumerates groups.

For the transductive setting (context set revealed up front) the shipped
builder makes one column per (context, true label, predicted label) triple
with a singleton unit-weight dataset; entries then equal the instantaneous
group regret of that triple by construction.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .core import (
    Context,
    GroupHypothesisPair,
    ProblemInstance,
    RoundRecord,
    group_access_scope,
    instant_group_regret,
)
from .ftpl import EmpiricalPlay, trace_arrays
from .oracles import (
    OracleQuery,
    RegretArrays,
    opt_gh,
    opt_gh_value,
)


@dataclass(frozen=True)
class TranslationColumn:
    """One perturbation-matrix column realized as a weighted fake dataset.

    dataset holds (weight, context index, true label, predicted label)
    records. probe, when present, names the (context, true label, predicted
    label) triple whose instantaneous group regret this column's entries are
    supposed to equal; the approximability checker needs it.
    """

    column_id: str
    dataset: tuple[tuple[float, int, int, int], ...]
    probe: tuple[int, int, int] | None = None

    def __post_init__(self) -> None:
        if not self.dataset:
            raise ValueError("column dataset must be nonempty")


@dataclass(frozen=True, eq=False)
class PerturbationMatrix:
    """Column collection; entries are computed on demand from the datasets."""

    columns: tuple[TranslationColumn, ...]

    _cache: dict = field(default_factory=dict, init=False, repr=False, compare=False)

    def __post_init__(self) -> None:
        if not self.columns:
            raise ValueError("perturbation matrix needs at least one column")

    @property
    def n_columns(self) -> int:
        return len(self.columns)

    def entry(
        self, instance: ProblemInstance, pair: GroupHypothesisPair, j: int
    ) -> float:
        """Entry (pair, j) = sum over the column dataset of w * group regret."""
        total = 0.0
        for w, x, y_true, y_pred in self.columns[j].dataset:
            total += w * instant_group_regret(
                instance, pair.group, pair.hypothesis, x, y_pred, y_true
            )
        return total

    def row(self, instance: ProblemInstance, pair: GroupHypothesisPair) -> np.ndarray:
        return np.array(
            [self.entry(instance, pair, j) for j in range(self.n_columns)],
            dtype=np.float64,
        )

    def record_arrays(
        self, instance: ProblemInstance
    ) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
        """Flattened (x, y_pred_idx, y_true_idx, weight, column) record arrays.

        Cached per instance; these are the raw records gftpl_sample scales by
        the noise coordinates before handing them to the oracle.
        """
        key = id(instance)
        hit = self._cache.get(key)
        if hit is not None:
            return hit
        xs: list[int] = []
        yps: list[int] = []
        yts: list[int] = []
        ws: list[float] = []
        cols: list[int] = []
        for j, col in enumerate(self.columns):
            for w, x, y_true, y_pred in col.dataset:
                xs.append(x)
                yps.append(instance.label_index(y_pred))
                yts.append(instance.label_index(y_true))
                ws.append(w)
                cols.append(j)
        out = (
            np.array(xs, dtype=np.int64),
            np.array(yps, dtype=np.int64),
            np.array(yts, dtype=np.int64),
            np.array(ws, dtype=np.float64),
            np.array(cols, dtype=np.int64),
        )
        self._cache[key] = out
        return out


@dataclass(frozen=True)
class GftplConfig:
    """Perturbation-matrix player parameters.

    gamma_approx is the approximability constant of the supplied matrix (1
    for the transductive builder), rate_constant the numerator of the
    adaptive learning rate, M the oracle calls per round. freeze_noise makes
    the harness draw one noise vector per run instead of per call.
    """

    M: int
    gamma_approx: float = 1.0
    rate_constant: float = 1.0
    seed: int | None = None
    freeze_noise: bool = False

    def __post_init__(self) -> None:
        if not (self.gamma_approx > 0.0):
            raise ValueError(f"gamma_approx must be > 0, got {self.gamma_approx}")
        if not (self.rate_constant > 0.0):
            raise ValueError(f"rate_constant must be > 0, got {self.rate_constant}")
        if self.M < 1:
            raise ValueError(f"M must be >= 1, got {self.M}")


@dataclass(frozen=True, eq=False)
class LaplaceNoise:
    """One unit-Laplace noise vector, length equal to the column count."""

    nu: np.ndarray

    def __post_init__(self) -> None:
        arr = np.ascontiguousarray(self.nu, dtype=np.float64)
        if arr.ndim != 1 or arr.shape[0] < 1:
            raise ValueError("noise must be a nonempty 1-d vector")
        object.__setattr__(self, "nu", arr)


def build_transductive_gamma(
    instance: ProblemInstance, contexts: Sequence[int | Context]
) -> PerturbationMatrix:
    """One column per (context, true label, predicted label) triple.

    Columns are ordered context-major, then true label, then predicted label,
    each a singleton unit-weight dataset probing its own triple. For binary
    actions this yields 4 columns per revealed context.
    """
    if len(contexts) == 0:
        raise ValueError("context set must be nonempty")
    cols = []
    for c in contexts:
        x = c.index if isinstance(c, Context) else int(c)
        if not (0 <= x < instance.universe_size):
            raise ValueError(f"context {x} outside universe")
        for y_true in instance.action_values:
            for y_pred in instance.action_values:
                cols.append(
                    TranslationColumn(
                        column_id=f"x{x}|y{y_true}|yp{y_pred}",
                        dataset=((1.0, x, y_true, y_pred),),
                        probe=(x, y_true, y_pred),
                    )
                )
    return PerturbationMatrix(columns=tuple(cols))


def gamma_matrix(instance: ProblemInstance, pm: PerturbationMatrix) -> np.ndarray:
    """Dense entries, rows in canonical pair order (group-major).

    Evaluation-side only: materializing rows enumerates every group, which
    the learner itself never does.
    """
    with group_access_scope("evaluation"):
        groups = instance.groups
        n_h = len(instance.hypotheses)
        out = np.empty((len(groups) * n_h, pm.n_columns), dtype=np.float64)
        for gi, g in enumerate(groups):
            for hi, h in enumerate(instance.hypotheses):
                row = gi * n_h + hi
                for j, col in enumerate(pm.columns):
                    total = 0.0
                    for w, x, y_true, y_pred in col.dataset:
                        total += w * instant_group_regret(
                            instance, g, h, x, y_pred, y_true
                        )
                    out[row, j] = total
    return out


def check_approximability(
    instance: ProblemInstance,
    pm: PerturbationMatrix,
    entries: np.ndarray | None = None,
) -> float:
    """Worst-case slack of the coordinate-vector approximability witness.

    For every row pair and every probed column j, the witness requires
    (entries[p, j] - entries[p', j]) >= (regret_p - regret_p') at the probe
    triple; returned is the minimum difference of the two sides over all
    (p, j, p'). The transductive construction gives exactly 0.0. Passing a
    corrupted entries matrix lets tests confirm violations go negative.
    """
    if entries is None:
        entries = gamma_matrix(instance, pm)
    probe_vals = _probe_matrix(instance, pm)
    worst = math.inf
    for j in range(pm.n_columns):
        diff = entries[:, j] - probe_vals[:, j]
        slack = float(diff.min()) - float(diff.max())
        if slack < worst:
            worst = slack
    return worst


def _probe_matrix(instance: ProblemInstance, pm: PerturbationMatrix) -> np.ndarray:
    """Instantaneous group regret of each probe triple, per canonical row."""
    with group_access_scope("evaluation"):
        groups = instance.groups
        n_h = len(instance.hypotheses)
        out = np.empty((len(groups) * n_h, pm.n_columns), dtype=np.float64)
        for j, col in enumerate(pm.columns):
            if col.probe is None:
                raise ValueError(f"column {col.column_id} has no probe triple")
            x, y_true, y_pred = col.probe
            for gi, g in enumerate(groups):
                for hi, h in enumerate(instance.hypotheses):
                    out[gi * n_h + hi, j] = instant_group_regret(
                        instance, g, h, x, y_pred, y_true
                    )
    return out


def check_implementability(
    instance: ProblemInstance, pm: PerturbationMatrix
) -> float:
    """Maximum deviation of the column-dataset identity over all row pairs.

    For every column j and rows p, p' the entry difference must equal the
    dataset-weighted difference of instantaneous group regrets. The left side
    comes from the dense entry matrix, the right side from a direct
    per-record loop, so the two computation routes stay independent. Returns
    max |left - right| (0.0 when the identity holds exactly).
    """
    entries = gamma_matrix(instance, pm)
    n_rows = entries.shape[0]
    with group_access_scope("evaluation"):
        groups = instance.groups
        n_h = len(instance.hypotheses)
        pairs = [(g, h) for g in groups for h in instance.hypotheses]
        worst = 0.0
        for j, col in enumerate(pm.columns):
            per_row = []
            for g, h in pairs:
                acc = 0.0
                for w, x, y_true, y_pred in col.dataset:
                    acc += w * instant_group_regret(instance, g, h, x, y_pred, y_true)
                per_row.append(acc)
            for p in range(n_rows):
                for q in range(n_rows):
                    left = entries[p, j] - entries[q, j]
                    right = per_row[p] - per_row[q]
                    dev = abs(left - right)
                    if dev > worst:
                        worst = dev
    return worst


def learning_rate(cfg: GftplConfig, l_star_prev: float) -> float:
    """Adaptive rate min(1/gamma_approx, rate_constant/sqrt(l_star_prev + 1))."""
    if l_star_prev < 0:
        raise ValueError(f"l_star_prev must be >= 0, got {l_star_prev}")
    return min(
        1.0 / cfg.gamma_approx,
        cfg.rate_constant / math.sqrt(l_star_prev + 1.0),
    )


def best_gain_so_far(
    instance: ProblemInstance,
    history: "Sequence[RoundRecord] | RegretArrays",
) -> float:
    """Best cumulative gain any pair has accrued on the history, floored at 0.

    Costs exactly one unperturbed oracle call, made even on an empty history
    so every round's call count is uniform.
    """
    arrs = trace_arrays(instance, history)
    _, value = opt_gh_value(instance, OracleQuery(regret_records=arrs))
    return max(0.0, value)


def perturbed_query(
    instance: ProblemInstance,
    history: "Sequence[RoundRecord] | RegretArrays",
    pm: PerturbationMatrix,
    eta_t: float,
    noise: LaplaceNoise,
) -> OracleQuery:
    """History records plus every column dataset scaled by noise/eta_t."""
    if not (eta_t > 0.0):
        raise ValueError(f"eta_t must be > 0, got {eta_t}")
    nu = noise.nu
    if nu.shape[0] != pm.n_columns:
        raise ValueError(
            f"noise length {nu.shape[0]} != column count {pm.n_columns}"
        )
    xs, yps, yts, ws, cols = pm.record_arrays(instance)
    nu_t = nu / eta_t
    scaled = ws * nu_t[cols]
    hist = trace_arrays(instance, history)
    hx, hyp, hyt, hw = hist.views()
    merged = RegretArrays.from_arrays(
        np.concatenate([hx, xs]),
        np.concatenate([hyp, yps]),
        np.concatenate([hyt, yts]),
        np.concatenate([hw, scaled]),
    )
    return OracleQuery(regret_records=merged)


def gftpl_sample(
    instance: ProblemInstance,
    history: "Sequence[RoundRecord] | RegretArrays",
    pm: PerturbationMatrix,
    eta_t: float,
    rng: np.random.Generator,
    noise: LaplaceNoise | None = None,
) -> GroupHypothesisPair:
    """One noise-perturbed oracle call.

    Draws a fresh unit-Laplace vector (unless an explicit noise vector is
    forced), scales every column dataset by its coordinate over eta_t, and
    maximizes history-plus-perturbation with a single oracle call.
    """
    if noise is None:
        noise = LaplaceNoise(rng.laplace(0.0, 1.0, pm.n_columns))
    query = perturbed_query(instance, history, pm, eta_t, noise)
    return opt_gh(instance, query)


@dataclass(frozen=True)
class GftplRound:
    """One round's play with the schedule values that produced it."""

    play: EmpiricalPlay
    l_star: float
    eta_t: float


def gftpl_empirical_play(
    instance: ProblemInstance,
    history: "Sequence[RoundRecord] | RegretArrays",
    pm: PerturbationMatrix,
    cfg: GftplConfig,
    rng: np.random.Generator,
    frozen_noise: LaplaceNoise | None = None,
) -> GftplRound:
    """Run one round: rate from the best gain so far, then M perturbed calls.

    Costs M + 1 oracle calls (the extra one prices the rate schedule). With
    frozen_noise set, every call reuses that vector and the rng is not
    consumed, which makes all M pairs identical within the round.
    """
    l_star = best_gain_so_far(instance, history)
    eta_t = learning_rate(cfg, l_star)
    g_idx = np.empty(cfg.M, dtype=np.int64)
    h_idx = np.empty(cfg.M, dtype=np.int64)
    for i in range(cfg.M):
        pair = gftpl_sample(instance, history, pm, eta_t, rng, noise=frozen_noise)
        g_idx[i] = pair.group_index
        h_idx[i] = pair.hypothesis_index
    return GftplRound(
        play=EmpiricalPlay(instance, g_idx, h_idx), l_star=l_star, eta_t=eta_t
    )


def gamma_to_dict(pm: PerturbationMatrix) -> dict:
    """JSON-ready description of the column datasets."""
    return {
        "kind": "perturbation-matrix",
        "columns": [
            {
                "id": col.column_id,
                "dataset": [list(rec) for rec in col.dataset],
                "probe": list(col.probe) if col.probe is not None else None,
            }
            for col in pm.columns
        ],
    }


def gamma_from_dict(data: dict) -> PerturbationMatrix:
    if data.get("kind") != "perturbation-matrix":
        raise ValueError("not a perturbation-matrix document")
    cols = []
    for c in data["columns"]:
        probe = c.get("probe")
        cols.append(
            TranslationColumn(
                column_id=c["id"],
                dataset=tuple(
                    (float(w), int(x), int(yt), int(yp))
                    for w, x, yt, yp in c["dataset"]
                ),
                probe=tuple(int(v) for v in probe) if probe is not None else None,
            )
        )
    return PerturbationMatrix(columns=tuple(cols))


def save_gamma(pm: PerturbationMatrix, path: str) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(gamma_to_dict(pm), fh, indent=2)
        fh.write("\n")


def load_gamma(path: str) -> PerturbationMatrix:
    with open(path, "r", encoding="utf-8") as fh:
        return gamma_from_dict(json.load(fh))
