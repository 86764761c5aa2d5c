"""Follow-the-perturbed-leader sampling for the group-hypothesis player.

Each oracle call perturbs the cumulative history objective with hallucinated
examples: contexts drawn uniformly from the universe paired with Gaussian
correlation weights. Repeating the perturbed call M times yields the round's
empirical play, whose pair frequencies approximate the player's implicit
distribution.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterator, Sequence

import numpy as np

from . import _backend
from .core import (
    Context,
    GroupHypothesisPair,
    ProblemInstance,
    RoundRecord,
    eval_hypothesis,
    group_access_scope,
    group_indicator,
)
from .oracles import (
    CorrelationRecord,
    OracleQuery,
    RegretArrays,
    _count_call,
    base_table,
    opt_gh,
    scan_structure,
)

HistoryLike = "Sequence[RoundRecord] | RegretArrays"


@dataclass(frozen=True)
class Hallucination:
    """One perturbation draw: a uniform context and a Gaussian weight."""

    z: Context
    gamma: float


@dataclass(frozen=True)
class FtplConfig:
    """Perturbed-leader parameters.

    eta scales the perturbation (eta = 0 gives the deterministic
    follow-the-leader limit), n is the number of hallucinated examples per
    oracle call, and M is the number of oracle calls per round. The optional
    seed is what the harness uses to derive the player's rng stream.
    """

    eta: float
    n: int
    M: int
    seed: int | None = None

    def __post_init__(self) -> None:
        if not (self.eta >= 0.0):
            raise ValueError(f"eta must be >= 0, got {self.eta}")
        if self.n < 1:
            raise ValueError(f"n must be >= 1, got {self.n}")
        if self.M < 1:
            raise ValueError(f"M must be >= 1, got {self.M}")


class EmpiricalPlay:
    """The pairs returned by one round's M perturbed oracle calls.

    Stored as parallel index arrays; the pair objects themselves are
    materialized lazily because diagnostics routinely use plays with M in the
    tens of thousands where only the indices matter.
    """

    __slots__ = ("group_indices", "hypothesis_indices", "_instance", "_pairs")

    def __init__(
        self,
        instance: ProblemInstance,
        group_indices: np.ndarray,
        hypothesis_indices: np.ndarray,
    ) -> None:
        g = np.ascontiguousarray(group_indices, dtype=np.int64)
        h = np.ascontiguousarray(hypothesis_indices, dtype=np.int64)
        if g.shape != h.shape or g.ndim != 1 or g.shape[0] < 1:
            raise ValueError("group and hypothesis index arrays must be equal-length 1-d")
        g.flags.writeable = False
        h.flags.writeable = False
        self.group_indices = g
        self.hypothesis_indices = h
        self._instance = instance
        self._pairs: tuple[GroupHypothesisPair, ...] | None = None

    def __len__(self) -> int:
        return self.group_indices.shape[0]

    @property
    def pairs(self) -> tuple[GroupHypothesisPair, ...]:
        if self._pairs is None:
            cache: dict[tuple[int, int], GroupHypothesisPair] = {}
            out = []
            for gi, hi in zip(self.group_indices, self.hypothesis_indices):
                key = (int(gi), int(hi))
                pair = cache.get(key)
                if pair is None:
                    pair = self._instance.pair(key[0], key[1])
                    cache[key] = pair
                out.append(pair)
            self._pairs = tuple(out)
        return self._pairs

    def __iter__(self) -> Iterator[GroupHypothesisPair]:
        return iter(self.pairs)

    def __getitem__(self, i: int) -> GroupHypothesisPair:
        return self.pairs[i]


def trace_arrays(
    instance: ProblemInstance, history: "Sequence[RoundRecord] | RegretArrays"
) -> RegretArrays:
    """Normalize a history to weight-1 regret-record arrays.

    Accepts either the harness's incrementally maintained arrays (returned
    as-is) or a sequence of per-round records.
    """
    if isinstance(history, RegretArrays):
        return history
    arrs = RegretArrays(capacity=max(16, len(history)))
    for rec in history:
        arrs.append(
            rec.x.index,
            instance.label_index(rec.y_hat),
            instance.label_index(rec.y),
            1.0,
        )
    return arrs


def draw_hallucinations(
    instance: ProblemInstance, n: int, rng: np.random.Generator
) -> list[Hallucination]:
    """Draw n (context, Gaussian weight) perturbation pairs.

    Contexts are uniform over the universe; the draw order (all contexts,
    then all weights) is part of the determinism contract shared with
    empirical_play.
    """
    if n < 1:
        raise ValueError(f"n must be >= 1, got {n}")
    z = rng.integers(0, instance.universe_size, size=n)
    gam = rng.standard_normal(n)
    return [
        Hallucination(z=instance.context(int(zi)), gamma=float(gi))
        for zi, gi in zip(z, gam)
    ]


def perturbation_value(
    pair: GroupHypothesisPair, hs: Sequence[Hallucination], eta: float
) -> float:
    """Perturbation term sum_j eta * gamma_j * g(z_j) * h(z_j) / sqrt(n)."""
    if not hs:
        raise ValueError("hallucination list must be nonempty")
    sqrt_n = math.sqrt(len(hs))
    total = 0.0
    g = pair.group
    h = pair.hypothesis
    for hal in hs:
        x = hal.z.index
        if group_indicator(g, x):
            total += (eta * hal.gamma) / sqrt_n * float(eval_hypothesis(h, x))
    return total


def _correlation_records(
    z: np.ndarray, weights: np.ndarray
) -> tuple[CorrelationRecord, ...]:
    return tuple(
        CorrelationRecord(z=int(zi), weight=float(wi)) for zi, wi in zip(z, weights)
    )


def ftpl_sample(
    instance: ProblemInstance,
    history: "Sequence[RoundRecord] | RegretArrays",
    cfg: FtplConfig,
    rng: np.random.Generator,
) -> GroupHypothesisPair:
    """One perturbed oracle call.

    Draws fresh hallucinations, attaches them as correlation records with
    weight eta * gamma / sqrt(n) on top of the weight-1 history records, and
    returns the joint maximizer.
    """
    z = rng.integers(0, instance.universe_size, size=cfg.n)
    gam = rng.standard_normal(cfg.n)
    weights = (cfg.eta * gam) / math.sqrt(cfg.n)
    query = OracleQuery(
        regret_records=trace_arrays(instance, history),
        correlation_records=_correlation_records(z, weights),
    )
    return opt_gh(instance, query)


def empirical_play(
    instance: ProblemInstance,
    history: "Sequence[RoundRecord] | RegretArrays",
    cfg: FtplConfig,
    rng: np.random.Generator,
    draw: str = "per-call",
) -> EmpiricalPlay:
    """Run the M perturbed oracle calls for one round.

    draw="per-call" consumes the rng exactly like M sequential ftpl_sample
    calls (contexts then weights, per call) and returns bit-identical pairs
    in the same order. draw="block" draws all contexts and then all weights
    in two batched rng calls; the play distribution is identical but the
    stream differs, so it is reserved for heavy diagnostics where per-call
    rng overhead dominates.
    """
    if draw not in ("per-call", "block"):
        raise ValueError(f"unknown draw mode {draw!r}")
    arrs = trace_arrays(instance, history)
    m = instance.universe_size
    n = cfg.n
    sqrt_n = math.sqrt(n)
    for _ in range(cfg.M):
        _count_call("opt_gh")
    with group_access_scope("oracle"):
        tabs = instance.tables()
        base = base_table(instance, *arrs.views())
        if draw == "per-call":
            corr = np.empty((cfg.M, m), dtype=np.float64)
            for i in range(cfg.M):
                z = rng.integers(0, m, size=n)
                gam = rng.standard_normal(n)
                w = (cfg.eta * gam) / sqrt_n
                corr[i] = np.bincount(z, weights=w, minlength=m)
        else:
            z = rng.integers(0, m, size=(cfg.M, n))
            gam = rng.standard_normal((cfg.M, n))
            w = (cfg.eta * gam) / sqrt_n
            flat = (np.arange(cfg.M, dtype=np.int64)[:, None] * m + z).ravel()
            corr = np.bincount(
                flat, weights=w.ravel(), minlength=cfg.M * m
            ).reshape(cfg.M, m)
        g_arr, h_arr, _ = _backend.scan_corr(
            base, tabs.label_val, corr, *scan_structure(instance)
        )
    return EmpiricalPlay(instance, g_arr, h_arr)
