"""Nature's side of the protocol: context distributions and label policies.

Context emission supports i.i.d. draws from a fixed distribution, a built-in
adaptive rule that stays within a declared smoothness budget while chasing
the learner's weak spots, and transductive runs restricted to a pre-revealed
context set. Label policies cover noisy fixed concepts, concepts that differ
inside designated groups, and a history-adaptive worst-case rule; none of
them may read the learner's current-round prediction unless the explicitly
flagged post-hoc variant is used.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .core import (
    Context,
    Group,
    Hypothesis,
    ProblemInstance,
    RoundRecord,
    eval_hypothesis,
    group_indicator,
)

SMOOTHNESS_TOLERANCE = 1e-12


@dataclass(frozen=True)
class ContextDistribution:
    """Explicit categorical distribution over the context universe."""

    probs: tuple[float, ...]

    def __post_init__(self) -> None:
        if not self.probs:
            raise ValueError("distribution needs at least one outcome")
        if any(p < 0.0 for p in self.probs):
            raise ValueError("probabilities must be nonnegative")
        total = math.fsum(self.probs)
        if abs(total - 1.0) > 1e-12:
            raise ValueError(f"probabilities sum to {total}, not 1")

    @classmethod
    def uniform(cls, m: int) -> "ContextDistribution":
        return cls(probs=tuple([1.0 / m] * m))

    @classmethod
    def point_mass(cls, m: int, index: int) -> "ContextDistribution":
        if not (0 <= index < m):
            raise ValueError(f"index {index} outside universe of size {m}")
        probs = [0.0] * m
        probs[index] = 1.0
        return cls(probs=tuple(probs))

    @classmethod
    def from_weights(cls, weights: Sequence[float]) -> "ContextDistribution":
        arr = [float(w) for w in weights]
        if any(w < 0 for w in arr):
            raise ValueError("weights must be nonnegative")
        total = math.fsum(arr)
        if total <= 0:
            raise ValueError("weights must have positive total")
        return cls(probs=tuple(w / total for w in arr))

    def as_array(self) -> np.ndarray:
        return np.asarray(self.probs, dtype=np.float64)


def validate_smoothness(dist: ContextDistribution, sigma: float) -> bool:
    """True iff no context's density exceeds 1/sigma times the uniform base."""
    if not (0.0 < sigma <= 1.0):
        raise ValueError(f"sigma must be in (0, 1], got {sigma}")
    m = len(dist.probs)
    return max(dist.probs) * m <= 1.0 / sigma + SMOOTHNESS_TOLERANCE


def sample_context(
    instance: ProblemInstance, dist: ContextDistribution, rng: np.random.Generator
) -> Context:
    """Draw one context, consuming exactly one uniform variate."""
    if len(dist.probs) != instance.universe_size:
        raise ValueError("distribution size does not match the universe")
    u = rng.random()
    acc = 0.0
    last = 0
    for i, p in enumerate(dist.probs):
        if p == 0.0:
            continue
        acc += p
        last = i
        if u < acc:
            return instance.context(i)
    return instance.context(last)


def adaptive_smooth_adversary(
    instance: ProblemInstance,
    history: Sequence[RoundRecord],
    sigma: float,
    rng: np.random.Generator | None = None,
    window: int = 100,
) -> ContextDistribution:
    """Regret-tilted context distribution under a hard smoothness cap.

    The rule scores each context by the learner's excess loss there over the
    best constant action within a trailing window, tilts mass exponentially
    toward high scores, then water-fills under the per-context cap 1/(sigma*m)
    so the returned distribution always passes validate_smoothness. The rule
    reads only learner-visible history fields (context, prediction, label);
    rng is part of the adversary interface but this rule is deterministic.
    """
    del rng
    if not (0.0 < sigma <= 1.0):
        raise ValueError(f"sigma must be in (0, 1], got {sigma}")
    m = instance.universe_size
    if sigma == 1.0 or not history:
        return ContextDistribution.uniform(m)
    loss = instance.loss.entries
    k = instance.action_count
    learner = np.zeros(m, dtype=np.float64)
    constant = np.zeros((k, m), dtype=np.float64)
    recent = history[-window:] if window > 0 else history
    for rec in recent:
        x = rec.x.index
        ti = instance.label_index(rec.y)
        learner[x] += loss[instance.label_index(rec.y_hat)][ti]
        for a in range(k):
            constant[a, x] += loss[a][ti]
    score = np.maximum(learner - constant.min(axis=0), 0.0)
    weights = np.exp(score - score.max())
    cap = 1.0 / (sigma * m)
    probs = _water_fill(weights, cap)
    return ContextDistribution(probs=tuple(probs.tolist()))


def _water_fill(weights: np.ndarray, cap: float) -> np.ndarray:
    """Scale weights to a distribution, clipping entries at cap exactly."""
    m = weights.shape[0]
    probs = np.zeros(m, dtype=np.float64)
    free = np.ones(m, dtype=bool)
    remaining = 1.0
    for _ in range(m):
        total = weights[free].sum()
        if total <= 0.0:
            probs[free] = remaining / free.sum()
            over = free & (probs > cap)
            if not over.any():
                break
        else:
            probs[free] = weights[free] * (remaining / total)
            over = free & (probs > cap)
            if not over.any():
                break
        probs[over] = cap
        free &= ~over
        remaining = 1.0 - probs[~free].sum()
        if not free.any():
            break
    # exact renormalization of the free coordinates absorbs float drift
    total = probs.sum()
    if total > 0:
        drift = 1.0 - total
        if free.any() and abs(drift) > 0:
            idx = np.flatnonzero(free)
            probs[idx[0]] += drift
    return probs


@dataclass(frozen=True)
class LabelPolicy:
    """How Nature chooses the true label each round.

    kind selects the rule: "fixed-concept-with-noise" plays a single target
    hypothesis and flips its label with probability noise_rate;
    "group-dependent-concept" plays a different target inside each designated
    group (first match wins, concept is the fallback), also with noise;
    "history-adaptive-worst-case" plays the flip of the learner's trailing
    majority prediction at the current context. posthoc switches the
    adaptive rule to condition on the learner's just-revealed prediction,
    which breaks the standard protocol order and exists only for stress
    tests.
    """

    kind: str
    concept: Hypothesis | None = None
    noise_rate: float = 0.0
    group_concepts: tuple[tuple[Group, Hypothesis], ...] = ()
    window: int = 100
    posthoc: bool = False

    _KINDS = (
        "fixed-concept-with-noise",
        "group-dependent-concept",
        "history-adaptive-worst-case",
    )

    def __post_init__(self) -> None:
        if self.kind not in self._KINDS:
            raise ValueError(f"unknown label policy kind {self.kind!r}")
        if not (0.0 <= self.noise_rate < 0.5):
            raise ValueError(f"noise_rate must be in [0, 0.5), got {self.noise_rate}")
        if self.kind in ("fixed-concept-with-noise", "group-dependent-concept"):
            if self.concept is None:
                raise ValueError(f"{self.kind} needs a concept hypothesis")
        if self.posthoc and self.kind != "history-adaptive-worst-case":
            raise ValueError("posthoc only applies to history-adaptive-worst-case")


def choose_label(
    instance: ProblemInstance,
    policy: LabelPolicy,
    history: Sequence[RoundRecord],
    x: Context,
    rng: np.random.Generator,
    y_hat: int | None = None,
) -> int:
    """Nature's label for the current round.

    y_hat must be omitted unless the policy is explicitly post-hoc; the
    standard protocol chooses the label before seeing the learner's
    prediction, and this guard keeps accidental leakage out of experiments.
    """
    if policy.posthoc:
        if y_hat is None:
            raise ValueError("post-hoc policy needs the revealed prediction")
        loss = instance.loss.entries
        pred_idx = instance.label_index(y_hat)
        best = instance.action_values[0]
        best_loss = -1.0
        for a_idx, a in enumerate(instance.action_values):
            cost = loss[pred_idx][a_idx]
            if cost > best_loss:
                best_loss = cost
                best = a
        return best
    if y_hat is not None:
        raise ValueError("only post-hoc policies may see the prediction")
    if policy.kind == "fixed-concept-with-noise":
        label = eval_hypothesis(policy.concept, x)
        return _maybe_flip(label, policy.noise_rate, rng)
    if policy.kind == "group-dependent-concept":
        concept = policy.concept
        for g, h in policy.group_concepts:
            if group_indicator(g, x.index):
                concept = h
                break
        label = eval_hypothesis(concept, x)
        return _maybe_flip(label, policy.noise_rate, rng)
    # history-adaptive-worst-case: flip of the trailing majority prediction
    recent = history[-policy.window :] if policy.window > 0 else history
    balance = 0
    for rec in recent:
        if rec.x.index == x.index:
            balance += 1 if rec.y_hat == 1 else -1
    guess = 1 if balance >= 0 else -1
    return -guess


def _maybe_flip(label: int, noise_rate: float, rng: np.random.Generator) -> int:
    """Flip a binary label with the given probability; always consumes rng."""
    flip = rng.random() < noise_rate
    return -label if flip else label


@dataclass(frozen=True)
class TransductiveSet:
    """Context subset revealed to the learner before round 1."""

    contexts: tuple[int, ...]

    def __post_init__(self) -> None:
        if not self.contexts:
            raise ValueError("transductive set must be nonempty")
        if len(set(self.contexts)) != len(self.contexts):
            raise ValueError("transductive set has duplicate contexts")

    def validate(self, instance: ProblemInstance) -> None:
        for x in self.contexts:
            if not (0 <= x < instance.universe_size):
                raise ValueError(f"context {x} outside universe")

    def distribution(
        self, instance: ProblemInstance, weights: Sequence[float] | None = None
    ) -> ContextDistribution:
        """Distribution over the full universe supported on this set."""
        if weights is None:
            weights = [1.0] * len(self.contexts)
        if len(weights) != len(self.contexts):
            raise ValueError("one weight per revealed context required")
        total = math.fsum(float(w) for w in weights)
        if total <= 0:
            raise ValueError("weights must have positive total")
        probs = [0.0] * instance.universe_size
        for x, w in zip(self.contexts, weights):
            if w < 0:
                raise ValueError("weights must be nonnegative")
            probs[x] = float(w) / total
        return ContextDistribution(probs=tuple(probs))

    def contains(self, x: int) -> bool:
        return x in self.contexts
