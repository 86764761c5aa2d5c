"""Ready-made problem instances used by the harness and the test suite."""

from __future__ import annotations

from .core import Group, Hypothesis, LossTable, ProblemInstance

__all__ = ["threshold_interval_instance", "table_instance"]


def threshold_interval_instance(
    universe_size: int = 64,
    loss: LossTable | None = None,
    vc_hint: int | None = 1,
) -> ProblemInstance:
    """The default binary experiment family.

    Hypotheses: every threshold theta in {0..m} for polarity +1 (ascending
    theta), then the same for polarity -1, so |H| = 2(m+1). Groups: every
    inclusive interval [lo, hi] in lexicographic order, |G| = m(m+1)/2, which
    contains the full-universe interval. At m=64 this gives |H| = 130 and
    |G| = 2080.
    """
    m = universe_size
    hypotheses = [
        Hypothesis(kind="threshold", theta=theta, polarity=pol)
        for pol in (1, -1)
        for theta in range(m + 1)
    ]
    groups = [
        Group(kind="interval", lo=lo, hi=hi) for lo in range(m) for hi in range(lo, m)
    ]
    return ProblemInstance(
        universe_size=m,
        action_count=2,
        hypotheses=hypotheses,
        groups=groups,
        loss=loss if loss is not None else LossTable.zero_one(2),
        vc_hint=vc_hint,
    )


def table_instance(
    universe_size: int,
    action_count: int,
    hypothesis_tables: list[tuple[int, ...]],
    groups: list[Group],
    loss: LossTable | None = None,
) -> ProblemInstance:
    """Small explicit instance out of lookup tables (mostly for tests)."""
    hypotheses = [Hypothesis(kind="table", table=tuple(t)) for t in hypothesis_tables]
    return ProblemInstance(
        universe_size=universe_size,
        action_count=action_count,
        hypotheses=hypotheses,
        groups=groups,
        loss=loss if loss is not None else LossTable.zero_one(action_count),
    )
