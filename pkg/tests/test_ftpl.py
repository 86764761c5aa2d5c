"""Perturbed-leader sampling: determinism, perturbation values, call budget."""

import numpy as np
import pytest

from grouplearn import (
    FtplConfig,
    Group,
    brute_force_opt_gh,
    count_oracle_calls,
    empirical_play,
    ftpl_sample,
    query_objective,
    table_instance,
)
from grouplearn.ftpl import (
    Hallucination,
    draw_hallucinations,
    perturbation_value,
    trace_arrays,
)
from grouplearn.oracles import CorrelationRecord, OracleQuery, RegretArrays

from conftest import make_trace


def _pair_freqs(play):
    keys, counts = np.unique(
        play.group_indices * 10_000 + play.hypothesis_indices, return_counts=True
    )
    total = counts.sum()
    return {int(k): c / total for k, c in zip(keys, counts)}


def test_config_validation():
    with pytest.raises(ValueError):
        FtplConfig(eta=-0.5, n=4, M=1)
    with pytest.raises(ValueError):
        FtplConfig(eta=1.0, n=0, M=1)
    with pytest.raises(ValueError):
        FtplConfig(eta=1.0, n=4, M=0)
    with pytest.raises(ValueError):
        FtplConfig(eta=float("nan"), n=4, M=1)


def test_zero_eta_empty_history_ties_to_first_pair(inst4):
    cfg = FtplConfig(eta=0.0, n=4, M=1)
    pair = ftpl_sample(inst4, [], cfg, np.random.default_rng(0))
    assert pair.group_index == 0
    assert pair.hypothesis_index == 0


def test_zero_eta_two_round_trace(inst4):
    # History: predicted +1 at x=1 with true label -1 (a miss the benchmark
    # avoids), then a correct -1 at x=2. The maximizer is the group [0, 1]
    # paired with the smallest-index hypothesis predicting -1 at x=1.
    hist = make_trace(inst4, [(1, 1, -1), (2, -1, -1)])
    cfg = FtplConfig(eta=0.0, n=4, M=1)
    pair = ftpl_sample(inst4, hist, cfg, np.random.default_rng(0))
    assert pair.group_index == 1
    assert pair.hypothesis_index == 2
    arrs = trace_arrays(inst4, hist)
    value = query_objective(inst4, OracleQuery(regret_records=arrs), pair)
    best, best_value = brute_force_opt_gh(inst4, OracleQuery(regret_records=arrs))
    assert value == 1.0
    assert best_value == 1.0
    assert (best.group_index, best.hypothesis_index) == (1, 2)


def test_zero_eta_all_m_pairs_identical(inst4, trace3):
    cfg = FtplConfig(eta=0.0, n=4, M=7)
    play = empirical_play(inst4, trace3, cfg, np.random.default_rng(3))
    assert len(play) == 7
    assert len(set(zip(play.group_indices, play.hypothesis_indices))) == 1


def test_per_call_play_bit_identical_to_sequential_samples(inst8):
    hist = make_trace(inst8, [(0, 1, 1), (1, 1, -1), (2, -1, 1), (5, -1, -1)])
    cfg = FtplConfig(eta=1.5, n=8, M=20)
    play = empirical_play(inst8, hist, cfg, np.random.default_rng(42))
    rng2 = np.random.default_rng(42)
    singles = [ftpl_sample(inst8, hist, cfg, rng2) for _ in range(cfg.M)]
    assert [int(g) for g in play.group_indices] == [p.group_index for p in singles]
    assert [int(h) for h in play.hypothesis_indices] == [
        p.hypothesis_index for p in singles
    ]


def test_ftpl_sample_matches_brute_force_on_identical_query(inst4, trace3):
    # Feed the same hallucination weights through both routes.
    cfg = FtplConfig(eta=2.0, n=6, M=1)
    seed = 99
    pair = ftpl_sample(inst4, trace3, cfg, np.random.default_rng(seed))
    probe = np.random.default_rng(seed)
    z = probe.integers(0, 4, size=6)
    gam = probe.standard_normal(6)
    weights = (cfg.eta * gam) / np.sqrt(6)
    query = OracleQuery(
        regret_records=trace_arrays(inst4, trace3),
        correlation_records=tuple(
            CorrelationRecord(z=int(zi), weight=float(wi))
            for zi, wi in zip(z, weights)
        ),
    )
    best, _ = brute_force_opt_gh(inst4, query)
    assert (pair.group_index, pair.hypothesis_index) == (
        best.group_index,
        best.hypothesis_index,
    )


def test_perturbation_value_hand_case():
    inst = table_instance(
        universe_size=4,
        action_count=2,
        hypothesis_tables=[(1, 1, 1, -1)],
        groups=[
            Group(kind="set", members=frozenset({0, 1, 3})),
            Group(kind="interval", lo=0, hi=3),
        ],
    )
    pair = inst.pair(0, 0)
    hs = [
        Hallucination(z=inst.context(z), gamma=g)
        for z, g in [(0, 1.0), (1, -1.0), (2, 1.0), (3, 1.0)]
    ]
    assert perturbation_value(pair, hs, eta=2.0) == -1.0
    # Same number through the oracle objective with correlation records.
    query = OracleQuery(
        regret_records=RegretArrays(),
        correlation_records=tuple(
            CorrelationRecord(z=h.z.index, weight=2.0 * h.gamma / 2.0) for h in hs
        ),
    )
    assert query_objective(inst, query, pair) == -1.0


def test_perturbation_value_negating_gammas_negates():
    inst = table_instance(
        universe_size=4,
        action_count=2,
        hypothesis_tables=[(1, -1, 1, -1)],
        groups=[Group(kind="interval", lo=0, hi=3)],
    )
    pair = inst.pair(0, 0)
    rng = np.random.default_rng(11)
    hs = draw_hallucinations(inst, 16, rng)
    flipped = [Hallucination(z=h.z, gamma=-h.gamma) for h in hs]
    v = perturbation_value(pair, hs, eta=1.3)
    assert perturbation_value(pair, flipped, eta=1.3) == pytest.approx(-v, abs=1e-15)


def test_perturbation_value_rejects_empty(inst4):
    with pytest.raises(ValueError):
        perturbation_value(inst4.pair(0, 0), [], eta=1.0)


def test_draw_hallucinations_shape_and_determinism(inst8):
    a = draw_hallucinations(inst8, 32, np.random.default_rng(5))
    b = draw_hallucinations(inst8, 32, np.random.default_rng(5))
    assert len(a) == 32
    assert a == b
    assert all(0 <= h.z.index < 8 for h in a)
    with pytest.raises(ValueError):
        draw_hallucinations(inst8, 0, np.random.default_rng(0))


def test_hallucination_moments(inst8):
    hs = draw_hallucinations(inst8, 100_000, np.random.default_rng(21))
    gammas = np.array([h.gamma for h in hs])
    zs = np.array([h.z.index for h in hs])
    assert abs(gammas.mean()) < 0.02
    assert abs(gammas.std() - 1.0) < 0.02
    freqs = np.bincount(zs, minlength=8) / len(hs)
    assert np.all(np.abs(freqs - 0.125) < 0.01)


def test_empirical_play_oracle_budget(inst4, trace3):
    cfg = FtplConfig(eta=1.0, n=4, M=5)
    empirical_play(inst4, trace3, cfg, np.random.default_rng(0))
    assert count_oracle_calls("opt_gh") == 5
    assert count_oracle_calls("opt_h") == 0


def test_single_sample_counts_one_call(inst4, trace3):
    ftpl_sample(inst4, trace3, FtplConfig(eta=1.0, n=4, M=1), np.random.default_rng(0))
    assert count_oracle_calls("opt_gh") == 1


def test_block_draw_matches_per_call_distribution(inst4, trace3):
    cfg = FtplConfig(eta=1.0, n=8, M=4000)
    f_pc = _pair_freqs(empirical_play(inst4, trace3, cfg, np.random.default_rng(1)))
    f_bk = _pair_freqs(
        empirical_play(inst4, trace3, cfg, np.random.default_rng(2), draw="block")
    )
    keys = set(f_pc) | set(f_bk)
    worst = max(abs(f_pc.get(k, 0.0) - f_bk.get(k, 0.0)) for k in keys)
    assert worst < 0.05


def test_block_draw_zero_eta_collapses(inst4, trace3):
    cfg = FtplConfig(eta=0.0, n=4, M=9)
    play = empirical_play(inst4, trace3, cfg, np.random.default_rng(0), draw="block")
    assert len(set(zip(play.group_indices, play.hypothesis_indices))) == 1


def test_unknown_draw_mode_rejected(inst4, trace3):
    with pytest.raises(ValueError):
        empirical_play(
            inst4, trace3, FtplConfig(eta=1.0, n=4, M=1),
            np.random.default_rng(0), draw="batched",
        )


def test_pair_frequencies_stable_across_runs(inst4, trace3):
    cfg = FtplConfig(eta=1.0, n=8, M=10_000)
    f1 = _pair_freqs(empirical_play(inst4, trace3, cfg, np.random.default_rng(101)))
    f2 = _pair_freqs(empirical_play(inst4, trace3, cfg, np.random.default_rng(202)))
    keys = set(f1) | set(f2)
    worst = max(abs(f1.get(k, 0.0) - f2.get(k, 0.0)) for k in keys)
    assert worst < 0.05


def test_play_exposes_pairs_and_indices(inst4, trace3):
    cfg = FtplConfig(eta=0.7, n=4, M=6)
    play = empirical_play(inst4, trace3, cfg, np.random.default_rng(8))
    assert len(play.pairs) == 6
    for gi, hi, pair in zip(play.group_indices, play.hypothesis_indices, play.pairs):
        assert pair.group_index == int(gi)
        assert pair.hypothesis_index == int(hi)
    assert play[0] == play.pairs[0]
    assert not play.group_indices.flags.writeable


def test_trace_arrays_passthrough_and_conversion(inst4, trace3):
    arrs = trace_arrays(inst4, trace3)
    assert trace_arrays(inst4, arrs) is arrs
    xs, yps, yts, ws = arrs.views()
    assert xs.tolist() == [0, 1, 2]
    assert yps.tolist() == [inst4.label_index(1), inst4.label_index(1), inst4.label_index(-1)]
    assert yts.tolist() == [inst4.label_index(1), inst4.label_index(-1), inst4.label_index(1)]
    assert ws.tolist() == [1.0, 1.0, 1.0]
