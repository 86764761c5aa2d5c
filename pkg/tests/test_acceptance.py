"""End-to-end acceptance gate.

Each test pins one released guarantee: exact scan/brute-force agreement on
randomized queries, nonpositive per-round game values over full runs,
closed-form solver agreement with grid search, nonpositive
adversary-moves-first values under random losses, sublinear worst-group
regret growth, exact transductive identities, two-path agreement of the
perturbed objective, the per-sqrt(T_g) rate law across rare and frequent
groups, empirical-play convergence, per-round oracle budgets, bit-identical
reruns, and the zero group-enumeration guard.

The harness runs here are shared module fixtures because several guarantees
are asserted against the same output directories. Wall-clock ceilings are
asserted from the per-seed timings the reports already carry.
"""

import time

import numpy as np
import pytest

from grouplearn import (
    CorrelationRecord,
    FtplConfig,
    GameMatrix,
    Group,
    LaplaceNoise,
    LossTable,
    OracleQuery,
    RegretRecord,
    act,
    amf_value,
    brute_force_opt_gh,
    build_game_matrix,
    build_transductive_gamma,
    check_approximability,
    check_implementability,
    empirical_play,
    epsilon_gap,
    gftpl_sample,
    group_access_scope,
    import_groups_csv,
    import_rounds_csv,
    perturbed_query,
    query_objective,
    realizable_actions,
    run_experiment,
    solve_zero_sum,
    table_instance,
    threshold_interval_instance,
)
from grouplearn.ftpl import trace_arrays
from grouplearn.oracles import opt_gh_value

from conftest import make_trace

# Group ids in the 16-context threshold family (intervals in lexicographic
# order, low endpoint major): [0, 0] is row 0 and [8, 8] is row 100.
RARE_GROUP_ID = 0
FREQUENT_GROUP_ID = 100


def _sublinearity_doc(out_dir: str, horizon: int, seeds: list[int]) -> dict:
    """Smoothed-adversary run on the 64-context default family.

    The band [0, 15] carries its own concept, so no single threshold fits
    every group and the worst-group ledger stays under real pressure.
    """
    return {
        "run_name": "sublinearity",
        "instance": {"family": "threshold-interval", "universe_size": 64},
        "algorithm": "ftpl-smooth",
        "adversary": {
            "kind": "smooth-iid",
            "sigma": 1.0,
            "label_policy": {
                "kind": "group-dependent-concept",
                "concept": {"kind": "threshold", "theta": 32, "polarity": 1},
                "group_concepts": [
                    {
                        "group": {"kind": "interval", "lo": 0, "hi": 15},
                        "concept": {"kind": "threshold", "theta": 0, "polarity": 1},
                    }
                ],
                "noise_rate": 0.1,
            },
        },
        "horizon": horizon,
        "params": {"M": 50},
        "seeds": seeds,
        "out_dir": out_dir,
    }


def _scaling_doc(out_dir: str) -> dict:
    """Transductive run with one rare and one frequent singleton group.

    Context 0 carries 2.25% of the mass (T_g near sqrt(T) at T = 2000) and
    context 8 carries 50% (T_g near T/2, exactly at the smoothness cap for
    sigma = 0.125). Labels come from one fixed concept plus 20% noise so both
    probe groups face identical per-visit difficulty and the comparison
    isolates the dependence on T_g.
    """
    rest = (1.0 - 0.0225 - 0.5) / 14.0
    weights = [rest] * 16
    weights[0] = 0.0225
    weights[8] = 0.5
    return {
        "run_name": "scaling",
        "instance": {"family": "threshold-interval", "universe_size": 16},
        "algorithm": "gftpl-transductive",
        "adversary": {
            "kind": "smooth-iid",
            "sigma": 0.125,
            "contexts": list(range(16)),
            "weights": weights,
            "label_policy": {
                "kind": "fixed-concept-with-noise",
                "concept": {"kind": "threshold", "theta": 8, "polarity": 1},
                "noise_rate": 0.2,
            },
        },
        "horizon": 2000,
        "params": {"M": 50},
        "seeds": list(range(10)),
        "out_dir": out_dir,
    }


@pytest.fixture(scope="module")
def sublinearity_runs(tmp_path_factory):
    base = tmp_path_factory.mktemp("sublinearity")
    return {
        horizon: run_experiment(
            _sublinearity_doc(str(base / f"T{horizon}"), horizon, list(range(10)))
        )
        for horizon in (500, 1000, 2000)
    }


@pytest.fixture(scope="module")
def transductive_scaling_run(tmp_path_factory):
    return run_experiment(_scaling_doc(str(tmp_path_factory.mktemp("scaling"))))


def test_scan_agrees_with_brute_force_on_randomized_queries():
    started = time.perf_counter()
    inst = threshold_interval_instance(64)
    rng = np.random.default_rng(11)
    for _ in range(1000):
        total = int(rng.integers(20, 301))
        n_corr = int(rng.integers(0, 13))
        records = tuple(
            RegretRecord(
                x=int(rng.integers(64)),
                y_pred=int(rng.choice((1, -1))),
                y_true=int(rng.choice((1, -1))),
                weight=float(rng.uniform(-2.0, 2.0)),
            )
            for _ in range(total - n_corr)
        )
        corr = tuple(
            CorrelationRecord(
                z=int(rng.integers(64)), weight=float(rng.uniform(-2.0, 2.0))
            )
            for _ in range(n_corr)
        )
        query = OracleQuery(regret_records=records, correlation_records=corr)
        pair, value = opt_gh_value(inst, query)
        ref_pair, ref_value = brute_force_opt_gh(inst, query)
        assert abs(value - ref_value) <= 1e-12
        assert (pair.group_index, pair.hypothesis_index) == (
            ref_pair.group_index,
            ref_pair.hypothesis_index,
        )
    assert time.perf_counter() - started < 30.0


def test_game_values_stay_nonpositive_on_full_runs(sublinearity_runs):
    report = sublinearity_runs[2000]
    assert [s["status"] for s in report["seeds"]] == ["ok"] * 10
    assert sum(s["wall_time_s"] for s in report["seeds"]) < 300.0
    for seed_report in report["seeds"]:
        rows = import_rounds_csv(seed_report["rounds_csv"])
        assert len(rows) == 2000
        assert max(row["lp_value"] for row in rows) <= 1e-9


def test_closed_form_solver_tracks_grid_search():
    started = time.perf_counter()
    rng = np.random.default_rng(23)
    probs = np.linspace(0.0, 1.0, 10_001)[:, None]  # step 1e-4
    for _ in range(500):
        entries = rng.uniform(-1.0, 1.0, size=(2, 2))
        strategy = solve_zero_sum(GameMatrix(entries=entries, action_values=(1, -1)))
        mixed = probs * entries[0] + (1.0 - probs) * entries[1]
        grid = float(mixed.max(axis=1).min())
        assert abs(strategy.value - grid) <= 1e-3

    steps = 100  # simplex grid of step 1e-2
    simplex = np.array(
        [
            (i / steps, j / steps, (steps - i - j) / steps)
            for i in range(steps + 1)
            for j in range(steps + 1 - i)
        ]
    )
    for _ in range(200):
        entries = rng.uniform(-1.0, 1.0, size=(3, 3))
        strategy = solve_zero_sum(GameMatrix(entries=entries, action_values=(0, 1, 2)))
        grid = float((simplex @ entries).max(axis=1).min())
        assert abs(strategy.value - grid) <= 1e-2
    assert time.perf_counter() - started < 60.0


def test_adversary_moves_first_value_nonpositive_under_random_losses():
    started = time.perf_counter()
    rng = np.random.default_rng(29)
    for _ in range(20):
        raw = rng.uniform(0.0, 1.0, size=(2, 2))
        loss = LossTable(
            entries=(
                (float(raw[0, 0]), float(raw[0, 1])),
                (float(raw[1, 0]), float(raw[1, 1])),
            )
        )
        inst = threshold_interval_instance(64, loss=loss)
        for x in range(64):
            assert amf_value(x, inst) <= 1e-9
    assert time.perf_counter() - started < 120.0


def test_worst_group_regret_grows_sublinearly(sublinearity_runs):
    means = {}
    total_wall = 0.0
    for horizon, report in sublinearity_runs.items():
        aggregate = report["aggregate"]
        assert aggregate["seeds_ok"] == 10
        means[horizon] = aggregate["mean_worst_group_regret"]
        total_wall += sum(s["wall_time_s"] for s in report["seeds"])
    assert means[500] > 0.0
    assert means[1000] / means[500] <= 1.7
    assert means[2000] / means[1000] <= 1.7
    assert means[2000] <= 0.25 * 2000
    assert total_wall < 600.0


def _small_transductive_instance():
    """16 contexts with 8 groups and 8 table hypotheses, so |G|*|H| = 64."""
    rng = np.random.default_rng(6)
    tables = [
        tuple([1] * 16),
        tuple([-1] * 16),
        tuple(1 if i >= 8 else -1 for i in range(16)),
        tuple(-1 if i >= 8 else 1 for i in range(16)),
        tuple(1 if i % 2 == 0 else -1 for i in range(16)),
    ]
    while len(tables) < 8:
        tables.append(tuple(int(v) for v in rng.choice((1, -1), size=16)))
    groups = [
        Group(kind="interval", lo=0, hi=15),
        Group(kind="interval", lo=0, hi=7),
        Group(kind="interval", lo=8, hi=15),
        Group(kind="interval", lo=0, hi=3),
        Group(kind="interval", lo=4, hi=7),
        Group(kind="interval", lo=8, hi=11),
        Group(kind="interval", lo=12, hi=15),
        Group(kind="set", members=frozenset({0, 5, 10, 15})),
    ]
    return table_instance(
        universe_size=16, action_count=2, hypothesis_tables=tables, groups=groups
    )


def test_transductive_identities_hold_exactly():
    started = time.perf_counter()
    inst = _small_transductive_instance()
    assert inst.group_count * len(inst.hypotheses) <= 64
    pm = build_transductive_gamma(inst, list(range(16)))
    assert check_approximability(inst, pm) == 0.0
    assert check_implementability(inst, pm) == 0.0
    assert time.perf_counter() - started < 60.0


def test_perturbed_objective_two_path_agreement():
    started = time.perf_counter()
    inst = threshold_interval_instance(16)
    pm = build_transductive_gamma(inst, list(range(16)))
    rng = np.random.default_rng(37)
    triples = [
        (int(rng.integers(16)), int(rng.choice((1, -1))), int(rng.choice((1, -1))))
        for _ in range(50)
    ]
    history = make_trace(inst, triples)
    hist_query = OracleQuery(regret_records=trace_arrays(inst, history))
    for _ in range(200):
        nu = LaplaceNoise(rng.laplace(0.0, 1.0, pm.n_columns))
        eta_t = float(rng.uniform(0.05, 1.0))
        pair = gftpl_sample(inst, history, pm, eta_t, rng, noise=nu)
        query = perturbed_query(inst, history, pm, eta_t, nu)
        direct = query_objective(inst, query, pair)
        split = query_objective(inst, hist_query, pair) + float(
            np.dot(pm.row(inst, pair), nu.nu / eta_t)
        )
        assert abs(direct - split) <= 1e-9
    assert time.perf_counter() - started < 60.0


def test_rare_group_rate_tracks_frequent_group_rate(transductive_scaling_run):
    report = transductive_scaling_run
    assert [s["status"] for s in report["seeds"]] == ["ok"] * 10
    assert sum(s["wall_time_s"] for s in report["seeds"]) < 600.0

    inst = threshold_interval_instance(16)
    with group_access_scope("test-oracle"):
        groups = list(inst.groups)
    assert groups[RARE_GROUP_ID] == Group(kind="interval", lo=0, hi=0)
    assert groups[FREQUENT_GROUP_ID] == Group(kind="interval", lo=8, hi=8)

    rare, frequent, rare_tg, frequent_tg = [], [], [], []
    for seed_report in report["seeds"]:
        entries = import_groups_csv(seed_report["groups_csv"])
        rare.append(entries[RARE_GROUP_ID].regret_per_sqrt)
        frequent.append(entries[FREQUENT_GROUP_ID].regret_per_sqrt)
        rare_tg.append(entries[RARE_GROUP_ID].t_g)
        frequent_tg.append(entries[FREQUENT_GROUP_ID].t_g)
    assert 25 <= float(np.median(rare_tg)) <= 70  # close to sqrt(T)
    assert 900 <= float(np.median(frequent_tg)) <= 1100  # close to T / 2
    median_rare = float(np.median(rare))
    median_frequent = float(np.median(frequent))
    assert median_frequent > 0.0
    assert median_rare <= 3.0 * median_frequent


def test_empirical_play_gap_tolerance_and_scaling():
    started = time.perf_counter()
    inst = threshold_interval_instance(16)
    history = make_trace(inst, [(3, 1, -1), (12, -1, 1)])
    cfg = FtplConfig(eta=1.0, n=64, M=1)

    within = 0
    for trial in range(20):
        rng = np.random.default_rng(900 + trial)
        gap = epsilon_gap(inst, history, cfg, 10_000, 100_000, 5, 1, -1, rng)
        within += gap <= 0.05
    assert within >= 19

    ratios = []
    for trial in range(20):
        rng = np.random.default_rng(1900 + trial)
        small = float(
            np.mean(
                [
                    epsilon_gap(inst, history, cfg, 1_000, 10_000, 5, 1, -1, rng)
                    for _ in range(64)
                ]
            )
        )
        doubled = float(
            np.mean(
                [
                    epsilon_gap(inst, history, cfg, 2_000, 20_000, 5, 1, -1, rng)
                    for _ in range(64)
                ]
            )
        )
        ratios.append(small / doubled)
    median_ratio = float(np.median(ratios))
    assert 1.25 <= median_ratio <= 1.6
    assert time.perf_counter() - started < 300.0


def test_per_round_oracle_budgets_hold(sublinearity_runs, transductive_scaling_run):
    cases = [
        (sublinearity_runs[2000], 50, 2),  # M draws per round
        (transductive_scaling_run, 51, 2),  # M draws plus the rate probe
    ]
    for report, expected_gh, expected_h in cases:
        for seed_report in report["seeds"]:
            rows = import_rounds_csv(seed_report["rounds_csv"])
            assert all(row["opt_gh_calls"] == expected_gh for row in rows)
            assert all(row["opt_h_calls"] == expected_h for row in rows)
            assert seed_report["oracle_calls"] == {
                "opt_gh": expected_gh * len(rows),
                "opt_h": expected_h * len(rows),
            }


def test_identical_config_and_seed_reproduce_csvs_bit_for_bit(tmp_path):
    report_a = run_experiment(_sublinearity_doc(str(tmp_path / "first"), 2000, [0]))
    report_b = run_experiment(_sublinearity_doc(str(tmp_path / "second"), 2000, [0]))
    for key in ("rounds_csv", "groups_csv"):
        with open(report_a["seeds"][0][key], "rb") as fh:
            blob_a = fh.read()
        with open(report_b["seeds"][0][key], "rb") as fh:
            blob_b = fh.read()
        assert blob_a == blob_b


def test_learner_group_enumeration_stays_zero(
    sublinearity_runs, transductive_scaling_run
):
    for report in list(sublinearity_runs.values()) + [transductive_scaling_run]:
        for seed_report in report["seeds"]:
            assert seed_report["learner_group_access"] == 0

    # The same guard checked directly against the library primitives a
    # learner round is made of, under the default scope.
    inst = threshold_interval_instance(16)
    cfg = FtplConfig(eta=0.8, n=32, M=8)
    rng = np.random.default_rng(3)
    history = make_trace(inst, [(2, 1, -1), (9, -1, -1)])
    play = empirical_play(inst, history, cfg, rng)
    realizers = realizable_actions(inst, 5)
    gm = build_game_matrix(inst, play, 5, realizers)
    strategy = solve_zero_sum(gm)
    act(strategy, realizers, 5, rng)
    assert inst.group_access_counts.get("learner", 0) == 0
