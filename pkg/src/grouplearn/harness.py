"""Experiment runner: config parsing, the protocol loop, sweeps, reports.

A run executes the four-step protocol for each seed: the adversary emits a
context, the player builds its empirical play and acts, the adversary
reveals the label, and the ledger records the round. Every randomized piece
draws from its own child stream of one seed, so the whole artifact's output
is a pure function of (config, seed list). Per-round oracle-call budgets and
the learner's zero-group-enumeration guarantee are asserted on every round
of every run.
"""

from __future__ import annotations

import itertools
import json
import math
import os
import time
from dataclasses import dataclass

import numpy as np

from .baselines import ErmBatchLearner, online_batch_wrapper, ftl_predict
from .core import (
    Hypothesis,
    ProblemInstance,
    RoundRecord,
    _group_from_dict,
    _hypothesis_from_dict,
    instance_from_dict,
)
from .diagnostics import amf_value, epsilon_gap
from .environments import (
    ContextDistribution,
    LabelPolicy,
    TransductiveSet,
    adaptive_smooth_adversary,
    choose_label,
    sample_context,
    validate_smoothness,
)
from .families import threshold_interval_instance
from .ftpl import FtplConfig, empirical_play
from .game import act, build_game_matrix, realizable_actions, solve_zero_sum
from .gftpl import (
    GftplConfig,
    LaplaceNoise,
    build_transductive_gamma,
    gftpl_empirical_play,
)
from .ledger import GROUPS_SCHEMA_VERSION, ROUNDS_SCHEMA_VERSION, RunLedger
from .oracles import RegretArrays, call_counts

__all__ = [
    "ALGORITHMS",
    "ConfigError",
    "ExperimentConfig",
    "TheoryParams",
    "config_from_dict",
    "config_to_dict",
    "theory_params",
    "build_instance",
    "run_experiment",
    "sweep",
]

REPORT_SCHEMA_VERSION = "report-v1"
ALGORITHMS = ("ftpl-smooth", "gftpl-transductive", "ftl", "online-batch-wrapper")
ADVERSARY_KINDS = ("smooth-iid", "adaptive-smooth")
INSTANCE_FAMILIES = ("threshold-interval", "inline")


class ConfigError(ValueError):
    """Invalid experiment configuration, rejected before any work."""


@dataclass(frozen=True)
class InstanceSpec:
    family: str = "threshold-interval"
    universe_size: int = 64
    document: dict | None = None


@dataclass(frozen=True)
class AdversarySpec:
    kind: str
    sigma: float
    label_policy: LabelPolicy
    weights: tuple[float, ...] | None = None
    contexts: tuple[int, ...] | None = None
    window: int = 100


@dataclass(frozen=True)
class ExperimentConfig:
    """Resolved, validated description of one experiment."""

    run_name: str
    instance: InstanceSpec
    algorithm: str
    adversary: AdversarySpec
    horizon: int
    eta: float
    n: int
    M: int
    gamma_approx: float
    rate_constant: float
    seeds: tuple[int, ...]
    out_dir: str
    diagnostics: bool = False
    freeze_gftpl_noise: bool = False


@dataclass(frozen=True)
class TheoryParams:
    """Analysis-scale parameter prescriptions; advisory, never enforced."""

    M_theory: float
    n_theory: float
    eta_theory: float
    delta: float


def theory_params(T: int, sigma: float, K: int) -> TheoryParams:
    """Prescribed perturbation scale, hallucination count, and call budget.

    delta is the exponent slack that makes M = T^(1+delta) samples enough
    for the union bound over rounds; n and eta follow the smoothed-setting
    prescription n = T/sqrt(sigma), eta = sqrt(T*log(T/sigma)/sigma).
    """
    if T < 2:
        raise ValueError(f"T must be >= 2, got {T}")
    if not (0.0 < sigma <= 1.0):
        raise ValueError(f"sigma must be in (0, 1], got {sigma}")
    if K < 2:
        raise ValueError(f"K must be >= 2, got {K}")
    delta = math.log(2.0 * math.log(K) + 0.5 * math.log(T)) / (2.0 * math.log(T))
    m_theory = float(T) ** (1.0 + delta)
    n_theory = T / math.sqrt(sigma)
    eta_theory = math.sqrt(T * math.log(T / sigma) / sigma)
    return TheoryParams(
        M_theory=m_theory, n_theory=n_theory, eta_theory=eta_theory, delta=delta
    )


def _desk_eta(T: int, sigma: float, K: int) -> float:
    """Desk-scale default perturbation: an eighth of the theory value."""
    return theory_params(T, sigma, K).eta_theory / 8.0


def _desk_n(T: int, sigma: float) -> int:
    """Desk-scale default hallucination count: T/sqrt(sigma), clamped."""
    return int(max(16, min(4096, math.ceil(T / math.sqrt(sigma)))))


# ---------------------------------------------------------------------------
# Config parsing
# ---------------------------------------------------------------------------


def _require_keys(doc: dict, allowed: set[str], where: str) -> None:
    unknown = set(doc) - allowed
    if unknown:
        raise ConfigError(f"unknown key(s) {sorted(unknown)} in {where}")


def _parse_instance(doc: dict) -> InstanceSpec:
    _require_keys(doc, {"family", "universe_size", "document"}, "instance")
    family = doc.get("family", "threshold-interval")
    if family not in INSTANCE_FAMILIES:
        raise ConfigError(
            f"instance.family must be one of {INSTANCE_FAMILIES}, got {family!r}"
        )
    if family == "inline":
        if "document" not in doc:
            raise ConfigError("instance.family 'inline' needs instance.document")
        inner = doc["document"]
        if not isinstance(inner, dict) or "universe_size" not in inner:
            raise ConfigError("instance.document must be an instance object")
        return InstanceSpec(
            family="inline",
            universe_size=int(inner["universe_size"]),
            document=inner,
        )
    m = int(doc.get("universe_size", 64))
    if m < 2:
        raise ConfigError(f"instance.universe_size must be >= 2, got {m}")
    return InstanceSpec(family=family, universe_size=m)


def _parse_label_policy(doc: dict) -> LabelPolicy:
    _require_keys(
        doc,
        {"kind", "concept", "noise_rate", "group_concepts", "window", "posthoc"},
        "adversary.label_policy",
    )
    if "kind" not in doc:
        raise ConfigError("adversary.label_policy needs a kind")
    concept: Hypothesis | None = None
    if doc.get("concept") is not None:
        concept = _hypothesis_from_dict(doc["concept"])
    group_concepts = tuple(
        (_group_from_dict(item["group"]), _hypothesis_from_dict(item["concept"]))
        for item in doc.get("group_concepts", ())
    )
    try:
        return LabelPolicy(
            kind=doc["kind"],
            concept=concept,
            noise_rate=float(doc.get("noise_rate", 0.0)),
            group_concepts=group_concepts,
            window=int(doc.get("window", 100)),
            posthoc=bool(doc.get("posthoc", False)),
        )
    except ValueError as e:
        raise ConfigError(f"adversary.label_policy: {e}") from None


def _parse_adversary(doc: dict, universe_size: int) -> AdversarySpec:
    _require_keys(
        doc,
        {"kind", "sigma", "label_policy", "weights", "contexts", "window"},
        "adversary",
    )
    kind = doc.get("kind")
    if kind not in ADVERSARY_KINDS:
        raise ConfigError(
            f"adversary.kind must be one of {ADVERSARY_KINDS}, got {kind!r}"
        )
    sigma = float(doc.get("sigma", 1.0))
    if not (0.0 < sigma <= 1.0):
        raise ConfigError(f"adversary.sigma must be in (0, 1], got {sigma}")
    if "label_policy" not in doc:
        raise ConfigError("adversary needs a label_policy")
    policy = _parse_label_policy(doc["label_policy"])

    contexts = None
    if doc.get("contexts") is not None:
        contexts = tuple(int(c) for c in doc["contexts"])
        if len(set(contexts)) != len(contexts):
            raise ConfigError("adversary.contexts has duplicates")
        for c in contexts:
            if not (0 <= c < universe_size):
                raise ConfigError(f"adversary.contexts entry {c} outside universe")
        if kind == "adaptive-smooth":
            raise ConfigError(
                "adversary.contexts only applies to smooth-iid (the adaptive "
                "adversary ranges over the full universe)"
            )

    weights = None
    if doc.get("weights") is not None:
        if kind != "smooth-iid":
            raise ConfigError("adversary.weights only applies to smooth-iid")
        weights = tuple(float(w) for w in doc["weights"])
        expected = len(contexts) if contexts is not None else universe_size
        if len(weights) != expected:
            raise ConfigError(
                f"adversary.weights must have {expected} entries, got {len(weights)}"
            )
        if any(w < 0 for w in weights) or sum(weights) <= 0:
            raise ConfigError("adversary.weights must be nonnegative, positive total")
        # smoothness of the resolved fixed distribution, checked before work
        total = math.fsum(weights)
        probs = [0.0] * universe_size
        support = contexts if contexts is not None else range(universe_size)
        for c, w in zip(support, weights):
            probs[c] = w / total
        if max(probs) * universe_size > 1.0 / sigma + 1e-12:
            raise ConfigError(
                f"adversary.weights give max density {max(probs) * universe_size:.4f}"
                f" over uniform, which exceeds 1/sigma = {1.0 / sigma:.4f}"
            )

    window = int(doc.get("window", 100))
    if window < 1:
        raise ConfigError(f"adversary.window must be >= 1, got {window}")
    return AdversarySpec(
        kind=kind,
        sigma=sigma,
        label_policy=policy,
        weights=weights,
        contexts=contexts,
        window=window,
    )


def config_from_dict(doc: dict) -> ExperimentConfig:
    """Validate and resolve a JSON config document.

    Raises ConfigError with a field-level message on the first problem;
    nothing is created on disk and no computation starts on a bad config.
    """
    if not isinstance(doc, dict):
        raise ConfigError(f"config must be a JSON object, got {type(doc).__name__}")
    _require_keys(
        doc,
        {
            "run_name",
            "instance",
            "algorithm",
            "adversary",
            "horizon",
            "params",
            "seeds",
            "out_dir",
            "diagnostics",
            "freeze_gftpl_noise",
        },
        "config",
    )
    run_name = str(doc.get("run_name", "run"))
    if not run_name or any(ch in run_name for ch in "/\\"):
        raise ConfigError(f"run_name must be a nonempty plain name, got {run_name!r}")

    instance = _parse_instance(doc.get("instance", {}))

    algorithm = doc.get("algorithm")
    if algorithm not in ALGORITHMS:
        raise ConfigError(f"algorithm must be one of {ALGORITHMS}, got {algorithm!r}")

    if "horizon" not in doc:
        raise ConfigError("config needs a horizon")
    horizon = int(doc["horizon"])
    if horizon < 1:
        raise ConfigError(f"horizon must be >= 1, got {horizon}")

    if "adversary" not in doc:
        raise ConfigError("config needs an adversary")
    adversary = _parse_adversary(doc["adversary"], instance.universe_size)

    if algorithm == "gftpl-transductive" and adversary.contexts is None:
        raise ConfigError(
            "gftpl-transductive needs adversary.contexts (the revealed set)"
        )

    params = doc.get("params", {})
    _require_keys(
        params, {"eta", "n", "M", "gamma_approx", "rate_constant"}, "params"
    )
    big_m = int(params.get("M", 50))
    if big_m < 1:
        raise ConfigError(f"params.M must be >= 1, got {big_m}")
    # K for the desk eta default: hypothesis count of the resolved family
    if instance.family == "inline":
        k_hyp = max(2, len(instance.document.get("hypotheses", ())))
    else:
        k_hyp = 2 * instance.universe_size + 2
    eta = float(params.get("eta", _desk_eta(max(2, horizon), adversary.sigma, k_hyp)))
    if eta < 0.0:
        raise ConfigError(f"params.eta must be >= 0, got {eta}")
    n = int(params.get("n", _desk_n(max(2, horizon), adversary.sigma)))
    if n < 1:
        raise ConfigError(f"params.n must be >= 1, got {n}")
    gamma_approx = float(params.get("gamma_approx", 1.0))
    rate_constant = float(params.get("rate_constant", 1.0))
    if gamma_approx <= 0.0:
        raise ConfigError(f"params.gamma_approx must be > 0, got {gamma_approx}")
    if rate_constant <= 0.0:
        raise ConfigError(f"params.rate_constant must be > 0, got {rate_constant}")

    seeds_doc = doc.get("seeds")
    if not seeds_doc:
        raise ConfigError("config needs a nonempty seeds list")
    seeds = tuple(int(s) for s in seeds_doc)

    out_dir = str(doc.get("out_dir", os.path.join("runs", run_name)))
    return ExperimentConfig(
        run_name=run_name,
        instance=instance,
        algorithm=algorithm,
        adversary=adversary,
        horizon=horizon,
        eta=eta,
        n=n,
        M=big_m,
        gamma_approx=gamma_approx,
        rate_constant=rate_constant,
        seeds=seeds,
        out_dir=out_dir,
        diagnostics=bool(doc.get("diagnostics", False)),
        freeze_gftpl_noise=bool(doc.get("freeze_gftpl_noise", False)),
    )


def config_to_dict(cfg: ExperimentConfig) -> dict:
    """Resolved config as a JSON-ready document (defaults made explicit)."""
    from .core import _group_to_dict, _hypothesis_to_dict

    policy = cfg.adversary.label_policy
    policy_doc: dict = {"kind": policy.kind, "noise_rate": policy.noise_rate}
    if policy.concept is not None:
        policy_doc["concept"] = _hypothesis_to_dict(policy.concept)
    if policy.group_concepts:
        policy_doc["group_concepts"] = [
            {"group": _group_to_dict(g), "concept": _hypothesis_to_dict(h)}
            for g, h in policy.group_concepts
        ]
    policy_doc["window"] = policy.window
    if policy.posthoc:
        policy_doc["posthoc"] = True

    adversary_doc: dict = {
        "kind": cfg.adversary.kind,
        "sigma": cfg.adversary.sigma,
        "label_policy": policy_doc,
        "window": cfg.adversary.window,
    }
    if cfg.adversary.weights is not None:
        adversary_doc["weights"] = list(cfg.adversary.weights)
    if cfg.adversary.contexts is not None:
        adversary_doc["contexts"] = list(cfg.adversary.contexts)

    instance_doc: dict = {
        "family": cfg.instance.family,
        "universe_size": cfg.instance.universe_size,
    }
    if cfg.instance.document is not None:
        instance_doc["document"] = cfg.instance.document

    return {
        "run_name": cfg.run_name,
        "instance": instance_doc,
        "algorithm": cfg.algorithm,
        "adversary": adversary_doc,
        "horizon": cfg.horizon,
        "params": {
            "eta": cfg.eta,
            "n": cfg.n,
            "M": cfg.M,
            "gamma_approx": cfg.gamma_approx,
            "rate_constant": cfg.rate_constant,
        },
        "seeds": list(cfg.seeds),
        "out_dir": cfg.out_dir,
        "diagnostics": cfg.diagnostics,
        "freeze_gftpl_noise": cfg.freeze_gftpl_noise,
    }


def build_instance(spec: InstanceSpec) -> ProblemInstance:
    if spec.family == "inline":
        return instance_from_dict(spec.document)
    return threshold_interval_instance(universe_size=spec.universe_size)


# ---------------------------------------------------------------------------
# The protocol loop
# ---------------------------------------------------------------------------

_EXPECTED_CALLS = {
    # algorithm -> (opt_gh per round as fn of M, opt_h per round)
    "ftpl-smooth": (lambda m: m, 2),
    "gftpl-transductive": (lambda m: m + 1, 2),
    "ftl": (lambda m: 0, 1),
    "online-batch-wrapper": (lambda m: 0, 1),
}


def _learner_counts() -> tuple[int, int]:
    counts = call_counts()
    return counts.get(("learner", "opt_gh"), 0), counts.get(("learner", "opt_h"), 0)


def _run_seed(
    cfg: ExperimentConfig, instance: ProblemInstance, seed: int, ledger: RunLedger
) -> dict:
    """One seed's full protocol loop; fills the ledger, returns seed stats."""
    streams = np.random.SeedSequence(seed).spawn(5)
    ctx_rng = np.random.default_rng(streams[0])
    label_rng = np.random.default_rng(streams[1])
    player_rng = np.random.default_rng(streams[2])
    actor_rng = np.random.default_rng(streams[3])
    diag_rng = np.random.default_rng(streams[4])

    adv = cfg.adversary
    policy = adv.label_policy
    fixed_dist: ContextDistribution | None = None
    if adv.kind == "smooth-iid":
        if adv.contexts is not None:
            tset = TransductiveSet(contexts=adv.contexts)
            tset.validate(instance)
            fixed_dist = tset.distribution(instance, adv.weights)
        elif adv.weights is not None:
            fixed_dist = ContextDistribution.from_weights(adv.weights)
        else:
            fixed_dist = ContextDistribution.uniform(instance.universe_size)

    ftpl_cfg = gftpl_cfg = None
    pm = frozen_noise = None
    batch_learner = None
    if cfg.algorithm == "ftpl-smooth":
        ftpl_cfg = FtplConfig(eta=cfg.eta, n=cfg.n, M=cfg.M)
    elif cfg.algorithm == "gftpl-transductive":
        gftpl_cfg = GftplConfig(
            M=cfg.M,
            gamma_approx=cfg.gamma_approx,
            rate_constant=cfg.rate_constant,
            freeze_noise=cfg.freeze_gftpl_noise,
        )
        pm = build_transductive_gamma(instance, adv.contexts)
        if cfg.freeze_gftpl_noise:
            frozen_noise = LaplaceNoise(player_rng.laplace(0.0, 1.0, pm.n_columns))
    elif cfg.algorithm == "online-batch-wrapper":
        batch_learner = ErmBatchLearner()

    trace = RegretArrays(capacity=max(64, cfg.horizon))
    expected_gh = _EXPECTED_CALLS[cfg.algorithm][0](cfg.M)
    expected_h = _EXPECTED_CALLS[cfg.algorithm][1]
    access_before = instance.group_access_counts.get("learner", 0)

    for t in range(1, cfg.horizon + 1):
        # step 1: the adversary commits to a smooth context distribution
        if fixed_dist is not None:
            dist = fixed_dist
        else:
            dist = adaptive_smooth_adversary(
                instance, ledger.rounds, adv.sigma, window=adv.window
            )
        if not validate_smoothness(dist, adv.sigma):
            raise RuntimeError(
                f"round {t}: adversary distribution violates {adv.sigma}-smoothness"
            )
        x_ctx = sample_context(instance, dist, ctx_rng)
        xi = x_ctx.index

        # step 2: the player builds its empirical play and commits an action
        gh0, h0 = _learner_counts()
        if cfg.algorithm == "ftpl-smooth":
            play = empirical_play(instance, trace, ftpl_cfg, player_rng)
            realizers = realizable_actions(instance, x_ctx)
            strategy = solve_zero_sum(
                build_game_matrix(instance, play, x_ctx, realizers)
            )
            y_hat, _ = act(strategy, realizers, x_ctx, actor_rng)
            bernoulli_p = strategy.probs[0]
            lp_value = strategy.value
        elif cfg.algorithm == "gftpl-transductive":
            round_out = gftpl_empirical_play(
                instance, trace, pm, gftpl_cfg, player_rng, frozen_noise=frozen_noise
            )
            realizers = realizable_actions(instance, x_ctx)
            strategy = solve_zero_sum(
                build_game_matrix(instance, round_out.play, x_ctx, realizers)
            )
            y_hat, _ = act(strategy, realizers, x_ctx, actor_rng)
            bernoulli_p = strategy.probs[0]
            lp_value = strategy.value
        elif cfg.algorithm == "ftl":
            y_hat = ftl_predict(instance, ledger.rounds, x_ctx)
            bernoulli_p = 1.0 if y_hat == instance.action_values[0] else 0.0
            lp_value = float("nan")
        else:  # online-batch-wrapper
            y_hat = online_batch_wrapper(instance, batch_learner, ledger.rounds, x_ctx)
            bernoulli_p = 1.0 if y_hat == instance.action_values[0] else 0.0
            lp_value = float("nan")
        gh1, h1 = _learner_counts()
        if (gh1 - gh0, h1 - h0) != (expected_gh, expected_h):
            raise RuntimeError(
                f"round {t}: {cfg.algorithm} made {gh1 - gh0} opt_gh and "
                f"{h1 - h0} opt_h calls, expected {expected_gh} and {expected_h}"
            )

        # step 3: the adversary reveals the label
        y = choose_label(
            instance,
            policy,
            ledger.rounds,
            x_ctx,
            label_rng,
            y_hat=y_hat if policy.posthoc else None,
        )

        # step 4: the ledger records the completed round
        amf = eps = None
        if cfg.diagnostics:
            if instance.action_count == 2:
                amf = amf_value(x_ctx, instance)
            if cfg.algorithm == "ftpl-smooth":
                eps = epsilon_gap(
                    instance,
                    trace,
                    ftpl_cfg,
                    cfg.M,
                    10 * cfg.M,
                    x_ctx,
                    instance.action_values[0],
                    instance.action_values[-1],
                    diag_rng,
                )
        record = RoundRecord(
            t=t, x=x_ctx, y_hat=y_hat, y=y, bernoulli_p=bernoulli_p, lp_value=lp_value
        )
        ledger.record_round(
            record, gh1 - gh0, h1 - h0, amf_value=amf, epsilon_estimate=eps
        )
        trace.append(xi, instance.label_index(y_hat), instance.label_index(y))

    learner_access = instance.group_access_counts.get("learner", 0) - access_before
    if learner_access != 0:
        raise RuntimeError(
            f"learner code enumerated the group list {learner_access} time(s)"
        )

    entries = ledger.entries()
    worst = max(entries, key=lambda e: (e.regret, -e.group_id))
    seed_report = {
        "seed": seed,
        "run_id": ledger.run_id,
        "status": "ok",
        "rounds": ledger.horizon,
        "worst_group": {
            "group_id": worst.group_id,
            "t_g": worst.t_g,
            "regret": worst.regret,
            "regret_per_sqrt": worst.regret_per_sqrt,
        },
        "learner_loss_total": entries[_full_group_index(entries)].learner_loss,
        "oracle_calls": {
            "opt_gh": expected_gh * cfg.horizon,
            "opt_h": expected_h * cfg.horizon,
        },
        "learner_group_access": learner_access,
    }
    if batch_learner is not None:
        seed_report["retrain_count"] = batch_learner.retrain_count
    return seed_report


def _full_group_index(entries) -> int:
    """Index of the group active every round (max t_g); the full group."""
    best = 0
    for i, e in enumerate(entries):
        if e.t_g > entries[best].t_g:
            best = i
    return best


def run_experiment(cfg: "ExperimentConfig | dict") -> dict:
    """Run every seed of one experiment and write CSVs plus a JSON report.

    Invalid configs are rejected with a descriptive ConfigError before
    anything touches the filesystem. A failure inside one seed (an oracle
    error, a violated budget) dumps that seed's partial trace and moves on
    to the next seed; the report marks the failed seed.
    """
    if isinstance(cfg, dict):
        cfg = config_from_dict(cfg)
    instance = build_instance(cfg.instance)
    os.makedirs(cfg.out_dir, exist_ok=True)

    k_hyp = len(instance.hypotheses)
    theory = theory_params(max(2, cfg.horizon), cfg.adversary.sigma, max(2, k_hyp))
    report: dict = {
        "schema": REPORT_SCHEMA_VERSION,
        "run_name": cfg.run_name,
        "config": config_to_dict(cfg),
        "csv_schemas": {"rounds": ROUNDS_SCHEMA_VERSION, "groups": GROUPS_SCHEMA_VERSION},
        "instance": {
            "universe_size": instance.universe_size,
            "hypothesis_count": k_hyp,
            "group_count": instance.group_count,
        },
        "alpha_regret_term": 0.0,
        "theory_params": {
            "M_theory": theory.M_theory,
            "n_theory": theory.n_theory,
            "eta_theory": theory.eta_theory,
            "delta": theory.delta,
        },
        "desk_params": {"M": cfg.M, "n": cfg.n, "eta": cfg.eta},
        "theory_gap": {
            "M_ratio": cfg.M / theory.M_theory,
            "n_ratio": cfg.n / theory.n_theory,
            "eta_ratio": cfg.eta / theory.eta_theory,
        },
        "seeds": [],
    }

    for seed in cfg.seeds:
        started = time.perf_counter()
        run_id = f"{cfg.run_name}-s{seed}"
        ledger = RunLedger(instance, run_id=run_id, diagnostics=cfg.diagnostics)
        try:
            seed_report = _run_seed(cfg, instance, seed, ledger)
            rounds_path, groups_path = ledger.export_csv(cfg.out_dir)
            seed_report["rounds_csv"] = rounds_path
            seed_report["groups_csv"] = groups_path
        except Exception as e:  # partial-trace dump, then continue
            seed_report = {
                "seed": seed,
                "run_id": run_id,
                "status": "error",
                "error": f"{type(e).__name__}: {e}",
                "completed_rounds": ledger.horizon,
            }
            try:
                rp, gp = ledger.export_csv(cfg.out_dir)
                seed_report["partial_rounds_csv"] = rp
                seed_report["partial_groups_csv"] = gp
            except Exception as dump_err:
                seed_report["dump_error"] = str(dump_err)
        seed_report["wall_time_s"] = time.perf_counter() - started
        report["seeds"].append(seed_report)

    ok = [s for s in report["seeds"] if s["status"] == "ok"]
    if ok:
        regrets = [s["worst_group"]["regret"] for s in ok]
        per_sqrts = [s["worst_group"]["regret_per_sqrt"] for s in ok]
        report["aggregate"] = {
            "seeds_ok": len(ok),
            "seeds_failed": len(report["seeds"]) - len(ok),
            "mean_worst_group_regret": float(np.mean(regrets)),
            "median_worst_group_regret": float(np.median(regrets)),
            "mean_worst_group_regret_per_sqrt": float(np.mean(per_sqrts)),
        }
    else:
        report["aggregate"] = {
            "seeds_ok": 0,
            "seeds_failed": len(report["seeds"]),
            "mean_worst_group_regret": None,
            "median_worst_group_regret": None,
            "mean_worst_group_regret_per_sqrt": None,
        }

    report_path = os.path.join(cfg.out_dir, f"{cfg.run_name}_report.json")
    with open(report_path, "w", encoding="utf-8") as fh:
        json.dump(report, fh, indent=2, allow_nan=True)
        fh.write("\n")
    report["report_path"] = report_path
    return report


# ---------------------------------------------------------------------------
# Sweeps
# ---------------------------------------------------------------------------


def _apply_override(doc: dict, path: str, value) -> None:
    parts = path.split(".")
    node = doc
    for part in parts[:-1]:
        if not isinstance(node.get(part), dict):
            if part not in node:
                node[part] = {}
            else:
                raise ConfigError(f"sweep axis {path!r}: {part!r} is not an object")
        node = node[part]
    node[parts[-1]] = value


def sweep(base_doc: dict, grid: dict, out_dir: str | None = None) -> dict:
    """Cross product of grid axes over a base config document.

    Each axis is a dotted config path (e.g. "horizon", "params.eta") with a
    nonempty list of values. Every cell runs as its own experiment in its
    own subdirectory; cell failures are recorded and the sweep continues.
    Writes sweep_summary.csv (one row per successful seed, with a sqrt(T)
    reference column) and sweep_report.json.
    """
    if not isinstance(grid, dict) or not grid:
        raise ConfigError("sweep grid must be a nonempty mapping of axis -> values")
    axes = sorted(grid)
    for axis in axes:
        values = grid[axis]
        if not isinstance(values, (list, tuple)) or len(values) == 0:
            raise ConfigError(f"sweep axis {axis!r} must have a nonempty value list")
    base = config_from_dict(base_doc)  # reject a broken base before any cell
    out_dir = out_dir or base.out_dir
    os.makedirs(out_dir, exist_ok=True)

    summary_rows: list[tuple] = []
    cells = []
    for idx, combo in enumerate(itertools.product(*(grid[a] for a in axes))):
        cell_doc = json.loads(json.dumps(base_doc))
        overrides = dict(zip(axes, combo))
        for path, value in overrides.items():
            _apply_override(cell_doc, path, value)
        cell_doc["run_name"] = f"{base.run_name}-c{idx:03d}"
        cell_doc["out_dir"] = os.path.join(out_dir, f"cell{idx:03d}")
        cell_entry: dict = {"cell": idx, "overrides": overrides}
        try:
            cell_report = run_experiment(cell_doc)
            cell_entry["status"] = "ok"
            cell_entry["report_path"] = cell_report["report_path"]
            cell_entry["aggregate"] = cell_report["aggregate"]
            horizon = cell_report["config"]["horizon"]
            for s in cell_report["seeds"]:
                if s["status"] != "ok":
                    continue
                summary_rows.append(
                    (idx,)
                    + tuple(overrides[a] for a in axes)
                    + (
                        s["seed"],
                        horizon,
                        s["worst_group"]["group_id"],
                        s["worst_group"]["regret"],
                        s["worst_group"]["regret_per_sqrt"],
                        math.sqrt(horizon),
                    )
                )
        except Exception as e:
            cell_entry["status"] = "error"
            cell_entry["error"] = f"{type(e).__name__}: {e}"
        cells.append(cell_entry)

    header = (
        ("cell",)
        + tuple("axis_" + a.replace(".", "_") for a in axes)
        + (
            "seed",
            "horizon",
            "worst_group_id",
            "worst_group_regret",
            "worst_group_regret_per_sqrt",
            "sqrt_T",
        )
    )
    summary_path = os.path.join(out_dir, "sweep_summary.csv")
    with open(summary_path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(",".join(header) + "\n")
        for row in summary_rows:
            fh.write(",".join(_sweep_cell(v) for v in row) + "\n")

    sweep_report = {
        "schema": "sweep-v1",
        "axes": axes,
        "cells": cells,
        "summary_csv": summary_path,
    }
    report_path = os.path.join(out_dir, "sweep_report.json")
    with open(report_path, "w", encoding="utf-8") as fh:
        json.dump(sweep_report, fh, indent=2)
        fh.write("\n")
    sweep_report["report_path"] = report_path
    return sweep_report


def _sweep_cell(v) -> str:
    if isinstance(v, float):
        return repr(v)
    return str(v)
