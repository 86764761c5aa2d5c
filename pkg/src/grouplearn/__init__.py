"""Oracle-efficient online multi-group learning: players, oracles, harness."""

from ._backend import active_backend, available_backends
from .baselines import (
    BatchMultiGroupLearner,
    ConstantBatchLearner,
    ErmBatchLearner,
    ftl_predict,
    history_samples,
    online_batch_wrapper,
)
from .core import (
    Context,
    Group,
    GroupHypothesisPair,
    Hypothesis,
    LossTable,
    ProblemInstance,
    RoundRecord,
    eval_hypothesis,
    group_access_scope,
    group_indicator,
    instance_from_dict,
    instance_to_dict,
    instant_group_regret,
    load_instance,
    save_instance,
)
from .diagnostics import (
    AMF_VALUE_CEILING,
    AmfRoundDiagnostic,
    amf_regret,
    amf_value,
    epsilon_gap,
)
from .environments import (
    ContextDistribution,
    LabelPolicy,
    TransductiveSet,
    adaptive_smooth_adversary,
    choose_label,
    sample_context,
    validate_smoothness,
)
from .families import table_instance, threshold_interval_instance
from .ftpl import FtplConfig, empirical_play, ftpl_sample
from .game import (
    GameMatrix,
    MixedStrategy,
    act,
    build_game_matrix,
    realizable_actions,
    solve_zero_sum,
)
from .gftpl import (
    GftplConfig,
    GftplRound,
    LaplaceNoise,
    PerturbationMatrix,
    TranslationColumn,
    best_gain_so_far,
    build_transductive_gamma,
    check_approximability,
    check_implementability,
    gamma_from_dict,
    gamma_matrix,
    gamma_to_dict,
    gftpl_empirical_play,
    gftpl_sample,
    learning_rate,
    load_gamma,
    perturbed_query,
    save_gamma,
)
from .harness import (
    AdversarySpec,
    ConfigError,
    ExperimentConfig,
    InstanceSpec,
    TheoryParams,
    config_from_dict,
    config_to_dict,
    run_experiment,
    sweep,
    theory_params,
)
from .ledger import (
    GroupLedgerEntry,
    RunLedger,
    import_groups_csv,
    import_rounds_csv,
)
from .oracles import (
    CorrelationRecord,
    LabeledExample,
    OracleQuery,
    RegretArrays,
    RegretRecord,
    brute_force_opt_gh,
    call_counts,
    count_oracle_calls,
    opt_gh,
    opt_h,
    query_objective,
    reset_call_counts,
)

__version__ = "0.1.0"

__all__ = [
    "Context",
    "Group",
    "GroupHypothesisPair",
    "Hypothesis",
    "LossTable",
    "ProblemInstance",
    "RoundRecord",
    "eval_hypothesis",
    "group_indicator",
    "instant_group_regret",
    "group_access_scope",
    "instance_to_dict",
    "instance_from_dict",
    "save_instance",
    "load_instance",
    "table_instance",
    "threshold_interval_instance",
    "RegretRecord",
    "CorrelationRecord",
    "LabeledExample",
    "OracleQuery",
    "RegretArrays",
    "opt_h",
    "opt_gh",
    "brute_force_opt_gh",
    "query_objective",
    "call_counts",
    "count_oracle_calls",
    "reset_call_counts",
    "active_backend",
    "available_backends",
    "FtplConfig",
    "ftpl_sample",
    "empirical_play",
    "GftplConfig",
    "GftplRound",
    "LaplaceNoise",
    "PerturbationMatrix",
    "TranslationColumn",
    "best_gain_so_far",
    "build_transductive_gamma",
    "check_approximability",
    "check_implementability",
    "gamma_matrix",
    "gamma_to_dict",
    "gamma_from_dict",
    "save_gamma",
    "load_gamma",
    "gftpl_empirical_play",
    "gftpl_sample",
    "learning_rate",
    "perturbed_query",
    "GameMatrix",
    "MixedStrategy",
    "act",
    "build_game_matrix",
    "realizable_actions",
    "solve_zero_sum",
    "ContextDistribution",
    "LabelPolicy",
    "TransductiveSet",
    "adaptive_smooth_adversary",
    "choose_label",
    "sample_context",
    "validate_smoothness",
    "BatchMultiGroupLearner",
    "ConstantBatchLearner",
    "ErmBatchLearner",
    "ftl_predict",
    "history_samples",
    "online_batch_wrapper",
    "GroupLedgerEntry",
    "RunLedger",
    "import_rounds_csv",
    "import_groups_csv",
    "AMF_VALUE_CEILING",
    "AmfRoundDiagnostic",
    "amf_value",
    "amf_regret",
    "epsilon_gap",
    "AdversarySpec",
    "ConfigError",
    "ExperimentConfig",
    "InstanceSpec",
    "TheoryParams",
    "config_from_dict",
    "config_to_dict",
    "run_experiment",
    "sweep",
    "theory_params",
    "__version__",
]
