"""Relation embeddings composed from word embeddings via a bilinear
operator: loading and standardizing embeddings, training the operator on
analogy instances, benchmark evaluation, and Monte Carlo verification of
its expected-loss identities."""

from .bilinear import (
    BilinearOperator,
    compose,
    compose_many,
    frobenius_norm_A,
    load_operator,
    operator_digest,
    pairdiff,
    relational_distance_sq,
    relational_similarity,
    save_operator,
)
from .embeddings import (
    CorrelationReport,
    EmbeddingMatrix,
    StandardizationStats,
    correlation_report,
    load_embeddings,
    standardize,
)
from .errors import (
    DataError,
    DimensionMismatchError,
    DivergenceError,
    EmbeddingLoadError,
    RelcompError,
    UnknownWordError,
    UnsupportedModeError,
    ZeroVarianceError,
)
from .evaluation import (
    EvalReport,
    MaxDiffQuestion,
    SatQuestion,
    SemEvalRelation,
    eval_bats_holdout,
    eval_maxdiff,
    eval_sat,
    load_sat_questions,
    load_semeval_relations,
    semeval_pair_score,
)
from .training import (
    AnalogyInstance,
    GradientRecord,
    RelationGroup,
    TrainingConfig,
    TrainingTrace,
    adagrad_step,
    build_instances,
    gradients,
    instance_loss,
    load_relation_groups,
    total_loss,
    train,
)
from .verification import (
    MonteCarloReport,
    SamplerSpec,
    closed_form_positive_loss,
    mc_expected_positive_loss,
    run_verification_manifest,
    synth_embeddings,
    synth_offset_relations,
    tensor_independence_check,
    zero_expected_loss_check,
)

__version__ = "0.1.0"

__all__ = [
    "AnalogyInstance",
    "BilinearOperator",
    "CorrelationReport",
    "DataError",
    "DimensionMismatchError",
    "DivergenceError",
    "EmbeddingLoadError",
    "EmbeddingMatrix",
    "EvalReport",
    "GradientRecord",
    "MaxDiffQuestion",
    "MonteCarloReport",
    "RelationGroup",
    "RelcompError",
    "SamplerSpec",
    "SatQuestion",
    "SemEvalRelation",
    "StandardizationStats",
    "TrainingConfig",
    "TrainingTrace",
    "UnknownWordError",
    "UnsupportedModeError",
    "ZeroVarianceError",
    "adagrad_step",
    "build_instances",
    "closed_form_positive_loss",
    "compose",
    "compose_many",
    "correlation_report",
    "eval_bats_holdout",
    "eval_maxdiff",
    "eval_sat",
    "frobenius_norm_A",
    "gradients",
    "instance_loss",
    "load_embeddings",
    "load_operator",
    "load_relation_groups",
    "load_sat_questions",
    "load_semeval_relations",
    "mc_expected_positive_loss",
    "operator_digest",
    "pairdiff",
    "relational_distance_sq",
    "relational_similarity",
    "run_verification_manifest",
    "save_operator",
    "semeval_pair_score",
    "standardize",
    "synth_embeddings",
    "synth_offset_relations",
    "tensor_independence_check",
    "total_loss",
    "train",
    "zero_expected_loss_check",
]
