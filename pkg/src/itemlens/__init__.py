"""Difficulty metrics and 2PL quality analysis for eTextbook exercise logs.

The pipeline: interaction events -> per-(student, exercise) summaries ->
behavioral difficulty metrics and dichotomized response matrices -> marginal
maximum likelihood 2PL calibration -> good/poor exercise verdicts.
"""

from .events import (
    EventKind,
    InteractionEvent,
    ParsedLog,
    StudentExerciseSummary,
    UnreadableStream,
    ValidationReport,
    aggregate,
    parse_event_log,
    read_event_log,
    validate_log,
)
from .irt import (
    AbilityEstimate,
    CurveTable,
    DegenerateMatrix,
    FitConfig,
    FitDiagnostics,
    FitResult,
    ItemParameters,
    Quadrature,
    difficult_at_average,
    estimate_abilities,
    fit_2pl,
    icc_prob,
    item_information,
    marginal_log_likelihood,
    sample_curves,
    test_information,
)
from .metrics import (
    Band,
    ExerciseMetrics,
    MetricError,
    MetricsTable,
    build_metrics_table,
    correct_ratio,
    difficulty_level,
    exercise_metrics,
    hint_ratio,
    incorrect_ratio,
    quartile_band,
)
from .quality import (
    DifficultyLabel,
    DiscriminationLabel,
    PoorReason,
    QualityReport,
    QualityVerdict,
    Verdict,
    classify_quality,
    difficulty_label,
    discrimination_label,
    quality_report,
)
from .response import (
    MISSING,
    MatrixBuildResult,
    ResponseMatrix,
    UnmappedExercise,
    build_matrices,
    dichotomize,
)
from .simulate import (
    BehaviorSpec,
    CohortSpec,
    InvalidScenario,
    RecoveryStats,
    Scenario,
    generate_event_log,
    generate_responses,
    load_scenario,
    recovery_report,
    run_scenario,
    sample_cohort,
)

__version__ = "0.1.0"

__all__ = [
    "AbilityEstimate",
    "Band",
    "BehaviorSpec",
    "CohortSpec",
    "CurveTable",
    "DegenerateMatrix",
    "DifficultyLabel",
    "DiscriminationLabel",
    "EventKind",
    "ExerciseMetrics",
    "FitConfig",
    "FitDiagnostics",
    "FitResult",
    "InteractionEvent",
    "InvalidScenario",
    "ItemParameters",
    "MetricError",
    "MetricsTable",
    "MatrixBuildResult",
    "MISSING",
    "ParsedLog",
    "PoorReason",
    "Quadrature",
    "QualityReport",
    "QualityVerdict",
    "RecoveryStats",
    "ResponseMatrix",
    "Scenario",
    "StudentExerciseSummary",
    "UnmappedExercise",
    "UnreadableStream",
    "ValidationReport",
    "Verdict",
    "aggregate",
    "build_matrices",
    "build_metrics_table",
    "classify_quality",
    "correct_ratio",
    "dichotomize",
    "difficult_at_average",
    "difficulty_label",
    "difficulty_level",
    "discrimination_label",
    "estimate_abilities",
    "exercise_metrics",
    "fit_2pl",
    "generate_event_log",
    "generate_responses",
    "hint_ratio",
    "icc_prob",
    "incorrect_ratio",
    "item_information",
    "load_scenario",
    "marginal_log_likelihood",
    "parse_event_log",
    "quality_report",
    "quartile_band",
    "read_event_log",
    "recovery_report",
    "run_scenario",
    "sample_cohort",
    "sample_curves",
    "test_information",
    "validate_log",
    "__version__",
]
