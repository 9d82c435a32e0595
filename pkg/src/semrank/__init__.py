"""Pairwise-trained semantic embedding models from click logs.

Parse click logs (or simulate them), turn click patterns into pairwise
relevance judgments under several formulation strategies, train a Siamese
embedding model with hand-written gradients, and measure pairwise ranking
precision on holdout test sets.
"""

from .errors import (
    ConfigError,
    EmptyLogError,
    EmptyTestSetError,
    ModelFormatError,
    NoClicksError,
    ParseError,
    SemrankError,
    ValidationError,
)
from .evaluation import (
    EvaluationReport,
    TestSet,
    build_test1,
    compare_strategies,
    precision,
    split_sessions,
)
from .judgments import (
    ATOMIC_STRATEGIES,
    FORMULATION_STRATEGIES,
    CtrParams,
    DistributionReport,
    PairwiseJudgment,
    Strategy,
    distribution,
    formulate,
    read_judgments,
    write_judgments,
)
from .logs import (
    CtrTable,
    ResultLabel,
    ResultRecord,
    SearchSession,
    aggregate_ctr,
    classify_results,
    parse_sessions,
    tokenize,
    write_sessions,
)
from .model import SemModel, init_model, load_model, save_model, score
from .simulate import (
    SimConfig,
    generate_corpus,
    ground_truth_pairs,
    simulate_sessions,
)
from .training import (
    GradientCheckReport,
    TrainingConfig,
    TrainStats,
    gradient_check,
    train,
)

__version__ = "0.1.0"

__all__ = [
    "ATOMIC_STRATEGIES",
    "ConfigError",
    "CtrParams",
    "CtrTable",
    "DistributionReport",
    "EmptyLogError",
    "EmptyTestSetError",
    "EvaluationReport",
    "FORMULATION_STRATEGIES",
    "GradientCheckReport",
    "ModelFormatError",
    "NoClicksError",
    "PairwiseJudgment",
    "ParseError",
    "ResultLabel",
    "ResultRecord",
    "SearchSession",
    "SemModel",
    "SemrankError",
    "SimConfig",
    "Strategy",
    "TestSet",
    "TrainStats",
    "TrainingConfig",
    "ValidationError",
    "aggregate_ctr",
    "build_test1",
    "classify_results",
    "compare_strategies",
    "distribution",
    "formulate",
    "generate_corpus",
    "gradient_check",
    "ground_truth_pairs",
    "init_model",
    "load_model",
    "parse_sessions",
    "precision",
    "read_judgments",
    "save_model",
    "score",
    "simulate_sessions",
    "split_sessions",
    "tokenize",
    "train",
    "write_judgments",
    "write_sessions",
    "__version__",
]
