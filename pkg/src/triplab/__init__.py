"""Toolkit for comparison-based triplet data.

Simulate, collect, and analyze answers to "is x closer to y or to z?"
questions: sampling strategies, ordinal embedding, pair ranking,
evaluation procedures, an experiment harness, and a data-collection
service.
"""

from .core import (
    Answer,
    AnsweredTriplet,
    AnswerSet,
    ItemSet,
    Triplet,
    answer_set_from_arrays,
    canonicalize,
    count_questions,
    enumerate_questions,
    merge_answer_sets,
    n_pairs,
    pair_flat_index,
    read_answer_set,
    write_answer_set,
)
from .embedding import EmbedConfig, Embedding, embed, export_embedding, read_embedding
from .errors import (
    ConfigError,
    DivergenceError,
    IterationLimitError,
    ParseError,
    TieError,
    TriplabError,
)
from .evaluation import (
    PoolingCurve,
    PredictionReport,
    TransferMatrix,
    cross_subject,
    dimension_sweep,
    evaluate,
    exhaustive_or_sampled_truth_accuracy,
    holdout_split,
    noise_ceiling,
    pooling_curve,
)
from .oracle import (
    NoisyOracle,
    VectorDataset,
    export_vectors,
    ingest_vectors,
    sample_unit_cube,
    true_answer,
)
from .ranking import (
    PairComparisonGraph,
    PairScoreTable,
    build_graph,
    predict_from_scores,
    rank_centrality,
    rank_counting,
    rank_serial,
)
from .sampling import (
    SamplingPlan,
    cap_subsample,
    majority_vote,
    sample_landmark,
    sample_random,
    sample_repeated,
    select_landmarks,
)

__version__ = "0.1.0"

__all__ = [name for name in dir() if not name.startswith("_")]
