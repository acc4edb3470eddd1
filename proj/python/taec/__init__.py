"""Unsupervised temporal action segmentation."""

from ._taec import (
    DataError,
    NumericalError,
    InvalidState,
    UndefinedMetric,
    ProblemTooLarge,
    receptive_field,
    generate_synthetic,
    save_dataset,
    load_dataset,
    similarity_matrix,
    within_video_clustering,
    hungarian,
    assign_clusters,
    viterbi_decode,
    mof,
    ciou,
    f1_score,
    edit_score,
    evaluate,
    run_pipeline,
)

__all__ = [
    "DataError",
    "NumericalError",
    "InvalidState",
    "UndefinedMetric",
    "ProblemTooLarge",
    "receptive_field",
    "generate_synthetic",
    "save_dataset",
    "load_dataset",
    "similarity_matrix",
    "within_video_clustering",
    "hungarian",
    "assign_clusters",
    "viterbi_decode",
    "mof",
    "ciou",
    "f1_score",
    "edit_score",
    "evaluate",
    "run_pipeline",
]
