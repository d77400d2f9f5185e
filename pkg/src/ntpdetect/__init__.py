"""Hallucination detection for VLM-generated text from next-token-probability signals."""

from .boosting import BoostedTreesClassifier
from .data import (
    Dataset,
    DatasetError,
    DatasetStats,
    ProbeRecord,
    convert_published,
    dataset_stats,
    load_dataset,
    synth_generate,
    write_jsonl,
)
from .evaluation import (
    AblationResult,
    ExperimentResult,
    MatrixResult,
    SplitSpec,
    ablation,
    grid_search,
    make_splits,
    matrix_cells,
    predictor_baseline,
    run_experiment,
    run_matrix,
)
from .features import FeatureConfig, FeatureVector, aggregate_raw, build_features, cross_features, dft_topk, featurize_dataset, pad, stat_features
from .linear import LogisticRegressionClassifier
from .metrics import auc_roc, average_ranks, mean_ci95, spearman
from .model_io import load_model, save_model, score_dataset
from .preprocessing import standardize_apply, standardize_fit
from .svm import SVMClassifier

__version__ = "0.1.0"

__all__ = [
    "AblationResult",
    "BoostedTreesClassifier",
    "Dataset",
    "DatasetError",
    "DatasetStats",
    "ExperimentResult",
    "FeatureConfig",
    "FeatureVector",
    "LogisticRegressionClassifier",
    "MatrixResult",
    "ProbeRecord",
    "SVMClassifier",
    "SplitSpec",
    "ablation",
    "aggregate_raw",
    "auc_roc",
    "average_ranks",
    "build_features",
    "convert_published",
    "cross_features",
    "dataset_stats",
    "dft_topk",
    "featurize_dataset",
    "grid_search",
    "load_dataset",
    "load_model",
    "make_splits",
    "matrix_cells",
    "mean_ci95",
    "pad",
    "predictor_baseline",
    "run_experiment",
    "run_matrix",
    "save_model",
    "score_dataset",
    "spearman",
    "stat_features",
    "standardize_apply",
    "standardize_fit",
    "synth_generate",
    "write_jsonl",
]
