"""Matrix-profile based attack detection for industrial process data."""
__version__ = "0.1.0"

from .core import InvalidArgument, TimeSeries, WindowStats, sliding_stats, znormalize
from .eval import ConfusionMatrix, DetectionReport, accuracy, build_report, f1, score_events, score_pointwise
from .iforest import ForestModel, anomaly_score, fit_forest, path_length, rank_anomalies
from .ingest import Dataset, LabelIntervals, SchemaConfig, load_csv, split_train_test
from .matrix_profile import (
    MatrixProfileResult,
    compute_matrix_profile,
    corr_to_distance,
    count_similar,
    detect_anomalies,
    distance_profile,
)
from .ocsvm import ConvergenceError, KernelDescriptor, SvmModel, decide, kernel_eval, train_ocsvm
from .preprocess import FeatureMatrix, PcaModel, filter_boolean, linear_scale, pca_fit, pca_transform, zero_mean
from .synthgen import AttackSpec, ChannelSpec, ProcessConfig, generate, inject_attacks

__all__ = [
    "AttackSpec", "ChannelSpec", "ConfusionMatrix", "ConvergenceError", "Dataset",
    "DetectionReport", "FeatureMatrix", "ForestModel", "InvalidArgument", "KernelDescriptor",
    "LabelIntervals", "MatrixProfileResult", "PcaModel", "ProcessConfig", "SchemaConfig",
    "SvmModel", "TimeSeries", "WindowStats", "accuracy", "anomaly_score", "build_report",
    "compute_matrix_profile", "corr_to_distance", "count_similar", "decide", "detect_anomalies",
    "distance_profile", "f1", "filter_boolean", "fit_forest", "generate", "inject_attacks",
    "kernel_eval", "linear_scale", "load_csv", "path_length", "pca_fit", "pca_transform",
    "rank_anomalies", "score_events", "score_pointwise", "sliding_stats", "split_train_test",
    "train_ocsvm", "zero_mean", "znormalize",
]
