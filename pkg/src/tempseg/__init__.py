"""Unsupervised temporal action segmentation.

Pipeline: temporal embedding network -> within-video spectral clustering ->
cross-video global cluster assignment -> order-constrained Viterbi decoding
-> evaluation (MoF / cIoU / F1 / edit).
"""

from ._kernels import backend
from .dataio import FeatureSequence, SynthConfig, generate_synthetic, load_dataset, save_dataset
from .embednet import EmbedConfig, EmbeddedSequence, ModelParams, build_model, embed, load_model, receptive_field, save_model, train
from .errors import DataError, DivergedError, NumericalError, StageError, UndefinedMetricError
from .globalassign import GlobalAssignment, brute_force_assign, hungarian, multi_hub_assign, naive_assign
from .decoder import GaussianModel, OrderConstraint, SegmentationResult, decode_all, derive_order, fit_gaussians, loglik_grid, viterbi_decode
from .metrics import MetricsReport, ciou, edit_score, evaluate, f1_score, match_labels, mof
from .pipeline import PipelineConfig, run_pipeline
from .videocluster import SimilarityConfig, WithinVideoClusters, kmeans, similarity_matrix, spectral_cluster, within_video_clustering

__version__ = "0.1.0"

__all__ = [
    "backend", "__version__",
    "FeatureSequence", "SynthConfig", "generate_synthetic", "load_dataset",
    "save_dataset",
    "EmbedConfig", "EmbeddedSequence", "ModelParams", "build_model", "embed",
    "load_model", "receptive_field", "save_model", "train",
    "DataError", "DivergedError", "NumericalError", "StageError",
    "UndefinedMetricError",
    "GlobalAssignment", "brute_force_assign", "hungarian", "multi_hub_assign",
    "naive_assign",
    "GaussianModel", "OrderConstraint", "SegmentationResult", "decode_all",
    "derive_order", "fit_gaussians", "loglik_grid", "viterbi_decode",
    "MetricsReport", "ciou", "edit_score", "evaluate", "f1_score",
    "match_labels", "mof",
    "PipelineConfig", "run_pipeline",
    "SimilarityConfig", "WithinVideoClusters", "kmeans", "similarity_matrix",
    "spectral_cluster", "within_video_clustering",
]
