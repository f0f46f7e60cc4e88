"""Clustering-validated synthetic telemetry: cluster real data, train a conditional
tabular GAN on the cluster labels, re-cluster the synthetic table and compare
validation scores."""

from .cluster import ClusterAssignment, agglomerative_fit, dbscan_fit, kmeans_fit
from .config import RunConfig, ToySpec, load_config
from .ctgan import CtganConfig, ctgan_sample, ctgan_train
from .dataio import ColumnSpec, Dataset, generate_toy_telemetry, load_csv, minmax_normalize
from .errors import AnonymixerError
from .ghmm import ghmm_decode, ghmm_fit
from .metrics import ValidationScores, score_all
from .pca import pca_fit, pca_transform
from .pipeline import assess_similarity, run_pipeline

__version__ = "0.1.0"

__all__ = [
    "AnonymixerError", "ClusterAssignment", "ColumnSpec", "CtganConfig", "Dataset", "RunConfig",
    "ToySpec", "ValidationScores", "agglomerative_fit", "assess_similarity", "ctgan_sample",
    "ctgan_train", "dbscan_fit", "generate_toy_telemetry", "ghmm_decode", "ghmm_fit", "kmeans_fit",
    "load_config", "load_csv", "minmax_normalize", "pca_fit", "pca_transform", "run_pipeline",
    "score_all",
]
