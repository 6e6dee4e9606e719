"""Tabular unsupervised-learning toolkit: imputation, trimming, PCA, k-means and cluster summaries."""

from ._kernels import BACKEND
from .cluster import KMeansModel, adjusted_rand_index, elbow_sweep, kmeans_fit, nearest_to_centroid
from .pca import PcaModel, components_for_threshold, fit_pca, project
from .tabular import Column, ColumnKind, Role, Table, column_stats, load_csv, write_csv

__version__ = "0.1.0"

__all__ = [
    "BACKEND",
    "Column",
    "ColumnKind",
    "KMeansModel",
    "PcaModel",
    "Role",
    "Table",
    "adjusted_rand_index",
    "column_stats",
    "components_for_threshold",
    "elbow_sweep",
    "fit_pca",
    "kmeans_fit",
    "load_csv",
    "nearest_to_centroid",
    "project",
    "write_csv",
]
