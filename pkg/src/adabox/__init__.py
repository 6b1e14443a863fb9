"""AdaBox: adaptive grid-based density clustering with scale-transferable parameters."""

from .datasets import Dataset, GeneratorSpec, generate, load_csv, pca_2d, save_csv
from .dbscan import DBSCANParams, dbscan, grid_search_tune
from .errors import AdaBoxError, Diverged, InvalidInput, ParseError
from .metrics import all_scores, ami, ari, contingency, fowlkes_mallows, nmi, v_measure
from .pipeline import AdaBoxParams, Clustering, EngineConfig, fit, transfer_params

__all__ = [
    "AdaBoxError", "AdaBoxParams", "Clustering", "DBSCANParams", "Dataset", "Diverged",
    "EngineConfig", "GeneratorSpec", "InvalidInput", "ParseError", "all_scores", "ami", "ari",
    "contingency", "dbscan", "fit", "fowlkes_mallows", "generate", "grid_search_tune",
    "load_csv", "nmi", "pca_2d", "save_csv", "transfer_params", "v_measure",
]
