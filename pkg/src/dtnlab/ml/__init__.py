"""Classifiers, metrics, tuning, and model persistence."""

from .forest import RandomForestClassifier
from .metrics import eval_metrics, roc_auc
from .mlp import MlpClassifier
from .model_io import LoadedModel, load_model, save_model
from .tuning import GridSearchResult, grid_search_cv

__all__ = [
    "GridSearchResult",
    "LoadedModel",
    "MlpClassifier",
    "RandomForestClassifier",
    "eval_metrics",
    "grid_search_cv",
    "load_model",
    "roc_auc",
    "save_model",
]
