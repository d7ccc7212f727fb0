"""Self-contained supervised learners used inside every meta-learner and criterion."""

from ._common import DEFAULT_GRID, HyperGrid, kfold_indices
from .boosting import GbtModel, fit_boosting, fit_gbt
from .logistic import PROPENSITY_CLIP, LogisticModel, clip_propensity, fit_logistic
from .neighbors import nearest_neighbor_index, nearest_neighbor_indices
from .ridge import RidgeModel, fit_ridge
from .trees import FlatTree, Leaf, Split, TreeNode, fit_regression_tree

__all__ = [
    "DEFAULT_GRID",
    "FlatTree",
    "GbtModel",
    "HyperGrid",
    "Leaf",
    "LogisticModel",
    "PROPENSITY_CLIP",
    "RidgeModel",
    "Split",
    "TreeNode",
    "clip_propensity",
    "fit_boosting",
    "fit_gbt",
    "fit_logistic",
    "fit_regression_tree",
    "fit_ridge",
    "kfold_indices",
    "nearest_neighbor_index",
    "nearest_neighbor_indices",
    "predict",
]


def predict(model, X):
    """Predictions of any fitted base model (pure; repeated calls are bit-identical)."""
    return model.predict(X)
