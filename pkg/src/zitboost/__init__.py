"""Gradient-boosted trees for aggregate insurance claims under Tweedie and
zero-inflated Tweedie likelihoods."""

__version__ = "0.1.0"

from .engine import BoostConfig, Dataset, DecisionTree  # noqa: E402
from .kernels import BACKEND  # noqa: E402
from .trainers import (BoostedModel, predict, train, train_twbt,  # noqa: E402
                       train_zitwbt1, train_zitwbt2)

__all__ = ["BACKEND", "BoostConfig", "BoostedModel", "Dataset", "DecisionTree", "predict",
           "train", "train_twbt", "train_zitwbt1", "train_zitwbt2", "__version__"]
