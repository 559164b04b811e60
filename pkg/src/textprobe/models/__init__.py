"""Black-box probability classifiers behind one uniform interface."""

from .base import ProbClassifier, TrainConfig, softmax
from .cnn import CnnModel, train_cnn
from .forest import ForestModel, train_forest
from .io import load_model, save_model
from .logistic import LogisticModel, train_logistic

__all__ = [
    "ProbClassifier",
    "TrainConfig",
    "softmax",
    "CnnModel",
    "ForestModel",
    "LogisticModel",
    "train_cnn",
    "train_forest",
    "train_logistic",
    "load_model",
    "save_model",
]
