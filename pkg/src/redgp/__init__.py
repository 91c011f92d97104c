"""Residual-based error detection for classifiers with Gaussian processes."""
__version__ = "0.1.0"

from .errors import ConfigError, DataError, NoMisclassificationError, NumericalError, RedError
from .data import LabeledDataset, load_dataset, make_split, standardize, synth_adversarial, synth_ood
from .classifier import ClassifierOutput, MlpConfig, predict, train_mlp
from .kernel import KernelHyperparams
from .gp import fit_exact, fit_sparse, log_marginal_likelihood
from .optimizer import RestartSchedule
from .red import DetectionScore, RedModel, fit_red, score
from .metrics import aupr, auroc, average_precision, evaluate_detector

__all__ = [
    "ConfigError", "DataError", "NoMisclassificationError", "NumericalError", "RedError",
    "LabeledDataset", "load_dataset", "make_split", "standardize", "synth_adversarial", "synth_ood",
    "ClassifierOutput", "MlpConfig", "predict", "train_mlp", "KernelHyperparams", "fit_exact",
    "fit_sparse", "log_marginal_likelihood", "RestartSchedule", "DetectionScore", "RedModel",
    "fit_red", "score", "aupr", "auroc", "average_precision", "evaluate_detector",
]
