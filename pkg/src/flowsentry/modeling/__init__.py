"""Architectures, training, cross-validation, the optimizer grid and ensembles."""
from .architectures import FAMILIES, ModelSpec, build_ann, build_cnn, build_lstm, lstm_shape
from .estimators import NeuralFlowClassifier, SoftVotingClassifier
from .experiments import (GRID_ACTIVATIONS, CVResult, Evaluation, GridCell, GridReport, cell_seed,
                          cross_validate, evaluate_model, run_optimizer_activation_grid)
from .training import (ATTACK, BENIGN, PreprocessOptions, SchemaMismatch, TrainConfig, TrainedModel,
                       TrainHistory, TrainingAborted, classify, ensemble_predict, ensemble_predict_proba,
                       fit_network, predict, prepare_and_train, train)

__all__ = [
    "FAMILIES", "ModelSpec", "build_ann", "build_cnn", "build_lstm", "lstm_shape",
    "NeuralFlowClassifier", "SoftVotingClassifier",
    "GRID_ACTIVATIONS", "CVResult", "Evaluation", "GridCell", "GridReport", "cell_seed",
    "cross_validate", "evaluate_model", "run_optimizer_activation_grid",
    "ATTACK", "BENIGN", "PreprocessOptions", "SchemaMismatch", "TrainConfig", "TrainedModel",
    "TrainHistory", "TrainingAborted", "classify", "ensemble_predict", "ensemble_predict_proba",
    "fit_network", "predict", "prepare_and_train", "train",
]
