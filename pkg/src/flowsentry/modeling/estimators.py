"""scikit-learn compatible front ends to the training pipeline."""
from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, ClassifierMixin
from sklearn.utils.validation import check_is_fitted

from .._validation import check_binary_labels, check_matrix
from ..flowdata import Dataset
from ..optimizers import OptimizerConfig
from .architectures import ModelSpec
from .training import PreprocessOptions, TrainConfig, _check_weights, prepare_and_train


class NeuralFlowClassifier(ClassifierMixin, BaseEstimator):
    """Binary benign/attack classifier built on the in-house network kernel.

    ``fit`` runs the full training recipe: hold out a validation slice,
    fit normalization and correlation-based feature selection, oversample
    the minority class, then train with early stopping.  The fitted
    preprocessing is replayed by ``predict_proba``.

    Parameters mirror :class:`ModelSpec`, :class:`TrainConfig` and
    :class:`PreprocessOptions`; ``optimizer_params`` holds extra
    hyperparameters for the chosen optimizer.
    """

    def __init__(self, family="ANN", activation="relu", hidden_sizes=(64, 32), filters=32,
                 kernel_size=3, pool_size=2, dense_units=64, timesteps=10, hidden_units=64,
                 optimizer="Adam", learning_rate=None, optimizer_params=None, epochs=30,
                 batch_size=256, l1=0.0, l2=1e-4, dropout_rate=0.2, early_stop_patience=5,
                 validation_fraction=0.1, normalization="minmax", top_k_features=20, smote=True,
                 smote_k=5, smote_ratio=1.0, threshold=0.5, random_state=0):
        self.family = family
        self.activation = activation
        self.hidden_sizes = hidden_sizes
        self.filters = filters
        self.kernel_size = kernel_size
        self.pool_size = pool_size
        self.dense_units = dense_units
        self.timesteps = timesteps
        self.hidden_units = hidden_units
        self.optimizer = optimizer
        self.learning_rate = learning_rate
        self.optimizer_params = optimizer_params
        self.epochs = epochs
        self.batch_size = batch_size
        self.l1 = l1
        self.l2 = l2
        self.dropout_rate = dropout_rate
        self.early_stop_patience = early_stop_patience
        self.validation_fraction = validation_fraction
        self.normalization = normalization
        self.top_k_features = top_k_features
        self.smote = smote
        self.smote_k = smote_k
        self.smote_ratio = smote_ratio
        self.threshold = threshold
        self.random_state = random_state

    def _parts(self, n_features):
        spec = ModelSpec(
            family=self.family, input_dim=n_features, activation=self.activation,
            hidden_sizes=tuple(self.hidden_sizes), filters=self.filters, kernel_size=self.kernel_size,
            pool_size=self.pool_size, dense_units=self.dense_units, timesteps=self.timesteps,
            hidden_units=self.hidden_units,
        )
        opt = OptimizerConfig(kind=self.optimizer, learning_rate=self.learning_rate,
                              **(self.optimizer_params or {}))
        config = TrainConfig(
            optimizer=opt, epochs=self.epochs, batch_size=self.batch_size, l1=self.l1, l2=self.l2,
            dropout_rate=self.dropout_rate, early_stop_patience=self.early_stop_patience,
            seed=int(self.random_state or 0), threshold=self.threshold,
        )
        options = PreprocessOptions(
            normalization=self.normalization, top_k_features=self.top_k_features, smote=self.smote,
            smote_k=self.smote_k, smote_ratio=self.smote_ratio,
            validation_fraction=self.validation_fraction,
        )
        return spec, config, options

    def fit(self, X, y, feature_names=None):
        X = check_matrix(X)
        y = check_binary_labels(y, X.shape[0])
        spec, config, options = self._parts(X.shape[1])
        ds = Dataset.from_arrays(X, y, feature_names)
        self.model_, self.history_ = prepare_and_train(ds, spec, config, options)
        self.classes_ = np.array([0, 1])
        self.n_features_in_ = X.shape[1]
        return self

    def predict_proba(self, X):
        check_is_fitted(self, "model_")
        p = self.model_.predict_proba(check_matrix(X, self.n_features_in_))
        return np.column_stack([1.0 - p, p])

    def predict(self, X):
        return (self.predict_proba(X)[:, 1] >= self.threshold).astype(np.int64)


class SoftVotingClassifier(ClassifierMixin, BaseEstimator):
    """Weighted mean of member attack probabilities.

    ``estimators`` are fitted classifiers exposing ``predict_proba``; they
    are used as-is and never refitted.
    """

    def __init__(self, estimators, weights=None, threshold=0.5):
        self.estimators = estimators
        self.weights = weights
        self.threshold = threshold

    def fit(self, X=None, y=None):
        if len(self.estimators) < 2:
            raise ValueError("an ensemble needs at least two members")
        counts = {getattr(e, "n_features_in_", None) for e in self.estimators}
        if len(counts) != 1:
            raise ValueError("ensemble members do not share one input schema")
        self.weights_ = _check_weights(len(self.estimators), self.weights)
        self.classes_ = np.array([0, 1])
        self.n_features_in_ = counts.pop()
        return self

    def predict_proba(self, X):
        check_is_fitted(self, "weights_")
        p = np.column_stack([e.predict_proba(X)[:, 1] for e in self.estimators]) @ self.weights_
        return np.column_stack([1.0 - p, p])

    def predict(self, X):
        return (self.predict_proba(X)[:, 1] >= self.threshold).astype(np.int64)
