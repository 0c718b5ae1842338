"""scikit-learn classifier backed by a simplex-constrained linear network."""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, ClassifierMixin
from sklearn.preprocessing import LabelEncoder
from sklearn.utils.validation import check_is_fitted, check_X_y

from ._validation import check_nonnegative_inputs
from .dnn import Dataset, LayeredDnn, PowerLoss
from .optim import TrainConfig, train


class SimplexLinearNetwork(ClassifierMixin, BaseEstimator):
    """Linear layered network with nonnegative, column-normalized weights.

    Trained by projected gradient descent on the power loss that penalizes
    every output except the true class. With ``normalize_inputs`` each sample
    is divided by its sum, so the outputs of a sample form a probability
    vector and ``predict_proba`` needs no extra normalization.

    Parameters
    ----------
    hidden_layer_sizes : tuple of int
        Widths of the hidden layers; each must be at least the number of classes.
    beta : float
        Loss exponent, at least 2.
    mode : {"weight", "marginal"}
        Optimize the layer matrices, or only their product.
    max_iter, tol : int, float
        Iteration cap and projected-gradient threshold.
    restarts : int
        Independent random starts; the best run is kept.
    random_state : int or None
    normalize_inputs : bool

    Attributes
    ----------
    classes_, coef_ (n_classes, n_features), weights_, loss_, n_iter_, converged_
    """

    def __init__(self, hidden_layer_sizes=(), beta=2.0, mode="weight", max_iter=100_000,
                 tol=1e-9, restarts=1, random_state=None, normalize_inputs=True):
        self.hidden_layer_sizes = hidden_layer_sizes
        self.beta = beta
        self.mode = mode
        self.max_iter = max_iter
        self.tol = tol
        self.restarts = restarts
        self.random_state = random_state
        self.normalize_inputs = normalize_inputs

    def _prepare(self, X):
        X = check_nonnegative_inputs(X)
        if self.normalize_inputs:
            s = X.sum(axis=1, keepdims=True)
            if np.any(s == 0):
                raise ValueError("cannot normalize an all-zero sample")
            X = X / s
        return X

    def fit(self, X, y):
        X, y = check_X_y(X, y, dtype=np.float64)
        X = self._prepare(X)
        self.encoder_ = LabelEncoder().fit(y)
        self.classes_ = self.encoder_.classes_
        C = len(self.classes_)
        if C < 2:
            raise ValueError("need at least two classes")
        hidden = tuple(int(n) for n in self.hidden_layer_sizes)
        if any(n < C for n in hidden):
            raise ValueError(f"hidden widths {hidden} must be >= the number of classes ({C})")
        sizes = (X.shape[1], *hidden, C)
        data = Dataset.from_labels(X, self.encoder_.transform(y), C, self.normalize_inputs)
        seed = self.random_state if self.random_state is not None else 0
        cfg = TrainConfig(mode=self.mode, max_iter=self.max_iter, tol=self.tol,
                          seed=int(seed), restarts=self.restarts)
        init = LayeredDnn(sizes, tuple(np.full((sizes[l + 1], sizes[l]), 1.0 / sizes[l + 1])
                                       for l in range(len(sizes) - 1)))
        report = train(init, data, PowerLoss.classification(data, self.beta), cfg)
        self.coef_ = report.b
        self.weights_ = report.weights
        self.loss_ = report.final_loss
        self.n_iter_ = report.iterations
        self.converged_ = report.converged
        self.n_features_in_ = X.shape[1]
        return self

    def predict_proba(self, X):
        check_is_fitted(self, "coef_")
        X = self._prepare(X)
        if X.shape[1] != self.n_features_in_:
            raise ValueError(f"X has {X.shape[1]} features, the model was fitted with {self.n_features_in_}")
        return X @ self.coef_.T

    def predict(self, X):
        proba = self.predict_proba(X)
        return self.classes_[np.argmax(proba, axis=1)]
