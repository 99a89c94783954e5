"""scikit-learn style wrappers around the graph models."""
from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_is_fitted

from ..data import DatasetSplit
from .models import ECC, XENET, EcModel, ModelConfig, NcModel
from .training import TrainConfig, stack_graphs, train


def _check_graphs(X):
    graphs = list(X)
    if not graphs:
        raise ValueError("expected a non-empty list of graph snapshots")
    for g in graphs:
        if not hasattr(g, "nf") or not hasattr(g, "ef"):
            raise TypeError("X must hold graph snapshots with nf/ef fields")
    return graphs


def _with_labels(graphs, y):
    if y is None:
        return graphs
    y = np.asarray(y)
    if len(y) != len(graphs):
        raise ValueError(f"y has {len(y)} entries for {len(graphs)} graphs")
    out = []
    for g, labels in zip(graphs, y):
        if labels.shape != g.labels.shape:
            raise ValueError("label shape does not match the graph")
        out.append(type(g)(g.nf, g.ef, g.adjacency, g.edge_index, g.gen_bus,
                           np.asarray(labels, dtype=int), g.mode))
    return out


class _GraphClassifier(BaseEstimator):
    _kind = None

    def __init__(self, gnn=ECC, depth=3, width=32, mlp_hidden=16, lstm_hidden=32,
                 lstm_output_activation="tanh", learning_rate=1e-3, epochs=200, batch_size=64,
                 pos_weight=1.0, validation_fraction=0.15, random_state=0):
        self.gnn = gnn
        self.depth = depth
        self.width = width
        self.mlp_hidden = mlp_hidden
        self.lstm_hidden = lstm_hidden
        self.lstm_output_activation = lstm_output_activation
        self.learning_rate = learning_rate
        self.epochs = epochs
        self.batch_size = batch_size
        self.pos_weight = pos_weight
        self.validation_fraction = validation_fraction
        self.random_state = random_state

    def _model_config(self):
        return ModelConfig(gnn=self.gnn, depth=self.depth, width=self.width,
                           mlp_hidden=self.mlp_hidden, lstm_hidden=self.lstm_hidden,
                           lstm_output_activation=self.lstm_output_activation,
                           seed=self.random_state)

    def _make_model(self, g):
        raise NotImplementedError

    def fit(self, X, y=None, validation_data=None):
        """Train on graph snapshots ``X``.

        ``validation_data`` is a list of snapshots used for checkpoint selection.
        Without it a ``validation_fraction`` share of ``X`` is held out.
        """
        graphs = _with_labels(_check_graphs(X), y)
        if validation_data is not None:
            val = _check_graphs(validation_data)
            split = DatasetSplit(tuple(range(len(graphs))),
                                 tuple(range(len(graphs), len(graphs) + len(val))), ())
            graphs = graphs + val
        else:
            if len(graphs) < 2:
                raise ValueError("need at least 2 graphs to hold out a validation set")
            order = np.random.default_rng(self.random_state).permutation(len(graphs))
            n_val = min(max(1, int(round(self.validation_fraction * len(graphs)))),
                        len(graphs) - 1)
            split = DatasetSplit(tuple(int(i) for i in order[n_val:]),
                                 tuple(int(i) for i in order[:n_val]), ())
        self.model_ = self._make_model(graphs[0])
        config = TrainConfig(epochs=self.epochs, batch_size=self.batch_size,
                             learning_rate=self.learning_rate, pos_weight=self.pos_weight,
                             seed=self.random_state)
        self.model_, self.history_ = train(self.model_, graphs, split, config)
        self.best_epoch_ = next(h["epoch"] for h in self.history_ if h.get("best"))
        return self

    def predict_proba(self, X):
        """Probabilities shaped ``(M, G, T)`` for NC or ``(M, E, T)`` for EC."""
        check_is_fitted(self, "model_")
        graphs = _check_graphs(X)
        out = []
        for start in range(0, len(graphs), self.batch_size):
            nf, ef, _ = stack_graphs(graphs[start:start + self.batch_size])
            out.append(self.model_.predict_proba(nf, ef))
        return np.concatenate(out)

    def predict(self, X):
        return (self.predict_proba(X) >= 0.5).astype(int)

    def score(self, X, y=None):
        from ..metrics import accuracy
        graphs = _with_labels(_check_graphs(X), y)
        truth = np.stack([g.labels for g in graphs]).astype(int)
        return accuracy(self.predict(graphs), truth)

    @classmethod
    def from_model(cls, model, **params):
        est = cls(**params)
        est.model_ = model
        est.history_ = []
        return est


class STNodeClassifier(_GraphClassifier):
    """Spatio-temporal generator commitment classifier (GNN + LSTM)."""

    _kind = "nc"

    def _make_model(self, g):
        return NcModel(g.nf.shape[0], g.edge_index, g.nf.shape[1], g.gen_bus,
                       self._model_config())


class EdgeCriticalityClassifier(_GraphClassifier):
    """Spatial line criticality classifier (XENET stack)."""

    _kind = "ec"

    def __init__(self, gnn=XENET, depth=2, width=32, mlp_hidden=16, lstm_hidden=32,
                 lstm_output_activation="tanh", learning_rate=1e-3, epochs=200, batch_size=64,
                 pos_weight=1.0, validation_fraction=0.15, random_state=0):
        super().__init__(gnn, depth, width, mlp_hidden, lstm_hidden, lstm_output_activation,
                         learning_rate, epochs, batch_size, pos_weight, validation_fraction,
                         random_state)

    def _make_model(self, g):
        return EcModel(g.nf.shape[0], g.edge_index, g.nf.shape[1], self._model_config())
