"""Mini-batch training with Adam, best-validation checkpointing, and gradient checks."""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass

import numpy as np

from . import autograd as ag

log = logging.getLogger(__name__)


class TrainingDivergedError(RuntimeError):
    def __init__(self, epoch, loss):
        super().__init__(f"non-finite training loss {loss} at epoch {epoch}")
        self.epoch = epoch


@dataclass(frozen=True)
class TrainConfig:
    epochs: int = 200
    batch_size: int = 64
    learning_rate: float = 1e-3
    pos_weight: float = 1.0
    seed: int = 0
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8


class Adam:
    def __init__(self, params, lr=1e-3, beta1=0.9, beta2=0.999, eps=1e-8):
        self.params = list(params)
        self.lr, self.beta1, self.beta2, self.eps = lr, beta1, beta2, eps
        self.m = [np.zeros_like(p.data) for p in self.params]
        self.v = [np.zeros_like(p.data) for p in self.params]
        self.t = 0

    def step(self):
        self.t += 1
        c1 = 1 - self.beta1 ** self.t
        c2 = 1 - self.beta2 ** self.t
        for p, m, v in zip(self.params, self.m, self.v):
            if p.grad is None:
                continue
            m *= self.beta1
            m += (1 - self.beta1) * p.grad
            v *= self.beta2
            v += (1 - self.beta2) * p.grad ** 2
            p.data = p.data - self.lr * (m / c1) / (np.sqrt(v / c2) + self.eps)


def stack_graphs(graphs):
    """Batch node features and labels; every graph must share the first one's edge features."""
    if not graphs:
        raise ValueError("no graphs given")
    ef = graphs[0].ef
    for g in graphs[1:]:
        if g.ef.shape != ef.shape or not np.array_equal(g.ef, ef):
            raise ValueError("graphs in one batch must share edge features")
    nf = np.stack([g.nf for g in graphs])
    labels = np.stack([g.labels for g in graphs]).astype(float)
    return nf, ef, labels


def _accuracy(probs, labels):
    return float(np.mean((probs >= 0.5) == (labels >= 0.5)))


def evaluate(model, nf, ef, labels, pos_weight=1.0, batch_size=64):
    """Mean BCE and accuracy over a dataset, evaluated in fixed-order batches."""
    total, correct, count = 0.0, 0.0, 0
    for start in range(0, len(nf), batch_size):
        sl = slice(start, start + batch_size)
        p = model.forward(nf[sl], ef)
        total += float(ag.binary_cross_entropy(p, labels[sl], pos_weight).data) * labels[sl].size
        correct += float(np.sum((p.data >= 0.5) == (labels[sl] >= 0.5)))
        count += labels[sl].size
    return total / count, correct / count


def train(model, graphs, split, config=None):
    """Fit ``model`` on ``split.train`` and keep the parameters with the lowest
    validation loss.

    Parameters
    ----------
    model : NcModel or EcModel
    graphs : list of GraphSnapshot
        Labels must match the model kind (generators for NC, lines for EC).
    split : DatasetSplit
    config : TrainConfig, optional

    Returns
    -------
    model, history
        ``history`` holds one dict per epoch with train/val loss and accuracy.
        Epoch 0 is the untrained model.
    """
    config = config or TrainConfig()
    if not split.train or not split.val:
        raise ValueError("training and validation partitions must be non-empty")
    from .models import InputScaling

    nf_all, ef, y_all = stack_graphs(list(graphs))
    expected = (len(model.gen_bus) if model.kind == "nc" else len(model.edge_index))
    if y_all.shape[1] != expected:
        raise ValueError(f"labels have {y_all.shape[1]} rows, model expects {expected}")
    train_idx = np.asarray(split.train, dtype=int)
    val_idx = np.asarray(split.val, dtype=int)
    model.scaling = InputScaling.fit(nf_all[train_idx], ef)
    rng = np.random.default_rng(config.seed)
    params = [p for _, p in model.parameters()]
    opt = Adam(params, config.learning_rate, config.beta1, config.beta2, config.eps)

    def validation():
        order = rng.permutation(val_idx)
        return evaluate(model, nf_all[order], ef, y_all[order], config.pos_weight,
                        config.batch_size)

    tr_loss, tr_acc = evaluate(model, nf_all[train_idx], ef, y_all[train_idx],
                               config.pos_weight, config.batch_size)
    val_loss, val_acc = validation()
    history = [{"epoch": 0, "train_loss": tr_loss, "train_acc": tr_acc,
                "val_loss": val_loss, "val_acc": val_acc}]
    best_loss, best_state, best_epoch = val_loss, model.state(), 0
    for epoch in range(1, config.epochs + 1):
        order = rng.permutation(train_idx)
        loss_sum, correct, count = 0.0, 0.0, 0
        for start in range(0, len(order), config.batch_size):
            batch = order[start:start + config.batch_size]
            model.zero_grad()
            p = model.forward(nf_all[batch], ef)
            loss = ag.binary_cross_entropy(p, y_all[batch], config.pos_weight)
            value = float(loss.data)
            if not math.isfinite(value):
                raise TrainingDivergedError(epoch, value)
            loss.backward()
            opt.step()
            loss_sum += value * y_all[batch].size
            correct += float(np.sum((p.data >= 0.5) == (y_all[batch] >= 0.5)))
            count += y_all[batch].size
        val_loss, val_acc = validation()
        if not math.isfinite(val_loss):
            raise TrainingDivergedError(epoch, val_loss)
        history.append({"epoch": epoch, "train_loss": loss_sum / count,
                        "train_acc": correct / count, "val_loss": val_loss, "val_acc": val_acc})
        if val_loss < best_loss:
            best_loss, best_state, best_epoch = val_loss, model.state(), epoch
        log.debug("epoch %d train %.4f val %.4f", epoch, loss_sum / count, val_loss)
    model.load_state(best_state)
    history[best_epoch]["best"] = True
    return model, history


def predict(model, graph):
    """Probabilities for one graph: ``G x T`` for NC, ``E x T`` for EC."""
    return model.predict_proba(graph.nf, graph.ef)


def relative_error(analytic, numeric):
    a, n = np.ravel(analytic), np.ravel(numeric)
    return float(np.linalg.norm(a - n) / max(np.linalg.norm(a) + np.linalg.norm(n), 1e-8))


def gradient_check(loss_fn, params, epsilon=1e-5, max_entries=None, seed=0):
    """Compare reverse-mode gradients with central finite differences.

    Parameters
    ----------
    loss_fn : callable
        Returns a scalar :class:`Tensor`; called repeatedly.
    params : list of (name, Tensor)
    epsilon : float
    max_entries : int, optional
        Check at most this many randomly chosen entries per parameter.

    Returns
    -------
    float
        Worst per-parameter relative error ``|a - n| / (|a| + |n|)`` (vector norms).
    """
    for _, p in params:
        p.grad = None
    loss_fn().backward()
    analytic = {name: (p.grad.copy() if p.grad is not None else np.zeros_like(p.data))
                for name, p in params}
    rng = np.random.default_rng(seed)
    worst = 0.0
    for name, p in params:
        flat = p.data.reshape(-1)
        idx = np.arange(flat.size)
        if max_entries is not None and flat.size > max_entries:
            idx = np.sort(rng.choice(flat.size, max_entries, replace=False))
        numeric = np.empty(len(idx))
        for k, i in enumerate(idx):
            old = flat[i]
            flat[i] = old + epsilon
            up = float(loss_fn().data)
            flat[i] = old - epsilon
            down = float(loss_fn().data)
            flat[i] = old
            numeric[k] = (up - down) / (2 * epsilon)
        worst = max(worst, relative_error(analytic[name].reshape(-1)[idx], numeric))
    return worst


def model_gradient_check(model, graphs, epsilon=1e-5, max_entries=None, seed=0):
    """Gradient check of the mean BCE of ``model`` over ``graphs`` against their labels."""
    nf, ef, labels = stack_graphs(list(graphs))

    def loss_fn():
        return ag.binary_cross_entropy(model.forward(nf, ef), labels)

    return gradient_check(loss_fn, model.parameters(), epsilon, max_entries, seed)
