"""Graph convolution (ECC, XENET), LSTM and dense layers on the autodiff engine.

Node features are laid out as ``(S, N, F)``: ``S`` independent graph copies
that share one static topology.  Edge features are per *directed* edge,
either shared ``(Ed, F)`` or per copy ``(S, Ed, F)``.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import autograd as ag


class ShapeError(ValueError):
    pass


@dataclass(frozen=True)
class Topology:
    """Directed view of an undirected graph.

    Line ``k`` with endpoints ``(a, b)`` yields directed edge ``k`` (a -> b) and
    edge ``E + k`` (b -> a), so ``reverse[k] = E + k`` and vice versa.
    """

    n_nodes: int
    senders: np.ndarray
    receivers: np.ndarray
    reverse: np.ndarray
    line_of_edge: np.ndarray

    @property
    def n_lines(self):
        return len(self.senders) // 2

    @property
    def n_edges(self):
        return len(self.senders)

    def directed_features(self, line_feats):
        """Serve each line's features to both of its directed edges."""
        return np.asarray(line_feats, dtype=float)[self.line_of_edge]


def topology_from_edges(edge_index, n_nodes):
    edge_index = np.asarray(edge_index, dtype=int).reshape(-1, 2)
    e = len(edge_index)
    if e and (edge_index.min() < 0 or edge_index.max() >= n_nodes):
        raise ShapeError("edge endpoint outside node range")
    senders = np.concatenate([edge_index[:, 0], edge_index[:, 1]])
    receivers = np.concatenate([edge_index[:, 1], edge_index[:, 0]])
    reverse = np.concatenate([np.arange(e) + e, np.arange(e)])
    return Topology(n_nodes, senders, receivers, reverse, np.concatenate([np.arange(e)] * 2))


def topology_from_adjacency(adjacency):
    a = np.asarray(adjacency)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ShapeError("adjacency must be square")
    i, j = np.nonzero(np.triu(a, 1))
    return topology_from_edges(np.stack([i, j], axis=1), a.shape[0])


def _uniform(rng, fan_in, shape):
    limit = np.sqrt(3.0 / max(fan_in, 1))
    return rng.uniform(-limit, limit, size=shape)


class Layer:
    """Holds named parameters in insertion order."""

    def __init__(self):
        self.params = {}

    def _param(self, name, value):
        self.params[name] = ag.parameter(value, name=name)
        return self.params[name]

    def parameters(self):
        return list(self.params.items())

    def state(self):
        return {k: p.data.copy() for k, p in self.params.items()}

    def load_state(self, state):
        for k, p in self.params.items():
            value = np.asarray(state[k], dtype=float)
            if value.shape != p.shape:
                raise ShapeError(f"parameter {k}: expected {p.shape}, got {value.shape}")
            p.data = value.copy()


class Dense(Layer):
    def __init__(self, n_in, n_out, activation="linear", rng=None):
        super().__init__()
        rng = rng or np.random.default_rng(0)
        self.n_in, self.n_out, self.activation = n_in, n_out, activation
        self.W = self._param("W", _uniform(rng, n_in, (n_in, n_out)))
        self.b = self._param("b", np.zeros(n_out))

    def __call__(self, x):
        x = ag.as_tensor(x)
        if x.shape[-1] != self.n_in:
            raise ShapeError(f"dense layer expects {self.n_in} features, got {x.shape[-1]}")
        return ag.ACTIVATIONS[self.activation](x @ self.W + self.b)


def _node_input(x, n_nodes, width):
    x = ag.as_tensor(x)
    if x.ndim == 2:
        x = ag.reshape(x, (1,) + x.shape)
    if x.ndim != 3 or x.shape[1] != n_nodes or x.shape[2] != width:
        raise ShapeError(f"node features must be (S, {n_nodes}, {width}), got {x.shape}")
    return x


def _edge_input(e, n_edges, width):
    e = ag.as_tensor(e)
    if e.shape[-2:] != (n_edges, width):
        raise ShapeError(f"edge features must end in ({n_edges}, {width}), got {e.shape}")
    return e


class EccLayer(Layer):
    """Edge-conditioned convolution.

    ``x_i' = act(x_i W_root + sum_{j in N(i)} x_j MLP(e_ji) + b)`` where the MLP
    maps edge features through one tanh hidden layer to an ``in x out`` block.
    """

    def __init__(self, n_in, n_out, edge_dim=2, mlp_hidden=16, activation="tanh", rng=None):
        super().__init__()
        rng = rng or np.random.default_rng(0)
        self.n_in, self.n_out, self.edge_dim = n_in, n_out, edge_dim
        self.mlp_hidden, self.activation = mlp_hidden, activation
        self._param("W_root", _uniform(rng, n_in, (n_in, n_out)))
        self._param("mlp_W1", _uniform(rng, edge_dim, (edge_dim, mlp_hidden)))
        self._param("mlp_b1", np.zeros(mlp_hidden))
        # scaled so the generated block behaves like an n_in fan-in weight
        self._param("mlp_W2", _uniform(rng, mlp_hidden * n_in, (mlp_hidden, n_in * n_out)))
        self._param("mlp_b2", np.zeros(n_in * n_out))
        self._param("b", np.zeros(n_out))

    def edge_weights(self, edge_feats):
        p = self.params
        hidden = ag.tanh(ag.as_tensor(edge_feats) @ p["mlp_W1"] + p["mlp_b1"])
        theta = hidden @ p["mlp_W2"] + p["mlp_b2"]
        return ag.reshape(theta, (edge_feats.shape[0], self.n_in, self.n_out))

    def __call__(self, x, edge_feats, topo):
        single = ag.as_tensor(x).ndim == 2
        x = _node_input(x, topo.n_nodes, self.n_in)
        edge_feats = _edge_input(edge_feats, topo.n_edges, self.edge_dim)
        if edge_feats.ndim != 2:
            raise ShapeError("ECC edge features must be shared across graph copies")
        p = self.params
        out = x @ p["W_root"] + p["b"]
        if topo.n_edges:
            theta = self.edge_weights(edge_feats)                       # Ed x in x out
            xj = ag.transpose(ag.take(x, topo.senders, axis=1), (1, 0, 2))  # Ed x S x in
            msg = ag.transpose(ag.matmul(xj, theta), (1, 0, 2))          # S x Ed x out
            out = out + ag.segment_sum(msg, topo.receivers, topo.n_nodes, axis=1)
        out = ag.ACTIVATIONS[self.activation](out)
        return _squeeze(out) if single else out


def _squeeze(t):
    return ag.reshape(t, t.shape[1:])


class XenetLayer(Layer):
    """XENET convolution producing node and edge embeddings.

    ``s_ij = PReLU([x_i, x_j, e_ij, e_ji] W_s + b_s)``; node outputs use the
    summed outgoing and incoming stacks, edge outputs read ``s_ij`` directly.
    Both outputs pass through a sigmoid.
    """

    def __init__(self, node_in, edge_in, stack, node_out, edge_out, prelu_init=0.25, rng=None):
        super().__init__()
        rng = rng or np.random.default_rng(0)
        self.node_in, self.edge_in, self.stack = node_in, edge_in, stack
        self.node_out, self.edge_out = node_out, edge_out
        width = 2 * node_in + 2 * edge_in
        self._param("W_s", _uniform(rng, width, (width, stack)))
        self._param("b_s", np.zeros(stack))
        self._param("alpha", np.full(stack, prelu_init))
        self._param("W_n", _uniform(rng, node_in + 2 * stack, (node_in + 2 * stack, node_out)))
        self._param("b_n", np.zeros(node_out))
        self._param("W_c", _uniform(rng, stack, (stack, edge_out)))
        self._param("b_c", np.zeros(edge_out))

    def __call__(self, x, edge_feats, topo):
        single = ag.as_tensor(x).ndim == 2
        x = _node_input(x, topo.n_nodes, self.node_in)
        e = _edge_input(edge_feats, topo.n_edges, self.edge_in)
        s_count = x.shape[0]
        if e.ndim == 2:
            e = ag.broadcast_to(e, (s_count,) + e.shape)
        elif e.shape[0] != s_count:
            raise ShapeError("edge features and node features disagree on graph copies")
        p = self.params
        xi = ag.take(x, topo.senders, axis=1)
        xj = ag.take(x, topo.receivers, axis=1)
        e_rev = ag.take(e, topo.reverse, axis=1)
        z = ag.concat([xi, xj, e, e_rev], axis=-1) @ p["W_s"] + p["b_s"]
        s = ag.prelu(z, p["alpha"])                                      # S x Ed x stack
        s_out = ag.segment_sum(s, topo.senders, topo.n_nodes, axis=1)
        s_in = ag.segment_sum(s, topo.receivers, topo.n_nodes, axis=1)
        x_new = ag.sigmoid(ag.concat([x, s_out, s_in], axis=-1) @ p["W_n"] + p["b_n"])
        e_new = ag.sigmoid(s @ p["W_c"] + p["b_c"])
        if single:
            return _squeeze(x_new), _squeeze(e_new)
        return x_new, e_new


class LstmLayer(Layer):
    """LSTM cell with sigmoid gates.

    The cell output activation defaults to tanh; ``output_activation="sigmoid"``
    applies the sigmoid to the cell state instead.
    """

    GATES = ("f", "i", "o", "c")

    def __init__(self, n_in, hidden, output_activation="tanh", rng=None):
        super().__init__()
        rng = rng or np.random.default_rng(0)
        if output_activation not in ("tanh", "sigmoid"):
            raise ValueError("output_activation must be 'tanh' or 'sigmoid'")
        self.n_in, self.hidden, self.output_activation = n_in, hidden, output_activation
        for g in self.GATES:
            self._param(f"W_{g}", _uniform(rng, n_in, (n_in, hidden)))
        for g in self.GATES:
            self._param(f"U_{g}", _uniform(rng, hidden, (hidden, hidden)))
        for g in self.GATES:
            self._param(f"b_{g}", np.zeros(hidden))

    def step(self, x_t, h_prev, c_prev):
        x_t, h_prev, c_prev = ag.as_tensor(x_t), ag.as_tensor(h_prev), ag.as_tensor(c_prev)
        if x_t.shape[-1] != self.n_in or h_prev.shape[-1] != self.hidden \
                or c_prev.shape[-1] != self.hidden:
            raise ShapeError("LSTM step inputs have inconsistent widths")
        p = self.params

        def pre(g):
            return x_t @ p[f"W_{g}"] + h_prev @ p[f"U_{g}"] + p[f"b_{g}"]

        f = ag.sigmoid(pre("f"))
        i = ag.sigmoid(pre("i"))
        o = ag.sigmoid(pre("o"))
        cand = ag.tanh(pre("c"))
        c = f * c_prev + i * cand
        h = o * ag.ACTIVATIONS[self.output_activation](c)
        return h, c

    def __call__(self, seq):
        """Run over a ``(B, T, n_in)`` sequence from zero state; returns ``(B, T, hidden)``."""
        seq = ag.as_tensor(seq)
        if seq.ndim != 3 or seq.shape[2] != self.n_in:
            raise ShapeError(f"LSTM expects (B, T, {self.n_in}), got {seq.shape}")
        b, horizon = seq.shape[0], seq.shape[1]
        steps = ag.transpose(seq, (1, 0, 2))
        h = ag.Tensor(np.zeros((b, self.hidden)))
        c = ag.Tensor(np.zeros((b, self.hidden)))
        outs = []
        for t in range(horizon):
            h, c = self.step(ag.index0(steps, t), h, c)
            outs.append(h)
        return ag.transpose(ag.stack(outs, axis=0), (1, 0, 2))
