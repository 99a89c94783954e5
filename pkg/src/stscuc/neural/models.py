"""Spatio-temporal node classifier and spatial edge classifier."""
from __future__ import annotations

from dataclasses import asdict, dataclass, replace

import numpy as np

from . import autograd as ag
from .layers import EccLayer, LstmLayer, ShapeError, XenetLayer, topology_from_edges

FORMAT_VERSION = 1
ECC, XENET = "ecc", "xenet"


@dataclass(frozen=True)
class ModelConfig:
    gnn: str = ECC
    depth: int = 3
    width: int = 32
    mlp_hidden: int = 16
    lstm_hidden: int = 32
    lstm_output_activation: str = "tanh"
    seed: int = 0

    def __post_init__(self):
        if self.gnn not in (ECC, XENET):
            raise ValueError(f"gnn must be 'ecc' or 'xenet', got {self.gnn!r}")
        if self.depth < 1 or self.width < 1 or self.mlp_hidden < 1 or self.lstm_hidden < 1:
            raise ValueError("depth and widths must be positive")


class InputScaling:
    """Divide node features by one scalar and edge features per column, fitted on training data."""

    def __init__(self, node_scale=1.0, edge_scale=(1.0, 1.0)):
        self.node_scale = float(node_scale)
        self.edge_scale = np.asarray(edge_scale, dtype=float)

    @classmethod
    def fit(cls, nf, ef):
        node = float(np.max(np.abs(nf))) if np.size(nf) else 1.0
        edge = np.max(np.abs(ef), axis=0) if np.size(ef) else np.ones(2)
        edge = np.where(np.isfinite(edge) & (edge > 0), edge, 1.0)
        return cls(node if node > 0 else 1.0, edge)

    def nodes(self, nf):
        return np.asarray(nf, dtype=float) / self.node_scale

    def edges(self, ef):
        ef = np.asarray(ef, dtype=float) / self.edge_scale
        # an unlimited line scales to inf; cap it at twice the largest finite value
        return np.where(np.isfinite(ef), ef, 2.0)

    def to_dict(self):
        return {"node_scale": self.node_scale, "edge_scale": self.edge_scale.tolist()}

    @classmethod
    def from_dict(cls, doc):
        return cls(doc["node_scale"], doc["edge_scale"])


class _GraphModel:
    kind = None

    def __init__(self, n_nodes, edge_index, horizon, config):
        self.config = config
        self.n_nodes, self.horizon = int(n_nodes), int(horizon)
        self.edge_index = np.asarray(edge_index, dtype=int).reshape(-1, 2)
        self.topology = topology_from_edges(self.edge_index, self.n_nodes)
        self.scaling = InputScaling()
        self.layers = []

    def named_layers(self):
        return list(self.layers)

    def parameters(self):
        return [(f"{lname}.{pname}", p)
                for lname, layer in self.named_layers() for pname, p in layer.parameters()]

    def state(self):
        return {name: p.data.copy() for name, p in self.parameters()}

    def load_state(self, state):
        for name, p in self.parameters():
            value = np.asarray(state[name], dtype=float)
            if value.shape != p.shape:
                raise ShapeError(f"parameter {name}: expected {p.shape}, got {value.shape}")
            p.data = value.copy()

    def zero_grad(self):
        for _, p in self.parameters():
            p.grad = None

    def _check_inputs(self, nf, ef):
        nf = np.asarray(nf, dtype=float)
        if nf.ndim == 2:
            nf = nf[None]
        if nf.shape[1:] != (self.n_nodes, self.horizon):
            raise ShapeError(f"node features must be (B, {self.n_nodes}, {self.horizon}), "
                             f"got {nf.shape}")
        ef = np.asarray(ef, dtype=float)
        if ef.shape != (len(self.edge_index), 2):
            raise ShapeError(f"edge features must be ({len(self.edge_index)}, 2), got {ef.shape}")
        return self.scaling.nodes(nf), self.topology.directed_features(self.scaling.edges(ef))

    def predict_proba(self, nf, ef):
        """Probabilities as a numpy array; a single ``(N, T)`` input drops the batch axis."""
        single = np.ndim(nf) == 2
        out = self.forward(nf, ef).data
        return out[0] if single else out

    def to_dict(self):
        return {
            "format": FORMAT_VERSION,
            "kind": self.kind,
            "config": asdict(self.config),
            "dims": self._dims(),
            "scaling": self.scaling.to_dict(),
            "layers": [{"name": lname,
                        "params": [{"name": pname, "shape": list(p.shape),
                                    "values": p.data.ravel().tolist()}
                                   for pname, p in layer.parameters()]}
                       for lname, layer in self.named_layers()],
        }

    @staticmethod
    def from_dict(doc):
        if not isinstance(doc, dict) or doc.get("format") != FORMAT_VERSION:
            raise ValueError("model: unsupported or missing format version")
        cls = {"nc": NcModel, "ec": EcModel}.get(doc.get("kind"))
        if cls is None:
            raise ValueError(f"model: unknown kind {doc.get('kind')!r}")
        model = cls(config=ModelConfig(**doc["config"]), **doc["dims"])
        model.scaling = InputScaling.from_dict(doc["scaling"])
        state = {}
        for layer in doc["layers"]:
            for p in layer["params"]:
                state[f"{layer['name']}.{p['name']}"] = np.array(
                    p["values"], dtype=float).reshape(p["shape"])
        model.load_state(state)
        return model


class NcModel(_GraphModel):
    """Per-period GNN over the bus graph, an LSTM per bus across periods, and a
    per-generator sigmoid head reading its bus's LSTM output.

    Output shape is ``(B, G, T)``.
    """

    kind = "nc"

    def __init__(self, n_nodes, edge_index, horizon, gen_bus, config=None):
        config = config or ModelConfig()
        super().__init__(n_nodes, edge_index, horizon, config)
        self.gen_bus = np.asarray(gen_bus, dtype=int)
        if self.gen_bus.size and (self.gen_bus.min() < 0 or self.gen_bus.max() >= n_nodes):
            raise ShapeError("generator bus outside node range")
        rng = np.random.default_rng(config.seed)
        w = config.width
        self.gnn = []
        for d in range(config.depth):
            n_in = 1 if d == 0 else w
            if config.gnn == ECC:
                self.gnn.append(EccLayer(n_in, w, 2, config.mlp_hidden, "tanh", rng=rng))
            else:
                self.gnn.append(XenetLayer(n_in, 2 if d == 0 else w, w, w, w, rng=rng))
        self.lstm = LstmLayer(w, config.lstm_hidden, config.lstm_output_activation, rng=rng)
        self.head = _Head(len(self.gen_bus), config.lstm_hidden)

    def _dims(self):
        return {"n_nodes": self.n_nodes, "edge_index": self.edge_index.tolist(),
                "horizon": self.horizon, "gen_bus": self.gen_bus.tolist()}

    def named_layers(self):
        return ([(f"gnn{i}", layer) for i, layer in enumerate(self.gnn)]
                + [("lstm", self.lstm), ("head", self.head)])

    def node_embeddings(self, nf, ef):
        """GNN outputs reshaped to ``(B, T, N, width)``."""
        nf, ef = self._check_inputs(nf, ef)
        b, n, horizon = nf.shape
        x = ag.Tensor(np.transpose(nf, (0, 2, 1)).reshape(b * horizon, n, 1))
        e = ag.Tensor(ef)
        for layer in self.gnn:
            if isinstance(layer, XenetLayer):
                x, e = layer(x, e, self.topology)
            else:
                x = layer(x, e, self.topology)
        return ag.reshape(x, (b, horizon, n, self.config.width))

    def forward(self, nf, ef):
        emb = self.node_embeddings(nf, ef)
        b, horizon, n, w = emb.shape
        seq = ag.reshape(ag.transpose(emb, (0, 2, 1, 3)), (b * n, horizon, w))
        hidden = ag.reshape(self.lstm(seq), (b, n, horizon, self.config.lstm_hidden))
        return self.head(ag.take(hidden, self.gen_bus, axis=1))


class EcModel(_GraphModel):
    """XENET stack on full-horizon node features; each line's two directed edge
    embeddings are summed and fed to a per-line sigmoid head over periods.

    Output shape is ``(B, E, T)``.
    """

    kind = "ec"

    def __init__(self, n_nodes, edge_index, horizon, config=None):
        config = config or ModelConfig(gnn=XENET, depth=2)
        if config.gnn != XENET:
            raise ValueError("the edge classifier uses XENET layers")
        super().__init__(n_nodes, edge_index, horizon, config)
        rng = np.random.default_rng(config.seed)
        w = config.width
        self.gnn = [XenetLayer(horizon if d == 0 else w, 2 if d == 0 else w, w, w, w, rng=rng)
                    for d in range(config.depth)]
        self.head = _Head(len(self.edge_index), w, horizon)

    def _dims(self):
        return {"n_nodes": self.n_nodes, "edge_index": self.edge_index.tolist(),
                "horizon": self.horizon}

    def named_layers(self):
        return [(f"gnn{i}", layer) for i, layer in enumerate(self.gnn)] + [("head", self.head)]

    def forward(self, nf, ef):
        nf, ef = self._check_inputs(nf, ef)
        x, e = ag.Tensor(nf), ag.Tensor(ef)
        for layer in self.gnn:
            x, e = layer(x, e, self.topology)
        n_lines = self.topology.n_lines
        forward_half = ag.take(e, np.arange(n_lines), axis=1)
        backward_half = ag.take(e, np.arange(n_lines, 2 * n_lines), axis=1)
        return self.head(forward_half + backward_half)


class _Head:
    """Independent sigmoid units, one weight vector per generator or line.

    With ``periods`` unset the input is ``(B, K, T, H)`` and each unit is shared
    across periods; otherwise the input is ``(B, K, H)`` and each unit emits one
    value per period.  Weights start at zero so an untrained head outputs 0.5.
    """

    def __init__(self, units, n_in, periods=None):
        self.periods = periods
        out = 1 if periods is None else periods
        self.params = {"W": ag.parameter(np.zeros((units, n_in, out)), name="W"),
                       "b": ag.parameter(np.zeros((units, out)), name="b")}

    def parameters(self):
        return list(self.params.items())

    def __call__(self, h):
        W, b = self.params["W"], self.params["b"]
        if self.periods is None:
            # (B, K, T, H) @ (K, H, 1) -> (B, K, T, 1)
            z = ag.matmul(h, W)
            z = ag.reshape(z, z.shape[:3]) + b
        else:
            bsz, units, width = h.shape
            z = ag.matmul(ag.reshape(h, (bsz, units, 1, width)), W)
            z = ag.reshape(z, (bsz, units, self.periods)) + b
        return ag.sigmoid(z)


def model_from_dict(doc):
    return _GraphModel.from_dict(doc)


def with_seed(config, seed):
    return replace(config, seed=seed)
