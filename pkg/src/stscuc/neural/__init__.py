"""Graph neural network and LSTM classifiers built on a small numpy autodiff engine."""
from .autograd import Tensor, binary_cross_entropy, parameter
from .estimators import EdgeCriticalityClassifier, STNodeClassifier
from .layers import (Dense, EccLayer, LstmLayer, ShapeError, Topology, XenetLayer,
                     topology_from_adjacency, topology_from_edges)
from .models import ECC, XENET, EcModel, InputScaling, ModelConfig, NcModel, model_from_dict
from .training import (TrainConfig, TrainingDivergedError, gradient_check, model_gradient_check,
                       predict, train)

__all__ = [
    "Tensor", "parameter", "binary_cross_entropy",
    "Dense", "EccLayer", "XenetLayer", "LstmLayer", "Topology", "ShapeError",
    "topology_from_adjacency", "topology_from_edges",
    "ECC", "XENET", "NcModel", "EcModel", "ModelConfig", "InputScaling", "model_from_dict",
    "TrainConfig", "TrainingDivergedError", "train", "predict", "gradient_check",
    "model_gradient_check", "STNodeClassifier", "EdgeCriticalityClassifier",
]
