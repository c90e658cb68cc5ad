"""Small float64 neural-network kernel with analytic gradients."""
from .gradcheck import GradCheckReport, gradient_check, relative_error
from .layers import (
    ACTIVATIONS,
    LSTM,
    Activation,
    Conv1D,
    Dense,
    Dropout,
    Flatten,
    Layer,
    MaxPool1D,
    Reshape,
    ShapeError,
    activation_derivative,
    apply_activation,
    conv1d_forward,
    conv1d_output_length,
    sigmoid,
)
from .network import BCE_EPS, ForwardCache, Network, StaleCacheError, binary_cross_entropy
from .serialization import ModelFormatError, load_network, save_network

__all__ = [
    "ACTIVATIONS", "LSTM", "Activation", "Conv1D", "Dense", "Dropout", "Flatten",
    "Layer", "MaxPool1D", "Reshape", "ShapeError", "activation_derivative",
    "apply_activation", "conv1d_forward", "conv1d_output_length", "sigmoid",
    "BCE_EPS", "ForwardCache", "Network", "StaleCacheError", "binary_cross_entropy",
    "GradCheckReport", "gradient_check", "relative_error",
    "ModelFormatError", "load_network", "save_network",
]
