"""Graph masked autoencoder with adversarial easy-to-hard masking and a uniformity regularizer."""

from .graph import Graph, SbmSpec, generate_sbm, load_graph
from .model import Model, ModelConfig
from .training import TrainConfig, fit

__all__ = ["Graph", "SbmSpec", "generate_sbm", "load_graph", "Model", "ModelConfig", "TrainConfig", "fit"]
__version__ = "0.1.0"
