"""Deep Fréchet regression: neural networks for metric-space responses.

A ReLU network maps Euclidean predictors to a final-layer representation;
the output layer is global Fréchet regression on those representations, so
predictions are weighted Fréchet means of training responses in the response
space (distributions, graph Laplacians, compositions, or vectors).
"""

__version__ = "0.1.0"

from .checkpoint import Checkpoint, load_checkpoint, save_checkpoint
from .config import GRIDS, HYPERPARAMS, STOPPING, TrainConfig, experiment_config
from .errors import (
    ContractError,
    DegenerateCompositionError,
    DimensionError,
    FormatError,
    FrechetNetError,
    NumericError,
    ParameterError,
    SampleSizeError,
    SingularityError,
    TrainingError,
    VersionError,
)
from .gradients import check_gradients, loss_and_grad
from .head import fit_head, gfr_predict, predict, weights
from .network import Architecture, NetworkParams, forward, init_params
from .spaces import Aitchison, Euclidean, Laplacian, Wasserstein, make_space, zero_replace
from .training import TrainHistory, grid_search, train

__all__ = [
    "Aitchison", "Architecture", "Checkpoint", "ContractError", "DegenerateCompositionError",
    "DimensionError", "Euclidean", "FormatError", "FrechetNetError", "GRIDS", "Laplacian",
    "NetworkParams", "NumericError", "ParameterError", "SampleSizeError", "SingularityError",
    "HYPERPARAMS", "STOPPING", "TrainConfig", "TrainHistory", "TrainingError", "VersionError",
    "Wasserstein", "check_gradients", "fit_head", "forward", "gfr_predict", "grid_search",
    "init_params", "load_checkpoint", "loss_and_grad", "make_space", "experiment_config",
    "predict", "save_checkpoint", "train", "weights", "zero_replace",
]
