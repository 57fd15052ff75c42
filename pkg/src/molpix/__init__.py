"""Molecule image encoding and Inception-ResNet property models.

SMILES -> molecular graph -> 2D depiction -> 80x80 integer-code image ->
convolutional network trained with a two-stage RMSprop / SGD protocol.
"""

from .data import Dataset, load_csv, make_splits
from .estimator import InceptionClassifier, InceptionRegressor, MolImageEncoder
from .exceptions import *  # noqa: F401,F403
from .layout import DepictedMol, layout, rotate
from .metrics import auc, rmse
from .net import NetSpec, Network, build, load_checkpoint, param_count, save_checkpoint
from .raster import MolImage, augment, export_pgm, rasterize, read_pgm
from .smiles import MolGraph, parse_smiles, ring_perception
from .training import TrainConfig, train

__version__ = "0.1.0"

__all__ = [
    "Dataset", "DepictedMol", "InceptionClassifier", "InceptionRegressor", "MolGraph", "MolImage",
    "MolImageEncoder", "NetSpec", "Network", "TrainConfig",
    "auc", "augment", "build", "export_pgm", "layout", "load_checkpoint", "load_csv", "make_splits", "param_count",
    "parse_smiles", "rasterize", "read_pgm", "ring_perception", "rmse", "rotate", "save_checkpoint", "train",
]
