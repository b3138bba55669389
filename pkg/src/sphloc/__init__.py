"""Multi-scale spherical location encoders and a geographic prior classifier."""

from .encoders import FAMILIES, PositionEncoder, ScaleSchedule, encode, output_dim
from .estimator import LocationClassifier
from .geometry import SphericalPoint, central_angle, great_circle_distance, to_cartesian
from .metrics import EvalReport, evaluate, mrr, top_k
from .synth import Dataset, MvMFSpec, generate
from .training import Checkpoint, grid_search, train

__version__ = "0.1.0"

__all__ = [
    "FAMILIES",
    "Checkpoint",
    "Dataset",
    "EvalReport",
    "LocationClassifier",
    "MvMFSpec",
    "PositionEncoder",
    "ScaleSchedule",
    "SphericalPoint",
    "central_angle",
    "encode",
    "evaluate",
    "generate",
    "great_circle_distance",
    "grid_search",
    "mrr",
    "output_dim",
    "to_cartesian",
    "top_k",
    "train",
]
