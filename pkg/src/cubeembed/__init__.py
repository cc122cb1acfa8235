"""Finding (nearly) undistorted copies of small cubes, paths and trees inside dense subsets."""

__version__ = "0.1.0"

from .config import DEFAULT_CAPS, CapExceeded, Caps
from .cube_core import CubePoint, CubeSubset, epsilon_neighborhood, tail_size
from .embedding import EmbeddingMap, UndistortedForm, distortion, find_copy_brute, generate_undistorted

__all__ = [
    "DEFAULT_CAPS",
    "CapExceeded",
    "Caps",
    "CubePoint",
    "CubeSubset",
    "EmbeddingMap",
    "UndistortedForm",
    "distortion",
    "epsilon_neighborhood",
    "find_copy_brute",
    "generate_undistorted",
    "tail_size",
]
