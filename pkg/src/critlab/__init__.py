"""critlab: variational imaginary-time critical dynamics of the transverse-field Ising chain."""

__version__ = "0.1.0"

from ._backend import NAME as backend  # noqa: E402
from .ansatz import AnsatzSpec, build_ansatz  # noqa: E402
from .collapse import Axes, ScalingDataset, grid_search  # noqa: E402
from .errors import (ArgumentError, CapacityError, CritlabError, DegenerateDataError,  # noqa: E402
                     IntegrationError, NumericError)
from .tfim import build_tfim, exact_ite  # noqa: E402
from .varqite import Trajectory, evolve  # noqa: E402

__all__ = [
    "AnsatzSpec", "ArgumentError", "Axes", "CapacityError", "CritlabError", "DegenerateDataError",
    "IntegrationError", "NumericError", "ScalingDataset", "Trajectory", "backend", "build_ansatz",
    "build_tfim", "evolve", "exact_ite", "grid_search",
]
