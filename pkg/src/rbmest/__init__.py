"""Neural-network (RBM) estimators for Pauli-sum observables."""

from .pauli import Observable, PauliString, parse_observable
from .dataset import Dataset, MeasurementRecord
from .rbm import RBM
from .sampler import SamplerConfig, draw_samples
from ._backend import DEFAULT as SAMPLER_BACKEND

__all__ = [
    "Observable",
    "PauliString",
    "parse_observable",
    "Dataset",
    "MeasurementRecord",
    "RBM",
    "SamplerConfig",
    "draw_samples",
    "SAMPLER_BACKEND",
]
__version__ = "0.1.0"
