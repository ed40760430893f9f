"""Inverse design of SIW multimode filters: surrogate solver, datasets and neural pipelines."""

from __future__ import annotations

from .__init__conf__ import print_info
from .config import get_config
from .errors import SiwInverseError
from .models import REFERENCE_GEOMETRY, FrequencyGrid, Geometry, RunConfig, Spectrum, SubstrateSpec
from .wave_core import find_resonances, simulate

__all__ = [
    "REFERENCE_GEOMETRY",
    "FrequencyGrid",
    "Geometry",
    "RunConfig",
    "SiwInverseError",
    "Spectrum",
    "SubstrateSpec",
    "find_resonances",
    "get_config",
    "print_info",
    "simulate",
]
