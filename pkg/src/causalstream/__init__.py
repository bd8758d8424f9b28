"""Streaming causal discovery and forecasting over regime-switching
multivariate time series."""
from .causal import CausalResult, identify_causality
from .engine import EngineConfig, RegimeEngine, StepOutput, calibrate_tau_unit
from .errors import DegenerateInputError, StructurallySingularError
from .kernels import BACKEND
from .synth import GenConfig, GroundTruth, generate_stream

__all__ = [
    "BACKEND",
    "CausalResult",
    "DegenerateInputError",
    "EngineConfig",
    "GenConfig",
    "GroundTruth",
    "RegimeEngine",
    "StepOutput",
    "StructurallySingularError",
    "calibrate_tau_unit",
    "generate_stream",
    "identify_causality",
]

__version__ = "0.1.0"
