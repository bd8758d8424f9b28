"""Static reference estimate: one ICA over the whole stream."""
from __future__ import annotations

import numpy as np

from .causal import CausalResult, identify_causality
from .ica import IcaConfig, fixed_point_ica

__all__ = ["static_causal_estimate"]


def static_causal_estimate(x, edge_threshold: float = 0.3, seed: int = 0) -> CausalResult:
    """Causal adjacency from a single demixing matrix fit to all of ``x``
    (d x T), ignoring any change in structure over time."""
    res = fixed_point_ica(np.asarray(x, dtype=float), IcaConfig(seed=seed))
    return identify_causality(res.w, edge_threshold)
