"""Hot per-tick kernels, compiled when available.

The Cython extension ``_ckernels`` is used if it imports; otherwise the numpy
implementation in ``_pykernels`` is used. Set ``CAUSALSTREAM_PURE_PYTHON=1``
to force the fallback.
"""
from __future__ import annotations

import os

import numpy as np

from . import _pykernels

_ckernels = None
if not os.environ.get("CAUSALSTREAM_PURE_PYTHON"):
    try:
        from . import _ckernels
    except ImportError:
        _ckernels = None

BACKEND = "cython" if _ckernels is not None else "python"
_impl = _ckernels if _ckernels is not None else _pykernels

__all__ = [
    "BACKEND",
    "backends",
    "mode_design",
    "best_diag_permutation",
    "best_causal_order",
    "rls_update",
    "demix_update",
]


def backends() -> dict:
    """Available kernel modules keyed by name (for tests and benchmarks)."""
    out = {"python": _pykernels}
    if _ckernels is not None:
        out["cython"] = _ckernels
    return out


def mode_design(winv, phi0, lam, owner, n_steps: int) -> np.ndarray:
    return _impl.mode_design(
        np.ascontiguousarray(winv, dtype=float),
        np.ascontiguousarray(phi0, dtype=complex),
        np.ascontiguousarray(lam, dtype=complex),
        np.ascontiguousarray(owner, dtype=np.int64),
        int(n_steps),
    )


def best_diag_permutation(score):
    return _impl.best_diag_permutation(np.ascontiguousarray(score, dtype=float))


def best_causal_order(b):
    return _impl.best_causal_order(np.ascontiguousarray(b, dtype=float))


def rls_update(a, p, prev, new, mu: float) -> None:
    _impl.rls_update(a, p, np.ascontiguousarray(prev, dtype=float),
                     np.ascontiguousarray(new, dtype=float), float(mu))


def demix_update(w, energy, x, mu: float) -> np.ndarray:
    return _impl.demix_update(w, energy, np.asarray(x, dtype=float), float(mu))
