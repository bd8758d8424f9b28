"""Symmetric fixed-point ICA.

Splits a multivariate window ``x`` (d x n) into a demixing matrix ``W`` and
independent non-Gaussian signals ``E = W x``. Whitening is folded into ``W``
so it maps raw observations straight to signals.
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from .errors import DegenerateInputError

__all__ = ["IcaConfig", "IcaResult", "center_whiten", "fixed_point_ica"]

_RIDGE = 1e-10
_SINGULAR = 1e-12


@dataclass(frozen=True)
class IcaConfig:
    max_iter: int = 200
    tol: float = 1e-4
    seed: int = 0
    contrast: str = "logcosh"

    def __post_init__(self):
        if self.max_iter < 1:
            raise ValueError("max_iter must be >= 1")
        if not self.tol > 0:
            raise ValueError("tol must be positive")
        if self.contrast not in ("logcosh", "cubic"):
            raise ValueError(f"unknown contrast {self.contrast!r}")


@dataclass
class IcaResult:
    """Output of :func:`fixed_point_ica`.

    ``signals`` is exactly ``w @ x`` for the input ``x``; ``mean`` is the
    per-row sample mean of ``x``, kept for callers that need centred signals.
    """

    w: np.ndarray
    signals: np.ndarray
    mean: np.ndarray
    converged: bool
    n_iter: int


def center_whiten(x):
    """Centre and whiten rows of ``x``.

    Returns ``(z, k_whiten, mean)`` with ``z = k_whiten @ (x - mean)`` and
    sample covariance of ``z`` equal to the identity.
    """
    x = np.asarray(x, dtype=float)
    if x.ndim != 2:
        raise ValueError("x must be a (d, n) matrix")
    if not np.all(np.isfinite(x)):
        raise ValueError("x contains non-finite values")
    d, n = x.shape
    if n <= d:
        raise DegenerateInputError(f"need more samples than dimensions (d={d}, n={n})")
    mean = x.mean(axis=1)
    xc = x - mean[:, None]
    cov = xc @ xc.T / n
    scale = np.trace(cov) / d
    if scale <= 0 or np.any(np.diag(cov) <= _SINGULAR * scale):
        raise DegenerateInputError("constant row in input window")
    evals, evecs = np.linalg.eigh(cov)
    if evals[0] < _SINGULAR * scale:
        raise DegenerateInputError("sample covariance is singular")
    k_whiten = (evecs / np.sqrt(evals + _RIDGE * scale)).T
    return k_whiten @ xc, k_whiten, mean


def _sym_decorrelate(w):
    s, u = np.linalg.eigh(w @ w.T)
    return (u / np.sqrt(s)) @ u.T @ w


def _contrast(u, kind):
    if kind == "logcosh":
        g = np.tanh(u)
        return g, 1.0 - g * g
    return u**3, 3.0 * u * u


def fixed_point_ica(x, cfg: IcaConfig | None = None, w_init=None) -> IcaResult:
    """Demix ``x`` (d x n).

    With ``w_init`` the iteration starts from that demixing matrix instead of
    a random rotation, and each output row keeps the sign of its starting
    row rather than being flipped to positive skewness.
    """
    cfg = cfg or IcaConfig()
    x = np.asarray(x, dtype=float)
    d, n = x.shape
    if n < 10 * d:
        warnings.warn(f"ICA on {n} samples for {d} signals; estimates may be poor", stacklevel=2)
    z, k_whiten, mean = center_whiten(x)

    if d == 1:
        w = k_whiten.copy()
        if w[0, 0] < 0:
            w = -w
        return IcaResult(w, w @ x, mean, True, 0)

    if w_init is None:
        rot = _sym_decorrelate(np.random.default_rng(cfg.seed).standard_normal((d, d)))
    else:
        w_init = np.asarray(w_init, dtype=float)
        if w_init.shape != (d, d):
            raise ValueError(f"w_init must be {d} x {d}")
        start = np.linalg.solve(k_whiten.T, w_init.T).T
        rot = _sym_decorrelate(start)
    converged = False
    it = 0
    for it in range(1, cfg.max_iter + 1):
        g, gp = _contrast(rot @ z, cfg.contrast)
        new = g @ z.T / n - gp.mean(axis=1)[:, None] * rot
        new = _sym_decorrelate(new)
        lim = np.max(np.abs(np.abs(np.einsum("ij,ij->i", new, rot)) - 1.0))
        rot = new
        if lim < cfg.tol:
            converged = True
            break

    w = rot @ k_whiten
    if w_init is None:
        flip = np.mean((w @ (x - mean[:, None])) ** 3, axis=1) < 0
    else:
        flip = np.einsum("ij,ij->i", rot, _sym_decorrelate(start)) < 0
    w[flip] *= -1.0
    return IcaResult(w, w @ x, mean, converged, it)
