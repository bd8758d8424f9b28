"""Time-delay embedding of scalar series.

Delay vectors are ordered newest-first, ``(s[t], s[t-1], ..., s[t-h+1])``,
and every index in this module is 0-based.
"""
from __future__ import annotations

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

__all__ = ["embed", "build_hankel", "build_shift_pairs", "invert_embed"]


def embed(series, h: int, t: int) -> np.ndarray:
    """Delay vector of length ``h`` ending at sample ``t``."""
    s = np.asarray(series, dtype=float)
    if h < 1:
        raise ValueError(f"embedding dimension must be >= 1, got {h}")
    if t < h - 1 or t >= s.shape[0]:
        raise IndexError(f"t={t} outside [{h - 1}, {s.shape[0] - 1}] for h={h}")
    return s[t - h + 1 : t + 1][::-1].copy()


def build_hankel(series, h: int) -> np.ndarray:
    """Hankel matrix whose column ``j`` is ``embed(series, h, h - 1 + j)``.

    Returns an array of shape ``(h, n - h + 1)``.
    """
    s = np.asarray(series, dtype=float)
    if s.ndim != 1:
        raise ValueError("series must be one-dimensional")
    if h < 1:
        raise ValueError(f"embedding dimension must be >= 1, got {h}")
    if s.shape[0] < h:
        raise ValueError(f"series of length {s.shape[0]} is shorter than h={h}")
    windows = sliding_window_view(s, h)  # (n - h + 1, h), oldest-first rows
    return np.ascontiguousarray(windows[:, ::-1].T)


def build_shift_pairs(hankel: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Split a Hankel matrix into one-step-ahead pairs ``(L, R)``.

    ``R`` holds columns ``0..m-2`` and ``L`` columns ``1..m-1`` so that
    ``L[:, j]`` is the delay vector one step after ``R[:, j]``.
    """
    hankel = np.asarray(hankel)
    if hankel.ndim != 2 or hankel.shape[1] < 2:
        raise ValueError("need a Hankel matrix with at least 2 columns")
    return hankel[:, 1:].copy(), hankel[:, :-1].copy()


def invert_embed(v) -> float:
    """Left inverse of the embedding: real part of the newest-sample slot."""
    v = np.asarray(v)
    if v.ndim != 1 or v.shape[0] == 0:
        raise ValueError("expected a non-empty vector")
    return float(np.real(v[0]))
