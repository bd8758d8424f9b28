"""Latent linear dynamics of a single inherent signal.

A signal is delay-embedded, a weighted least-squares transition matrix is fit
between consecutive delay vectors, and its leading eigenpairs give the
modes/eigenvalues used for reconstruction and forecasting. The transition
matrix and its inverse correlation matrix can then be updated one sample at a
time with forgetting-factor recursive least squares.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

from . import kernels
from .embedding import build_hankel, build_shift_pairs, invert_embed
from .errors import DegenerateInputError

__all__ = [
    "SelfDynamicsFactor",
    "TransitionState",
    "ModeInterpretation",
    "optimal_rank",
    "hard_threshold_coefficient",
    "estimate_factor",
    "rls_step",
    "refresh_eigen",
    "evolve",
    "reconstruct",
    "interpret_eigenvalue",
    "spectral_order",
]

_EIGVEC_COND_LIMIT = 1e12
_GRAM_COND_LIMIT = 1e10


@dataclass
class SelfDynamicsFactor:
    """Modes (columns of ``phi``, shape ``(h, k)``) and eigenvalues ``lam``.

    ``approximate`` is set when the eigenbasis could not be formed reliably
    (defective or nilpotent transition matrix).
    """

    phi: np.ndarray
    lam: np.ndarray
    approximate: bool = False

    @property
    def k(self) -> int:
        return int(self.lam.shape[0])

    @property
    def h(self) -> int:
        return int(self.phi.shape[0])


@dataclass
class TransitionState:
    a: np.ndarray
    p: np.ndarray
    mu: float = 0.98

    def __post_init__(self):
        if not 0.0 < self.mu <= 1.0:
            raise ValueError(f"forgetting factor must lie in (0, 1], got {self.mu}")

    def copy(self) -> "TransitionState":
        return TransitionState(self.a.copy(), self.p.copy(), self.mu)


@dataclass(frozen=True)
class ModeInterpretation:
    decay_rate: float
    frequency: float
    delta_t: float = field(default=1.0)


def hard_threshold_coefficient(beta: float) -> float:
    """Polynomial approximation of the optimal hard-threshold multiplier for
    an unknown noise level, applied to the median singular value."""
    return 0.56 * beta**3 - 0.95 * beta**2 + 1.82 * beta + 1.43


def optimal_rank(singular_values, rows: int, cols: int) -> int:
    """Number of singular values above the median-based optimal hard threshold.

    Values below the numerical-rank floor ``eps * max(rows, cols) * s_max``
    never count, so exactly low-rank inputs are not inflated by round-off.
    The result is at least 1.
    """
    s = np.asarray(singular_values, dtype=float)
    if s.size == 0 or not np.all(np.isfinite(s)) or s.max() <= 0:
        raise DegenerateInputError("singular value spectrum is all zero")
    beta = min(rows, cols) / max(rows, cols)
    cutoff = max(
        hard_threshold_coefficient(beta) * float(np.median(s)),
        np.finfo(float).eps * max(rows, cols) * float(s.max()),
    )
    return max(1, int(np.count_nonzero(s > cutoff)))


def spectral_order(lam) -> np.ndarray:
    """Indices sorting eigenvalues by magnitude (desc), then argument (asc)."""
    lam = np.asarray(lam)
    mag = np.round(np.abs(lam), 10)
    return np.lexsort((np.angle(lam), -mag))


def _forgetting_weights(m: int, mu: float) -> np.ndarray:
    return mu ** np.arange(m - 1, -1, -1, dtype=float)


def _batch_transition(left, right, wts):
    gram = (right * wts) @ right.T
    cross = (left * wts) @ right.T
    evals = np.linalg.eigvalsh(gram)
    top = evals[-1]
    if top <= 0:
        raise DegenerateInputError("regressor matrix is zero")
    if evals[0] <= top / _GRAM_COND_LIMIT:
        gram = gram + (top / _GRAM_COND_LIMIT) * np.eye(gram.shape[0])
    p = np.linalg.inv(gram)
    p = 0.5 * (p + p.T)
    return cross @ p, p


def estimate_factor(signal, h: int, mu: float = 0.98):
    """Fit the self-dynamics of one signal.

    Builds the Hankel matrix, the one-step pair ``(L, R)``, a weighted SVD of
    ``R`` with rank chosen by :func:`optimal_rank`, the projected operator and
    its eigendecomposition. Also returns the full transition matrix
    ``A = (L M R^T)(R M R^T)^{-1}`` and ``P = (R M R^T)^{-1}`` for streaming
    updates, with ``M`` the forgetting weights.
    """
    s = np.asarray(signal, dtype=float)
    if s.ndim != 1 or s.shape[0] < h + 2:
        raise ValueError(f"need at least h + 2 = {h + 2} samples")
    if not 0.0 < mu <= 1.0:
        raise ValueError("forgetting factor must lie in (0, 1]")
    left, right = build_shift_pairs(build_hankel(s, h))
    wts = _forgetting_weights(right.shape[1], mu)
    root = np.sqrt(wts)
    u, sv, vt = np.linalg.svd(right * root, full_matrices=False)
    if not sv[0] > 0:
        raise DegenerateInputError("delay matrix is numerically zero")
    k = optimal_rank(sv, *right.shape)
    u, sv, v = u[:, :k], sv[:k], vt[:k].T
    atilde = u.T @ (left * root) @ (v / sv)
    lam, z = np.linalg.eig(atilde)
    order = spectral_order(lam)
    factor = SelfDynamicsFactor(phi=u @ z[:, order], lam=lam[order])
    a, p = _batch_transition(left, right, wts)
    return factor, TransitionState(a, p, mu)


def rls_step(state: TransitionState, prev_embed, new_embed) -> TransitionState:
    """Fold one delay-vector pair into ``(A, P)`` with forgetting."""
    prev = np.asarray(prev_embed, dtype=float)
    new = np.asarray(new_embed, dtype=float)
    h = state.a.shape[0]
    if prev.shape != (h,) or new.shape != (h,):
        raise ValueError(f"delay vectors must have length {h}")
    out = state.copy()
    kernels.rls_update(out.a, out.p, prev, new, state.mu)
    return out


def refresh_eigen(state: TransitionState, k: int) -> SelfDynamicsFactor:
    """Leading ``k`` eigenpairs of the transition matrix.

    Falls back to an ordered Schur basis (flagged ``approximate``) when the
    eigenvectors are numerically dependent.
    """
    a = state.a
    if not 1 <= k <= a.shape[0]:
        raise ValueError(f"k={k} outside [1, {a.shape[0]}]")
    lam, vecs = np.linalg.eig(a)
    order = spectral_order(lam)[:k]
    lam, vecs = lam[order], vecs[:, order]
    if np.max(np.abs(lam)) == 0.0:
        return SelfDynamicsFactor(vecs.astype(complex), lam.astype(complex), approximate=True)
    if np.linalg.cond(vecs) < _EIGVEC_COND_LIMIT:
        return SelfDynamicsFactor(vecs.astype(complex), lam.astype(complex))
    cut = np.abs(lam[-1]) * (1 - 1e-9)
    t, q, _ = scipy.linalg.schur(a.astype(complex), output="complex", sort=lambda x: abs(x) >= cut)
    return SelfDynamicsFactor(q[:, :k], np.diag(t)[:k].copy(), approximate=True)


def evolve(s, factor: SelfDynamicsFactor, steps: int) -> np.ndarray:
    if steps < 0:
        raise ValueError("steps must be non-negative")
    return factor.lam**steps * np.asarray(s, dtype=complex)


def reconstruct(s, factor: SelfDynamicsFactor) -> float:
    return invert_embed(factor.phi @ np.asarray(s, dtype=complex))


def interpret_eigenvalue(lam: complex, delta_t: float = 1.0) -> ModeInterpretation:
    """Continuous-time decay rate and angular frequency of a discrete mode."""
    if lam == 0:
        raise ValueError("zero eigenvalue has no logarithm")
    if not delta_t > 0:
        raise ValueError("delta_t must be positive")
    return ModeInterpretation(
        decay_rate=float(np.log(abs(lam)) / delta_t),
        frequency=float(np.angle(lam) / delta_t),
        delta_t=float(delta_t),
    )
