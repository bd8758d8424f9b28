"""Pure-Python/numpy reference kernels.

Every function here has a compiled twin in ``_ckernels.pyx`` with the same
signature and semantics; ``causalstream.kernels`` picks one at import.
"""
from __future__ import annotations

import itertools
from functools import lru_cache

import numpy as np

_CHUNK = 40320  # 8!


@lru_cache(maxsize=16)
def _permutations(d: int) -> np.ndarray:
    return np.array(list(itertools.permutations(range(d))), dtype=np.int64)


def _perm_chunks(d: int):
    if d <= 8:
        yield _permutations(d)
        return
    it = itertools.permutations(range(d))
    while True:
        block = list(itertools.islice(it, _CHUNK))
        if not block:
            return
        yield np.array(block, dtype=np.int64)


def mode_design(winv, phi0, lam, owner, n_steps):
    """Linear map from real latent initial conditions to stacked outputs.

    Column ``2j`` (``2j + 1``) is the response of the window to the real
    (imaginary) part of latent coordinate ``j``; row ``tau * d + r`` is
    output ``r`` at step ``tau``.
    """
    winv = np.asarray(winv, dtype=float)
    d = winv.shape[0]
    taus = np.arange(n_steps)
    coef = phi0[None, :] * lam[None, :] ** taus[:, None]  # (n_steps, K)
    mix = winv[:, owner]  # (d, K)
    g = np.empty((n_steps, d, 2 * len(lam)))
    g[:, :, 0::2] = coef.real[:, None, :] * mix[None, :, :]
    g[:, :, 1::2] = -coef.imag[:, None, :] * mix[None, :, :]
    return g.reshape(n_steps * d, 2 * len(lam))


def best_diag_permutation(score):
    """Row permutation maximising ``sum(score[perm[i], i])``.

    Permutations are scanned in lexicographic order and only a strict
    improvement replaces the incumbent.
    """
    score = np.asarray(score, dtype=float)
    d = score.shape[0]
    cols = np.arange(d)
    best_val = -np.inf
    best = np.arange(d, dtype=np.int64)
    first = True
    for perms in _perm_chunks(d):
        with np.errstate(invalid="ignore"):
            vals = score[perms, cols[None, :]].sum(axis=1)
        vals = np.where(np.isnan(vals), -np.inf, vals)
        j = int(np.argmax(vals))
        if first or vals[j] > best_val:
            best_val, best = float(vals[j]), perms[j].copy()
            first = False
    return best, best_val


def best_causal_order(b):
    """Permutation minimising the squared upper-triangular mass of
    ``b[perm][:, perm]`` (diagonal included)."""
    b = np.asarray(b, dtype=float)
    d = b.shape[0]
    sq = b * b
    iu = np.triu_indices(d)
    best_val = np.inf
    best = np.arange(d, dtype=np.int64)
    for perms in _perm_chunks(d):
        rows = perms[:, iu[0]]
        cols = perms[:, iu[1]]
        vals = sq[rows, cols].sum(axis=1)
        j = int(np.argmin(vals))
        if vals[j] < best_val:
            best_val, best = float(vals[j]), perms[j].copy()
    return best, best_val


def rls_update(a, p, prev, new, mu):
    """One forgetting-factor RLS step, in place on ``a`` and ``p``."""
    pp = p @ prev
    gamma = (prev @ p) / (mu + prev @ pp)
    a += np.outer(new - a @ prev, gamma)
    p -= np.outer(pp, gamma)
    p /= mu
    p[:] = 0.5 * (p + p.T)


def demix_update(w, energy, x, mu):
    """Deflated per-row tracking update, in place on ``w`` and ``energy``.

    Returns the projections computed with the pre-update rows.
    """
    xt = np.array(x, dtype=float)
    d = w.shape[0]
    y = np.empty(d)
    for i in range(d):
        wi = w[i]
        yi = float(wi @ xt)
        energy[i] = mu * energy[i] + yi * yi
        if energy[i] > 0.0:
            wi += (yi / energy[i]) * (xt - yi * wi)
        xt -= yi * wi
        y[i] = yi
    return y
