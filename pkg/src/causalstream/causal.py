"""Causal adjacency from a demixing matrix.

Given ``W`` from ICA on data generated by ``x = B x + e``, the rows of ``W``
are a scaled, permuted copy of ``I - B``. The steps below undo the row order
and scaling, read off ``B``, and prune it to a DAG using the causal order that
leaves the least squared mass above the diagonal.

Convention: ``b[i, j]`` is the effect of variable ``j`` on variable ``i``.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.optimize import linear_sum_assignment

from . import kernels
from .errors import StructurallySingularError

__all__ = [
    "EXHAUSTIVE_CAP",
    "CausalResult",
    "permute_nonzero_diagonal",
    "normalize_diagonal",
    "to_adjacency",
    "order_causally",
    "identify_causality",
    "is_acyclic",
]

EXHAUSTIVE_CAP = 10


@dataclass
class CausalResult:
    """``b`` in original variable order, its boolean digraph, the causal
    order found, and whether any search fell back to a heuristic."""

    b: np.ndarray
    digraph: np.ndarray
    order: np.ndarray
    heuristic: bool = False


def permute_nonzero_diagonal(w, cap: int = EXHAUSTIVE_CAP):
    """Row permutation of ``w`` maximising the product of absolute diagonal
    entries. Returns ``(w_tilde, row_perm)`` with ``w_tilde = w[row_perm]``."""
    w = np.asarray(w, dtype=float)
    d = w.shape[0]
    with np.errstate(divide="ignore"):
        score = np.log(np.abs(w))
    if d <= cap:
        perm, best = kernels.best_diag_permutation(score)
        if not np.isfinite(best):
            raise StructurallySingularError("every row permutation leaves a zero on the diagonal")
    else:
        finite = np.where(np.isfinite(score), score, -1e300)
        rows, cols = linear_sum_assignment(-finite)
        perm = np.empty(d, dtype=np.int64)
        perm[cols] = rows
        if not np.all(np.isfinite(score[perm, np.arange(d)])):
            raise StructurallySingularError("every row permutation leaves a zero on the diagonal")
    perm = np.asarray(perm, dtype=np.int64)
    return w[perm].copy(), perm


def normalize_diagonal(w_tilde) -> np.ndarray:
    w_tilde = np.asarray(w_tilde, dtype=float)
    diag = np.diag(w_tilde)
    if np.any(diag == 0):
        raise ZeroDivisionError("zero on the diagonal")
    return w_tilde / diag[:, None]


def to_adjacency(w_prime) -> np.ndarray:
    w_prime = np.asarray(w_prime, dtype=float)
    b = np.eye(w_prime.shape[0]) - w_prime
    np.fill_diagonal(b, 0.0)
    return b


def _greedy_order(b):
    # Repeatedly take as next root the variable whose row (restricted to the
    # remaining variables) has the least squared mass.
    remaining = list(range(b.shape[0]))
    order = []
    sq = b * b
    while remaining:
        costs = [sq[i, remaining].sum() for i in remaining]
        pick = remaining[int(np.argmin(costs))]
        order.append(pick)
        remaining.remove(pick)
    return np.array(order, dtype=np.int64)


def order_causally(b_hat, cap: int = EXHAUSTIVE_CAP):
    """Causal order ``k_perm`` minimising the squared upper-triangular mass of
    ``b_hat[k_perm][:, k_perm]``.

    Returns ``(k_perm, b_tilde, heuristic)`` where ``b_tilde`` is the permuted
    matrix with its upper triangle zeroed.
    """
    b_hat = np.asarray(b_hat, dtype=float)
    d = b_hat.shape[0]
    if d <= cap:
        perm, _ = kernels.best_causal_order(b_hat)
        heuristic = False
    else:
        perm, heuristic = _greedy_order(b_hat), True
    perm = np.asarray(perm, dtype=np.int64)
    b_tilde = np.tril(b_hat[np.ix_(perm, perm)], k=-1)
    return perm, b_tilde, heuristic


def identify_causality(w, edge_threshold: float = 0.3, cap: int = EXHAUSTIVE_CAP) -> CausalResult:
    w = np.asarray(w, dtype=float)
    if w.ndim != 2 or w.shape[0] != w.shape[1]:
        raise ValueError("demixing matrix must be square")
    w_tilde, _ = permute_nonzero_diagonal(w, cap)
    b_hat = to_adjacency(normalize_diagonal(w_tilde))
    order, b_tilde, heuristic = order_causally(b_hat, cap)
    b = np.zeros_like(b_hat)
    b[np.ix_(order, order)] = b_tilde
    digraph = np.abs(b) > edge_threshold
    return CausalResult(b=b, digraph=digraph, order=order, heuristic=heuristic)


def is_acyclic(adjacency) -> bool:
    """Kahn's algorithm on ``adjacency[i, j]`` meaning edge ``j -> i``."""
    adj = np.asarray(adjacency, dtype=bool).copy()
    d = adj.shape[0]
    indeg = adj.sum(axis=1)
    ready = [i for i in range(d) if indeg[i] == 0]
    seen = 0
    while ready:
        j = ready.pop()
        seen += 1
        for i in np.flatnonzero(adj[:, j]):
            adj[i, j] = False
            indeg[i] -= 1
            if indeg[i] == 0:
                ready.append(int(i))
    return seen == d
