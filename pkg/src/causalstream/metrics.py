"""Graph and forecast scores.

Graphs are boolean adjacency matrices with ``adj[i, j]`` meaning ``j -> i``.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .causal import is_acyclic

__all__ = ["MetricReport", "shd", "sid", "rmse", "mae", "descendants", "d_separated"]


@dataclass
class MetricReport:
    shd: float
    sid: float
    rmse: float
    mae: float
    per_segment: list = field(default_factory=list)


def _check_pair(truth, est):
    truth = np.asarray(truth, dtype=bool)
    est = np.asarray(est, dtype=bool)
    if truth.shape != est.shape or truth.ndim != 2 or truth.shape[0] != truth.shape[1]:
        raise ValueError(f"graph shapes differ: {truth.shape} vs {est.shape}")
    return truth, est


def shd(truth, est) -> int:
    """Missing, extra and reversed edges, one count per unordered pair."""
    truth, est = _check_pair(truth, est)
    d = truth.shape[0]
    count = 0
    for i in range(d):
        for j in range(i + 1, d):
            if (truth[i, j], truth[j, i]) != (est[i, j], est[j, i]):
                count += 1
    return count


def _children(adj):
    return [np.flatnonzero(adj[:, j]) for j in range(adj.shape[0])]


def descendants(adj, node: int) -> set:
    """Nodes reachable from ``node`` by directed paths, ``node`` included."""
    kids = _children(np.asarray(adj, dtype=bool))
    seen = {node}
    stack = [node]
    while stack:
        for c in kids[stack.pop()]:
            if int(c) not in seen:
                seen.add(int(c))
                stack.append(int(c))
    return seen


def _ancestors(adj, nodes) -> set:
    seen = set(nodes)
    stack = list(nodes)
    while stack:
        for p in np.flatnonzero(adj[stack.pop()]):
            if int(p) not in seen:
                seen.add(int(p))
                stack.append(int(p))
    return seen


def d_separated(adj, x: int, y: int, z) -> bool:
    """d-separation of ``x`` and ``y`` given ``z`` via the moralised
    ancestral graph."""
    adj = np.asarray(adj, dtype=bool)
    z = set(int(v) for v in z)
    keep = sorted(_ancestors(adj, {x, y} | z))
    nbrs = {v: set() for v in keep}
    for v in keep:
        parents = [int(p) for p in np.flatnonzero(adj[v]) if int(p) in nbrs]
        for p in parents:
            nbrs[v].add(p)
            nbrs[p].add(v)
        for a in parents:
            for b in parents:
                if a != b:
                    nbrs[a].add(b)
    seen = {x}
    stack = [x]
    while stack:
        for u in nbrs[stack.pop()]:
            if u == y:
                return False
            if u not in seen and u not in z:
                seen.add(u)
                stack.append(u)
    return True


def _valid_adjustment(adj, i, j, z) -> bool:
    # Adjustment criterion for a single treatment i and outcome j.
    de_i = descendants(adj, i)
    anc_j = _ancestors(adj, {j})
    causal_nodes = {v for v in de_i & anc_j if v != i}
    forbidden = set()
    for v in causal_nodes:
        forbidden |= descendants(adj, v)
    if forbidden & set(z):
        return False
    backdoor = adj.copy()
    for v in causal_nodes:
        backdoor[v, i] = False
    return d_separated(backdoor, i, j, z)


def sid(truth, est) -> int:
    """Ordered pairs ``(i, j)`` whose interventional distribution
    ``p(x_j | do(x_i))`` is wrong when adjusting for the estimated parents of
    ``i`` in the true graph."""
    truth, est = _check_pair(truth, est)
    if not (is_acyclic(truth) and is_acyclic(est)):
        raise ValueError("SID is defined for acyclic graphs only")
    d = truth.shape[0]
    count = 0
    for i in range(d):
        pa = [int(p) for p in np.flatnonzero(est[i])]
        de_i = descendants(truth, i)
        for j in range(d):
            if j == i:
                continue
            if j in pa:
                count += j in de_i
            elif not _valid_adjustment(truth, i, j, pa):
                count += 1
    return count


def _errors(pred, actual):
    pred = np.asarray(pred, dtype=float)
    actual = np.asarray(actual, dtype=float)
    if pred.shape != actual.shape:
        raise ValueError(f"shape mismatch {pred.shape} vs {actual.shape}")
    if pred.size == 0:
        raise ValueError("empty input")
    return pred - actual


def rmse(pred, actual) -> float:
    err = _errors(pred, actual)
    return float(np.sqrt(np.mean(err**2)))


def mae(pred, actual) -> float:
    err = _errors(pred, actual)
    return float(np.mean(np.abs(err)))
