"""Synthetic streams with known, segment-wise causal structure.

Each cluster id gets its own random DAG, edge weights and exogenous-noise
parameters. Exogenous noise is Laplace with a log-variance that follows an
AR(1) process, and observations are ``x = (I - B)^{-1} e``.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "GenConfig",
    "GroundTruth",
    "sample_dag",
    "sample_weights",
    "sample_exogenous",
    "generate_stream",
]


@dataclass(frozen=True)
class GenConfig:
    d: int = 5
    edge_density: float = 0.5
    weight_low: float = 0.5
    weight_high: float = 2.0
    segment_len: int = 500
    sequence: tuple = (1, 2, 1)
    ar_coeff_range: tuple = (0.8, 0.998)
    ar_noise_var_range: tuple = (0.01, 0.1)
    redraw_ar_per_segment: bool = False
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "sequence", tuple(int(c) for c in self.sequence))
        if self.d < 1:
            raise ValueError("d must be >= 1")
        if not 0.0 <= self.edge_density <= 1.0:
            raise ValueError("edge_density must lie in [0, 1]")
        if not 0.0 <= self.weight_low <= self.weight_high:
            raise ValueError("need 0 <= weight_low <= weight_high")
        if self.segment_len <= 0:
            raise ValueError("segment_len must be positive")
        if not self.sequence or min(self.sequence) < 1:
            raise ValueError("sequence must be non-empty with cluster ids >= 1")


@dataclass
class GroundTruth:
    """Per-cluster adjacency matrices and the segment layout.

    ``segments`` holds ``(start, end, cluster)`` with 1-based inclusive
    ``start``/``end`` tick indices. ``exogenous`` is the ``e`` that generated
    the stream (d x T).
    """

    b: dict
    segments: list
    exogenous: np.ndarray = field(repr=False)
    config: GenConfig | None = None

    def cluster_at(self, t: int) -> int:
        for start, end, cluster in self.segments:
            if start <= t <= end:
                return cluster
        raise IndexError(f"tick {t} outside the stream")

    def b_at(self, t: int) -> np.ndarray:
        return self.b[self.cluster_at(t)]


def sample_dag(d: int, density: float, rng) -> np.ndarray:
    """Random DAG: a uniform variable order, then each order-respecting edge
    independently with probability ``density``. ``adj[i, j]`` is ``j -> i``."""
    if not 0.0 <= density <= 1.0:
        raise ValueError("density must lie in [0, 1]")
    order = rng.permutation(d)
    adj = np.zeros((d, d), dtype=bool)
    for a in range(d):
        for c in range(a + 1, d):
            if rng.random() < density:
                adj[order[c], order[a]] = True
    return adj


def sample_weights(dag, rng, low: float = 0.5, high: float = 2.0) -> np.ndarray:
    """Weights uniform on ``(-high, -low) U (low, high)`` on the DAG's edges."""
    dag = np.asarray(dag, dtype=bool)
    mag = rng.uniform(low, high, size=dag.shape)
    sign = np.where(rng.random(size=dag.shape) < 0.5, -1.0, 1.0)
    return np.where(dag, sign * mag, 0.0)


def sample_exogenous(length: int, rng, ar_coeff: float, ar_noise_var: float) -> np.ndarray:
    """Laplace noise whose log-variance follows ``h_t = a h_{t-1} + eta_t``.

    ``h_0 = 0``; the Laplace scale at step ``t`` is ``sqrt(exp(h_t) / 2)`` so
    the conditional variance is ``exp(h_t)``.
    """
    if length < 1:
        raise ValueError("length must be >= 1")
    eta = rng.normal(0.0, np.sqrt(ar_noise_var), size=length)
    h = np.empty(length)
    prev = 0.0
    for t in range(length):
        prev = ar_coeff * prev + eta[t]
        h[t] = prev
    return rng.laplace(0.0, np.sqrt(np.exp(h) / 2.0))


def generate_stream(cfg: GenConfig):
    """Return ``(x, truth)`` with ``x`` of shape ``(d, segment_len * len(sequence))``."""
    root = np.random.SeedSequence(cfg.seed)
    graph_seq, seg_seq = root.spawn(2)
    clusters = sorted(set(cfg.sequence))
    graph_rngs = dict(zip(clusters, (np.random.default_rng(s) for s in graph_seq.spawn(len(clusters)))))

    b, ar_params = {}, {}
    for c in clusters:
        rng = graph_rngs[c]
        dag = sample_dag(cfg.d, cfg.edge_density, rng)
        b[c] = sample_weights(dag, rng, cfg.weight_low, cfg.weight_high)
        ar_params[c] = _draw_ar(rng, cfg)

    n = cfg.segment_len
    total = n * len(cfg.sequence)
    x = np.empty((cfg.d, total))
    e = np.empty((cfg.d, total))
    segments = []
    eye = np.eye(cfg.d)
    for idx, (c, ss) in enumerate(zip(cfg.sequence, seg_seq.spawn(len(cfg.sequence)))):
        rng = np.random.default_rng(ss)
        params = _draw_ar(rng, cfg) if cfg.redraw_ar_per_segment else ar_params[c]
        seg_e = np.vstack([sample_exogenous(n, rng, a, v) for a, v in params])
        lo = idx * n
        e[:, lo : lo + n] = seg_e
        x[:, lo : lo + n] = np.linalg.solve(eye - b[c], seg_e)
        segments.append((lo + 1, lo + n, c))
    return x, GroundTruth(b=b, segments=segments, exogenous=e, config=cfg)


def _draw_ar(rng, cfg):
    lo, hi = cfg.ar_coeff_range
    vlo, vhi = cfg.ar_noise_var_range
    return [(rng.uniform(lo, hi), rng.uniform(vlo, vhi)) for _ in range(cfg.d)]
