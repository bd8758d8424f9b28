import numpy as np
import pytest
from scipy import stats

from causalstream.causal import is_acyclic
from causalstream.synth import GenConfig, generate_stream, sample_dag, sample_exogenous, sample_weights


def test_dag_density_extremes(rng):
    assert not sample_dag(5, 0.0, rng).any()
    full = sample_dag(5, 1.0, rng)
    assert full.sum() == 10 and is_acyclic(full)


def test_dag_mean_edge_count(rng):
    counts = [sample_dag(5, 0.5, rng).sum() for _ in range(1000)]
    assert abs(np.mean(counts) - 5.0) <= 0.5


def test_weights(rng):
    assert not sample_weights(np.zeros((4, 4), bool), rng).any()
    full = np.tril(np.ones((5, 5), bool), -1)
    mags = []
    for _ in range(1000):
        w = sample_weights(full, rng)
        vals = np.abs(w[full])
        assert np.all((vals >= 0.5) & (vals <= 2.0))
        mags.extend(vals)
    assert abs(np.mean(mags) - 1.25) <= 0.02


def test_exogenous_variance_and_kurtosis(rng):
    e = sample_exogenous(100_000, rng, 0.0, 0.0)
    assert abs(e.var() - 1.0) <= 0.05
    assert stats.kurtosis(e) > 0
    assert sample_exogenous(1, rng, 0.9, 0.05).shape == (1,)
    with pytest.raises(ValueError):
        sample_exogenous(0, rng, 0.9, 0.05)


def test_stream_sem_identity():
    x, truth = generate_stream(GenConfig(d=2, sequence=(1,), segment_len=300, seed=3))
    b = truth.b[1]
    np.testing.assert_allclose(x - b @ x, truth.exogenous, atol=1e-12)


def test_sequence_layout():
    x, truth = generate_stream(GenConfig())
    assert x.shape == (5, 1500)
    assert truth.segments == [(1, 500, 1), (501, 1000, 2), (1001, 1500, 1)]
    assert truth.cluster_at(1) == 1 and truth.cluster_at(1000) == 2 and truth.cluster_at(1500) == 1
    np.testing.assert_array_equal(truth.b_at(10), truth.b_at(1200))
    with pytest.raises(IndexError):
        truth.cluster_at(1501)
    for b in truth.b.values():
        nz = np.abs(b[b != 0])
        assert is_acyclic(b != 0) and np.all((nz >= 0.5) & (nz <= 2.0))


def test_determinism():
    a, ta = generate_stream(GenConfig(seed=9))
    b, tb = generate_stream(GenConfig(seed=9))
    np.testing.assert_array_equal(a, b)
    c, _ = generate_stream(GenConfig(seed=10))
    assert not np.array_equal(a, c)


def test_ar_parameters_shared_by_cluster_unless_redrawn():
    # same cluster, same AR draw: the log-variance paths restart from h0 = 0
    # but the noise variance of each variable is the same in both segments
    x, truth = generate_stream(GenConfig(sequence=(1, 1), segment_len=50, seed=1))
    assert truth.segments[1] == (51, 100, 1)
    x2, _ = generate_stream(GenConfig(sequence=(1, 1), segment_len=50, seed=1, redraw_ar_per_segment=True))
    np.testing.assert_array_equal(x[:, :50].shape, x2[:, :50].shape)


def test_config_validation():
    for bad in (dict(d=0), dict(edge_density=1.5), dict(weight_low=3.0), dict(segment_len=0), dict(sequence=())):
        with pytest.raises(ValueError):
            GenConfig(**bad)
