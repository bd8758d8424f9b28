import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from causalstream.metrics import d_separated, descendants, mae, rmse, shd, sid
from causalstream.synth import sample_dag

from .oracles import all_dags, hand_shd, interventional_sid


def g(d, edges):
    adj = np.zeros((d, d), dtype=bool)
    for src, dst in edges:
        adj[dst, src] = True
    return adj


def test_shd_examples():
    a = g(3, [(0, 1), (1, 2)])
    assert shd(a, a) == 0
    assert shd(g(2, [(0, 1)]), g(2, [(1, 0)])) == 1
    assert shd(g(3, []), g(3, [(0, 1), (0, 2)])) == 2
    with pytest.raises(ValueError):
        shd(np.zeros((2, 2)), np.zeros((3, 3)))


def test_shd_matches_hand_count(rng):
    for _ in range(20):
        t, e = sample_dag(5, 0.5, rng), sample_dag(5, 0.5, rng)
        assert shd(t, e) == hand_shd(t, e)


def test_sid_examples():
    a = g(3, [(0, 1), (1, 2)])
    assert sid(a, a) == 0
    assert sid(g(2, [(0, 1)]), g(2, [])) == 1
    with pytest.raises(ValueError):
        sid(np.array([[0, 1], [1, 0]]), np.zeros((2, 2)))


def test_sid_matches_interventional_oracle_all_d3_pairs():
    dags = all_dags(3)
    assert len(dags) == 25
    rng = np.random.default_rng(0)
    for truth in dags:
        for est in dags:
            assert sid(truth, est) == interventional_sid(truth, est, rng), (truth, est)


def test_d_separation_basics():
    chain = g(3, [(0, 1), (1, 2)])
    assert not d_separated(chain, 0, 2, [])
    assert d_separated(chain, 0, 2, [1])
    collider = g(3, [(0, 2), (1, 2)])
    assert d_separated(collider, 0, 1, [])
    assert not d_separated(collider, 0, 1, [2])
    assert descendants(chain, 0) == {0, 1, 2}


def test_error_examples():
    assert rmse([[1.0, 2.0]], [[1.0, 2.0]]) == 0 == mae([[1.0, 2.0]], [[1.0, 2.0]])
    assert rmse(np.full((4, 2), 3.0), np.zeros((4, 2))) == pytest.approx(3.0)
    assert mae(np.full((4, 2), -3.0), np.zeros((4, 2))) == pytest.approx(3.0)
    assert rmse([1, -1, 1, -1], [0, 0, 0, 0]) == pytest.approx(1.0)
    assert mae([1, -1, 1, -1], [0, 0, 0, 0]) == pytest.approx(1.0)
    assert rmse([0, 2], [0, 0]) == pytest.approx(np.sqrt(2))
    assert mae([0, 2], [0, 0]) == pytest.approx(1.0)
    with pytest.raises(ValueError):
        rmse([], [])
    with pytest.raises(ValueError):
        mae([1.0], [1.0, 2.0])


@settings(max_examples=40, deadline=None)
@given(seed=st.integers(0, 2**31 - 1), d=st.integers(2, 6))
def test_metric_bounds(seed, d):
    rng = np.random.default_rng(seed)
    t, e = sample_dag(d, rng.random(), rng), sample_dag(d, rng.random(), rng)
    assert 0 <= shd(t, e) <= d * (d - 1) // 2
    assert shd(t, e) == shd(e, t)
    assert 0 <= sid(t, e) <= d * (d - 1)
    assert sid(t, t) == 0
    pred, act = rng.standard_normal((10, d)), rng.standard_normal((10, d))
    assert rmse(pred, act) >= mae(pred, act) - 1e-12
