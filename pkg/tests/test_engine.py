import math
import warnings
from dataclasses import replace

import numpy as np
import pytest

from causalstream import kernels
from causalstream.dynamics import SelfDynamicsFactor, estimate_factor
from causalstream.engine import (
    EngineConfig,
    ModelCandidate,
    Regime,
    RegimeEngine,
    RegimeSet,
    UpdateState,
    calibrate_tau_unit,
    fit_error,
    mode_generator,
    optimize_initial_state,
    regime_creation,
    track_demixing,
    update_demixing_rows,
)
from causalstream.synth import GenConfig, generate_stream

H = 4
BASE = EngineConfig(n_window=30, h=H, demixing_update="none")


def _sources(n, start=0):
    t = np.arange(start, start + n)
    return np.vstack([np.cos(0.3 * t + 0.2), 0.97**t * np.cos(1.1 * t)])


def _exact_regime():
    cfg = replace(BASE, freeze_demixing=True)
    regime, _ = regime_creation(_sources(30), cfg)
    return regime


def test_fit_error_self_consistent():
    regime = _exact_regime()
    window = _sources(30)
    s0, f, _ = optimize_initial_state(window, regime)
    assert f <= 1e-6
    assert fit_error(window, s0, regime) == pytest.approx(f, abs=1e-12)


def test_fit_error_zero_model_and_homogeneity(rng):
    regime = _exact_regime()
    window = rng.standard_normal((2, 30))
    zero = [np.zeros(fac.k, complex) for fac in regime.factors]
    f = fit_error(window, zero, regime)
    assert f == pytest.approx(np.linalg.norm(window[:, H - 1 :], axis=0).sum())
    assert fit_error(2 * window, zero, regime) == pytest.approx(2 * f)


def test_fit_error_dimension_checks(rng):
    regime = _exact_regime()
    zero = [np.zeros(fac.k, complex) for fac in regime.factors]
    with pytest.raises(ValueError):
        fit_error(rng.standard_normal((3, 30)), zero, regime)
    with pytest.raises(ValueError):
        fit_error(rng.standard_normal((2, 30)), zero[:1], regime)


def test_optimal_warm_start_needs_at_most_one_step():
    regime = _exact_regime()
    window = _sources(30)
    warm, _, _ = optimize_initial_state(window, regime, max_iter=0)
    s0, _, res = optimize_initial_state(window, regime, s0_init=warm)
    assert res.n_iter <= 1
    for a, b in zip(s0, warm):
        np.testing.assert_allclose(a, b, atol=1e-8)


def test_zero_window_gives_zero_state():
    regime = _exact_regime()
    s0, f, _ = optimize_initial_state(np.zeros((2, 30)), regime)
    assert f == pytest.approx(0, abs=1e-12)
    assert all(np.allclose(s, 0) for s in s0)


def test_never_worse_than_warm_start(rng):
    regime = _exact_regime()
    window = rng.standard_normal((2, 30))
    _, f_warm, _ = optimize_initial_state(window, regime, max_iter=0)
    bad = [100 * np.ones(fac.k, complex) for fac in regime.factors]
    _, f, _ = optimize_initial_state(window, regime, s0_init=bad, max_iter=1)
    assert f <= f_warm + 1e-12


def test_optimize_needs_h_plus_one_columns():
    with pytest.raises(ValueError):
        optimize_initial_state(np.ones((2, H)), _exact_regime())


def test_regime_creation_single_geometric_signal():
    x = (0.9 ** np.arange(60))[None, :]
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        regime, state = regime_creation(x, EngineConfig(n_window=60, h=4))
    np.testing.assert_allclose(regime.w, [[1.0 / x.std()]], rtol=1e-8)
    assert regime.factors[0].k == 1
    assert abs(regime.factors[0].lam[0] - 0.9) < 1e-6
    assert len(state.transitions) == 1 and state.energy[0] > 0


def test_regime_creation_short_window(rng):
    with pytest.raises(ValueError):
        regime_creation(rng.standard_normal((2, H + 1)), BASE)


def test_regime_creation_energy_matches_definition(rng):
    x = rng.laplace(size=(2, 40))
    regime, state = regime_creation(x, replace(BASE, mu=0.9))
    e = regime.w @ x
    expected = (e**2) @ (0.9 ** np.arange(39, -1, -1))
    np.testing.assert_allclose(state.energy, expected)
    for tr in state.transitions:
        np.testing.assert_allclose(tr.p, tr.p.T)
        assert np.all(np.linalg.eigvalsh(tr.p) > 0)


def _geometric_candidate(l_w=1.0):
    fac = SelfDynamicsFactor(np.array([[1.0], [1 / 0.9], [1 / 0.81]], dtype=complex), np.array([0.9 + 0j]))
    regimes = RegimeSet([Regime(np.array([[l_w]]), [fac])], [None])
    cand = ModelCandidate(0, [np.array([2.0 + 0j])], [np.array([1.0 + 0j])], 0)
    return cand, regimes


def test_mode_generator_geometric():
    cand, regimes = _geometric_candidate()
    f0, _ = mode_generator(cand, regimes, 0)
    f5, causal = mode_generator(cand, regimes, 5)
    assert f0[0] == pytest.approx(2.0)
    assert f5[0] == pytest.approx(0.9**5 * f0[0], abs=1e-6)
    assert causal.b.shape == (1, 1)


def test_mode_generator_zero_horizon_reproduces_fit():
    regime = _exact_regime()
    window = _sources(30)
    s0, _, _ = optimize_initial_state(window, regime)
    from causalstream.dynamics import evolve

    end_states = [evolve(s, fac, 30 - H) for s, fac in zip(s0, regime.factors)]
    cand = ModelCandidate(0, end_states, s0, 0)
    now, _ = mode_generator(cand, RegimeSet([regime], [None]), 0)
    np.testing.assert_allclose(now, window[:, -1], atol=1e-6)
    ahead, _ = mode_generator(cand, RegimeSet([regime], [None]), 3)
    np.testing.assert_allclose(ahead, _sources(33)[:, -1], atol=1e-5)


def test_mode_generator_diagonal_w_decouples():
    regime = _exact_regime()
    regime = Regime(np.diag([2.0, 0.5]), regime.factors)
    s = [np.ones(f.k, complex) for f in regime.factors]
    cand = ModelCandidate(0, s, s, 0)
    base, _ = mode_generator(cand, RegimeSet([regime], [None]), 2)
    s2 = [s[0], 3 * s[1]]
    moved, _ = mode_generator(ModelCandidate(0, s2, s2, 0), RegimeSet([regime], [None]), 2)
    assert moved[0] == pytest.approx(base[0])
    assert moved[1] != pytest.approx(base[1])


def test_demixing_zero_input(rng):
    w = rng.standard_normal((3, 3))
    energy = np.array([1.0, 2.0, 3.0])
    w2, e2, y = update_demixing_rows(w, energy, np.zeros(3), 0.9)
    np.testing.assert_array_equal(w2, w)
    np.testing.assert_allclose(e2, 0.9 * energy)
    np.testing.assert_array_equal(y, 0)


def test_demixing_scalar_recurrence():
    w, energy, mu, c = np.array([[1.0]]), np.array([1.0]), 0.95, 2.0
    for _ in range(400):
        w, energy, _ = update_demixing_rows(w, energy, np.array([c]), mu)
    assert energy[0] == pytest.approx(c * c / (1 - mu), rel=1e-6)
    assert w[0, 0] > 0
    assert abs(w[0, 0] - 1.0) < 1.0 / energy[0] + 1e-6


def test_demixing_converges_on_stationary_stream(rng):
    m = np.array([[1.0, 0.4, 0.0], [0.2, 1.0, 0.3], [0.0, 0.5, 1.0]])
    w, energy = np.eye(3), np.ones(3)
    norms = []
    for _ in range(6000):
        w, energy, _ = update_demixing_rows(w, energy, m @ rng.laplace(size=3), 0.999)
        norms.append(np.linalg.norm(w, axis=1))
    late = np.abs(np.diff(np.array(norms[-1000:]), axis=0))
    assert late.max() < 1e-3


def test_demixing_validates(rng):
    with pytest.raises(ValueError):
        update_demixing_rows(np.eye(2), np.array([-1.0, 1.0]), np.ones(2), 0.9)
    with pytest.raises(ValueError):
        update_demixing_rows(np.eye(2), np.ones(3), np.ones(2), 0.9)


def test_track_demixing_keeps_row_identity(rng):
    m = np.array([[1.0, 0.0, 0.0], [0.8, 1.0, 0.0], [0.3, -0.6, 1.0]])
    x = m @ rng.laplace(size=(3, 400))
    from causalstream.ica import fixed_point_ica

    w = fixed_point_ica(x).w
    shuffled = track_demixing(x, w, 20)
    cos = np.einsum("ij,ij->i", shuffled, w) / (np.linalg.norm(shuffled, axis=1) * np.linalg.norm(w, axis=1))
    assert np.all(cos > 0.99)


def _stream(seed=0, n=400, d=3):
    x, _ = generate_stream(GenConfig(d=d, sequence=(1,), segment_len=n, seed=seed))
    return (x - x.mean(axis=1, keepdims=True)) / x.std(axis=1, keepdims=True)


def test_warm_up_contract():
    eng = RegimeEngine(3, replace(BASE, tau_unit=math.inf))
    x = _stream()
    outs = [eng.process_tick(c) for c in x.T[:35]]
    assert all(o is None for o in outs[:29])
    assert outs[29] is not None and outs[29].t == 30 and outs[29].created_new
    assert eng.window.shape == (3, 30)


def test_infinite_threshold_never_creates_twice():
    eng = RegimeEngine(3, replace(BASE, tau_unit=math.inf, demixing_update="subspace"))
    outs = [o for o in (eng.process_tick(c) for c in _stream().T) if o]
    assert eng.n_regimes == 1
    assert {o.regime_id for o in outs} == {0}
    assert sum(o.created_new for o in outs) == 1


@pytest.mark.parametrize("mode", ["subspace", "window_ica", "none"])
def test_state_machine_invariants(mode):
    cfg = replace(BASE, demixing_update=mode)
    x = _stream(n=250)
    tau = calibrate_tau_unit(x[:, :100], cfg, 0.9)
    eng = RegimeEngine(3, replace(cfg, tau_unit=tau))
    count = 0
    for col in x.T:
        out = eng.process_tick(col)
        rs = eng.regime_set
        assert len(rs.regimes) == len(rs.update_states)
        assert len(rs) >= count
        count = len(rs)
        if out is None:
            continue
        assert 0 <= eng.candidate.active_regime_index < len(rs)
        assert np.all(np.isfinite(out.forecast)) and math.isfinite(out.fit_error)
        for st in rs.update_states:
            for tr in st.transitions:
                assert np.all(np.linalg.eigvalsh(0.5 * (tr.p + tr.p.T)) > 0)


def test_creation_follows_exhausted_search(monkeypatch):
    import causalstream.engine as engmod

    cfg = replace(BASE, tau_unit=1e-9)
    eng = RegimeEngine(3, cfg)
    seen = []
    real = engmod.optimize_initial_state

    def spy(window, regime, *a, **k):
        s0, f, res = real(window, regime, *a, **k)
        seen.append(f)
        return s0, f, res

    monkeypatch.setattr(engmod, "optimize_initial_state", spy)
    x = _stream()
    for col in x.T[:32]:
        eng.process_tick(col)
    # tick 31 fit the one regime, found it poor, created; tick 32 then
    # searched both regimes before creating a third
    assert eng.n_regimes == 3
    assert all(f > cfg.tau(3) for f in seen[1:-1])


def test_determinism():
    x = _stream(seed=5)
    runs = []
    for _ in range(2):
        eng = RegimeEngine(3, replace(BASE, tau_unit=0.6, demixing_update="window_ica"))
        runs.append([o for o in (eng.process_tick(c) for c in x.T) if o])
    assert len(runs[0]) == len(runs[1])
    for a, b in zip(*runs):
        assert a.regime_id == b.regime_id and a.fit_error == b.fit_error
        np.testing.assert_array_equal(a.forecast, b.forecast)
        np.testing.assert_array_equal(a.causal.b, b.causal.b)


def test_non_finite_input_rejected_without_state_change():
    eng = RegimeEngine(3, replace(BASE, tau_unit=math.inf))
    x = _stream()
    for col in x.T[:40]:
        eng.process_tick(col)
    before = (eng.t, eng.window.copy(), eng.candidate)
    with pytest.raises(ValueError, match="non-finite"):
        eng.process_tick([1.0, np.nan, 0.0])
    with pytest.raises(ValueError):
        eng.process_tick([1.0, 2.0])
    assert eng.t == before[0] and eng.candidate is before[2]
    np.testing.assert_array_equal(eng.window, before[1])


def test_tick_is_atomic_on_internal_failure(monkeypatch):
    x = _stream()
    ref = RegimeEngine(3, replace(BASE, tau_unit=math.inf, demixing_update="subspace"))
    eng = RegimeEngine(3, replace(BASE, tau_unit=math.inf, demixing_update="subspace"))
    for col in x.T[:40]:
        ref.process_tick(col)
        eng.process_tick(col)

    def boom(*a, **k):
        raise FloatingPointError("injected")

    monkeypatch.setattr(kernels, "rls_update", boom)
    with pytest.raises(FloatingPointError):
        eng.process_tick(x[:, 40])
    monkeypatch.undo()
    a = ref.process_tick(x[:, 40])
    b = eng.process_tick(x[:, 40])
    np.testing.assert_array_equal(a.forecast, b.forecast)
    assert a.fit_error == b.fit_error


def test_single_regime_noiseless_stream_keeps_regime():
    x = _sources(200)
    eng = RegimeEngine(2, replace(BASE, tau_unit=1e-3, freeze_demixing=True))
    outs = [o for o in (eng.process_tick(c) for c in x.T) if o]
    assert eng.n_regimes == 1
    assert not any(o.switched for o in outs)
    assert max(o.fit_error for o in outs) <= eng.cfg.tau(2)


def test_forecast_helper():
    eng = RegimeEngine(2, replace(BASE, tau_unit=math.inf, freeze_demixing=True))
    with pytest.raises(RuntimeError):
        eng.forecast(3)
    for col in _sources(60).T:
        eng.process_tick(col)
    np.testing.assert_allclose(eng.forecast(4), _sources(64)[:, -1], atol=1e-4)


def test_calibration_returns_quantile():
    x = _stream(n=200)
    lo = calibrate_tau_unit(x, BASE, 0.5)
    hi = calibrate_tau_unit(x, BASE, 1.0)
    assert 0 < lo <= hi
    with pytest.raises(ValueError):
        calibrate_tau_unit(x[:, :20], BASE)


def test_config_validation():
    for bad in (dict(n_window=6, h=4), dict(mu=0), dict(tau_unit=0), dict(l_s=0), dict(demixing_update="x")):
        with pytest.raises(ValueError):
            EngineConfig(**bad)
    assert EngineConfig(n_window=50, h=8).tau(5) == pytest.approx(1.0 * 5 * 43)
