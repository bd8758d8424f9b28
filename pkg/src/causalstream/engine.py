"""Streaming regime engine.

Every tick slides a fixed-length window over the stream, fits the latent
initial state of the active regime to it, searches the other regimes (or
creates a new one) when the fit is poor, forecasts ``l_s`` steps ahead,
reports the active causal adjacency matrix and finally folds the newest
sample into the active regime.

A tick is atomic. Regimes and their update states are replaced, never
mutated, so a failed tick leaves the engine exactly as it was.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field, replace

import numpy as np
from scipy.optimize import linear_sum_assignment

from . import kernels
from .causal import CausalResult, identify_causality
from .dynamics import estimate_factor, evolve, reconstruct, refresh_eigen
from .ica import IcaConfig, fixed_point_ica
from .lm import LMConfig, levenberg_marquardt

__all__ = [
    "EngineConfig",
    "Regime",
    "UpdateState",
    "RegimeSet",
    "ModelCandidate",
    "StepOutput",
    "fit_error",
    "optimize_initial_state",
    "regime_creation",
    "update_demixing_rows",
    "track_demixing",
    "mode_generator",
    "RegimeEngine",
    "calibrate_tau_unit",
]


_DEMIXING_UPDATES = ("subspace", "window_ica", "none")


@dataclass(frozen=True)
class EngineConfig:
    """Engine settings.

    ``tau_unit`` is the regime-fit threshold per variable and per scored
    tick; the absolute threshold is ``tau_unit * d * (n_window - h + 1)``.
    ``freeze_demixing`` keeps ``W`` at the identity (no ICA, no updates).
    """

    n_window: int = 50
    h: int = 8
    mu: float = 0.98
    tau_unit: float = 1.0
    l_s: int = 5
    edge_threshold: float = 0.3
    lm: LMConfig = field(default_factory=LMConfig)
    search_iter: int = 10
    ica_max_iter: int = 200
    ica_tol: float = 1e-4
    freeze_demixing: bool = False
    demixing_update: str = "subspace"
    track_iter: int = 5
    seed: int = 0

    def __post_init__(self):
        if self.h < 1:
            raise ValueError("h must be >= 1")
        if self.n_window <= self.h + 2:
            raise ValueError("n_window must exceed h + 2")
        if not 0.0 < self.mu <= 1.0:
            raise ValueError("mu must lie in (0, 1]")
        if not self.tau_unit > 0:
            raise ValueError("tau_unit must be positive")
        if self.l_s < 1:
            raise ValueError("l_s must be >= 1")
        if self.track_iter < 1:
            raise ValueError("track_iter must be >= 1")
        if self.search_iter < 0:
            raise ValueError("search_iter must be >= 0")
        if self.demixing_update not in _DEMIXING_UPDATES:
            raise ValueError(f"demixing_update must be one of {_DEMIXING_UPDATES}")

    @property
    def scored_len(self) -> int:
        return self.n_window - self.h + 1

    def tau(self, d: int) -> float:
        return self.tau_unit * d * self.scored_len


@dataclass
class Regime:
    w: np.ndarray
    factors: list
    w_inv: np.ndarray | None = None

    def __post_init__(self):
        if len(self.factors) != self.w.shape[0]:
            raise ValueError("need one factor per inherent signal")
        if self.w_inv is None:
            self.w_inv = np.linalg.inv(self.w)

    @property
    def d(self) -> int:
        return int(self.w.shape[0])


@dataclass
class UpdateState:
    """Streaming state of one regime: per-signal ``(A, P)``, the row energies
    of the demixing update and the rank of each signal's factor."""

    transitions: list
    energy: np.ndarray
    ranks: list

    @property
    def p_list(self) -> list:
        return [tr.p for tr in self.transitions]


@dataclass
class RegimeSet:
    regimes: list = field(default_factory=list)
    update_states: list = field(default_factory=list)

    def __len__(self) -> int:
        return len(self.regimes)


@dataclass
class ModelCandidate:
    active_regime_index: int
    end_states: list
    s0: list
    window_start: int


@dataclass(frozen=True)
class StepOutput:
    t: int
    forecast: np.ndarray
    causal: CausalResult
    regime_id: int
    created_new: bool
    switched: bool
    fit_error: float


# ---------------------------------------------------------------- fitting


def _stack(regime: Regime):
    phi0 = np.concatenate([f.phi[0] for f in regime.factors])
    lam = np.concatenate([f.lam for f in regime.factors])
    owner = np.repeat(np.arange(regime.d), [f.k for f in regime.factors])
    return phi0, lam, owner


def _design(regime: Regime, n_steps: int) -> np.ndarray:
    phi0, lam, owner = _stack(regime)
    return kernels.mode_design(regime.w_inv, phi0, lam, owner, n_steps)


def _pack(s0) -> np.ndarray:
    z = np.concatenate([np.asarray(s, dtype=complex) for s in s0])
    out = np.empty(2 * z.size)
    out[0::2] = z.real
    out[1::2] = z.imag
    return out


def _unpack(p, regime: Regime) -> list:
    z = p[0::2] + 1j * p[1::2]
    out, pos = [], 0
    for f in regime.factors:
        out.append(z[pos : pos + f.k].copy())
        pos += f.k
    return out


def _scored(window, h: int) -> np.ndarray:
    return window[:, h - 1 :]


def _norm_sum(resid_vec, d: int) -> float:
    return float(np.linalg.norm(resid_vec.reshape(-1, d), axis=1).sum())


def fit_error(window, s0, regime: Regime) -> float:
    """Sum over the scored ticks of ``||x(t) - v(t)||``.

    The scored range starts at the first tick with a full delay vector
    (window column ``h - 1``) and ``v`` rolls ``s0`` forward from there.
    """
    window = np.asarray(window, dtype=float)
    h = regime.factors[0].h
    if window.ndim != 2 or window.shape[0] != regime.d:
        raise ValueError(f"window must have {regime.d} rows")
    if window.shape[1] < h:
        raise ValueError(f"window needs at least h = {h} columns")
    if len(s0) != regime.d or any(np.shape(s)[0] != f.k for s, f in zip(s0, regime.factors)):
        raise ValueError("latent state dimensions do not match the regime")
    target = _scored(window, h)
    g = _design(regime, target.shape[1])
    resid = target.T.ravel() - g @ _pack(s0)
    return _norm_sum(resid, regime.d)


def _warm_start(window, regime: Regime) -> list:
    h = regime.factors[0].h
    e = regime.w @ window[:, :h]
    return [np.linalg.pinv(f.phi) @ e[i, ::-1] for i, f in enumerate(regime.factors)]


def optimize_initial_state(window, regime: Regime, s0_init=None, lm: LMConfig | None = None, max_iter=None):
    """Least-squares fit of the latent initial state to the window.

    Returns ``(s0, f, result)`` where ``result`` carries the iteration count
    and convergence flag of the solver.
    """
    window = np.asarray(window, dtype=float)
    h = regime.factors[0].h
    if window.shape[1] < h + 1:
        raise ValueError(f"window needs at least h + 1 = {h + 1} columns")
    target = _scored(window, h).T.ravel()
    g = _design(regime, window.shape[1] - h + 1)
    warm = _pack(_warm_start(window, regime))
    start = warm if s0_init is None else _pack(s0_init)

    def residual(p):
        return target - g @ p

    def jac(_p):
        return -g

    res = levenberg_marquardt(residual, jac, start, lm, max_iter=max_iter)
    f = _norm_sum(residual(res.x), regime.d)
    f_warm = _norm_sum(residual(warm), regime.d)
    if not math.isfinite(f):
        raise FloatingPointError("non-finite fit error")
    if f_warm < f:
        res = replace(res, x=warm)
        f = f_warm
    return _unpack(res.x, regime), f, res


# ------------------------------------------------------------- regimes


def _energy(e, mu):
    m = e.shape[1]
    wts = mu ** np.arange(m - 1, -1, -1, dtype=float)
    return (e * e) @ wts


def regime_creation(window, cfg: EngineConfig, seed: int | None = None):
    """Estimate ``(Regime, UpdateState)`` from one window: ICA for the
    demixing matrix, then one self-dynamics fit per inherent signal."""
    window = np.asarray(window, dtype=float)
    d, m = window.shape
    if m < cfg.h + 2:
        raise ValueError(f"window needs at least h + 2 = {cfg.h + 2} columns")
    if cfg.freeze_demixing:
        w = np.eye(d)
        e = window.copy()
    else:
        ica_cfg = IcaConfig(max_iter=cfg.ica_max_iter, tol=cfg.ica_tol, seed=cfg.seed if seed is None else seed)
        res = fixed_point_ica(window, ica_cfg)
        w, e = res.w, res.signals
    factors, transitions = [], []
    for i in range(d):
        fac, tr = estimate_factor(e[i], cfg.h, cfg.mu)
        factors.append(fac)
        transitions.append(tr)
    regime = Regime(w=w, factors=factors)
    state = UpdateState(transitions=transitions, energy=_energy(e, cfg.mu), ranks=[f.k for f in factors])
    return regime, state


def update_demixing_rows(w, energy, x, mu: float):
    """One deflated subspace-tracking pass over the rows of ``w``.

    Returns fresh ``(w, energy, y)``; the inputs are left untouched.
    """
    w = np.array(w, dtype=float)
    energy = np.array(energy, dtype=float)
    x = np.asarray(x, dtype=float)
    if w.shape != (x.shape[0], x.shape[0]) or energy.shape != x.shape:
        raise ValueError("dimension mismatch")
    if np.any(energy < 0):
        raise ValueError("energies must be non-negative")
    y = kernels.demix_update(w, energy, x, mu)
    return w, energy, y


def track_demixing(window, w, n_iter: int, tol: float = 1e-4) -> np.ndarray:
    """A few fixed-point ICA sweeps on ``window`` started from ``w``.

    Rows stay matched to the rows of ``w`` (order and sign) so each inherent
    signal keeps its self-dynamics factor.
    """
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        res = fixed_point_ica(window, IcaConfig(max_iter=n_iter, tol=tol), w_init=w)
    new = res.w
    a = new / np.linalg.norm(new, axis=1, keepdims=True)
    b = w / np.linalg.norm(w, axis=1, keepdims=True)
    sim = a @ b.T
    rows, cols = linear_sum_assignment(-np.abs(sim))
    out = np.empty_like(new)
    out[cols] = new[rows] * np.sign(sim[rows, cols])[:, None]
    return out


def mode_generator(candidate: ModelCandidate, regimes: RegimeSet, l_s: int, edge_threshold: float = 0.3):
    """``(forecast, causal)`` from the active regime: roll ``end_states`` forward
    ``l_s`` steps, reconstruct each inherent signal and mix back."""
    if l_s < 0:
        raise ValueError("l_s must be non-negative")
    regime = regimes.regimes[candidate.active_regime_index]
    e = np.array([reconstruct(evolve(s, f, l_s), f) for s, f in zip(candidate.end_states, regime.factors)])
    forecast = regime.w_inv @ e
    return forecast, identify_causality(regime.w, edge_threshold)


# --------------------------------------------------------------- engine


class RegimeEngine:
    """Per-tick driver. Feed samples with :meth:`process_tick`."""

    def __init__(self, d: int, cfg: EngineConfig | None = None):
        if d < 1:
            raise ValueError("d must be >= 1")
        self.cfg = cfg or EngineConfig()
        self.d = d
        self.t = 0
        self._buf = np.zeros((d, self.cfg.n_window))
        self.regime_set = RegimeSet()
        self.candidate: ModelCandidate | None = None

    @property
    def window(self) -> np.ndarray:
        n = min(self.t, self.cfg.n_window)
        return self._buf[:, self.cfg.n_window - n :].copy()

    @property
    def n_regimes(self) -> int:
        return len(self.regime_set)

    def _creation_seed(self, index: int) -> int:
        # Depends only on the engine seed and the regime's index, so a
        # rolled-back tick replays identically.
        return int(np.random.SeedSequence([self.cfg.seed, index]).generate_state(1)[0])

    def _fit(self, window, idx, regimes, budget=None):
        regime = regimes.regimes[idx]
        s0, f, _ = optimize_initial_state(window, regime, lm=self.cfg.lm, max_iter=budget)
        return s0, f

    def process_tick(self, x) -> StepOutput | None:
        """Consume one sample. Returns ``None`` while the window fills up."""
        x = np.asarray(x, dtype=float)
        if x.shape != (self.d,):
            raise ValueError(f"expected a vector of length {self.d}, got shape {x.shape}")
        if not np.all(np.isfinite(x)):
            raise ValueError(f"non-finite sample at tick {self.t + 1}: {x.tolist()}")

        cfg = self.cfg
        buf = np.empty_like(self._buf)
        buf[:, :-1] = self._buf[:, 1:]
        buf[:, -1] = x
        t = self.t + 1
        if t < cfg.n_window:
            self._buf, self.t = buf, t
            return None

        window = buf
        regimes = RegimeSet(list(self.regime_set.regimes), list(self.regime_set.update_states))
        out, candidate = self._tick(window, t, regimes)
        self._buf, self.t = buf, t
        self.regime_set = regimes
        self.candidate = candidate
        return out

    def _tick(self, window, t, regimes):
        cfg = self.cfg
        tau = cfg.tau(self.d)
        created = switched = False
        prev = None if self.candidate is None else self.candidate.active_regime_index

        if prev is None:
            active = self._create(window, regimes)
            created = True
            s0, f = self._fit(window, active, regimes)
        else:
            active = prev
            s0, f = self._fit(window, active, regimes)
            if f > tau:
                best_idx, best_f = active, f
                for idx in range(len(regimes)):
                    if idx == active:
                        continue
                    _, f_idx = self._fit(window, idx, regimes, budget=cfg.search_iter)
                    if f_idx < best_f:
                        best_idx, best_f = idx, f_idx
                if best_idx != active:
                    s0, f = self._fit(window, best_idx, regimes)
                    active = best_idx
                if f > tau:
                    active = self._create(window, regimes)
                    created = True
                    s0, f = self._fit(window, active, regimes)
            switched = active != prev

        regime = regimes.regimes[active]
        end_states = [evolve(s, fac, cfg.n_window - cfg.h) for s, fac in zip(s0, regime.factors)]
        candidate = ModelCandidate(active, end_states, s0, t - cfg.n_window + 1)
        forecast, causal = mode_generator(candidate, regimes, cfg.l_s, cfg.edge_threshold)

        if not created:
            self._update(window, active, regimes)

        out = StepOutput(
            t=t,
            forecast=forecast,
            causal=causal,
            regime_id=active,
            created_new=created,
            switched=switched,
            fit_error=f,
        )
        if not (np.all(np.isfinite(forecast)) and math.isfinite(f)):
            raise FloatingPointError(f"non-finite output at tick {t}")
        return out, candidate

    def _create(self, window, regimes) -> int:
        regime, state = regime_creation(window, self.cfg, seed=self._creation_seed(len(regimes)))
        regimes.regimes.append(regime)
        regimes.update_states.append(state)
        return len(regimes) - 1

    def _update(self, window, idx, regimes):
        cfg = self.cfg
        regime = regimes.regimes[idx]
        state = regimes.update_states[idx]
        if cfg.freeze_demixing or cfg.demixing_update == "none":
            w, energy, w_inv = regime.w, state.energy, regime.w_inv
        elif cfg.demixing_update == "subspace":
            w, energy, _ = update_demixing_rows(regime.w, state.energy, window[:, -1], cfg.mu)
            w_inv = np.linalg.inv(w)
        else:
            w = track_demixing(window, regime.w, cfg.track_iter, cfg.ica_tol)
            y = w @ window[:, -1]
            energy = cfg.mu * state.energy + y * y
            w_inv = np.linalg.inv(w)
        transitions = list(state.transitions)
        factors = list(regime.factors)
        h = cfg.h
        if window.shape[1] >= h + 1:
            e = w @ window[:, -(h + 1) :]
            for i, tr in enumerate(state.transitions):
                tr = tr.copy()
                kernels.rls_update(tr.a, tr.p, e[i, -2::-1], e[i, :0:-1], tr.mu)
                transitions[i] = tr
                factors[i] = refresh_eigen(tr, state.ranks[i])
        regimes.regimes[idx] = Regime(w=w, factors=factors, w_inv=w_inv)
        regimes.update_states[idx] = UpdateState(transitions=transitions, energy=energy, ranks=state.ranks)

    def forecast(self, steps: int) -> np.ndarray:
        """Forecast ``steps`` ahead of the newest tick from the stored candidate."""
        if self.candidate is None:
            raise RuntimeError("no regime yet")
        return mode_generator(self.candidate, self.regime_set, steps)[0]


def calibrate_tau_unit(x, cfg: EngineConfig, quantile: float = 0.99) -> float:
    """Threshold per variable and scored tick from a tuning prefix.

    Runs the engine with regime creation disabled and returns the
    ``quantile`` of the observed ``fit_error / (d * scored_len)``.
    """
    x = np.asarray(x, dtype=float)
    d, n = x.shape
    if n <= cfg.n_window:
        raise ValueError("tuning prefix must be longer than the window")
    if not 0.0 < quantile <= 1.0:
        raise ValueError("quantile must lie in (0, 1]")
    eng = RegimeEngine(d, replace(cfg, tau_unit=math.inf))
    errs = []
    for col in x.T:
        out = eng.process_tick(col)
        if out is not None:
            errs.append(out.fit_error)
    return float(np.quantile(errs, quantile)) / (d * cfg.scored_len)
