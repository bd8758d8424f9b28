"""Small dense Levenberg-Marquardt solver."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = ["LMConfig", "LMResult", "levenberg_marquardt"]


@dataclass(frozen=True)
class LMConfig:
    damping_init: float = 1e-3
    damping_factor: float = 2.0
    max_iter: int = 100
    rel_tol: float = 1e-6

    def __post_init__(self):
        if self.damping_init <= 0 or self.damping_factor <= 1:
            raise ValueError("need damping_init > 0 and damping_factor > 1")
        if self.max_iter < 0 or self.rel_tol < 0:
            raise ValueError("max_iter and rel_tol must be non-negative")


@dataclass
class LMResult:
    x: np.ndarray
    cost: float
    n_iter: int
    converged: bool


def levenberg_marquardt(fun, jac, x0, cfg: LMConfig | None = None, max_iter: int | None = None) -> LMResult:
    """Minimise ``||fun(x)||^2``.

    ``jac(x)`` returns the Jacobian of ``fun``. The damping starts at
    ``damping_init * max(diag(J^T J))``, shrinks by ``damping_factor`` after
    an accepted step and grows by it after a rejected one. Iteration stops
    when an accepted step lowers the cost by less than ``rel_tol`` relative,
    when the gradient vanishes, or after ``max_iter`` iterations. The cost
    never increases.
    """
    cfg = cfg or LMConfig()
    budget = cfg.max_iter if max_iter is None else max_iter
    x = np.array(x0, dtype=float)
    r = fun(x)
    if not np.all(np.isfinite(r)):
        raise FloatingPointError("non-finite residuals at the starting point")
    cost = float(r @ r)
    j = jac(x)
    a = j.T @ j
    g = j.T @ r
    n = x.shape[0]
    damping = cfg.damping_init * max(float(np.max(np.diag(a))) if n else 0.0, 1e-300)
    tiny = 1e-13 * (1.0 + cost)

    it = 0
    converged = False
    while it < budget:
        if n == 0 or cost == 0.0 or np.max(np.abs(g)) <= tiny:
            converged = True
            break
        it += 1
        try:
            step = np.linalg.solve(a + damping * np.eye(n), -g)
        except np.linalg.LinAlgError:
            damping *= cfg.damping_factor
            continue
        x_new = x + step
        r_new = fun(x_new)
        if not np.all(np.isfinite(r_new)):
            damping *= cfg.damping_factor
            continue
        cost_new = float(r_new @ r_new)
        if cost_new < cost:
            rel = (cost - cost_new) / cost
            x, r, cost = x_new, r_new, cost_new
            j = jac(x)
            a = j.T @ j
            g = j.T @ r
            damping = max(damping / cfg.damping_factor, 1e-300)
            if rel < cfg.rel_tol:
                converged = True
                break
        else:
            damping *= cfg.damping_factor
            if np.linalg.norm(step) <= 1e-15 * (np.linalg.norm(x) + 1e-15):
                converged = True
                break
    return LMResult(x=x, cost=cost, n_iter=it, converged=converged)
