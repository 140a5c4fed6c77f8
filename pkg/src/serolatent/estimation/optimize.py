"""Nelder-Mead simplex search with jittered restarts."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.optimize import minimize


@dataclass(frozen=True)
class OptimizeSettings:
    """Stopping and restart policy.

    A run stops when the simplex values spread by less than ``fatol`` and
    the vertices by less than ``xatol``. The default ``xatol`` is infinite,
    so only the value spread counts; a finite value also demands a small
    simplex, which keeps runs going along flat ridges.
    """

    fatol: float = 1e-8
    xatol: float = math.inf
    iters_per_dim: int = 2000
    restarts: int = 3
    step: float = 0.25
    jitter: float = 0.05
    seed: int = 0


@dataclass(frozen=True)
class OptimizeResult:
    x: np.ndarray
    fun: float
    converged: bool
    n_evals: int


def _safe(objective):
    def wrapped(u):
        try:
            v = float(objective(u))
        except (ValueError, FloatingPointError, ZeroDivisionError, OverflowError):
            return math.inf
        return v if math.isfinite(v) else math.inf

    return wrapped


def _simplex(x0, step):
    dim = x0.size
    sim = np.tile(x0, (dim + 1, 1))
    sim[1:] += step * np.eye(dim)
    return sim


def optimize(objective, init, settings=None):
    """Minimize ``objective`` over R^d from ``init``.

    Runs Nelder-Mead to the value-spread tolerance, then restarts from
    jittered copies of the incumbent up to ``settings.restarts`` times,
    stopping early once a restart no longer improves the value. The result
    is deterministic given ``init`` and ``settings.seed``.

    Raises
    ------
    ValueError
        If the objective is not finite at ``init``.
    """
    settings = settings or OptimizeSettings()
    f = _safe(objective)
    x0 = np.array(init, dtype=float).ravel()
    dim = x0.size
    f0 = f(x0)
    if not math.isfinite(f0):
        raise ValueError("objective is not finite at the initial point")
    if dim == 0:
        return OptimizeResult(x0, f0, True, 1)

    rng = np.random.default_rng(settings.seed)
    options = dict(
        maxiter=settings.iters_per_dim * dim,
        maxfev=2 * settings.iters_per_dim * dim,
        fatol=settings.fatol,
        xatol=settings.xatol,
        adaptive=dim > 3,
    )
    best_x, best_f, converged, evals = x0, f0, False, 1
    start = x0
    for attempt in range(settings.restarts + 1):
        # rejected trial points are +inf, which makes scipy's spread test warn
        with np.errstate(invalid="ignore"):
            res = minimize(f, start, method="Nelder-Mead",
                           options=dict(options, initial_simplex=_simplex(start, settings.step)))
        evals += res.nfev
        improved = res.fun < best_f - settings.fatol
        if res.fun <= best_f:
            best_x, best_f = res.x, float(res.fun)
            converged = bool(res.success)
        elif attempt == 0:
            converged = bool(res.success)
        if attempt > 0 and not improved:
            break
        start = best_x + settings.jitter * rng.standard_normal(dim)
    return OptimizeResult(np.asarray(best_x, dtype=float), best_f, converged, evals)
