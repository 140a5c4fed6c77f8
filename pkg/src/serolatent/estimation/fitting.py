"""Histogram L2 / KL criteria, exact likelihood, and the fit drivers."""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field

import numpy as np

from ..age import AgeFree, Ama1Joint, latent_for_ages
from ..latent import LatentSpec, ModelParams, batch_density, floored_log
from ..quadrature import DEFAULT_NODES
from .families import get_family
from .histogram import build_histogram
from .optimize import OptimizeSettings, optimize

METHODS = ("l2", "kl", "mle", "hybrid")


def bic(loglik, k, n):
    """Bayesian information criterion ``k log n - 2 loglik``."""
    if n < 1:
        raise ValueError("n must be at least 1")
    return k * math.log(n) - 2.0 * loglik


def _split(params):
    if isinstance(params, ModelParams):
        return params.cond, params.latent
    return params


class _HistTerm:
    """Model density at one histogram's midpoints, averaged over ages."""

    def __init__(self, hist, ages=None):
        self.hist = hist
        self.target = hist.density
        self.mids = hist.mids
        if ages is None:
            self.uniq = None
        else:
            self.uniq, counts = np.unique(np.asarray(ages, dtype=float), return_counts=True)
            self.age_w = counts / counts.sum()
            g, j = self.uniq.size, self.mids.size
            self.pair_y = np.repeat(self.mids, g)
            self.pair_idx = np.tile(np.arange(g), j)

    def model_density(self, cond, latent, n_nodes):
        if self.uniq is None or _age_free(latent):
            batch, _ = latent_for_ages(latent, None)
            return batch_density(cond, self.mids, batch, n_nodes=n_nodes)
        batch = latent.batch(self.uniq)
        dens = batch_density(cond, self.pair_y, batch, self.pair_idx, n_nodes)
        return dens.reshape(self.mids.size, self.uniq.size) @ self.age_w


def _age_free(latent):
    return isinstance(latent, (LatentSpec, AgeFree))


def l2_criterion(params, hist, ages=None, n_nodes=DEFAULT_NODES):
    """Sum over bins of (empirical density - model density at the midpoint)**2.

    For an age-dependent model the model density at each midpoint is the
    equal-weight average over ``ages`` (the ages of the binned observations).
    """
    cond, latent = _split(params)
    term = _HistTerm(hist, ages)
    return float(np.sum((term.target - term.model_density(cond, latent, n_nodes)) ** 2))


def kl_criterion(params, hist, ages=None, n_nodes=DEFAULT_NODES):
    """``-sum_j fhat_j log f(m_j)``; empty bins contribute nothing."""
    cond, latent = _split(params)
    term = _HistTerm(hist, ages)
    return _kl_value(term.target, term.model_density(cond, latent, n_nodes))


def _kl_value(target, dens):
    keep = target > 0
    logs, _ = floored_log(dens[keep])
    return float(-np.sum(target[keep] * logs))


@dataclass(frozen=True)
class FitResult:
    family: str
    method: str
    names: tuple
    values: np.ndarray
    free: tuple
    criterion_value: float
    loglik: float
    bic: float
    converged: bool
    floored: bool
    elapsed_seconds: float
    n: int
    n_evals: int = 0
    age_range: tuple | None = None
    extra: dict = field(default_factory=dict)

    @property
    def k(self):
        return len(self.free)

    @property
    def estimates(self):
        return dict(zip(self.names, map(float, self.values)))

    @property
    def params(self):
        cond, latent = get_family(self.family).build(self.values)
        return ModelParams(cond, latent)

    def derived(self):
        """Derived quantities reported alongside the estimates."""
        latent = self.params.latent
        if isinstance(latent, Ama1Joint):
            return {"eta0": latent.eta0}
        return {}

    def to_dict(self):
        return {
            "family": self.family,
            "method": self.method,
            "parameters": self.estimates,
            "derived": self.derived(),
            "free": list(self.free),
            "criterion_value": self.criterion_value,
            "loglik": self.loglik,
            "bic": self.bic,
            "k": self.k,
            "n": self.n,
            "converged": self.converged,
            "floored": self.floored,
            "elapsed_seconds": self.elapsed_seconds,
            "n_evals": self.n_evals,
        }


class Problem:
    """Data prepared once for repeated criterion evaluation."""

    def __init__(self, y, ages=None, bins=None, strata=None, n_nodes=DEFAULT_NODES):
        self.y = np.asarray(y, dtype=float)
        if self.y.size == 0:
            raise ValueError("data must be nonempty")
        self.ages = None if ages is None else np.asarray(ages, dtype=float)
        if self.ages is not None and self.ages.shape != self.y.shape:
            raise ValueError("ages and measurements differ in length")
        self.n_nodes = n_nodes
        self.bins = bins
        self.strata = strata
        self._terms = None
        self._age_index = None

    @property
    def terms(self):
        if self._terms is None:
            if self.strata is None:
                self._terms = [_HistTerm(build_histogram(self.y, self.bins), self.ages)]
            else:
                if self.ages is None:
                    raise ValueError("stratified histograms need ages")
                self._terms = []
                for mask in self.strata.masks(self.ages):
                    if mask.sum() >= 2:
                        self._terms.append(
                            _HistTerm(build_histogram(self.y[mask], self.bins), self.ages[mask])
                        )
        return self._terms

    def density(self, cond, latent):
        """Marginal density of each observation at its own age."""
        if _age_free(latent):
            batch, _ = latent_for_ages(latent, None)
            return batch_density(cond, self.y, batch, n_nodes=self.n_nodes)
        if self._age_index is None:
            self._uniq, inv = np.unique(self.ages, return_inverse=True)
            self._age_index = inv.ravel()
        return batch_density(cond, self.y, latent.batch(self._uniq), self._age_index, self.n_nodes)

    def loglik(self, cond, latent):
        """(floored log-likelihood, whether any density hit the floor)."""
        logs, floored = floored_log(self.density(cond, latent))
        return float(logs.sum()), floored

    def criterion(self, method, cond, latent):
        if method == "mle":
            return -self.loglik(cond, latent)[0]
        total = 0.0
        for term in self.terms:
            dens = term.model_density(cond, latent, self.n_nodes)
            if method == "l2":
                total += float(np.sum((term.target - dens) ** 2))
            elif method == "kl":
                total += _kl_value(term.target, dens)
            else:
                raise ValueError(f"unknown criterion {method!r}")
        return total


def _coerce_init(fam, init, y, ages):
    if init is None:
        return fam.default_init(y, ages)
    if isinstance(init, FitResult):
        init = init.values
    if isinstance(init, dict):
        base = fam.default_init(y, ages)
        for name, v in init.items():
            if name not in fam.names:
                raise KeyError(f"{fam.name} has no parameter {name!r}")
            base[fam.names.index(name)] = v
        return base
    init = np.asarray(init, dtype=float)
    if init.shape != (fam.size,):
        raise ValueError(
            f"init has {init.size} values but family {fam.name!r} has {fam.size} parameters"
        )
    return init


def _run(problem, fam, method, x0, fixed, settings):
    tr = fam.transform(problem.ages, fixed)
    x0 = x0.copy()
    for i, v in tr.fixed.items():
        x0[i] = v
    u0 = tr.to_free(x0)

    def objective(u):
        cond, latent = fam.build(tr.to_natural(u))
        return problem.criterion(method, cond, latent)

    t0 = time.perf_counter()
    res = optimize(objective, u0, settings)
    elapsed = time.perf_counter() - t0
    return tr, tr.to_natural(res.x), res, elapsed


def fit(
    y,
    family,
    method="l2",
    ages=None,
    fixed=None,
    init=None,
    bins=None,
    strata=None,
    settings=None,
    n_nodes=DEFAULT_NODES,
):
    """Fit a model family to antibody measurements.

    Parameters
    ----------
    y : array_like
        Log antibody measurements.
    family : str or Family
        One of ``serolatent.estimation.families.FAMILIES``.
    method : {"l2", "kl", "mle", "hybrid"}
        Histogram L2 distance, histogram KL variant, exact likelihood, or an
        L2 fit polished by exact likelihood.
    ages : array_like, optional
        Ages in years, required by age-dependent families.
    fixed : dict, optional
        Natural-scale values for parameters to hold fixed.
    init : dict, array_like or FitResult, optional
        Start values; missing entries come from ``Family.default_init``.
    bins : int, optional
        Histogram bin count; Sturges' rule by default (per stratum if
        ``strata`` is given).
    strata : AgeGroupScheme, optional
        Sum the histogram criterion over per-age-group histograms.
    settings : OptimizeSettings, optional
    n_nodes : int
        Gauss-Jacobi nodes per Beta component.

    Returns
    -------
    FitResult
        Estimates on the natural scale; log-likelihood and BIC are always
        the exact values at the optimum, whatever the criterion.
    """
    if method not in METHODS:
        raise ValueError(f"method must be one of {METHODS}, got {method!r}")
    fam = get_family(family)
    if fam.age_dependent and ages is None:
        raise ValueError(f"family {fam.name!r} is age-dependent; ages are required")
    settings = settings or OptimizeSettings()
    problem = Problem(y, ages, bins, strata, n_nodes)
    x0 = _coerce_init(fam, init, problem.y, problem.ages)

    if method == "hybrid":
        tr, x_l2, res_l2, t_l2 = _run(problem, fam, "l2", x0, fixed, settings)
        tr, x, res, t_mle = _run(problem, fam, "mle", x_l2, fixed, settings)
        elapsed, evals = t_l2 + t_mle, res_l2.n_evals + res.n_evals
    else:
        tr, x, res, elapsed = _run(problem, fam, method, x0, fixed, settings)
        evals = res.n_evals

    cond, latent = fam.build(x)
    ll, floored = problem.loglik(cond, latent)
    if floored:
        ll = -math.inf
    free = tuple(fam.names[i] for i in tr.free)
    return FitResult(
        family=fam.name,
        method=method,
        names=fam.names,
        values=x,
        free=free,
        criterion_value=float(res.fun),
        loglik=ll,
        bic=bic(ll, len(free), problem.y.size),
        converged=res.converged,
        floored=floored,
        elapsed_seconds=elapsed,
        n=int(problem.y.size),
        n_evals=evals,
        age_range=None if problem.ages is None else (float(problem.ages.min()), float(problem.ages.max())),
    )


def default_init(y, family, ages=None):
    return get_family(family).default_init(y, ages)
