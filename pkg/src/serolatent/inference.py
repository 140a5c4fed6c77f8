"""Parametric bootstrap, simulation envelopes and age-stratified model comparison."""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .age import simulate_at_ages
from .latent import simulate
from .quadrature import DEFAULT_NODES
from .estimation.fitting import FitResult, fit
from .estimation.histogram import build_histogram, histogram_on
from .estimation.families import COND_NAMES
from .estimation.optimize import OptimizeSettings

DEFAULT_BOOTSTRAP = 1000
DEFAULT_ENVELOPE = 500
QUANTILES = (0.025, 0.5, 0.975)
# Warm-started refits begin next to the optimum: one simplex run at a
# looser tolerance moves estimates by ~1e-5, far below bootstrap spread.
WARM_REFIT = OptimizeSettings(fatol=1e-6, xatol=1e-4, restarts=0)


# ---------------------------------------------------------------------------
# Age groups
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class AgeGroupScheme:
    """Half-open age groups ``[c0, c1), [c1, c2), ...``."""

    cuts: tuple

    def __post_init__(self):
        cuts = tuple(float(c) for c in self.cuts)
        if len(cuts) < 2:
            raise ValueError("an age-group scheme needs at least two cut points")
        if not all(math.isfinite(c) for c in cuts):
            raise ValueError("cut points must be finite")
        if any(b <= a for a, b in zip(cuts, cuts[1:])):
            raise ValueError("cut points must be strictly increasing")
        object.__setattr__(self, "cuts", cuts)

    @property
    def n_groups(self):
        return len(self.cuts) - 1

    @property
    def labels(self):
        return [f"[{_fmt(a)},{_fmt(b)})" for a, b in zip(self.cuts, self.cuts[1:])]

    def assign(self, ages):
        """Group index of each age, -1 when outside every group."""
        ages = np.asarray(ages, dtype=float)
        idx = np.searchsorted(self.cuts, ages, side="right") - 1
        idx[(ages < self.cuts[0]) | (ages >= self.cuts[-1])] = -1
        return idx

    def masks(self, ages):
        idx = self.assign(ages)
        return [idx == g for g in range(self.n_groups)]


def _fmt(x):
    return f"{x:g}"


# Groups used for the malaria case study.
CASE_STUDY_GROUPS = AgeGroupScheme((1, 6, 10, 15, 20, 30, 45, 100))


def _groups(y, ages, scheme):
    """(label, mask) pairs; a single all-data group when there is no scheme."""
    y = np.asarray(y, dtype=float)
    if scheme is None:
        return [("all", np.ones(y.shape, dtype=bool))]
    if ages is None:
        raise ValueError("age groups need ages")
    out = list(zip(scheme.labels, scheme.masks(ages)))
    for label, mask in out:
        if not mask.any():
            raise ValueError(f"age group {label} has no observations")
    return out


# ---------------------------------------------------------------------------
# Bootstrap
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class BootstrapSummary:
    """Bootstrap distribution summaries for the free parameters of a fit."""

    names: tuple
    estimate: np.ndarray
    sd: np.ndarray
    quantiles: np.ndarray  # shape (len(names), 3) at QUANTILES
    B: int
    failures: int
    replicates: np.ndarray = field(repr=False, default=None)

    def rows(self):
        for i, name in enumerate(self.names):
            q = self.quantiles[i]
            yield {
                "parameter": name,
                "estimate": float(self.estimate[i]),
                "sd": float(self.sd[i]),
                "q025": float(q[0]),
                "q500": float(q[1]),
                "q975": float(q[2]),
            }

    def interval(self, name):
        """(2.5%, 97.5%) percentile interval for one parameter."""
        q = self.quantiles[self.names.index(name)]
        return float(q[0]), float(q[2])

    def to_dict(self):
        return {"B": self.B, "failures": self.failures, "parameters": list(self.rows())}


def _fixed_of(result):
    return {n: float(v) for n, v in zip(result.names, result.values) if n not in result.free}


def _bootstrap_replicate(job):
    result, ages, n, method, seed, warm, settings, n_nodes = job
    rng = np.random.default_rng(seed)
    params = result.params
    if ages is None:
        y = simulate(params, n, rng)
    else:
        y = simulate_at_ages(params.cond, params.latent, ages, rng)
    try:
        refit = fit(
            y,
            result.family,
            method,
            ages=ages,
            fixed=_fixed_of(result) or None,
            init=result.values if warm else None,
            settings=settings,
            n_nodes=n_nodes,
        )
    except (ValueError, FloatingPointError):
        return None
    if not refit.converged or not np.all(np.isfinite(refit.values)):
        return None
    return refit.values


def _run_jobs(func, jobs, threads):
    if threads is None or threads <= 1 or len(jobs) < 2:
        return [func(j) for j in jobs]
    with ProcessPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(func, jobs, chunksize=max(1, len(jobs) // (4 * threads))))


def parametric_bootstrap(
    result: FitResult,
    ages=None,
    n=None,
    B=DEFAULT_BOOTSTRAP,
    method=None,
    seed=0,
    warm_start=True,
    threads=1,
    settings=None,
    n_nodes=None,
):
    """Parametric bootstrap of a fitted model.

    Each replicate simulates a dataset from the fitted model (at the observed
    ages when given) and refits it with the same method. Replicate ``b`` uses
    seed ``seed + b``, so results do not depend on ``threads``.

    Parameters
    ----------
    result : FitResult
        A converged fit; its fixed parameters stay fixed in the refits.
    ages : array_like, optional
        Observed ages; required for age-dependent families, and then fixes
        the replicate size.
    n : int, optional
        Replicate sample size; defaults to ``result.n``.
    B : int
        Number of replicates (at least 2).
    method : str, optional
        Refit criterion; defaults to the original fit's.
    warm_start : bool
        Start refits from the original estimates instead of the default init.
    threads : int
        Worker processes.
    settings : OptimizeSettings, optional
        Defaults to ``WARM_REFIT`` for warm starts and the fitting defaults
        otherwise.

    Raises
    ------
    ValueError
        If the fit has not converged, ``B < 2``, or every replicate fails.
    """
    if B < 2:
        raise ValueError("B must be at least 2")
    if not result.converged:
        raise ValueError("bootstrap needs a converged fit")
    if ages is not None:
        ages = np.asarray(ages, dtype=float)
        n = ages.size
    n = result.n if n is None else int(n)
    method = method or result.method
    if settings is None:
        settings = WARM_REFIT if warm_start else OptimizeSettings()

    jobs = [
        (result, ages, n, method, seed + b, warm_start, settings, n_nodes or DEFAULT_NODES)
        for b in range(B)
    ]
    out = _run_jobs(_bootstrap_replicate, jobs, threads)
    good = [v for v in out if v is not None]
    if not good:
        raise ValueError("all bootstrap replicates failed")
    reps = np.vstack(good)
    free = [result.names.index(name) for name in result.free]
    reps = reps[:, free]
    sd = reps.std(axis=0, ddof=1) if reps.shape[0] > 1 else np.full(len(free), np.nan)
    return BootstrapSummary(
        names=tuple(result.free),
        estimate=np.asarray(result.values)[free],
        sd=sd,
        quantiles=np.quantile(reps, QUANTILES, axis=0).T,
        B=B,
        failures=B - len(good),
        replicates=reps,
    )


# ---------------------------------------------------------------------------
# Envelopes
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class GroupEnvelope:
    label: str
    breaks: np.ndarray
    observed: np.ndarray
    lo: np.ndarray
    med: np.ndarray
    hi: np.ndarray

    @property
    def mids(self):
        return 0.5 * (self.breaks[:-1] + self.breaks[1:])

    @property
    def outside(self):
        return (self.observed < self.lo) | (self.observed > self.hi)

    @property
    def outside_fraction(self):
        return float(self.outside.mean())


@dataclass(frozen=True)
class Envelope:
    groups: list
    R: int
    band: str

    def inside_fraction(self):
        """Share of (group, bin) cells whose observed density lies in the band."""
        cells = np.concatenate([g.outside for g in self.groups])
        return float(1.0 - cells.mean())

    def max_outside_fraction(self):
        return max(g.outside_fraction for g in self.groups)

    def rows(self):
        for g in self.groups:
            for j, m in enumerate(g.mids):
                yield {
                    "group": g.label,
                    "bin_mid": float(m),
                    "observed": float(g.observed[j]),
                    "lo": float(g.lo[j]),
                    "med": float(g.med[j]),
                    "hi": float(g.hi[j]),
                }


def validate_envelopes(
    model,
    y,
    ages=None,
    scheme=None,
    R=DEFAULT_ENVELOPE,
    band="range",
    seed=0,
):
    """Simulation envelopes for observed histograms, per age group.

    For every replicate, a latent level is drawn for each individual from
    the law at that individual's age, then a measurement given the level.
    Replicate values are binned on the observed group's breaks (Sturges
    within the group), with out-of-range values clamped into the end bins.

    Parameters
    ----------
    model : FitResult or ModelParams or (ConditionalGaussian, latent model)
    y, ages : array_like
        Observed data; ages may be omitted for age-free models, in which
        case ``scheme`` must be None too.
    scheme : AgeGroupScheme, optional
    R : int
        Replicates (at least 2).
    band : {"range", "quantile"}
        Pointwise min/max, or the 2.5% and 97.5% quantiles.
    """
    if R < 2:
        raise ValueError("R must be at least 2")
    if band not in ("range", "quantile"):
        raise ValueError("band must be 'range' or 'quantile'")
    cond, latent = _model_parts(model)
    y = np.asarray(y, dtype=float)
    ages = None if ages is None else np.asarray(ages, dtype=float)
    groups = _groups(y, ages, scheme)
    sim_ages = ages if ages is not None else np.ones(y.size)

    hists = [build_histogram(y[mask]) for _, mask in groups]
    sims = [np.empty((R, h.n_bins)) for h in hists]
    for r in range(R):
        yrep = simulate_at_ages(cond, latent, sim_ages, np.random.default_rng(seed + r))
        for (_, mask), h, store in zip(groups, hists, sims):
            counts = histogram_on(h.breaks, yrep[mask])
            store[r] = counts / (mask.sum() * h.widths)

    out = []
    for (label, _), h, store in zip(groups, hists, sims):
        if band == "range":
            lo, hi = store.min(axis=0), store.max(axis=0)
        else:
            lo, hi = np.quantile(store, [0.025, 0.975], axis=0)
        out.append(GroupEnvelope(label, h.breaks, h.density, lo, np.median(store, axis=0), hi))
    return Envelope(out, R, band)


def _model_parts(model):
    if isinstance(model, FitResult):
        model = model.params
    if hasattr(model, "cond"):
        return model.cond, model.latent
    cond, latent = model
    return cond, latent


# ---------------------------------------------------------------------------
# Age-stratified fitting and GMM vs LBM comparison
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class GroupFit:
    label: str
    n: int
    result: FitResult


def fit_by_age_groups(y, ages, scheme, family="beta", method="mle", settings=None):
    """Fit every parameter on the first group, then only the latent ones.

    The conditional Gaussian parameters are frozen at the first (youngest)
    group's estimates for all later groups.
    """
    y = np.asarray(y, dtype=float)
    groups = _groups(y, ages, scheme)
    out = []
    frozen = None
    for label, mask in groups:
        res = fit(y[mask], family, method, fixed=frozen, settings=settings)
        if frozen is None:
            frozen = {k: res.estimates[k] for k in COND_NAMES}
        out.append(GroupFit(label, int(mask.sum()), res))
    return out


@dataclass(frozen=True)
class ComparisonRow:
    group: str
    method: str
    n: int
    bic_gmm: float
    bic_lbm: float
    time_gmm: float
    time_lbm: float
    failed: bool = False

    @property
    def delta_bic(self):
        """BIC_GMM - BIC_LBM; positive favors the latent Beta model."""
        return self.bic_gmm - self.bic_lbm

    def as_dict(self):
        return {
            "group": self.group,
            "method": self.method,
            "n": self.n,
            "bic_gmm": self.bic_gmm,
            "bic_lbm": self.bic_lbm,
            "delta_bic": self.delta_bic,
            "time_gmm_s": self.time_gmm,
            "time_lbm_s": self.time_lbm,
            "failed": self.failed,
        }


def compare_models(y, ages=None, scheme=None, methods=("mle", "l2"), settings=None):
    """Per group and method: BIC of the two-point and single-Beta latent fits.

    Each family follows the frozen-conditional protocol of
    :func:`fit_by_age_groups`. A failing family/method is reported as a
    failed row instead of aborting the table.
    """
    y = np.asarray(y, dtype=float)
    groups = _groups(y, ages, scheme)
    sizes = [int(m.sum()) for _, m in groups]
    labels = [g for g, _ in groups]
    rows = []
    for method in methods:
        per_family = {}
        for fam in ("gmm", "beta"):
            try:
                fits = _stratified(y, groups, fam, method, settings)
            except (ValueError, FloatingPointError):
                fits = [None] * len(groups)
            per_family[fam] = fits
        for g, label in enumerate(labels):
            a, b = per_family["gmm"][g], per_family["beta"][g]
            failed = a is None or b is None
            rows.append(
                ComparisonRow(
                    group=label,
                    method=method,
                    n=sizes[g],
                    bic_gmm=math.nan if a is None else a.bic,
                    bic_lbm=math.nan if b is None else b.bic,
                    time_gmm=math.nan if a is None else a.elapsed_seconds,
                    time_lbm=math.nan if b is None else b.elapsed_seconds,
                    failed=failed,
                )
            )
    return rows


def _stratified(y, groups, family, method, settings):
    out, frozen = [], None
    for _, mask in groups:
        try:
            res = fit(y[mask], family, method, fixed=frozen, settings=settings)
        except (ValueError, FloatingPointError):
            if frozen is None:
                raise
            out.append(None)
            continue
        if frozen is None:
            frozen = {k: res.estimates[k] for k in COND_NAMES}
        out.append(res)
    return out
