"""Latent seroreactivity distributions and the conditional Gaussian model.

An antibody measurement ``Y`` is Gaussian given the latent activation level
``T`` in [0, 1]::

    Y | T = t ~ N((1 - t) mu0 + t mu1, (1 - t) sigma0**2 + t sigma1**2)

The marginal density of ``Y`` averages that Gaussian over the law of ``T``.
Point masses of ``T`` are handled in closed form; each continuous Beta
component is integrated with a Gauss-Jacobi rule matched to its kernel.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from numba import njit
from scipy import special

from .quadrature import DEFAULT_NODES, _check_range, _rules, jacobi_rules

SIGMA_FLOOR = 1e-4
DENSITY_FLOOR = 1e-300
_LOG_SQRT_2PI = 0.5 * math.log(2.0 * math.pi)


def _check_t(t, closed):
    t = np.asarray(t, dtype=float)
    if closed:
        bad = (t < 0.0) | (t > 1.0)
    else:
        bad = (t <= 0.0) | (t >= 1.0)
    if np.any(bad) or np.any(np.isnan(t)):
        rng = "[0, 1]" if closed else "(0, 1)"
        raise ValueError(f"latent level t must lie in {rng}")
    return t


@dataclass(frozen=True)
class ConditionalGaussian:
    """Boundary means and standard deviations at t = 0 and t = 1."""

    mu0: float
    mu1: float
    sigma0: float
    sigma1: float
    sigma_floor: float = field(default=SIGMA_FLOOR, repr=False, compare=False)

    def __post_init__(self):
        vals = (self.mu0, self.mu1, self.sigma0, self.sigma1)
        if not all(math.isfinite(v) for v in vals):
            raise ValueError("conditional Gaussian parameters must be finite")
        if not self.mu0 < self.mu1:
            raise ValueError(f"need mu0 < mu1, got mu0={self.mu0}, mu1={self.mu1}")
        if self.sigma0 < self.sigma_floor or self.sigma1 < self.sigma_floor:
            raise ValueError(
                f"sigma0 and sigma1 must be at least {self.sigma_floor:g}"
            )

    def mean(self, t):
        t = _check_t(t, closed=True)
        return (1.0 - t) * self.mu0 + t * self.mu1

    def var(self, t):
        t = _check_t(t, closed=True)
        return (1.0 - t) * self.sigma0**2 + t * self.sigma1**2

    def as_tuple(self):
        return (self.mu0, self.mu1, self.sigma0, self.sigma1)


def cond_mean(cond, t):
    return cond.mean(t)


def cond_var(cond, t):
    return cond.var(t)


def gaussian_pdf(y, mean, var):
    return np.exp(-0.5 * (y - mean) ** 2 / var) / np.sqrt(2.0 * np.pi * var)


# ---------------------------------------------------------------------------
# Latent distributions
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class LatentBatch:
    """Latent laws for ``G`` groups in array form.

    Each group has point masses ``atom0`` at t = 0 and ``atom1`` at t = 1
    plus Beta components ``(weight, alpha, beta)``; every array has shape
    ``(G,)``. Zero-weight components may carry any positive shapes.
    """

    atom0: np.ndarray
    atom1: np.ndarray
    components: tuple = ()

    @property
    def size(self):
        return self.atom0.shape[0]

    def means(self):
        out = np.array(self.atom1, dtype=float)
        for w, a, b in self.components:
            out = out + w * a / (a + b)
        return out


class LatentSpec:
    """Base class for a law of T on [0, 1]."""

    def parts(self):
        """Return ``(atom0, atom1, ((weight, alpha, beta), ...))``."""
        raise NotImplementedError

    def density(self, t):
        """Density of the continuous part at interior ``t`` (atoms excluded)."""
        t = _check_t(t, closed=False)
        _, _, comps = self.parts()
        out = np.zeros_like(t, dtype=float)
        for w, a, b in comps:
            if w > 0:
                out = out + w * _beta_pdf(t, a, b)
        return out

    def mean(self):
        _, atom1, comps = self.parts()
        return atom1 + sum(w * a / (a + b) for w, a, b in comps)

    def sample(self, rng, size=None):
        rng = np.random.default_rng(rng)
        draws = sample_batch(self.batch(), np.zeros(1 if size is None else size, dtype=int), rng)
        return float(draws[0]) if size is None else draws

    def batch(self):
        atom0, atom1, comps = self.parts()
        return LatentBatch(
            np.array([atom0], dtype=float),
            np.array([atom1], dtype=float),
            tuple(
                (np.array([w], dtype=float), np.array([a], dtype=float), np.array([b], dtype=float))
                for w, a, b in comps
            ),
        )


def _beta_pdf(t, a, b):
    logpdf = (a - 1.0) * np.log(t) + (b - 1.0) * np.log1p(-t) - special.betaln(a, b)
    return np.exp(logpdf)


def _check_weight(p, name="pi"):
    if not (0.0 <= p <= 1.0):
        raise ValueError(f"{name} must lie in [0, 1], got {p}")


def _check_shape(v, name):
    if not (v > 0.0 and math.isfinite(v)):
        raise ValueError(f"{name} must be positive and finite, got {v}")


@dataclass(frozen=True)
class TwoPoint(LatentSpec):
    """Point masses ``1 - pi`` at t = 0 and ``pi`` at t = 1 (the two-Gaussian mixture)."""

    pi: float

    def __post_init__(self):
        _check_weight(self.pi)

    def parts(self):
        return 1.0 - self.pi, self.pi, ()


@dataclass(frozen=True)
class SingleBeta(LatentSpec):
    alpha: float
    beta: float

    def __post_init__(self):
        _check_shape(self.alpha, "alpha")
        _check_shape(self.beta, "beta")

    def parts(self):
        return 0.0, 0.0, ((1.0, self.alpha, self.beta),)


@dataclass(frozen=True)
class BetaMixture(LatentSpec):
    """Finite mixture of two or three Beta components.

    ``components`` holds ``(weight, alpha, beta)`` triples. With
    ``ordered=True`` and two components the first must satisfy
    ``alpha < 1 < beta`` (mass near 0) and the second ``beta < 1 < alpha``
    (mass near 1), which removes label switching.
    """

    components: tuple
    ordered: bool = False

    def __post_init__(self):
        comps = tuple(tuple(float(v) for v in c) for c in self.components)
        object.__setattr__(self, "components", comps)
        if len(comps) not in (2, 3):
            raise ValueError("BetaMixture needs 2 or 3 components")
        for w, a, b in comps:
            _check_weight(w, "component weight")
            _check_shape(a, "alpha")
            _check_shape(b, "beta")
        if abs(sum(c[0] for c in comps) - 1.0) > 1e-9:
            raise ValueError("component weights must sum to 1")
        if self.ordered and len(comps) == 2:
            (_, a1, b1), (_, a2, b2) = comps
            if not (a1 < 1.0 < b1 and b2 < 1.0 < a2):
                raise ValueError(
                    "ordered mixture needs alpha1 < 1 < beta1 and beta2 < 1 < alpha2"
                )

    def parts(self):
        return 0.0, 0.0, self.components


@dataclass(frozen=True)
class ZeroMassPlusBeta(LatentSpec):
    """Mass ``1 - pi`` at t = 0 plus ``pi`` times Beta(alpha2, 1)."""

    pi: float
    alpha2: float

    def __post_init__(self):
        _check_weight(self.pi)
        _check_shape(self.alpha2, "alpha2")

    def parts(self):
        return 1.0 - self.pi, 0.0, ((self.pi, self.alpha2, 1.0),)


def latent_density(spec, t):
    return spec.density(t)


def latent_mean(spec):
    return spec.mean()


def latent_sample(spec, rng, size=None):
    return spec.sample(rng, size)


@dataclass(frozen=True)
class ModelParams:
    cond: ConditionalGaussian
    latent: LatentSpec


# ---------------------------------------------------------------------------
# Marginal density
# ---------------------------------------------------------------------------


def _node_terms(cond, nodes, weights):
    """Per-node mean, 1/var and weight/sqrt(2 pi var)."""
    s0 = cond.sigma0**2
    mean = cond.mu0 + (cond.mu1 - cond.mu0) * nodes
    var = s0 + (cond.sigma1**2 - s0) * nodes
    return mean, 1.0 / var, weights / np.sqrt(2.0 * np.pi * var)


@njit(cache=True)
def _accumulate(y, idx, mean, ivar, scale, out):
    for i in range(y.size):
        g = idx[i]
        acc = 0.0
        for k in range(mean.shape[1]):
            d = y[i] - mean[g, k]
            acc += scale[g, k] * np.exp(-0.5 * d * d * ivar[g, k])
        out[i] += acc


@njit(cache=True)
def _single_beta(y, w, a, b, n, mu0, mu1, s0, s1, out):
    """Build one Jacobi rule and add ``w`` times its density to ``out``."""
    nodes = np.empty((1, n))
    weights = np.empty((1, n))
    if not _rules(np.array([a]), np.array([b]), n, nodes, weights):
        return False
    mean = np.empty((1, n))
    ivar = np.empty((1, n))
    for k in range(n):
        var = s0 + (s1 - s0) * nodes[0, k]
        mean[0, k] = mu0 + (mu1 - mu0) * nodes[0, k]
        ivar[0, k] = 1.0 / var
        weights[0, k] *= w / np.sqrt(2.0 * np.pi * var)
    _accumulate(y, np.zeros(y.size, dtype=np.int64), mean, ivar, weights, out)
    return True


def batch_density(cond, y, batch, index=None, n_nodes=DEFAULT_NODES):
    """Marginal density of each ``y[i]`` under latent group ``index[i]``.

    Parameters
    ----------
    cond : ConditionalGaussian
    y : array_like, shape (m,)
    batch : LatentBatch
        Latent laws for ``G`` groups.
    index : array_like of int, shape (m,), optional
        Group of each observation; may be omitted when ``G == 1``.
    n_nodes : int
        Gauss-Jacobi nodes per Beta component.
    """
    y = np.asarray(y, dtype=float)
    single = batch.size == 1
    if index is None:
        if not single:
            raise ValueError("index is required for a multi-group latent batch")
        index = np.zeros(y.shape, dtype=int)
    index = np.asarray(index)

    out = np.zeros(y.shape, dtype=float)
    if single:
        a0, a1 = float(batch.atom0[0]), float(batch.atom1[0])
        if a0 > 0:
            out += a0 * gaussian_pdf(y, cond.mu0, cond.sigma0**2)
        if a1 > 0:
            out += a1 * gaussian_pdf(y, cond.mu1, cond.sigma1**2)
    else:
        a0, a1 = batch.atom0[index], batch.atom1[index]
        if (a0 > 0).any():
            out += a0 * gaussian_pdf(y, cond.mu0, cond.sigma0**2)
        if (a1 > 0).any():
            out += a1 * gaussian_pdf(y, cond.mu1, cond.sigma1**2)

    for w, a, b in batch.components:
        if single and not w[0] > 0 or not single and not (w > 0).any():
            continue
        if single:
            a0_, b0_ = float(a[0]), float(b[0])
            _check_range(min(a0_, b0_), max(a0_, b0_))
            if not _single_beta(np.ascontiguousarray(y).reshape(-1), float(w[0]), a0_, b0_,
                                int(n_nodes), cond.mu0, cond.mu1, cond.sigma0**2,
                                cond.sigma1**2, out.reshape(-1)):
                raise FloatingPointError("Golub-Welsch eigenvalue iteration did not converge")
            continue
        else:
            nodes, weights = jacobi_rules(a, b, n_nodes)
            idx = index.ravel().astype(np.int64, copy=False)
        mean, ivar, scale = _node_terms(cond, nodes, weights)
        flat = out.reshape(-1)
        _accumulate(np.ascontiguousarray(y).reshape(-1), idx, mean, ivar, scale * np.asarray(w, dtype=float)[:, None], flat)
    return out


def marginal_density(params, y, n_nodes=DEFAULT_NODES):
    """Density of Y at ``y`` with T integrated out.

    Returns a float for scalar ``y`` and an array otherwise.
    """
    scalar = np.ndim(y) == 0
    out = batch_density(params.cond, np.atleast_1d(y), params.latent.batch(), n_nodes=n_nodes)
    return float(out[0]) if scalar else out


def floored_log(dens):
    """Log of densities floored at DENSITY_FLOOR, plus whether the floor bit."""
    floored = bool(np.any(~(dens >= DENSITY_FLOOR)))
    return np.log(np.maximum(np.nan_to_num(dens, nan=0.0), DENSITY_FLOOR)), floored


def log_likelihood(params, data, n_nodes=DEFAULT_NODES):
    """Sum of log marginal densities; ``-inf`` if any density hits the floor."""
    data = np.asarray(data, dtype=float)
    if data.size == 0:
        raise ValueError("data must be nonempty")
    logs, floored = floored_log(marginal_density(params, data, n_nodes))
    return -math.inf if floored else float(logs.sum())


# ---------------------------------------------------------------------------
# Simulation
# ---------------------------------------------------------------------------


def sample_batch(batch, index, rng):
    """Draw T for each entry of ``index`` from its group's latent law."""
    rng = np.random.default_rng(rng)
    index = np.asarray(index, dtype=int)
    m = index.shape[0]
    probs = [batch.atom0[index], batch.atom1[index]]
    probs += [w[index] for w, _, _ in batch.components]
    cum = np.cumsum(np.vstack(probs), axis=0)
    u = rng.random(m) * cum[-1]
    choice = (u[None, :] >= cum[:-1]).sum(axis=0)

    t = np.zeros(m)
    t[choice == 1] = 1.0
    for c, (_, a, b) in enumerate(batch.components):
        pick = choice == c + 2
        if np.any(pick):
            t[pick] = rng.beta(a[index[pick]], b[index[pick]])
    return t


def simulate_latent(cond, t, rng):
    """Draw Y given latent levels ``t``."""
    rng = np.random.default_rng(rng)
    t = np.asarray(t, dtype=float)
    sd = np.sqrt((1.0 - t) * cond.sigma0**2 + t * cond.sigma1**2)
    return (1.0 - t) * cond.mu0 + t * cond.mu1 + sd * rng.standard_normal(t.shape)


def simulate(params, n, rng):
    """Draw ``n`` independent observations from the model."""
    if n < 1:
        raise ValueError("n must be at least 1")
    rng = np.random.default_rng(rng)
    t = sample_batch(params.latent.batch(), np.zeros(n, dtype=int), rng)
    return simulate_latent(params.cond, t, rng)
